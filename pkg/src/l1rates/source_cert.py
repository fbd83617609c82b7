"""Numerical certification of the source condition behind the rate function.

For a cut-off ``n``, tail allowance ``mu`` and sign pattern ``xi`` supported
on ``1..n`` we look for the dual vector of least Euclidean norm with

    [A^T eta]_k = xi_k        for k <= n,
    |[A^T eta]_k| <= mu       for k > n.

The bound ``gamma_n`` is the largest such norm over all admissible patterns.
"""
from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .core_types import validate_sign_pattern
from .exceptions import ApproximationError, ArgumentError
from .operators import ForwardOp

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-8
QP_TOL = 1e-9


class GammaMethod(str, enum.Enum):
    BRUTE_FORCE = "BruteForce"
    FULL_PATTERNS_ONLY = "FullPatternsOnly"


@dataclass(frozen=True, eq=False)
class SourceCertificate:
    n: int
    mu: float
    xi: tuple
    eta: np.ndarray
    eta_norm: float
    match_residual: float
    tail_excess: float
    feasible: bool

    def to_dict(self):
        return {
            "n": self.n, "mu": self.mu, "xi": list(self.xi), "eta": self.eta.tolist(),
            "eta_norm": self.eta_norm, "match_residual": self.match_residual,
            "tail_excess": self.tail_excess, "feasible": self.feasible,
        }


def certificate_residuals(A, n, mu, xi, eta):
    """Recheck a witness by direct application of ``A^T``.

    Returns ``(match_residual, tail_excess)``.
    """
    v = A.matrix.T @ np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)[:n]
    match = float(np.max(np.abs(v[:n] - xi))) if n else 0.0
    tail = float(np.max(np.abs(v[n:]))) if n < A.N else 0.0
    return match, tail - mu


def _certificate(A, n, mu, xi, eta):
    eta = np.asarray(eta, dtype=float)
    match, excess = certificate_residuals(A, n, mu, xi, eta)
    return SourceCertificate(
        n=n, mu=mu, xi=tuple(int(s) for s in xi), eta=eta, eta_norm=float(np.linalg.norm(eta)),
        match_residual=match, tail_excess=excess,
        feasible=bool(match <= FEAS_TOL and excess <= FEAS_TOL),
    )


def _least_norm(G, h):
    """Least-norm solution of ``G eta = h`` and its multipliers ``w`` (``eta = G^T w``)."""
    w, *_ = np.linalg.lstsq(G @ G.T, h, rcond=None)
    eta = G.T @ w
    return eta, w


def _active_set_polish(B, xi, C, mu, active, max_iter=200):
    """Primal-dual active-set iteration for the witness QP.

    ``active`` maps tail row index to the sign of its bound.  Returns the KKT
    point or ``None`` if the working set cycles or the system is singular.
    """
    active = dict(active)
    seen = set()
    for _ in range(max_iter):
        key = tuple(sorted(active.items()))
        if key in seen:
            return None
        seen.add(key)
        rows = sorted(active)
        G = np.vstack([B] + [active[k] * C[k:k + 1] for k in rows]) if rows else B
        h = np.concatenate([xi, np.full(len(rows), mu)])
        eta, w = _least_norm(G, h)
        if np.max(np.abs(G @ eta - h), initial=0.0) > QP_TOL:
            return None
        # stationarity: eta = G^T w with the inequality multipliers nonpositive
        w_ineq = w[B.shape[0]:]
        scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
        if w_ineq.size and np.max(w_ineq) > QP_TOL * scale:
            del active[rows[int(np.argmax(w_ineq))]]
            continue
        viol = np.abs(C @ eta) - mu
        if rows:
            viol[rows] = -np.inf
        if viol.size and np.max(viol) > QP_TOL:
            k = int(np.argmax(viol))
            active[k] = 1.0 if C[k] @ eta > 0 else -1.0
            continue
        return eta
    return None


def _admm(A, n, mu, xi, rho, iters, state=None):
    """Operator splitting for ``min ||eta||^2 / 2`` s.t. ``A^T eta`` in the constraint box."""
    At = A.matrix.T
    M = A.M
    if state is None:
        z = np.zeros(A.N)
        z[:n] = xi
        u = np.zeros(A.N)
    else:
        z, u = state
    lhs = np.eye(M) + rho * (A.matrix @ At)
    chol = np.linalg.cholesky(lhs)
    eta = np.zeros(M)
    for _ in range(iters):
        rhs = rho * (A.matrix @ (z - u))
        eta = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        v = At @ eta
        z_old = z
        z = np.clip(v + u, -mu, mu)
        z[:n] = xi
        u = u + v - z
        prim = np.max(np.abs(v - z))
        dual = rho * np.max(np.abs(A.matrix @ (z - z_old)))
        if prim <= QP_TOL and dual <= QP_TOL:
            break
    return eta, (z, u)


def find_witness(A, n, mu, xi, admm_iters=200, admm_rounds=20, splitting_first=False):
    """Least-norm witness for one ``(n, mu, xi)``.

    The active-set polish is first tried from an empty working set, which
    settles most patterns at once.  Otherwise (or always, with
    ``splitting_first``) short operator-splitting runs identify the
    bound-active tail entries and the polish recomputes ``eta`` exactly on
    that set.  After ``admm_rounds`` failed rounds the best splitting iterate
    is returned.  Never raises on infeasibility: the
    returned certificate carries ``feasible=False`` and its residuals.
    """
    if not 0 <= mu < 1:
        raise ArgumentError(f"mu must lie in [0, 1), got {mu}")
    if isinstance(n, bool) or not 1 <= int(n) <= A.N:
        raise ArgumentError(f"cut-off n={n} outside [1, {A.N}]")
    n = int(n)
    xi = validate_sign_pattern(xi, n, A.N).astype(float)
    if not np.any(xi):
        return _certificate(A, n, mu, xi, np.zeros(A.M))

    At = A.matrix.T
    B, C = At[:n], At[n:]

    eta = None if splitting_first else _active_set_polish(B, xi, C, mu, {})
    if eta is not None:
        cert = _certificate(A, n, mu, xi, eta)
        if cert.feasible:
            return cert

    smax = float(np.linalg.norm(A.matrix, 2))
    rho = 1.0 / smax ** 2 if smax > 0 else 1.0
    state = None
    best = None
    for _ in range(admm_rounds):
        eta_admm, state = _admm(A, n, mu, xi, rho, admm_iters, state)
        z, u = state
        w = At[n:] @ eta_admm + u[n:]
        guess = {k: float(np.sign(w[k])) for k in np.flatnonzero(np.abs(w) > mu)}
        eta = _active_set_polish(B, xi, C, mu, guess)
        if eta is not None:
            cert = _certificate(A, n, mu, xi, eta)
            if cert.feasible:
                return cert
        cert = _certificate(A, n, mu, xi, eta_admm)
        if best is None or max(cert.match_residual, cert.tail_excess) < max(best.match_residual, best.tail_excess):
            best = cert
    logger.warning("witness QP not certified for n=%d, xi=%s: match=%.3e, excess=%.3e",
                   n, xi.astype(int).tolist(), best.match_residual, best.tail_excess)
    return best


@dataclass(frozen=True, eq=False)
class GammaTable:
    mu: float
    gammas: tuple
    worst_patterns: tuple
    method: str
    operator: dict = field(default_factory=dict)
    raw_maxima: tuple = ()
    witnesses: tuple = ()
    valid: bool = True
    offending: tuple | None = None
    n_certified: int | None = None

    @property
    def n_max(self):
        return len(self.gammas)

    def gamma(self, n):
        return self.gammas[n - 1]

    def to_dict(self):
        return {
            "operator": self.operator,
            "mu": self.mu,
            "n_max": self.n_max,
            "method": self.method,
            "gammas": list(self.gammas),
            "worst_patterns": [list(p) for p in self.worst_patterns],
            "valid": self.valid,
            "offending": None if self.offending is None else [self.offending[0], list(self.offending[1])],
            "n_certified": self.n_max if self.n_certified is None else self.n_certified,
        }

    @classmethod
    def from_dict(cls, data):
        off = data.get("offending")
        return cls(
            mu=float(data["mu"]), gammas=tuple(float(g) for g in data["gammas"]),
            worst_patterns=tuple(tuple(int(s) for s in p) for p in data.get("worst_patterns", [])),
            method=data["method"], operator=dict(data.get("operator", {})),
            valid=bool(data.get("valid", True)),
            offending=None if off is None else (int(off[0]), tuple(off[1])),
            n_certified=data.get("n_certified"),
        )


def sign_patterns(n, method, symmetric=False):
    """Admissible nonzero sign patterns of length ``n``.

    With ``symmetric=True`` only patterns whose first nonzero entry is +1 are
    produced; the witness of ``-xi`` is the negated witness of ``xi``.
    """
    values = (-1, 0, 1) if GammaMethod(method) is GammaMethod.BRUTE_FORCE else (-1, 1)
    for pat in itertools.product(values, repeat=n):
        nz = [s for s in pat if s]
        if not nz:
            continue
        if symmetric and nz[0] < 0:
            continue
        yield pat


def compute_gamma_table(A, mu, n_max, method=GammaMethod.BRUTE_FORCE, symmetric=True):
    """Running maximum of least witness norms over all patterns, ``n = 1..n_max``."""
    method = GammaMethod(method)
    if not 0 < mu < 1:
        raise ArgumentError(f"mu must lie in (0, 1), got {mu}")
    limit = 8 if method is GammaMethod.BRUTE_FORCE else 16
    if not 1 <= n_max <= min(limit, A.N):
        raise ArgumentError(f"{method.value} needs 1 <= n_max <= {min(limit, A.N)}, got {n_max}")

    gammas, worst, raw, witnesses = [], [], [], []
    running = 0.0
    for n in range(1, n_max + 1):
        top = None
        for pat in sign_patterns(n, method, symmetric):
            cert = find_witness(A, n, mu, pat)
            if not cert.feasible:
                return GammaTable(
                    mu=mu, gammas=tuple(gammas), worst_patterns=tuple(worst), method=method.value,
                    operator=A.to_dict(), raw_maxima=tuple(raw), witnesses=tuple(witnesses),
                    valid=False, offending=(n, tuple(pat)))
            if top is None or cert.eta_norm > top.eta_norm:
                top = cert
        raw.append(top.eta_norm)
        if top.eta_norm >= running:
            running = top.eta_norm
            worst.append(top.xi)
            witnesses.append(top)
        else:
            worst.append(worst[-1])
            witnesses.append(witnesses[-1])
        gammas.append(running)
    return GammaTable(mu=mu, gammas=tuple(gammas), worst_patterns=tuple(worst), method=method.value,
                      operator=A.to_dict(), raw_maxima=tuple(raw), witnesses=tuple(witnesses))


def diagonal_closed_form_gammas(a, n_max):
    """``gamma_n = sqrt(sum_{k<=n} k^(2a))`` for ``A = diag(k^-a)``.

    The least witness for a full sign pattern is ``eta_k = xi_k k^a`` on the
    matched block and zero elsewhere, which leaves a zero tail for every mu.
    """
    k = np.arange(1, n_max + 1, dtype=float)
    return np.sqrt(np.cumsum(k ** (2.0 * a)))


def extend_gamma_table(table, extra, label="ClosedForm"):
    """Append bounds for ``n > table.n_max`` taken from ``extra``.

    ``extra`` is indexed like ``gammas`` (entry ``n-1`` for cut-off ``n``) and
    must cover ``n = 1..n_new``.  The running maximum keeps monotonicity.
    """
    extra = np.asarray(extra, dtype=float)
    if extra.size <= table.n_max:
        return table
    gammas = list(table.gammas)
    running = gammas[-1] if gammas else 0.0
    for g in extra[table.n_max:]:
        running = max(running, float(g))
        gammas.append(running)
    return GammaTable(
        mu=table.mu, gammas=tuple(gammas), worst_patterns=table.worst_patterns,
        method=f"{table.method}+{label}", operator=table.operator, raw_maxima=table.raw_maxima,
        witnesses=table.witnesses, valid=table.valid, offending=table.offending,
        n_certified=table.n_max if table.n_certified is None else table.n_certified)


def _range_approximation(A, target, eps):
    eta, *_ = np.linalg.lstsq(A.matrix.T, target, rcond=None)
    dist = float(np.max(np.abs(A.matrix.T @ eta - target)))
    if dist > eps + 1e-12:
        raise ApproximationError(
            f"range approximation reached l^inf distance {dist:.3e} > eps={eps:.3e}", achieved=dist)
    return eta


def constructive_approximation(A, xi_target, n, eps):
    """Match ``xi_target`` exactly on ``1..n`` and within ``eps`` beyond, from the range of ``A^T``.

    Follows the induction on the cut-off: entry ``m`` is shifted by ``+eps``
    and ``-eps``, both shifted targets are approximated with entries ``< m``
    already matched, and the convex combination fixing entry ``m`` is taken.
    The base case is an l^2 least-squares fit whose l^inf error must not
    exceed ``eps``.

    Returns
    -------
    eta : ndarray
    xi_tilde : ndarray
        ``A^T eta``.
    """
    target = np.asarray(xi_target, dtype=float)
    if target.shape != (A.N,):
        raise ArgumentError(f"target must have length N={A.N}")
    if not eps > 0:
        raise ArgumentError(f"eps must be positive, got {eps}")
    if not 0 <= n <= A.N:
        raise ArgumentError(f"cut-off n={n} outside [0, {A.N}]")
    At = A.matrix.T

    def build(tgt, m):
        if m == 0:
            return _range_approximation(A, tgt, eps)
        up, down = tgt.copy(), tgt.copy()
        up[m - 1] += eps
        down[m - 1] -= eps
        eta_up, eta_down = build(up, m - 1), build(down, m - 1)
        hi, lo = At[m - 1] @ eta_up, At[m - 1] @ eta_down
        theta = 0.5 if hi == lo else (tgt[m - 1] - lo) / (hi - lo)
        theta = min(max(theta, 0.0), 1.0)
        return theta * eta_up + (1.0 - theta) * eta_down

    if not np.any(target):
        eta = np.zeros(A.M)
    else:
        eta = build(target, int(n))
    return eta, At @ eta


def check_range_closure(A, k):
    """l^inf distance from ``e_k`` to its least-squares approximation in the range of ``A^T``."""
    if not 1 <= k <= A.N:
        raise ArgumentError(f"index k={k} outside [1, {A.N}]")
    e = np.zeros(A.N)
    e[k - 1] = 1.0
    eta, *_ = np.linalg.lstsq(A.matrix.T, e, rcond=None)
    return float(np.max(np.abs(A.matrix.T @ eta - e)))
