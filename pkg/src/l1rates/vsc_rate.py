"""Rate function, variational source condition check, and error bounds."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core_types import complement, norm, project, sign_pattern_of, tail_sums
from .exceptions import ArgumentError, InvalidCertificateError


def beta_from_mu(mu):
    """``(1 - mu) / (1 + mu)``."""
    if not 0 <= mu < 1:
        raise ArgumentError(f"mu must lie in [0, 1), got {mu}")
    return (1.0 - mu) / (1.0 + mu)


@dataclass(frozen=True, eq=False)
class RateFunction:
    """``phi(t) = 2 min_{1<=n<=n_max} (tail_n(x_dagger) + gamma_n t)``.

    ``truncation_gap`` is the tail of ``x_dagger`` beyond ``n_max``; the
    minimum over ``n <= n_max`` equals the infimum over all ``n`` only when
    it vanishes.
    """

    gamma: object
    tails: np.ndarray
    n_max: int
    truncation_gap: float

    @classmethod
    def build(cls, gamma_table, x_dagger, n_max=None):
        x = np.asarray(x_dagger, dtype=float)
        if not gamma_table.valid:
            raise InvalidCertificateError("gamma table is not certified", *(gamma_table.offending or (None, None)))
        n_max = min(gamma_table.n_max, x.size) if n_max is None else int(n_max)
        if not 1 <= n_max <= min(gamma_table.n_max, x.size):
            raise ArgumentError(f"n_max={n_max} exceeds the gamma table or the sequence length")
        all_tails = tail_sums(x)
        tails = all_tails[1:n_max + 1].copy()
        tails.setflags(write=False)
        return cls(gamma_table, tails, n_max, float(all_tails[n_max]))

    @property
    def gammas(self):
        return np.asarray(self.gamma.gammas[:self.n_max], dtype=float)

    def evaluate(self, t):
        """Return ``(phi(t), n_star)`` with ``n_star`` the 1-based minimizing cut-off."""
        if t < 0:
            raise ArgumentError(f"phi is defined for t >= 0, got {t}")
        vals = self.tails + self.gammas * t
        i = int(np.argmin(vals))
        return 2.0 * float(vals[i]), i + 1

    def __call__(self, t):
        return self.evaluate(t)[0]


def phi_eval(rf, t):
    return rf.evaluate(t)


class BoundRule(str, enum.Enum):
    APRIORI = "APriori"
    DISCREPANCY = "Discrepancy"


def bound_constant(rule, mu, c1=1.0, c2=1.0, p=2.0, tau=1.5):
    """Factor multiplying ``phi(delta)`` in the error bound of each rule.

    A-priori band rule: ``(1 + 1/c1 + (1 + 2 c2)^(1/(p-1))) / beta``.
    Discrepancy principle: ``(1 + tau) / beta``.
    """
    beta = beta_from_mu(mu)
    rule = BoundRule(rule)
    if rule is BoundRule.APRIORI:
        if not (c1 > 0 and c2 > 0 and p > 1):
            raise ArgumentError("need c1, c2 > 0 and p > 1")
        return (1.0 + 1.0 / c1 + (1.0 + 2.0 * c2) ** (1.0 / (p - 1.0))) / beta
    if not tau >= 1:
        raise ArgumentError(f"tau must be >= 1, got {tau}")
    return (1.0 + tau) / beta


def theoretical_bound(rf, rule, mu, delta, **rule_params):
    """Upper bound on ``||x_alpha - x_dagger||_1`` at noise level ``delta``."""
    if not delta > 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    return bound_constant(rule, mu, **rule_params) * rf(delta)


@dataclass(frozen=True)
class SampleSpec:
    count: int = 10_000
    seed: int = 0
    # sparse perturbation / dense Gaussian / scaled sign flip
    mixture: tuple = (0.4, 0.4, 0.2)


@dataclass(frozen=True, eq=False)
class VscReport:
    beta: float
    mu: float
    samples_checked: int
    max_violation: float
    worst_sample: np.ndarray
    max_pm_violation: float
    truncation_gap: float

    def to_dict(self):
        return {
            "beta": self.beta, "mu": self.mu, "samples_checked": self.samples_checked,
            "max_violation": self.max_violation, "max_pm_violation": self.max_pm_violation,
            "truncation_gap": self.truncation_gap, "worst_sample": self.worst_sample.tolist(),
        }


def draw_samples(x_dagger, spec):
    """Seeded test points around ``x_dagger`` following ``spec.mixture``."""
    x = np.asarray(x_dagger, dtype=float)
    N = x.size
    rng = np.random.default_rng(spec.seed)
    scale = max(norm(x, "LInf"), 1.0)
    counts = np.floor(np.asarray(spec.mixture) * spec.count).astype(int)
    counts[0] += spec.count - counts.sum()
    out = []
    for _ in range(counts[0]):
        k = int(rng.integers(1, min(N, 8) + 1))
        idx = rng.choice(N, size=k, replace=False)
        h = np.zeros(N)
        h[idx] = rng.standard_normal(k) * scale * 10.0 ** rng.uniform(-6, 1)
        out.append(x + h)
    for _ in range(counts[1]):
        out.append(rng.standard_normal(N) * scale * 10.0 ** rng.uniform(-3, 1))
    for _ in range(counts[2]):
        flips = np.where(rng.random(N) < 0.5, -1.0, 1.0)
        out.append(rng.uniform(0, 2) * flips * x)
    return out


def check_vsc(A, x_dagger, rf, mu, sampler=None):
    """Largest violation of ``beta||x - x_dagger||_1 <= ||x||_1 - ||x_dagger||_1 + phi(||A(x - x_dagger)||)``.

    Also evaluates, at the phi-minimizing cut-off ``n``, the intermediate bound

        ||P_n(x - x_dagger)||_1 <= mu (||(I-P_n)x||_1 + ||(I-P_n)x_dagger||_1) + gamma_n ||A(x - x_dagger)||.

    Positive values are violations.  Reports only; never raises.
    """
    sampler = sampler or SampleSpec()
    xd = np.asarray(x_dagger, dtype=float)
    beta = beta_from_mu(mu)
    if abs(rf.gamma.mu - mu) > 0:
        raise ArgumentError(f"rate function was built for mu={rf.gamma.mu}, not {mu}")
    norm_xd = norm(xd)
    worst_v, worst_x, worst_pm = -math.inf, xd.copy(), -math.inf
    for x in draw_samples(xd, sampler):
        d = x - xd
        t = float(np.linalg.norm(A.matrix @ d))
        phi_t, n_star = rf.evaluate(t)
        v = beta * norm(d) - (norm(x) - norm_xd) - phi_t
        if v > worst_v:
            worst_v, worst_x = v, x
        pm = (norm(project(n_star, d))
              - mu * (norm(complement(n_star, x)) + norm(complement(n_star, xd)))
              - rf.gamma.gamma(n_star) * t)
        worst_pm = max(worst_pm, pm)
    return VscReport(beta, mu, sampler.count, float(worst_v), worst_x, float(worst_pm), rf.truncation_gap)


def pm_with_witness(A, x_dagger, x, n, cert):
    """Intermediate bound evaluated with an explicit witness for ``sgn P_n(x - x_dagger)``.

    ``cert`` must be a certificate for ``sign_pattern_of(x - x_dagger, n)``;
    returns ``lhs - rhs`` (nonpositive when the bound holds).
    """
    d = np.asarray(x, dtype=float) - np.asarray(x_dagger, dtype=float)
    xi = sign_pattern_of(d, n)
    if tuple(xi[:n]) != tuple(cert.xi):
        raise ArgumentError("certificate pattern does not match sgn P_n(x - x_dagger)")
    t = float(np.linalg.norm(A.matrix @ d))
    return norm(project(n, d)) - cert.mu * norm(complement(n, d)) - cert.eta_norm * t
