"""Dense forward operators ``A: R^N -> R^M`` and finite-scale diagnostics.

The data space is ``R^M`` with the Euclidean norm, so the dual space is again
``R^M`` and the adjoint is the matrix transpose.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core_types import as_seq
from .exceptions import ArgumentError

INJECTIVITY_RTOL = 1e-10


class Family(str, enum.Enum):
    DIAGONAL = "Diagonal"
    BIDIAGONAL = "Bidiagonal"
    CUMULATIVE_AVERAGE = "CumulativeAverage"
    CUSTOM = "Custom"


@dataclass(frozen=True, eq=False)
class ForwardOp:
    """Immutable dense matrix with family metadata."""

    matrix: np.ndarray
    family: Family = Family.CUSTOM
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
            raise ArgumentError(f"operator matrix must be 2-d and nonempty, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ArgumentError("operator matrix contains non-finite entries")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", dict(self.params))

    @property
    def M(self):
        return self.matrix.shape[0]

    @property
    def N(self):
        return self.matrix.shape[1]

    def __repr__(self):
        return f"ForwardOp(family={self.family.value}, params={self.params}, M={self.M}, N={self.N})"

    def to_dict(self):
        out = {"family": self.family.value, "params": dict(self.params), "M": self.M, "N": self.N}
        if self.family is Family.CUSTOM:
            out["matrix"] = self.matrix.tolist()
        return out

    @classmethod
    def from_dict(cls, data):
        return operator_from_dict(data)


def apply(A, x):
    """``A x``."""
    x = as_seq(x)
    if x.size != A.N:
        raise ArgumentError(f"expected a sequence of length N={A.N}, got {x.size}")
    return A.matrix @ x


def apply_adjoint(A, eta):
    """``A* eta`` (transpose action)."""
    eta = as_seq(eta, "eta")
    if eta.size != A.M:
        raise ArgumentError(f"expected a dual vector of length M={A.M}, got {eta.size}")
    return A.matrix.T @ eta


def make_operator(family, params=None, M=None, N=None):
    """Build one of the built-in test operators.

    Parameters
    ----------
    family : Family or str
        ``Diagonal``: ``diag(k^-a)``.  ``Bidiagonal``:
        ``(Ax)_k = k^-a (x_k + lam x_{k+1})``.  ``CumulativeAverage``:
        ``(Ax)_i = mean(x_1..x_i)``.  ``Custom`` requires ``params["matrix"]``.
    params : dict, optional
        Family parameters: ``a`` (decay exponent, default 1 for Diagonal and
        Bidiagonal) and ``lam`` (Bidiagonal coupling in (0, 1], default 0.5).
    M, N : int
        Data and solution dimensions.  The built-in families are square, so
        ``M`` defaults to ``N`` and must equal it.
    """
    try:
        family = Family(family)
    except ValueError as exc:
        raise ArgumentError(f"unknown operator family {family!r}") from exc
    params = dict(params or {})

    if family is Family.CUSTOM:
        if "matrix" not in params:
            raise ArgumentError("Custom operator needs params['matrix']")
        mat = np.asarray(params.pop("matrix"), dtype=float)
        if mat.ndim != 2:
            raise ArgumentError("Custom matrix must be 2-d")
        if (M is not None and M != mat.shape[0]) or (N is not None and N != mat.shape[1]):
            raise ArgumentError(f"Custom matrix shape {mat.shape} disagrees with M={M}, N={N}")
        return ForwardOp(mat, family, params)

    if N is None:
        raise ArgumentError("N is required")
    N = int(N)
    M = N if M is None else int(M)
    if N < 1 or M != N:
        raise ArgumentError(f"{family.value} operators are square with N >= 1, got M={M}, N={N}")
    k = np.arange(1, N + 1, dtype=float)

    if family is Family.DIAGONAL:
        a = float(params.setdefault("a", 1.0))
        if not a >= 0:
            raise ArgumentError(f"decay exponent a must be nonnegative, got {a}")
        mat = np.diag(k ** -a)
    elif family is Family.BIDIAGONAL:
        a = float(params.setdefault("a", 1.0))
        lam = float(params.setdefault("lam", 0.5))
        if not a >= 0:
            raise ArgumentError(f"decay exponent a must be nonnegative, got {a}")
        if not 0 < lam <= 1:
            raise ArgumentError(f"coupling lam must lie in (0, 1], got {lam}")
        mat = np.diag(k ** -a)
        mat[np.arange(N - 1), np.arange(1, N)] = lam * k[:-1] ** -a
    else:
        mat = np.tril(np.ones((N, N))) / k[:, None]
    return ForwardOp(mat, family, params)


def operator_from_dict(data):
    """Inverse of :meth:`ForwardOp.to_dict`; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ArgumentError("operator spec must be a JSON object")
    unknown = set(data) - {"family", "params", "M", "N", "matrix"}
    if unknown:
        raise ArgumentError(f"unknown operator keys: {sorted(unknown)}")
    if "family" not in data:
        raise ArgumentError("operator spec needs a 'family'")
    params = dict(data.get("params") or {})
    if "matrix" in data:
        params["matrix"] = data["matrix"]
    return make_operator(data["family"], params, data.get("M"), data.get("N"))


@dataclass(frozen=True)
class OpDiagnostics:
    smallest_singular_value: float
    largest_singular_value: float
    column_norms: tuple
    injective: bool
    note: str = (
        "column norms ||A e_k||_2 are a qualitative decay proxy only; "
        "weak*-to-weak continuity has no finite-dimensional test"
    )

    def to_dict(self):
        return {
            "smallest_singular_value": self.smallest_singular_value,
            "largest_singular_value": self.largest_singular_value,
            "column_norms": list(self.column_norms),
            "injective": self.injective,
            "note": self.note,
        }


def diagnose(A):
    """Singular-value based injectivity check; never raises on rank deficiency."""
    s = np.linalg.svd(A.matrix, compute_uv=False)
    smax = float(s[0])
    # an operator with more columns than rows has a nontrivial null space
    smin = float(s[-1]) if A.M >= A.N else 0.0
    injective = bool(smax > 0 and smin > INJECTIVITY_RTOL * smax)
    cols = tuple(float(c) for c in np.linalg.norm(A.matrix, axis=0))
    return OpDiagnostics(smin, smax, cols, injective)


def power_iteration_norm(A, max_iter=1000, tol=1e-12, seed=0):
    """Estimate ``||A||_2`` by power iteration on ``A^T A``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.N)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A.matrix.T @ (A.matrix @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(np.sqrt(nw))
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(np.linalg.norm(A.matrix @ v))
