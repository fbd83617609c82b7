"""Minimize ``||Ax - y||_2^p + alpha ||x||_1`` by accelerated proximal gradient.

The iteration is FISTA with a monotone safeguard: whenever the momentum step
would increase the objective the momentum is reset and a plain proximal step
is taken from the current iterate.  For ``p != 2`` the step size is found by
backtracking.  Once the support settles, a Newton polish on the support
(exact after one step for ``p == 2``) sharpens the result to rounding level.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core_types import as_seq
from .exceptions import ArgumentError, NumericalError
from .operators import ForwardOp, diagnose

logger = logging.getLogger(__name__)

P_RANGE = (1.1, 4.0)
P_SAFE = (1.5, 3.0)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 200_000
    restart: bool = True
    polish: bool = True
    check_every: int = 10

    def __post_init__(self):
        if not self.tol > 0:
            raise ArgumentError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ArgumentError(f"max_iter must be >= 1, got {self.max_iter}")

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        allowed = {"tol", "max_iter", "restart", "polish", "check_every"}
        unknown = set(data) - allowed
        if unknown:
            raise ArgumentError(f"unknown solver option keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class TikhonovProblem:
    A: ForwardOp
    y_delta: np.ndarray
    alpha: float
    p: float = 2.0

    def __post_init__(self):
        y = as_seq(self.y_delta, "y_delta")
        if y.size != self.A.M:
            raise ArgumentError(f"y_delta has length {y.size}, operator has M={self.A.M}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ArgumentError(f"alpha must be positive and finite, got {self.alpha}")
        if not P_RANGE[0] <= self.p <= P_RANGE[1]:
            raise ArgumentError(f"p must lie in [{P_RANGE[0]}, {P_RANGE[1]}], got {self.p}")
        if not P_SAFE[0] <= self.p <= P_SAFE[1]:
            logger.warning("p=%g outside [%g, %g]; the data-term gradient is poorly "
                           "conditioned near zero residual", self.p, *P_SAFE)
        y.setflags(write=False)
        object.__setattr__(self, "y_delta", y)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "p", float(self.p))


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    objective: float
    discrepancy: float
    iterations: int
    optimality_residual: float
    converged: bool

    def to_dict(self):
        return {
            "x": self.x.tolist(),
            "objective": self.objective,
            "discrepancy": self.discrepancy,
            "iterations": self.iterations,
            "optimality_residual": self.optimality_residual,
            "converged": self.converged,
        }


def soft_threshold(v, lam):
    """Proximal map of ``lam * ||.||_1``: ``sign(v) * max(|v| - lam, 0)``."""
    if lam < 0:
        raise ArgumentError(f"threshold must be nonnegative, got {lam}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def _check_x(prob, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (prob.A.N,):
        raise ArgumentError(f"x must have length N={prob.A.N}, got shape {x.shape}")
    return x


def objective(prob, x):
    """Exact Tikhonov functional value ``T(x)``."""
    x = _check_x(prob, x)
    r = prob.A.matrix @ x - prob.y_delta
    return float(np.linalg.norm(r)) ** prob.p + prob.alpha * math.fsum(np.abs(x))


def data_gradient(prob, x):
    """Gradient of ``||Ax - y||^p``; zero at vanishing residual."""
    r = prob.A.matrix @ x - prob.y_delta
    nr = float(np.linalg.norm(r))
    if nr == 0.0:
        return np.zeros(prob.A.N)
    return prob.p * nr ** (prob.p - 2.0) * (prob.A.matrix.T @ r)


def optimality_residual(prob, x, g=None):
    """Distance of ``-grad`` from the subdifferential of ``alpha ||x||_1``, in l^inf."""
    x = _check_x(prob, x)
    if g is None:
        g = data_gradient(prob, x)
    nz = x != 0
    res = np.where(nz, np.abs(g + prob.alpha * np.sign(x)), np.maximum(np.abs(g) - prob.alpha, 0.0))
    return float(np.max(res)) if res.size else 0.0


def zero_threshold(A, y_delta, p=2.0):
    """Smallest ``alpha`` for which ``x = 0`` minimizes the functional."""
    y = np.asarray(y_delta, dtype=float)
    ny = float(np.linalg.norm(y))
    if ny == 0.0:
        return 0.0
    return p * ny ** (p - 2.0) * float(np.max(np.abs(A.matrix.T @ y)))


def _newton_polish(prob, x, max_steps=30):
    """Newton iterations on the support of ``x`` with signs held fixed."""
    support = np.flatnonzero(x)
    if support.size == 0:
        return None
    signs = np.sign(x[support])
    As = prob.A.matrix[:, support]
    xs = x[support].copy()
    p, alpha, y = prob.p, prob.alpha, prob.y_delta
    for _ in range(max_steps):
        r = As @ xs - y
        nr = float(np.linalg.norm(r))
        if nr == 0.0:
            break
        Atr = As.T @ r
        grad = p * nr ** (p - 2.0) * Atr + alpha * signs
        hess = p * nr ** (p - 2.0) * (As.T @ As)
        if p != 2.0:
            hess = hess + p * (p - 2.0) * nr ** (p - 4.0) * np.outer(Atr, Atr)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        xs = xs - step
        if p == 2.0 or np.max(np.abs(step)) <= 1e-15 * max(1.0, np.max(np.abs(xs))):
            break
    if np.any(np.sign(xs) != signs):
        return None
    out = np.zeros_like(x)
    out[support] = xs
    return out


def solve(prob, opts=None, x0=None, lipschitz=None, callback=None):
    """Minimize the Tikhonov functional.

    Parameters
    ----------
    prob : TikhonovProblem
    opts : SolverOptions, optional
    x0 : array_like, optional
        Warm start; defaults to zero.
    lipschitz : float, optional
        Precomputed ``2 * sigma_max(A)**2``; computed by :func:`diagnose` if
        omitted.  Passing it avoids repeated SVDs along parameter paths.
    callback : callable, optional
        Called as ``callback(iteration, x, objective)`` after every accepted
        step, including polish steps.

    Returns
    -------
    SolveResult

    Raises
    ------
    NumericalError
        If a non-finite iterate appears.
    """
    opts = opts or SolverOptions()
    A, y, alpha, p = prob.A.matrix, prob.y_delta, prob.alpha, prob.p
    x = np.zeros(prob.A.N) if x0 is None else _check_x(prob, as_seq(x0, "x0")).copy()

    def finish(x, iterations):
        g = data_gradient(prob, x)
        res = optimality_residual(prob, x, g)
        disc = float(np.linalg.norm(A @ x - y))
        obj = disc ** p + alpha * math.fsum(np.abs(x))
        return SolveResult(x, obj, disc, iterations, res, res <= opts.tol)

    if x0 is None and alpha >= zero_threshold(prob.A, y, p):
        return finish(x, 0)

    if lipschitz is None:
        lipschitz = 2.0 * diagnose(prob.A).largest_singular_value ** 2
    if p == 2.0:
        L = lipschitz
        backtrack = False
    else:
        # local curvature of ||r||^p scales like p(p-1)||r||^(p-2) sigma^2
        nr0 = max(float(np.linalg.norm(A @ x - y)), 1e-300)
        L = max(p * max(p - 1.0, 1.0) * nr0 ** (p - 2.0) * lipschitz / 2.0, 1e-12)
        backtrack = True
    if L == 0.0:
        return finish(x, 0)

    def smooth(v):
        return float(np.linalg.norm(A @ v - y)) ** p

    fx = objective(prob, x)
    z, t = x.copy(), 1.0
    last_support = None
    best = None

    for it in range(1, int(opts.max_iter) + 1):
        gz = data_gradient(prob, z)
        if backtrack:
            fz = smooth(z)
            while True:
                cand = soft_threshold(z - gz / L, alpha / L)
                d = cand - z
                if smooth(cand) <= fz + gz @ d + 0.5 * L * (d @ d) + 1e-15 * abs(fz):
                    break
                L *= 2.0
                if not math.isfinite(L):
                    raise NumericalError("step size underflow in backtracking", iteration=it)
        else:
            cand = soft_threshold(z - gz / L, alpha / L)
        fc = objective(prob, cand)
        if not (math.isfinite(fc) and np.all(np.isfinite(cand))):
            raise NumericalError("non-finite iterate", iteration=it)

        if opts.restart and fc > fx + 1e-12 * max(1.0, abs(fx)) and t > 1.0:
            # momentum overshoot: restart from x with a plain proximal step
            z, t = x.copy(), 1.0
            continue

        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = cand + ((t - 1.0) / t_new) * (cand - x)
        x, fx, t = cand, fc, t_new
        if callback is not None:
            callback(it, x, fx)
        if backtrack:
            L *= 0.95

        if it % opts.check_every == 0:
            g = data_gradient(prob, x)
            res = optimality_residual(prob, x, g)
            if res <= opts.tol:
                return finish(x, it)
            support = tuple(np.flatnonzero(x))
            if opts.polish and support == last_support:
                pol = _newton_polish(prob, x)
                if pol is not None:
                    pres = optimality_residual(prob, pol)
                    if pres <= opts.tol:
                        if callback is not None:
                            callback(it, pol, objective(prob, pol))
                        return finish(pol, it)
                    if pres < res and objective(prob, pol) <= fx:
                        x, fx = pol, objective(prob, pol)
                        z, t = x.copy(), 1.0
                        if callback is not None:
                            callback(it, x, fx)
            last_support = support
            if best is None or res < best[0]:
                best = (res, x.copy())

    result = finish(x, int(opts.max_iter))
    if best is not None and best[0] < result.optimality_residual:
        result = finish(best[1], int(opts.max_iter))
    logger.info("solver hit max_iter=%d with residual %.3e", opts.max_iter, result.optimality_residual)
    return result
