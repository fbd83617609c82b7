"""Parameter choice: the a-priori band rule and the discrepancy principle."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ArgumentError, BracketError, ConvergenceError, DegenerateRateError
from .operators import diagnose
from .solver import SolverOptions, TikhonovProblem, solve, zero_threshold


class Rule(str, enum.Enum):
    APRIORI = "APriori"
    DISCREPANCY = "Discrepancy"


# returned in place of alpha when x = 0 already meets the discrepancy bound
ZERO_SOLUTION = math.inf


@dataclass(frozen=True)
class APrioriRule:
    """``c1 delta^p / phi(delta) <= alpha <= c2 delta^p / phi(delta)``."""

    phi: Callable[[float], float]
    c1: float = 1.0
    c2: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if not 0 < self.c1 <= self.c2:
            raise ArgumentError(f"need 0 < c1 <= c2, got c1={self.c1}, c2={self.c2}")
        if not self.p > 1:
            raise ArgumentError(f"p must exceed 1, got {self.p}")

    def band(self, delta):
        phi = float(self.phi(delta))
        if phi <= 0:
            raise DegenerateRateError(f"phi({delta}) = {phi} is not positive")
        base = delta ** self.p / phi
        return self.c1 * base, self.c2 * base


@dataclass(frozen=True)
class DiscrepancyRule:
    """``delta <= ||A x_alpha - y|| <= tau delta``.

    ``alpha_max`` defaults to the zero threshold of the data and
    ``alpha_min`` to ``alpha_min_ratio * alpha_max``.
    """

    tau: float = 1.5
    alpha_min: float | None = None
    alpha_max: float | None = None
    max_bisections: int = 60
    alpha_min_ratio: float = 1e-12

    def __post_init__(self):
        if not self.tau >= 1:
            raise ArgumentError(f"tau must be >= 1, got {self.tau}")
        if self.alpha_min is not None and self.alpha_max is not None:
            if not 0 < self.alpha_min < self.alpha_max:
                raise ArgumentError("need 0 < alpha_min < alpha_max")


@dataclass(frozen=True)
class ChosenAlpha:
    alpha: float
    discrepancy: float
    rule: Rule
    solves_used: int = 0
    result: object = None
    trace: list = field(default_factory=list)

    @property
    def is_zero_solution(self):
        return self.alpha == ZERO_SOLUTION


def choose_a_priori(rule, delta):
    """Geometric midpoint ``sqrt(c1 c2) delta^p / phi(delta)`` of the admissible band."""
    if not delta > 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    phi = float(rule.phi(delta))
    if phi <= 0:
        raise DegenerateRateError(f"phi({delta}) = {phi} is not positive")
    alpha = math.sqrt(rule.c1 * rule.c2) * delta ** rule.p / phi
    return ChosenAlpha(alpha, math.nan, Rule.APRIORI)


def choose_discrepancy(rule, A, y_delta, delta, p=2.0, opts=None):
    """Bisect on ``log(alpha)`` until the discrepancy lands in ``[delta, tau delta]``.

    Every solve is warm-started from the minimizer of the previous one.  The
    returned :class:`ChosenAlpha` carries the accepted :class:`SolveResult`
    and the trace ``[(alpha, discrepancy, iterations), ...]``.

    Raises
    ------
    BracketError
        If the discrepancy at ``alpha_min`` already exceeds ``tau delta``.
    ConvergenceError
        If ``max_bisections`` halvings do not enter the band.
    """
    if not delta > 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    y = np.asarray(y_delta, dtype=float)
    opts = opts or SolverOptions()
    lo_target, hi_target = delta, rule.tau * delta
    ny = float(np.linalg.norm(y))
    if ny <= hi_target:
        return ChosenAlpha(ZERO_SOLUTION, ny, Rule.DISCREPANCY)

    alpha_max = rule.alpha_max if rule.alpha_max is not None else zero_threshold(A, y, p)
    alpha_min = rule.alpha_min if rule.alpha_min is not None else rule.alpha_min_ratio * alpha_max
    lipschitz = 2.0 * diagnose(A).largest_singular_value ** 2
    trace = []
    x_warm = None

    def run(alpha):
        nonlocal x_warm
        res = solve(TikhonovProblem(A, y, alpha, p), opts, x0=x_warm, lipschitz=lipschitz)
        x_warm = res.x
        trace.append((alpha, res.discrepancy, res.iterations))
        return res

    def accept(alpha, res):
        return ChosenAlpha(alpha, res.discrepancy, Rule.DISCREPANCY, len(trace), res, trace)

    res = run(alpha_min)
    if res.discrepancy > hi_target:
        raise BracketError(
            f"alpha_min too large: discrepancy {res.discrepancy:.6g} at alpha_min={alpha_min:.6g} "
            f"exceeds tau*delta={hi_target:.6g}", bracket=(alpha_min, alpha_max))
    if res.discrepancy >= lo_target:
        return accept(alpha_min, res)

    lo, hi = math.log(alpha_min), math.log(alpha_max)
    for _ in range(int(rule.max_bisections)):
        mid = 0.5 * (lo + hi)
        alpha = math.exp(mid)
        res = run(alpha)
        if lo_target <= res.discrepancy <= hi_target:
            return accept(alpha, res)
        if res.discrepancy < lo_target:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(
        f"discrepancy band [{lo_target:.6g}, {hi_target:.6g}] not reached after "
        f"{rule.max_bisections} bisections", bracket=(math.exp(lo), math.exp(hi)))


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        fh.write("alpha,discrepancy,iterations\n")
        for alpha, disc, iters in trace:
            fh.write(f"{alpha!r},{disc!r},{iters}\n")
