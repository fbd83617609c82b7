"""End-to-end rate experiments: synthesize data, choose alpha, solve, compare to the bound."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from .core_types import norm, tail_sum
from .exceptions import ArgumentError, ConvergenceError, InvalidCertificateError
from .operators import Family, diagnose, operator_from_dict
from .param_rules import (APrioriRule, DiscrepancyRule, ZERO_SOLUTION, choose_a_priori,
                          choose_discrepancy)
from .solver import SolverOptions, TikhonovProblem, solve
from .source_cert import (GammaMethod, compute_gamma_table, diagonal_closed_form_gammas,
                          extend_gamma_table)
from .vsc_rate import RateFunction, theoretical_bound

logger = logging.getLogger(__name__)

CSV_HEADER = ("delta", "alpha", "discrepancy", "error_l1", "phi_delta", "bound", "solver_iters", "converged")

SPEC_KEYS = {"operator", "x_dagger", "mu", "delta_grid", "rule", "p", "seed",
             "n_max", "gamma_method", "gamma_extension", "solver", "phi_override"}


def _reject_unknown(data, allowed, where):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ArgumentError(f"unknown keys in {where}: {sorted(unknown)}")


def make_x_dagger(gen, N):
    """Exact solution from a generator spec.

    ``{"kind": "Sparse", "support": [1-based indices], "values": [...]}``,
    ``{"kind": "PowerTail", "s": s}`` (``k^-s`` for ``k <= N``, zero beyond)
    or ``{"kind": "Custom", "values": [...]}`` (zero-padded to ``N``).
    """
    if not isinstance(gen, dict) or "kind" not in gen:
        raise ArgumentError("x_dagger spec must be an object with a 'kind'")
    kind = gen["kind"]
    x = np.zeros(N)
    if kind == "Sparse":
        _reject_unknown(gen, {"kind", "support", "values"}, "x_dagger")
        support, values = list(gen["support"]), list(gen["values"])
        if len(support) != len(values):
            raise ArgumentError("support and values must have equal length")
        for k, v in zip(support, values):
            if not 1 <= int(k) <= N:
                raise ArgumentError(f"support index {k} outside [1, {N}]")
            x[int(k) - 1] = float(v)
    elif kind == "PowerTail":
        _reject_unknown(gen, {"kind", "s", "scale"}, "x_dagger")
        s = float(gen["s"])
        if not s > 1:
            raise ArgumentError(f"PowerTail needs s > 1, got {s}")
        x[:] = float(gen.get("scale", 1.0)) * np.arange(1, N + 1, dtype=float) ** -s
    elif kind == "Custom":
        _reject_unknown(gen, {"kind", "values"}, "x_dagger")
        vals = np.asarray(gen["values"], dtype=float)
        if vals.ndim != 1 or vals.size > N:
            raise ArgumentError(f"Custom x_dagger must be a list of at most N={N} values")
        x[:vals.size] = vals
    else:
        raise ArgumentError(f"unknown x_dagger kind {kind!r}")
    if not np.all(np.isfinite(x)):
        raise ArgumentError("x_dagger has non-finite entries")
    return x


def delta_grid(spec):
    d_min, d_max = float(spec["d_min"]), float(spec["d_max"])
    if not 0 < d_min < d_max:
        raise ArgumentError(f"delta grid needs 0 < d_min < d_max, got {d_min}, {d_max}")
    points = spec.get("points")
    if points is None:
        points = min(40, int(math.ceil(12 * math.log10(d_max / d_min))) + 1)
    points = int(points)
    if points < 2:
        raise ArgumentError("delta grid needs at least 2 points")
    return np.geomspace(d_min, d_max, points)


@dataclass
class ExperimentSpec:
    operator: dict
    x_dagger: dict
    mu: float = 0.5
    delta_grid: dict = field(default_factory=lambda: {"d_min": 1e-5, "d_max": 1e-2, "points": 12})
    rule: dict = field(default_factory=lambda: {"kind": "Discrepancy", "tau": 1.5})
    p: float = 2.0
    seed: int = 0
    n_max: int = 5
    gamma_method: str = "BruteForce"
    gamma_extension: str | None = None
    solver: dict = field(default_factory=dict)
    phi_override: str | None = None

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ArgumentError(f"mu must lie in (0, 1), got {self.mu}")
        delta_grid(self.delta_grid)
        _reject_unknown(self.delta_grid, {"d_min", "d_max", "points"}, "delta_grid")
        kind = self.rule.get("kind")
        if kind == "APriori":
            _reject_unknown(self.rule, {"kind", "c1", "c2"}, "rule")
        elif kind == "Discrepancy":
            _reject_unknown(self.rule, {"kind", "tau", "alpha_min", "alpha_max", "max_bisections"}, "rule")
        else:
            raise ArgumentError(f"rule kind must be APriori or Discrepancy, got {kind!r}")
        if self.gamma_extension not in (None, "DiagonalClosedForm"):
            raise ArgumentError(f"unknown gamma_extension {self.gamma_extension!r}")
        if self.phi_override not in (None, "constant"):
            raise ArgumentError(f"unknown phi_override {self.phi_override!r}")
        if int(self.seed) < 0:
            raise ArgumentError("seed must be nonnegative")
        SolverOptions.from_dict(self.solver)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ArgumentError("experiment config must be a JSON object")
        _reject_unknown(data, SPEC_KEYS, "experiment config")
        for key in ("operator", "x_dagger"):
            if key not in data:
                raise ArgumentError(f"experiment config needs '{key}'")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


@dataclass
class ExperimentRow:
    delta: float
    alpha: float
    discrepancy: float
    error_l1: float
    phi_delta: float
    bound: float
    solver_iters: int
    converged: bool
    trace: list = field(default_factory=list, repr=False)


@dataclass
class ExperimentReport:
    rows: list
    slope: float
    intercept: float
    bound_satisfied: bool
    metadata: dict

    def csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([repr(float(r.delta)), repr(float(r.alpha)), repr(float(r.discrepancy)),
                             repr(float(r.error_l1)), repr(float(r.phi_delta)), repr(float(r.bound)),
                             int(r.solver_iters), "true" if r.converged else "false"])
        return buf.getvalue()

    def plotdata_text(self):
        lines = ["# log10_delta log10_error log10_bound"]
        for r in self.rows:
            vals = [r.delta, r.error_l1, r.bound]
            lines.append(" ".join(f"{math.log10(v):.12e}" if v > 0 else "nan" for v in vals))
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "rows": [{k: v for k, v in asdict(r).items() if k != "trace"} for r in self.rows],
            "slope": self.slope,
            "intercept": self.intercept,
            "bound_satisfied": self.bound_satisfied,
            "metadata": self.metadata,
        }


def make_noise(y_true, delta, seed):
    """``y_true`` plus a seeded Gaussian direction scaled to norm exactly ``delta``."""
    if not delta > 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    y = np.asarray(y_true, dtype=float)
    rng = np.random.default_rng(seed)
    while True:
        d = rng.standard_normal(y.size)
        nd = float(np.linalg.norm(d))
        if nd > 0:
            break
    return y + (delta / nd) * d


def fit_slope(deltas, errors):
    """Least-squares slope and intercept of ``log(error)`` against ``log(delta)``."""
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = np.isfinite(d) & np.isfinite(e) & (d > 0) & (e > 0)
    if keep.sum() < 2:
        return math.nan, math.nan
    slope, intercept = np.polyfit(np.log(d[keep]), np.log(e[keep]), 1)
    return float(slope), float(intercept)


def build_gamma(spec, A):
    n_max = min(int(spec.n_max), A.N)
    table = compute_gamma_table(A, spec.mu, n_max, GammaMethod(spec.gamma_method))
    if not table.valid:
        raise InvalidCertificateError(
            f"source condition witness infeasible at n={table.offending[0]}, xi={list(table.offending[1])}",
            *table.offending)
    if spec.gamma_extension == "DiagonalClosedForm":
        if A.family is not Family.DIAGONAL:
            raise ArgumentError("DiagonalClosedForm extension requires a Diagonal operator")
        table = extend_gamma_table(table, diagonal_closed_form_gammas(A.params["a"], A.N))
    return table


def run_experiment(spec, error_override=None):
    """Run the per-delta pipeline and fit the log-log rate.

    ``error_override`` (test mode) maps ``delta`` to a synthetic error and
    bypasses the solver entirely.
    """
    if isinstance(spec, dict):
        spec = ExperimentSpec.from_dict(spec)
    A = operator_from_dict(spec.operator)
    x_dag = make_x_dagger(spec.x_dagger, A.N)
    y_true = A.matrix @ x_dag
    gamma = build_gamma(spec, A)
    rf = RateFunction.build(gamma, x_dag)
    opts = SolverOptions.from_dict(spec.solver)
    lipschitz = 2.0 * diagnose(A).largest_singular_value ** 2
    rule = dict(spec.rule)
    kind = rule.pop("kind")
    bound_kw = ({"c1": rule.get("c1", 1.0), "c2": rule.get("c2", 1.0), "p": spec.p} if kind == "APriori"
                else {"tau": rule.get("tau", 1.5)})
    phi_for_rule = (lambda t: 1.0) if spec.phi_override == "constant" else rf
    x_norm = norm(x_dag)

    rows = []
    for i, delta in enumerate(delta_grid(spec.delta_grid)):
        delta = float(delta)
        phi_d = rf(delta)
        bound = theoretical_bound(rf, kind, spec.mu, delta, **bound_kw)
        if error_override is not None:
            rows.append(ExperimentRow(delta, math.nan, math.nan, float(error_override(delta)),
                                      phi_d, bound, 0, True))
            continue
        y_delta = make_noise(y_true, delta, int(spec.seed) ^ i)
        trace = []
        try:
            if kind == "APriori":
                chosen = choose_a_priori(APrioriRule(phi_for_rule, p=spec.p, **rule), delta)
                res = solve(TikhonovProblem(A, y_delta, chosen.alpha, spec.p), opts, lipschitz=lipschitz)
            else:
                chosen = choose_discrepancy(DiscrepancyRule(**rule), A, y_delta, delta, spec.p, opts)
                res = chosen.result
                trace = chosen.trace
        except ConvergenceError as exc:
            logger.warning("row %d (delta=%g) failed: %s", i, delta, exc)
            rows.append(ExperimentRow(delta, math.nan, math.nan, math.nan, phi_d, bound, 0, False))
            continue
        if chosen.alpha == ZERO_SOLUTION:
            rows.append(ExperimentRow(delta, ZERO_SOLUTION, chosen.discrepancy, x_norm, phi_d, bound,
                                      0, True, trace))
            continue
        err = norm(res.x - x_dag)
        rows.append(ExperimentRow(delta, chosen.alpha, res.discrepancy, err, phi_d, bound,
                                  res.iterations, res.converged, trace))

    good = [r for r in rows if r.converged]
    slope, intercept = fit_slope([r.delta for r in good], [r.error_l1 for r in good])
    bound_ok = all(r.error_l1 <= r.bound for r in rows)
    metadata = {
        "spec": spec.to_dict(),
        "N": A.N,
        "M": A.M,
        "tail_at_N": tail_sum(x_dag, A.N),
        "truncation_gap": rf.truncation_gap,
        "gamma": gamma.to_dict(),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    return ExperimentReport(rows, slope, intercept, bound_ok, metadata)


def write_report(report, out_dir, plot=True, trace=False):
    """Write report.csv, report.json, plotdata.dat and (optionally) rates.png."""
    from pathlib import Path
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.csv_text())
    (out / "report.json").write_text(dump_json(report.to_dict()))
    (out / "plotdata.dat").write_text(report.plotdata_text())
    written = [out / "report.csv", out / "report.json", out / "plotdata.dat"]
    if trace:
        from .param_rules import write_trace_csv
        for i, row in enumerate(report.rows):
            if row.trace:
                path = out / f"trace_{i:03d}.csv"
                write_trace_csv(row.trace, path)
                written.append(path)
    if plot:
        from .plotting import plot_rates
        written.append(plot_rates(report, out / "rates.png"))
    return written


def jsonable(obj):
    """Recursively convert to strict-JSON values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dump_json(obj):
    return json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n"
