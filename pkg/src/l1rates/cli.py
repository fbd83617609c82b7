"""Command-line interface.

Exit codes: 0 success, 1 argument/configuration error, 2 numerical or
convergence failure, 3 invalid certificate (infeasible witness, violated
source condition or violated error bound).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ArgumentError, InvalidCertificateError, NumericalError
from .harness import (ExperimentSpec, build_gamma, dump_json, make_noise, make_x_dagger,
                      run_experiment, write_report)
from .operators import diagnose, operator_from_dict
from .solver import SolverOptions, TikhonovProblem, solve
from .source_cert import (GammaMethod, check_range_closure, compute_gamma_table,
                          constructive_approximation)
from .vsc_rate import RateFunction, SampleSpec, check_vsc

logger = logging.getLogger("l1rates")

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC, EXIT_CERT = 0, 1, 2, 3
VSC_TOL = 1e-8
DEFAULT_MU_SWEEP = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


class CertificateFailure(Exception):
    pass


def _load_config(path, allowed, required=()):
    if path is None:
        raise ArgumentError("--config PATH is required")
    p = Path(path)
    if not p.is_file():
        raise ArgumentError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ArgumentError(f"config file {p} must hold a JSON object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ArgumentError(f"unknown keys in {p}: {sorted(unknown)}")
    missing = [k for k in required if k not in data]
    if missing:
        raise ArgumentError(f"config file {p} is missing keys: {missing}")
    return data


def _write(out, name, payload):
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(dump_json(payload))
    return path


def cmd_solve(args):
    cfg = _load_config(args.config, {"operator", "x_dagger", "y_delta", "delta", "alpha", "p", "seed", "solver"},
                       ("operator", "alpha"))
    A = operator_from_dict(cfg["operator"])
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    if "y_delta" in cfg:
        y = np.asarray(cfg["y_delta"], dtype=float)
        x_dag = None
    else:
        if "x_dagger" not in cfg or "delta" not in cfg:
            raise ArgumentError("solve config needs either y_delta or both x_dagger and delta")
        x_dag = make_x_dagger(cfg["x_dagger"], A.N)
        y = make_noise(A.matrix @ x_dag, float(cfg["delta"]), seed)
    prob = TikhonovProblem(A, y, float(cfg["alpha"]), float(cfg.get("p", 2.0)))
    res = solve(prob, SolverOptions.from_dict(cfg.get("solver")))
    payload = res.to_dict()
    if x_dag is not None:
        payload["error_l1"] = float(np.abs(res.x - x_dag).sum())
    print(dump_json(payload), end="")
    if args.out:
        _write(Path(args.out), "solve.json", payload)
    if not res.converged:
        raise NumericalError(f"solver did not reach tol; residual {res.optimality_residual:.3e}")


def cmd_rates(args):
    cfg = _load_config(args.config, ExperimentSpec.__dataclass_fields__.keys(), ("operator", "x_dagger"))
    if args.seed is not None:
        cfg["seed"] = args.seed
    report = run_experiment(ExperimentSpec.from_dict(cfg))
    out = Path(args.out or ".")
    for path in write_report(report, out, plot=not args.no_plot, trace=args.trace):
        logger.info("wrote %s", path)
    print(f"slope={report.slope:.6f} bound_satisfied={str(report.bound_satisfied).lower()} "
          f"rows={len(report.rows)} out={out}")
    if not all(r.converged for r in report.rows):
        raise NumericalError("some delta rows did not converge")
    if not report.bound_satisfied:
        raise CertificateFailure("error bound violated on at least one delta row")


def cmd_gamma(args):
    cfg = _load_config(args.config, {"operator", "mu", "n_max", "method", "mu_sweep"}, ("operator",))
    A = operator_from_dict(cfg["operator"])
    method = GammaMethod(cfg.get("method", "BruteForce"))
    n_max = int(cfg.get("n_max", 5))
    table = compute_gamma_table(A, float(cfg.get("mu", 0.5)), n_max, method)
    out = Path(args.out or ".")
    _write(out, "gamma.json", table.to_dict())
    print(dump_json({"gammas": list(table.gammas), "valid": table.valid}), end="")
    sweep = cfg.get("mu_sweep", False)
    if sweep:
        mus = DEFAULT_MU_SWEEP if sweep is True else tuple(float(m) for m in sweep)
        curves = {}
        for mu in mus:
            t = compute_gamma_table(A, mu, n_max, method)
            if not t.valid:
                raise CertificateFailure(f"mu={mu}: infeasible witness at {t.offending}")
            curves[mu] = list(t.gammas)
        _write(out, "gamma_sweep.json", {"operator": A.to_dict(), "method": method.value, "n_max": n_max,
                                         "curves": [{"mu": m, "gammas": g} for m, g in curves.items()]})
        if not args.no_plot:
            from .plotting import plot_gamma_sweep
            plot_gamma_sweep(curves, out / "gamma_mu.png")
    if not table.valid:
        raise CertificateFailure(f"infeasible witness at n={table.offending[0]}, xi={list(table.offending[1])}")


def cmd_vsc_check(args):
    cfg = _load_config(args.config, {"operator", "x_dagger", "mu", "n_max", "gamma_method",
                                     "gamma_extension", "samples", "seed"}, ("operator", "x_dagger"))
    spec = ExperimentSpec(operator=cfg["operator"], x_dagger=cfg["x_dagger"], mu=float(cfg.get("mu", 0.5)),
                          n_max=int(cfg.get("n_max", 5)), gamma_method=cfg.get("gamma_method", "BruteForce"),
                          gamma_extension=cfg.get("gamma_extension"))
    A = operator_from_dict(spec.operator)
    x_dag = make_x_dagger(spec.x_dagger, A.N)
    rf = RateFunction.build(build_gamma(spec, A), x_dag)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    report = check_vsc(A, x_dag, rf, spec.mu, SampleSpec(count=int(cfg.get("samples", 10_000)), seed=seed))
    _write(Path(args.out or "."), "vsc.json", report.to_dict())
    print(f"beta={report.beta:.6f} samples={report.samples_checked} max_violation={report.max_violation:.3e} "
          f"max_pm_violation={report.max_pm_violation:.3e}")
    if report.max_violation > VSC_TOL or report.max_pm_violation > VSC_TOL:
        raise CertificateFailure("variational source condition violated")


def cmd_density(args):
    cfg = _load_config(args.config, {"operator", "target", "n", "eps"}, ("operator", "target", "n", "eps"))
    A = operator_from_dict(cfg["operator"])
    target = cfg["target"]
    if isinstance(target, int):
        k = target
        target = np.zeros(A.N)
        if not 1 <= k <= A.N:
            raise ArgumentError(f"target index {k} outside [1, {A.N}]")
        target[k - 1] = 1.0
    target = np.asarray(target, dtype=float)
    n, eps = int(cfg["n"]), float(cfg["eps"])
    eta, xi_t = constructive_approximation(A, target, n, eps)
    payload = {
        "eta": eta, "xi_tilde": xi_t,
        "prefix_error": float(np.max(np.abs(xi_t[:n] - target[:n]), initial=0.0)),
        "tail_error": float(np.max(np.abs(xi_t[n:] - target[n:]), initial=0.0)),
        "eps": eps,
        "range_closure_distance": [check_range_closure(A, k) for k in range(1, A.N + 1)],
    }
    _write(Path(args.out or "."), "density.json", payload)
    print(f"prefix_error={payload['prefix_error']:.3e} tail_error={payload['tail_error']:.3e} eps={eps:g}")


def cmd_diagnose(args):
    cfg = _load_config(args.config, {"operator"}, ("operator",))
    diag = diagnose(operator_from_dict(cfg["operator"]))
    if args.out:
        _write(Path(args.out), "diagnose.json", diag.to_dict())
    print(dump_json(diag.to_dict()), end="")


COMMANDS = {
    "solve": (cmd_solve, "solve one Tikhonov instance"),
    "rates": (cmd_rates, "run a convergence-rate experiment"),
    "gamma": (cmd_gamma, "certify the source condition and tabulate gamma_n"),
    "vsc-check": (cmd_vsc_check, "sample the variational source condition"),
    "density": (cmd_density, "constructive range approximation demo"),
    "diagnose": (cmd_diagnose, "operator singular values and injectivity"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", metavar="DIR", default=None, help="output directory")
    common.add_argument("--trace", action="store_true", help="dump discrepancy bisection traces")
    common.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="l1rates", parents=[common],
                                     description="l1-regularized Tikhonov rates and source-condition checks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ARGS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.trace and args.command == "solve":
            logger.info("--trace has no effect for solve")
        args.func(args)
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (InvalidCertificateError, CertificateFailure) as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
