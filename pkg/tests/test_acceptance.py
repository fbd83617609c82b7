"""Exit criteria, one test per criterion; a PASS/FAIL line each is printed in the summary."""
import time

import numpy as np
import pytest

from l1rates.core_types import complement, norm, project, tail_sum
from l1rates.harness import run_experiment
from l1rates.operators import apply, apply_adjoint, make_operator
from l1rates.param_rules import DiscrepancyRule, choose_discrepancy
from l1rates.solver import SolverOptions, TikhonovProblem, solve
from l1rates.source_cert import (GammaMethod, GammaTable, compute_gamma_table, constructive_approximation,
                                 diagonal_closed_form_gammas, extend_gamma_table, find_witness,
                                 sign_patterns)
from l1rates.vsc_rate import RateFunction, SampleSpec, beta_from_mu, check_vsc

from oracles import tikhonov_by_support_enumeration

pytestmark = pytest.mark.acceptance

OPERATORS_16 = [
    ("Diagonal", {"a": 1}),
    ("Bidiagonal", {"a": 1, "lam": 0.5}),
    ("CumulativeAverage", {}),
]
SPARSE_16 = {
    "operator": {"family": "Diagonal", "params": {"a": 1}, "N": 16},
    "x_dagger": {"kind": "Sparse", "support": [1, 2], "values": [1.0, 0.5]},
    "mu": 0.5,
    "delta_grid": {"d_min": 1e-5, "d_max": 1e-2, "points": 12},
    "p": 2.0,
    "seed": 0,
}


def test_1_condition_certification(acceptance_log):
    start = time.perf_counter()
    worst_match = worst_excess = -np.inf
    problems = failures = 0
    for family, params in OPERATORS_16:
        A = make_operator(family, params, N=16)
        for mu in (0.3, 0.5, 0.7):
            table = compute_gamma_table(A, mu, 5, GammaMethod.BRUTE_FORCE)
            assert table.valid
            for pat in sign_patterns(5, GammaMethod.BRUTE_FORCE):
                cert = find_witness(A, 5, mu, pat)
                problems += 1
                worst_match = max(worst_match, cert.match_residual)
                worst_excess = max(worst_excess, cert.tail_excess)
                failures += not (cert.feasible and cert.match_residual <= 1e-8 and cert.tail_excess <= 1e-8)
    elapsed = time.perf_counter() - start
    ok = problems == 3 * 3 * (3 ** 5 - 1) and failures == 0 and elapsed <= 120
    acceptance_log(1, ok, f"{problems} witness QPs, {failures} infeasible, max match {worst_match:.1e}, "
                          f"max tail excess {worst_excess:.1e}, {elapsed:.1f}s")
    assert ok


def test_2_closed_form_gamma(acceptance_log):
    diag = compute_gamma_table(make_operator("Diagonal", {"a": 1}, N=16), 0.5, 5)
    expected = np.sqrt(np.cumsum(np.arange(1, 6) ** 2.0))
    err_diag = float(np.max(np.abs(np.array(diag.gammas) / expected - 1)))
    ident = compute_gamma_table(make_operator("Diagonal", {"a": 0}, N=16), 0.5, 5)
    err_id = float(np.max(np.abs(np.array(ident.gammas) / np.sqrt(np.arange(1, 6)) - 1)))
    ok = err_diag <= 1e-8 and err_id <= 1e-8
    acceptance_log(2, ok, f"diagonal rel err {err_diag:.1e}, identity rel err {err_id:.1e}")
    assert ok


@pytest.mark.parametrize("kind", ["sparse", "powertail"])
def test_3_vsc_empirical(kind, acceptance_log):
    start = time.perf_counter()
    A = make_operator("Diagonal", {"a": 1}, N=32)
    if kind == "sparse":
        x = np.zeros(32)
        x[:2] = [1.0, 0.5]
    else:
        x = np.arange(1, 33) ** -2.0
    table = extend_gamma_table(compute_gamma_table(A, 0.5, 5), diagonal_closed_form_gammas(1, 32))
    rep = check_vsc(A, x, RateFunction.build(table, x), 0.5, SampleSpec(count=10_000, seed=2024))
    elapsed = time.perf_counter() - start
    ok = (rep.max_violation <= 1e-8 and rep.beta == beta_from_mu(0.5) and rep.samples_checked == 10_000
          and elapsed <= 60)
    acceptance_log(3, ok, f"{kind}: max violation {rep.max_violation:.2e} over {rep.samples_checked} samples "
                          f"(pm {rep.max_pm_violation:.2e}), {elapsed:.1f}s")
    assert ok


def test_4_sparse_rate_discrepancy(acceptance_log):
    start = time.perf_counter()
    rep = run_experiment(dict(SPARSE_16, rule={"kind": "Discrepancy", "tau": 1.5}))
    elapsed = time.perf_counter() - start
    factor = (1 + 1.5) / beta_from_mu(0.5)
    violations = sum(r.error_l1 > factor * r.phi_delta for r in rep.rows)
    ok = (len(rep.rows) == 12 and rep.slope >= 0.9 and violations == 0 and rep.bound_satisfied
          and all(r.converged for r in rep.rows) and elapsed <= 120)
    acceptance_log(4, ok, f"slope {rep.slope:.3f}, {violations} bound violations, "
                          f"max error/bound {max(r.error_l1 / r.bound for r in rep.rows):.3f}, {elapsed:.1f}s")
    assert ok


def test_5_sparse_rate_a_priori(acceptance_log):
    start = time.perf_counter()
    rep = run_experiment(dict(SPARSE_16, rule={"kind": "APriori", "c1": 1.0, "c2": 1.0}))
    elapsed = time.perf_counter() - start
    beta = beta_from_mu(0.5)
    violations = sum(r.error_l1 > (2 + 3 ** (1 / (2 - 1))) / beta * r.phi_delta for r in rep.rows)
    alpha_ok = all(abs(r.alpha - r.delta ** 2 / r.phi_delta) <= 1e-15 * r.alpha for r in rep.rows)
    ok = violations == 0 and alpha_ok and all(r.converged for r in rep.rows) and elapsed <= 60
    acceptance_log(5, ok, f"{violations} violations of (5/beta) phi, alpha = delta^2/phi: {alpha_ok}, "
                          f"slope {rep.slope:.3f}, {elapsed:.1f}s")
    assert ok


def test_6_non_sparse_rate(acceptance_log):
    start = time.perf_counter()
    rep = run_experiment({
        "operator": {"family": "Diagonal", "params": {"a": 1}, "N": 256},
        "x_dagger": {"kind": "PowerTail", "s": 2},
        "mu": 0.5,
        "delta_grid": {"d_min": 1e-5, "d_max": 1e-2, "points": 12},
        "rule": {"kind": "Discrepancy", "tau": 1.5},
        "n_max": 5,
        "gamma_extension": "DiagonalClosedForm",
        "seed": 0,
    })
    elapsed = time.perf_counter() - start
    factor = 2.5 / beta_from_mu(0.5)
    violations = sum(r.error_l1 > factor * r.phi_delta for r in rep.rows)
    ok = (violations == 0 and 0.15 < rep.slope < 0.95 and all(r.converged for r in rep.rows)
          and rep.metadata["tail_at_N"] == 0.0 and rep.metadata["gamma"]["n_certified"] == 5
          and elapsed <= 300)
    acceptance_log(6, ok, f"slope {rep.slope:.3f}, {violations} bound violations, {elapsed:.1f}s")
    assert ok


def test_7_solver_oracle_equivalence(acceptance_log):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        N = int(rng.integers(1, 9))
        M = int(rng.integers(N, 9))
        A = make_operator("Custom", {"matrix": rng.standard_normal((M, N))})
        y = rng.standard_normal(M)
        alpha = float(10 ** rng.uniform(-2, 0.5))
        res = solve(TikhonovProblem(A, y, alpha, 2.0))
        ref = tikhonov_by_support_enumeration(A.matrix, y, alpha)
        worst = max(worst, float(np.max(np.abs(res.x - ref))))
    ok = worst <= 1e-6
    acceptance_log(7, ok, f"50 problems, max l_inf deviation from enumeration oracle {worst:.1e}")
    assert ok


def test_8_constructive_density(acceptance_log):
    A = make_operator("Bidiagonal", {"a": 1, "lam": 0.5}, N=8)
    prefix_err, ok_tail, monotone = 0.0, True, True
    for k in range(1, 5):
        target = np.eye(8)[k - 1]
        achieved = []
        for eps in (0.5, 0.1, 0.02):
            _, xi_t = constructive_approximation(A, target, k, eps)
            prefix_err = max(prefix_err, float(np.max(np.abs(xi_t[:k] - target[:k]))))
            tail = float(np.max(np.abs(xi_t[k:] - target[k:])))
            ok_tail &= tail <= eps + 1e-9
            achieved.append(tail)
        monotone &= all(b <= a + 1e-12 for a, b in zip(achieved, achieved[1:]))
    ok = prefix_err <= 1e-9 and ok_tail and monotone
    acceptance_log(8, ok, f"max prefix error {prefix_err:.1e}, tail bounds {ok_tail}, monotone in eps {monotone}")
    assert ok


def test_9_property_suites(acceptance_log):
    rng = np.random.default_rng(9)
    cases = 1000
    checks = {}

    # rate function: phi(0) = 0, concave, nondecreasing, phi(t)/t nonincreasing
    ok = True
    for _ in range(cases):
        n = int(rng.integers(1, 20))
        gam = np.cumsum(rng.uniform(0, 3, n)) + rng.uniform(1e-3, 1)
        x = np.zeros(int(rng.integers(n, 25)))
        x[:n] = rng.standard_normal(n)
        rf = RateFunction.build(GammaTable(mu=0.5, gammas=tuple(gam), worst_patterns=(), method="Custom"), x)
        s, t = np.sort(rng.uniform(1e-9, 5, 2))
        ps, pt, pm = rf(s), rf(t), rf(0.5 * (s + t))
        tol = 1e-12 * max(1.0, pt)
        ok &= rf(0.0) == 0.0 and pm >= 0.5 * (ps + pt) - tol and ps <= pt + tol
        ok &= pt / t <= ps / s * (1 + 1e-12)
    checks["phi"] = ok

    # adjoint consistency
    ok = True
    for _ in range(cases):
        M, N = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        A = make_operator("Custom", {"matrix": rng.standard_normal((M, N))})
        x, eta = rng.standard_normal(N), rng.standard_normal(M)
        lhs = apply(A, x) @ eta
        ok &= abs(lhs - x @ apply_adjoint(A, eta)) <= 1e-10 * (1 + abs(lhs))
    checks["adjoint"] = ok

    # projector algebra
    ok = True
    for _ in range(cases):
        x = rng.standard_normal(int(rng.integers(1, 30))) * 10 ** rng.uniform(-3, 3)
        n = int(rng.integers(1, x.size + 1))
        Px = project(n, x)
        ok &= np.array_equal(project(n, Px), Px) and np.array_equal(Px + complement(n, x), x)
        ok &= abs(norm(Px) + tail_sum(x, n) - norm(x)) <= 1e-12 * x.size * max(norm(x), 1.0)
    checks["projector"] = ok

    # discrepancy monotonicity along bisection traces
    ok = True
    opts = SolverOptions()
    A = make_operator("Bidiagonal", {"a": 1, "lam": 0.5}, N=8)
    for _ in range(cases // 10):
        x = np.zeros(8)
        x[:3] = rng.standard_normal(3)
        delta = float(10 ** rng.uniform(-4, -1))
        noise = rng.standard_normal(8)
        y = A.matrix @ x + delta * noise / np.linalg.norm(noise)
        chosen = choose_discrepancy(DiscrepancyRule(tau=1.5), A, y, delta, opts=opts)
        trace = sorted(chosen.trace)
        ok &= all(d1 <= d2 + 10 * opts.tol for (_, d1, _), (_, d2, _) in zip(trace, trace[1:]))
        if not chosen.is_zero_solution:
            ok &= delta - 10 * opts.tol <= chosen.discrepancy <= 1.5 * delta + 10 * opts.tol
    checks["discrepancy"] = ok

    # determinism of reports
    spec = dict(SPARSE_16, rule={"kind": "Discrepancy", "tau": 1.5},
                delta_grid={"d_min": 1e-4, "d_max": 1e-2, "points": 4})
    checks["determinism"] = run_experiment(spec).csv_text() == run_experiment(spec).csv_text()

    ok = all(checks.values())
    acceptance_log(9, ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok
