import json
import math

import numpy as np
import pytest

from l1rates.exceptions import ArgumentError, InvalidCertificateError
from l1rates.harness import (CSV_HEADER, ExperimentSpec, delta_grid, fit_slope, make_noise,
                             make_x_dagger, run_experiment, write_report)


def sparse_spec(**overrides):
    spec = {
        "operator": {"family": "Diagonal", "params": {"a": 1}, "N": 16},
        "x_dagger": {"kind": "Sparse", "support": [1, 2], "values": [1.0, 0.5]},
        "mu": 0.5,
        "delta_grid": {"d_min": 1e-5, "d_max": 1e-2, "points": 6},
        "rule": {"kind": "Discrepancy", "tau": 1.5},
        "seed": 11,
    }
    spec.update(overrides)
    return spec


def test_make_noise_exact_norm_and_determinism():
    y = np.linspace(-1, 1, 9)
    a = make_noise(y, 0.1, 5)
    assert abs(np.linalg.norm(a - y) - 0.1) <= 1e-15
    assert np.array_equal(a, make_noise(y, 0.1, 5))
    b = make_noise(y, 0.1, 6)
    assert not np.allclose(a, b)
    assert abs(np.linalg.norm(b - y) - 0.1) <= 1e-15
    with pytest.raises(ArgumentError):
        make_noise(y, 0.0, 1)


def test_fit_slope_perfect_line():
    d = np.geomspace(1e-5, 1e-2, 12)
    slope, intercept = fit_slope(d, 0.5 * d)
    assert slope == pytest.approx(1.0, abs=1e-12)
    assert math.exp(intercept) == pytest.approx(0.5, rel=1e-10)
    assert math.isnan(fit_slope([1e-3], [1e-3])[0])


def test_x_dagger_generators():
    np.testing.assert_array_equal(make_x_dagger({"kind": "Sparse", "support": [2], "values": [3.0]}, 3), [0, 3, 0])
    np.testing.assert_allclose(make_x_dagger({"kind": "PowerTail", "s": 2}, 3), [1, 0.25, 1 / 9])
    np.testing.assert_array_equal(make_x_dagger({"kind": "Custom", "values": [1, 2]}, 3), [1, 2, 0])
    for bad in ({"kind": "PowerTail", "s": 1.0}, {"kind": "Sparse", "support": [4], "values": [1]},
                {"kind": "Other"}, {"kind": "Custom", "values": [1, 2, 3, 4]}):
        with pytest.raises(ArgumentError):
            make_x_dagger(bad, 3)


def test_delta_grid_defaults():
    g = delta_grid({"d_min": 1e-5, "d_max": 1e-2})
    assert len(g) == 37 and g[0] == pytest.approx(1e-5) and g[-1] == pytest.approx(1e-2)
    assert len(delta_grid({"d_min": 1e-8, "d_max": 1.0})) == 40
    with pytest.raises(ArgumentError):
        delta_grid({"d_min": 1e-2, "d_max": 1e-5})


def test_spec_rejects_unknown_keys():
    with pytest.raises(ArgumentError):
        ExperimentSpec.from_dict(sparse_spec(colour="red"))
    with pytest.raises(ArgumentError):
        ExperimentSpec.from_dict(sparse_spec(rule={"kind": "Discrepancy", "c1": 1}))
    with pytest.raises(ArgumentError):
        ExperimentSpec.from_dict(sparse_spec(mu=1.0))


def test_synthetic_error_injection_slope():
    rep = run_experiment(sparse_spec(delta_grid={"d_min": 1e-5, "d_max": 1e-2, "points": 12}),
                         error_override=lambda d: 0.5 * d)
    assert abs(rep.slope - 1.0) <= 1e-6


def test_report_rows_sorted_and_consistent():
    rep = run_experiment(sparse_spec())
    deltas = [r.delta for r in rep.rows]
    assert deltas == sorted(deltas)
    assert rep.bound_satisfied == all(r.error_l1 <= r.bound for r in rep.rows)
    assert rep.bound_satisfied
    for r in rep.rows:
        assert r.delta <= r.discrepancy + 1e-8 and r.discrepancy <= 1.5 * r.delta + 1e-8
    assert rep.metadata["tail_at_N"] == 0.0 and rep.metadata["N"] == 16


def test_zero_solution_rows():
    # ||y_delta|| <= ||y_true|| + delta ~ 1.03 + delta <= 1.5 delta once delta >= 2.1
    spec = sparse_spec(delta_grid={"d_min": 3.0, "d_max": 10.0, "points": 3})
    rep = run_experiment(spec)
    for r in rep.rows:
        assert r.alpha == math.inf and r.error_l1 == pytest.approx(1.5)


def test_determinism_byte_identical(tmp_path):
    a = run_experiment(sparse_spec())
    b = run_experiment(sparse_spec())
    assert a.csv_text() == b.csv_text()
    write_report(a, tmp_path / "a", plot=False)
    write_report(b, tmp_path / "b", plot=False)
    for name in ("report.csv", "plotdata.dat"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    c = run_experiment(sparse_spec(seed=12))
    assert c.csv_text() != a.csv_text()


def test_report_files(tmp_path):
    rep = run_experiment(sparse_spec())
    written = write_report(rep, tmp_path, plot=True, trace=True)
    names = {p.name for p in written}
    assert {"report.csv", "report.json", "plotdata.dat", "rates.png"} <= names
    assert any(n.startswith("trace_") for n in names)
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) == "delta,alpha,discrepancy,error_l1,phi_delta,bound,solver_iters,converged"
    assert len(lines) == 7 and all(line.endswith(",true") for line in lines[1:])
    data = np.loadtxt(tmp_path / "plotdata.dat")
    assert data.shape == (6, 3)
    np.testing.assert_allclose(data[:, 0], np.log10([r.delta for r in rep.rows]))
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["bound_satisfied"] is True and len(payload["rows"]) == 6
    assert (tmp_path / "rates.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_invalid_gamma_aborts():
    m = np.eye(4)
    m[:, 1] = m[:, 0]
    spec = sparse_spec(operator={"family": "Custom", "matrix": m.tolist()}, n_max=2)
    with pytest.raises(InvalidCertificateError):
        run_experiment(spec)


def test_extension_requires_diagonal():
    spec = sparse_spec(operator={"family": "Bidiagonal", "N": 8}, gamma_extension="DiagonalClosedForm")
    with pytest.raises(ArgumentError):
        run_experiment(spec)


def test_miscalibrated_a_priori_rule_has_smaller_slope():
    grid = {"d_min": 1e-5, "d_max": 1e-2, "points": 12}
    disc = run_experiment(sparse_spec(delta_grid=grid, seed=0))
    bad = run_experiment(sparse_spec(delta_grid=grid, seed=0, rule={"kind": "APriori"}, phi_override="constant"))
    assert disc.slope >= 0.9
    assert bad.slope < disc.slope
