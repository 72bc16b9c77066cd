import json
import math

import numpy as np
import pytest

from levyrd.coefficients import DiffusionSpec, DriftSpec
from levyrd.diagnostics import (EstimateReport, apriori_bound_check, bootstrap_ci, cauchy_decay_fit, fit_log2_rate,
                                moment_estimate, ou_oracle, skorohod_distance, sup_increment_check,
                                uniform_distance, write_summary_csv)
from levyrd.noise import SpectralNoiseSpec
from levyrd.prm import AtomicMeasure, IntervalDensity, InfiniteMomentError, TemperedStable
from levyrd.solver import GridScheme, replica_seeds, run_scheme
from levyrd.spectral import Norm, PathRecord, dirichlet_laplacian

from oracles import weighted_free_moment


@pytest.fixture(scope="module")
def op():
    return dirichlet_laplacian(8)


def _single_mode_free(op, x, level):
    x0 = np.zeros(op.modes)
    x0[0] = x
    return run_scheme(GridScheme(op, level, x0), [0])


def test_moment_estimate_free_closed_form(op):
    sol = _single_mode_free(op, 2.0, 12)
    rep = moment_estimate(sol, 2.0, 1.0, Norm("B"))
    ref = weighted_free_moment(2.0, op.rates[0], 1.0, 2.0, 1.0)
    assert rep.value == pytest.approx(ref, rel=1e-5)
    assert rep.verdict and rep.replicas == 1


def test_moment_estimate_oracle_verdict(op):
    sol = _single_mode_free(op, 1.0, 10)
    ref = weighted_free_moment(1.0, op.rates[0], 1.0, 2.0, 1.0)
    assert moment_estimate(sol, 2.0, 1.0, oracle=ref, tolerance=1e-3 * ref).verdict
    assert not moment_estimate(sol, 2.0, 1.0, oracle=2 * ref, tolerance=1e-3 * ref).verdict


def test_moment_estimate_zero_and_homogeneity(op):
    zero = _single_mode_free(op, 0.0, 6)
    assert moment_estimate(zero, 1.5, 1.0).value == 0.0
    a = moment_estimate(_single_mode_free(op, 1.0, 6), 1.5, 1.0).value
    b = moment_estimate(_single_mode_free(op, 2.0, 6), 1.5, 1.0).value
    assert b == pytest.approx(2 ** 1.5 * a, rel=1e-12)
    with pytest.raises(ValueError):
        moment_estimate(np.empty(0), 2.0, 1.0)


def test_moment_estimate_interval_contains_mean():
    vals = np.random.default_rng(0).exponential(size=500)
    rep = moment_estimate(vals, 2.0, 1.0)
    assert rep.details["ci_low"] < rep.value < rep.details["ci_high"]


def test_bootstrap_reproducible():
    vals = np.random.default_rng(1).normal(size=100)
    assert bootstrap_ci(vals, 3) == bootstrap_ci(vals, 3)


def _record(op, t, fn):
    s = np.zeros((t.size, op.modes))
    s[:, 0] = fn(t)
    return PathRecord(t, s, op)


def test_apriori_zero_v_exact_rhs(op):
    t = np.linspace(0, 2, 101)
    z = _record(op, t, lambda t: 0.0 * t)
    v = _record(op, t, lambda t: 0.0 * t)
    k, k0 = 1.5, 2.0
    rep = apriori_bound_check(z, v, k, lambda r: k0 + 0.0 * r, norm="B")
    assert np.allclose(rep.details["rhs"], k0 * (1 - np.exp(-k * t)) / k, rtol=1e-13, atol=1e-15)
    assert rep.verdict


def test_apriori_linear_a_exact(op):
    # a(r) = r and v(s) = s: rhs = int_0^t e^{-k(t-s)} s ds
    t = np.linspace(0, 1, 17)
    v = _record(op, t, lambda t: t)
    z = _record(op, t, lambda t: 0.0 * t)
    k = 2.0
    rep = apriori_bound_check(z, v, k, lambda r: r, norm="B")
    ref = t / k - (1 - np.exp(-k * t)) / k ** 2
    assert np.allclose(rep.details["rhs"], ref, rtol=1e-12, atol=1e-15)


def test_apriori_detects_violation(op):
    t = np.linspace(0, 1, 11)
    z = _record(op, t, lambda t: 1.0 + 0.0 * t)
    v = _record(op, t, lambda t: 0.0 * t)
    rep = apriori_bound_check(z, v, 1.0, lambda r: 0.1 + 0.0 * r, norm="B")
    assert not rep.verdict and math.isinf(rep.value)
    with pytest.raises(ValueError):
        apriori_bound_check(z, _record(op, np.linspace(0, 1, 5), lambda t: t), 1.0, lambda r: r)


def test_apriori_on_scheme_output(op):
    drift = DriftSpec(3, 1, k=1, k0=2)
    noise = SpectralNoiseSpec(3.0, 8, IntervalDensity(-1, 1))
    scheme = GridScheme(op, 6, op.project(np.sin(np.pi * op.grid)), drift, DiffusionSpec("sin"), noise)
    sol = run_scheme(scheme, replica_seeds(0, 4), record_events=True)
    for r in range(4):
        assert apriori_bound_check(sol.drift_path(r), sol.complement_path(r), 1, drift.a, "sup", 0.05).verdict


def test_fit_log2_rate_exact():
    fit = fit_log2_rate([3, 4, 5, 6], [2.0 ** (-0.7 * n + 1) for n in (3, 4, 5, 6)])
    assert fit.theta == pytest.approx(0.7) and fit.intercept == pytest.approx(1.0) and fit.r2 == pytest.approx(1.0)


def test_cauchy_fit_needs_three_levels(op):
    with pytest.raises(ValueError):
        cauchy_decay_fit(GridScheme(op, 4, np.ones(op.modes)), [4, 5], 0)


def test_cauchy_fit_zero_noise_first_order(op):
    scheme = GridScheme(op, 4, op.project(np.sin(np.pi * op.grid)), DriftSpec(3, 1))
    fit = cauchy_decay_fit(scheme, [5, 6, 7, 8], 0, replicas=1)
    assert 0.8 < fit.theta < 1.2 and fit.r2 > 0.99


def test_cauchy_fit_identical_paths_is_nan(op):
    fit = cauchy_decay_fit(GridScheme(op, 4, np.zeros(op.modes)), [3, 4, 5], 0, replicas=1)
    assert math.isnan(fit.theta)


def test_sup_increment_zero_noise(op):
    sol = _single_mode_free(op, 1.0, 6)
    free = sol.path(0)
    zero = PathRecord(free.times, np.zeros_like(free.states), op)
    rep = sup_increment_check([zero], 0.7, 0.1, [0.1, 0.2, 0.4])
    assert rep.verdict and np.all(rep.details["estimates"] == 0)


def test_sup_increment_positive_exponent(op):
    noise = SpectralNoiseSpec(2.0, 8, IntervalDensity(-1, 1))
    scheme = GridScheme(op, 7, np.zeros(op.modes), None, DiffusionSpec("const", 1.0), noise)
    sol = run_scheme(scheme, replica_seeds(3, 64), record_events=True)
    paths = [sol.noise_path(r) for r in range(64)]
    rep = sup_increment_check(paths, 0.6, 0.0, [1 / 32, 1 / 8, 1 / 2], t1=0.25)
    est = rep.details["estimates"]
    assert rep.verdict and np.all(np.diff(est) >= 0)
    assert rep.details["precondition"]


def _step(op, times, values, T=1.0):
    t = np.append(times, T)
    s = np.zeros((t.size, op.modes))
    s[:, 0] = np.append(values, values[-1])
    return PathRecord(t, s, op)


def test_skorohod_equal_and_shift(op):
    x = _step(op, [0.0, 0.5], [0.0, 1.0])
    assert skorohod_distance(x, x) == 0.0
    y = _step(op, [0.0, 0.5 + 0.01], [0.0, 1.0])
    assert skorohod_distance(x, y) == pytest.approx(0.01, abs=1e-12)
    assert uniform_distance(x, y) == pytest.approx(1.0)


def test_skorohod_properties(op):
    rng = np.random.default_rng(5)

    def random_step():
        t = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, 4))])
        return _step(op, t, rng.normal(size=5))

    for _ in range(20):
        x, y, w = random_step(), random_step(), random_step()
        dxy = skorohod_distance(x, y)
        assert dxy <= uniform_distance(x, y) + 1e-15
        assert dxy == pytest.approx(skorohod_distance(y, x), abs=1e-12)
        assert dxy <= skorohod_distance(x, w) + skorohod_distance(w, y) + 1e-12


def test_skorohod_window_mismatch(op):
    with pytest.raises(ValueError):
        skorohod_distance(_step(op, [0.0], [1.0]), _step(op, [0.0], [1.0], T=2.0))


def test_ou_oracle_values(op):
    nu = AtomicMeasure([1.0], [1.0])
    assert ou_oracle(op, 1, 1.0, nu, 0.0, x=0.3) == (0.3, 0.0)
    mean, var = ou_oracle(op, 1, 1.0, nu, 0.1)
    assert mean == 0.0
    assert var == pytest.approx(0.0436232716, rel=1e-9)
    assert ou_oracle(op, 2, 2.0, nu, math.inf) == (0.0, pytest.approx(4.0 / (2 * op.rates[1])))
    with pytest.raises(InfiniteMomentError):
        ou_oracle(op, 1, 1.0, TemperedStable(1.0, 1.0, index=1.5, tempering=0.0, epsilon=0.1), 1.0)


def test_report_serialization(tmp_path):
    rep = EstimateReport("x", 1.5, 2.0, 0.1, True, 3, [np.uint64(7)], {"a": np.arange(2), "b": math.inf})
    d = json.loads(rep.to_json(tmp_path / "r.json"))
    assert d["seeds"] == [7] and d["details"]["a"] == [0, 1] and d["details"]["b"] == "inf"
    assert json.loads((tmp_path / "r.json").read_text()) == d
    write_summary_csv([rep, EstimateReport("y", 0.5, None, verdict=False)], tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines == ["name,value,bound,verdict", "x,1.5,2.0,pass", "y,0.5,,fail"]
