import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyrd.spectral import (Norm, PathRecord, SpectralField, dirichlet_laplacian, frac_power_apply, interp_norm,
                             interp_norm_single_mode, lp_lambda_norm, semigroup_apply, smoothing_bound,
                             smoothing_profile, w_alpha_p_norm)

from oracles import single_mode_interp_integral


@pytest.fixture(scope="module")
def op():
    return dirichlet_laplacian(8)


def test_first_eigenvalue():
    assert dirichlet_laplacian(1).eigenvalues[0] == pytest.approx(math.pi ** 2, rel=1e-15)


def test_eigenvalue_ratio():
    ev = dirichlet_laplacian(3).eigenvalues
    assert ev[2] / ev[0] == pytest.approx(9.0, rel=1e-15)


def test_orthonormal_on_grid(op):
    gram = op.basis @ op.basis.T * op.weight
    assert np.max(np.abs(gram - np.eye(op.modes))) < 1e-12


def test_eigenfunctions_are_sines(op):
    xi = np.array([0.1, 0.37, 0.5])
    assert np.allclose(op.evaluator(xi)[2], math.sqrt(2) * np.sin(3 * math.pi * xi))


def test_field_round_trip(op):
    c = np.random.default_rng(0).normal(size=op.modes)
    u = SpectralField(c, op)
    assert np.allclose(SpectralField.from_grid(u.grid_values(), op).coefficients, c, atol=1e-13)


def test_semigroup_identity_at_zero(op):
    u = SpectralField(np.arange(1.0, 9.0), op)
    assert np.array_equal(semigroup_apply(op, 0.0, u).coefficients, u.coefficients)


def test_semigroup_single_mode(op):
    e1 = np.eye(op.modes)[0]
    assert semigroup_apply(op, 1.0, e1)[0] == pytest.approx(math.exp(-math.pi ** 2), rel=1e-14)


def test_semigroup_negative_time(op):
    with pytest.raises(ValueError):
        semigroup_apply(op, -0.1, np.ones(op.modes))


def test_semigroup_property_and_contraction(op):
    rng = np.random.default_rng(1)
    c = rng.normal(size=op.modes)
    a = semigroup_apply(op, 0.3, semigroup_apply(op, 0.2, c))
    b = semigroup_apply(op, 0.5, c)
    # exp rounding grows with rho t, about 1e-13 relative at rho t ~ 300
    assert np.allclose(a, b, rtol=1e-12, atol=0)
    for t in (0.0, 1e-3, 0.1, 2.0):
        assert Norm("B")(semigroup_apply(op, t, c), op) <= Norm("B")(c, op) + 1e-15


def test_smoothing_rate(op):
    t = np.logspace(-4, 0, 50)
    for alpha in (0.0, 0.25, 0.5, 1.0):
        assert np.all(smoothing_profile(op, alpha, t) <= smoothing_bound(alpha, t) * (1 + 1e-12))


def test_smoothing_check_random_fields(op):
    rng = np.random.default_rng(2)
    bound = math.sqrt(0.5 / math.e)
    for t in np.logspace(-4, 0, 20):
        for _ in range(20):
            c = rng.normal(size=op.modes)
            val = Norm("B")(frac_power_apply(op, 0.5, semigroup_apply(op, t, c)), op) * math.sqrt(t)
            assert val <= bound * Norm("B")(c, op) * (1 + 1e-12)


def test_frac_powers(op):
    c = np.random.default_rng(3).normal(size=op.modes)
    assert np.array_equal(frac_power_apply(op, 0.0, c), c)
    assert np.allclose(frac_power_apply(op, -1.0, frac_power_apply(op, 1.0, c)), c, rtol=1e-15, atol=0)
    assert np.allclose(frac_power_apply(op, 0.5, frac_power_apply(op, 0.5, c)), frac_power_apply(op, 1.0, c),
                       rtol=1e-14)


def test_interp_norm_zero(op):
    assert interp_norm(np.zeros(op.modes), 0.5, 2.0, op) == 0.0


@pytest.mark.parametrize("p", [1.5, 2.0])
@pytest.mark.parametrize("delta", [0.25, 0.5, 0.75])
def test_interp_norm_single_mode_oracle(op, delta, p):
    for i in (0, 3, 7):
        u = np.eye(op.modes)[i]
        ref = single_mode_interp_integral(op.rates[i], delta, p)
        assert interp_norm(u, delta, p, op) - 1.0 == pytest.approx(ref, rel=1e-4)
        assert interp_norm_single_mode(op.rates[i], delta, p) == pytest.approx(ref, rel=1e-8)


def test_interp_norm_increasing_in_delta(op):
    e1 = np.eye(op.modes)[0]
    vals = [float(interp_norm(e1, d, 2.0, op)) for d in (0.25, 0.5, 0.75)]
    assert vals[0] < vals[1] < vals[2]


def test_interp_norm_comparable_to_power(op):
    for delta in (0.25, 0.5, 0.75):
        ratios = [float(interp_norm(np.eye(op.modes)[i], delta, 2.0, op)) / op.rates[i] ** delta
                  for i in range(op.modes)]
        assert max(ratios) / min(ratios) < 3.0


def test_norm_kinds(op):
    c = np.random.default_rng(4).normal(size=op.modes)
    assert Norm("X", p=2, delta=0.5, theta=0.5)(c, op) == pytest.approx(np.linalg.norm(c * op.rates ** 0.25))
    assert Norm("X", p=1.5).is_proxy and not Norm("X", p=2).is_proxy
    assert Norm("sup")(c, op) == pytest.approx(np.max(np.abs(op.synthesize(c))))
    with pytest.raises(ValueError):
        Norm("Q")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), scale=st.floats(-5, 5), kind=st.sampled_from(["B", "E", "X", "sup"]),
       p=st.sampled_from([1.5, 2.0]))
def test_norm_homogeneous_and_triangle(seed, scale, kind, p):
    op = dirichlet_laplacian(6)
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, op.modes))
    nrm = Norm(kind, p=p, delta=0.4, theta=0.3)
    assert nrm(scale * x, op) == pytest.approx(abs(scale) * nrm(x, op), rel=1e-9, abs=1e-12)
    assert nrm(x + y, op) <= nrm(x, op) + nrm(y, op) + 1e-9


def _const_path(op, value, horizon=1.0, n=2 ** 10):
    t = np.linspace(0, horizon, n + 1)
    return PathRecord(t, np.tile(value, (t.size, 1)), op)


def test_lp_lambda_constant(op):
    H = 20.0
    path = _const_path(op, np.eye(op.modes)[0], horizon=H, n=2 ** 14)
    assert lp_lambda_norm(path, 2.0, 1.0) == pytest.approx(1 - math.exp(-H), rel=1e-6)


def test_lp_lambda_zero_and_bad_lambda(op):
    path = _const_path(op, np.zeros(op.modes))
    assert lp_lambda_norm(path, 2.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        lp_lambda_norm(path, 2.0, 0.0)


def test_lp_lambda_exponential(op):
    H = 12.0
    t = np.linspace(0, H, 2 ** 14 + 1)
    states = np.zeros((t.size, op.modes))
    states[:, 0] = np.exp(-t)
    ref = (1 - math.exp(-3 * H)) / 3
    assert lp_lambda_norm(PathRecord(t, states, op), 2.0, 1.0) == pytest.approx(ref, rel=1e-5)


def test_lp_lambda_respects_jumps(op):
    # a unit jump at t = 0.5 recorded with its left limit is integrated exactly
    t = np.array([0.0, 0.5, 1.0])
    right = np.zeros((3, op.modes))
    right[1:, 0] = 1.0
    left = right.copy()
    left[1, 0] = 0.0
    path = PathRecord(t, right, op, left)
    assert lp_lambda_norm(path, 2.0, 1e-12) == pytest.approx(0.5, rel=1e-9)


def _jump_path(op, n):
    t = np.linspace(0, 2, n + 1)
    s = np.zeros((t.size, op.modes))
    s[t >= 1.0, 0] = 1.0
    left = s.copy()
    left[np.searchsorted(t, 1.0), 0] = 0.0
    return PathRecord(t, s, op, left)


def test_w_alpha_p_constant_zero(op):
    val, _ = w_alpha_p_norm(_const_path(op, np.ones(op.modes)), 0.2, 1.5, 1.0)
    assert val == 0.0


def test_w_alpha_p_refinement_stable(op):
    vals = [w_alpha_p_norm(_jump_path(op, n), 0.2, 1.5, 1.0)[0] for n in (200, 400, 800)]
    assert all(math.isfinite(v) and v > 0 for v in vals)
    assert abs(vals[1] - vals[0]) / vals[0] < 0.05
    assert abs(vals[2] - vals[1]) / vals[1] < 0.05


def test_w_alpha_p_homogeneity(op):
    path = _jump_path(op, 200)
    a = w_alpha_p_norm(path, 0.2, 1.5, 1.0)[0]
    b = w_alpha_p_norm(path.scaled(2.0), 0.2, 1.5, 1.0)[0]
    assert b ** 1.5 == pytest.approx(2 ** 1.5 * a ** 1.5, rel=1e-12)


def test_path_record_validation(op):
    with pytest.raises(ValueError):
        PathRecord(np.array([0.0, 0.0]), np.zeros((2, op.modes)), op)
    with pytest.raises(ValueError):
        PathRecord(np.array([0.0, 1.0]), np.zeros((2, op.modes + 1)), op)


def test_path_record_csv_round_trip(op, tmp_path):
    path = _jump_path(op, 8)
    f = tmp_path / "path.csv"
    path.to_csv(f)
    back = PathRecord.from_csv(f, op)
    assert np.array_equal(back.times, path.times)
    assert np.array_equal(back.states, path.states)
    assert np.array_equal(back.left_states, path.left_states)
    assert np.array_equal(path.jump_indices(), [4])
