import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyrd.prm import (AtomicMeasure, CompensatorError, CompensatorSpec, InfiniteMomentError, IntervalDensity,
                        LevyMeasure, PointMeasure, TemperedStable, compensated_integral, compensated_integrals,
                        compensator, levy_path_from_prm, sample_prm, sample_prm_ensemble, total_p_moment)

from oracles import abs_moment_quad, poisson_mean_band


def test_p_moment_unit_atom():
    assert total_p_moment(AtomicMeasure([1.0], [1.0]), 2.0) == 1.0


def test_p_moment_negative_atom():
    assert total_p_moment(AtomicMeasure([-3.0], [1.0]), 2.0) == 9.0


def test_p_moment_uniform_density():
    nu = IntervalDensity(-1.0, 1.0)
    assert total_p_moment(nu, 1.5) == pytest.approx(0.8, rel=1e-12)
    assert total_p_moment(nu, 1.5) == pytest.approx(abs_moment_quad(-1, 1, 1.5), rel=1e-9)


def test_p_moment_rejects_bad_p():
    with pytest.raises(ValueError):
        total_p_moment(AtomicMeasure([1.0], [1.0]), 2.5)
    with pytest.raises(ValueError):
        total_p_moment(AtomicMeasure([1.0], [1.0]), 1.0)


def test_infinite_moment_raises():
    # without tempering the tail |z|^{p-1-index} is not integrable once p >= index
    nu = TemperedStable(1.0, 1.0, index=0.5, tempering=0.0, epsilon=0.1)
    with pytest.raises(InfiniteMomentError):
        total_p_moment(nu, 1.5)


def test_atom_at_origin_rejected():
    with pytest.raises(ValueError):
        AtomicMeasure([0.0, 1.0], [1.0, 1.0])


def test_tempered_default_epsilon_discards_little():
    nu = TemperedStable(1.0, 1.0, index=1.2, tempering=1.0, p=2.0)
    full = nu.moment(2.0) + nu.discarded_moment(2.0)
    assert nu.discarded_moment(2.0) < 1e-6 * full
    assert math.isfinite(nu.mass())


def test_tempered_sampler_matches_moments():
    nu = TemperedStable(2.0, 1.0, index=0.7, tempering=1.5, epsilon=0.05)
    z = nu.sample(np.random.default_rng(0), 200_000)
    assert np.all(np.abs(z) >= 0.05)
    m = nu.mass()
    assert np.mean(z) == pytest.approx(nu.mean() / m, abs=4 * np.std(z) / math.sqrt(z.size))
    assert np.mean(z > 0) == pytest.approx(2 / 3, abs=0.01)


def test_descriptor_round_trip():
    for nu in (AtomicMeasure([1.0, -2.0], [0.5, 1.5]), IntervalDensity(-1.0, 2.0, value=3.0),
               TemperedStable(1.0, 2.0, index=0.5, tempering=1.0, epsilon=0.01)):
        back = LevyMeasure.from_descriptor(nu.descriptor())
        assert back.descriptor() == nu.descriptor()
        assert back.mass() == pytest.approx(nu.mass())


def test_sample_prm_mean_count():
    nu = AtomicMeasure([1.0], [2.0])
    ens = sample_prm_ensemble(nu, 3.0, 20_000, 1)
    assert abs(ens.counts.mean() - 6.0) < poisson_mean_band(2.0, 3.0, 20_000)


def test_null_measure_empty():
    pm = sample_prm(AtomicMeasure([], []), 5.0, 0)
    assert len(pm) == 0
    assert pm.count() == 0


def test_disjoint_mark_sets_additive():
    nu = IntervalDensity(-1.0, 1.0)
    pm = sample_prm(nu, 10.0, 3)
    b1 = lambda z: z < -0.2
    b2 = lambda z: z > 0.4
    assert pm.count(marks=lambda z: b1(z) | b2(z)) == pm.count(marks=b1) + pm.count(marks=b2)


def test_sample_is_reproducible():
    nu = IntervalDensity(-1.0, 1.0)
    assert sample_prm(nu, 4.0, 42) == sample_prm(nu, 4.0, 42)
    assert not sample_prm(nu, 4.0, 42) == sample_prm(nu, 4.0, 43)


def test_point_measure_validation():
    with pytest.raises(ValueError):
        PointMeasure(1.0, np.array([0.5, 0.5]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        PointMeasure(1.0, np.array([0.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        PointMeasure(1.0, np.array([1.5]), np.array([1.0]))


def test_point_measure_csv_round_trip(tmp_path):
    nu = IntervalDensity(-1.0, 1.0)
    pm = sample_prm(nu, 2.0, 5)
    path = tmp_path / "pm.csv"
    pm.to_csv(path, nu, seed=5)
    back, header = PointMeasure.from_csv(path)
    assert back == pm
    assert header["seed"] == 5 and header["measure"] == nu.descriptor()
    assert path.read_text().splitlines()[1] == "t,z"


def test_compensator_spec():
    assert CompensatorSpec(AtomicMeasure([1.0], [1.0]))(2.5, (1.0, 3.0)) == 5.0


def test_compensated_integral_zero_integrand():
    nu = IntervalDensity(-1.0, 1.0)
    pm = sample_prm(nu, 3.0, 0)
    assert compensated_integral(pm, nu, lambda t, z: np.zeros_like(z)) == 0.0


def test_compensated_count_mean_zero():
    nu = AtomicMeasure([1.0, -0.5], [1.0, 2.0])
    ens = sample_prm_ensemble(nu, 2.0, 100_000, 9)
    vals = compensated_integrals(ens, nu, lambda t, z: np.ones_like(z))
    assert np.allclose(vals, ens.counts - 6.0)
    assert abs(vals.mean()) < 4 * vals.std() / math.sqrt(vals.size)


def test_compensated_jump_sum_moments():
    nu = IntervalDensity(-1.0, 1.0)
    T = 2.0
    ens = sample_prm_ensemble(nu, T, 100_000, 11)
    vals = compensated_integrals(ens, nu, lambda t, z: z)
    assert abs(vals.mean()) < 4 * vals.std() / math.sqrt(vals.size)
    assert vals.var() == pytest.approx(T * 2.0 / 3.0, rel=0.02)


def test_compensator_non_finite_raises():
    nu = IntervalDensity(-1.0, 1.0)
    with pytest.raises(CompensatorError), np.errstate(invalid="ignore"):
        compensator(nu, lambda s, z: np.full_like(np.asarray(z, dtype=float), np.inf), (0.0, 1.0),
                    time_dependent=False)


def test_levy_path_single_atom():
    nu = IntervalDensity(-1.0, 1.0)
    pm = PointMeasure(2.0, np.array([1.0]), np.array([2.0]))
    assert np.array_equal(levy_path_from_prm(pm, nu, [0.0, 0.5, 0.999, 1.0, 1.5]), [0, 0, 0, 2, 2])


def test_levy_path_empty_symmetric():
    nu = IntervalDensity(-1.0, 1.0)
    pm = PointMeasure(2.0, np.empty(0), np.empty(0))
    assert np.all(levy_path_from_prm(pm, nu, np.linspace(0, 2, 5)) == 0)


def test_compensated_poisson_path():
    nu = AtomicMeasure([1.0], [1.0])
    ens = sample_prm_ensemble(nu, 3.0, 20_000, 2)
    pm = ens[0]
    grid = np.linspace(0, 3, 7)
    assert np.allclose(levy_path_from_prm(pm, nu, grid), [pm.count((0, t)) - t for t in grid])
    end = ens.counts - 3.0
    assert abs(end.mean()) < 4 * end.std() / math.sqrt(end.size)


@settings(max_examples=25, deadline=None)
@given(rate=st.floats(0.1, 5.0), horizon=st.floats(0.1, 4.0), seed=st.integers(0, 2 ** 32 - 1))
def test_atoms_ordered_inside_window(rate, horizon, seed):
    pm = sample_prm(AtomicMeasure([1.0], [rate]), horizon, seed)
    assert np.all(np.diff(pm.times) > 0)
    assert np.all((pm.times > 0) & (pm.times <= horizon))
