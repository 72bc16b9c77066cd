import numpy as np
import pytest

from levyrd.coefficients import (DiffusionSpec, DriftSpec, diffusion_apply, dissipativity_sample_check, drift_apply,
                                 drift_values, truncation_consistency)
from levyrd.spectral import SpectralField, dirichlet_laplacian


@pytest.fixture(scope="module")
def op():
    return dirichlet_laplacian(8)


def test_drift_of_zero(op):
    assert np.all(drift_apply(DriftSpec(3, 1), op.zeros()).coefficients == 0)


def test_drift_pointwise_values():
    assert np.allclose(drift_values(DriftSpec(3, 1), np.full(5, 0.5)), 0.375)
    assert np.allclose(drift_values(DriftSpec(3, 0, truncation=1), np.full(5, 5.0)), -1.0)


def test_drift_apply_batched(op):
    c = np.random.default_rng(0).normal(size=(4, op.modes))
    spec = DriftSpec(3, 1)
    out = drift_apply(spec, (c, op))
    assert out.shape == c.shape
    assert np.allclose(out[2], drift_apply(spec, SpectralField(c[2], op)).coefficients)


def test_truncation_consistency():
    spec = DriftSpec(3, 0, truncation=2)
    assert truncation_consistency(spec, np.array([-1.0, 0.3, 1.0])) == 0.0
    assert truncation_consistency(spec, np.full(3, 3.0)) == pytest.approx(27 - 8)
    u = np.linspace(-10, 10, 41)
    vals = [truncation_consistency(DriftSpec(3, 1, truncation=n), u) for n in (1, 2, 4, 8)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        truncation_consistency(DriftSpec(3, 0), u)


def test_truncated_bound():
    spec = DriftSpec(3, 3.0, truncation=2)
    u = np.linspace(-2, 2, 200_001)
    assert spec.bound() == pytest.approx(np.max(np.abs(spec.scalar(u))), rel=1e-8)


def test_sign_dissipativity():
    u = np.random.default_rng(1).normal(scale=10, size=10_000)
    assert np.all(DriftSpec(3, 0).scalar(u) * u <= 0)


def test_growth_function_nondecreasing():
    r = np.linspace(0, 50, 500)
    a = DriftSpec(3, 1, k0=2).a(r)
    assert np.all(np.diff(a) >= 0) and a[0] == 2


def test_dissipativity_no_violation():
    rep = dissipativity_sample_check(DriftSpec(3, 0), 10 ** 6, seed=0, K=1.0, bound=1e3)
    assert rep.passed and rep.max_violation <= 0


def test_dissipativity_default_K_with_gain():
    rep = dissipativity_sample_check(DriftSpec(3, 2.0), 200_000, seed=1)
    assert rep.passed


def test_dissipativity_wrong_K_finds_witness():
    rep = dissipativity_sample_check(DriftSpec(3, 1.0), 100_000, seed=2, K=0.0)
    assert not rep.passed and rep.witness is not None
    v, z = rep.witness
    assert DriftSpec(3, 1.0).scalar(v + z) * np.sign(v) > 0


def test_origin_pairs_never_violate():
    spec = DriftSpec(3, 1.0)
    z = np.linspace(-5, 5, 11)
    assert np.all(spec.scalar(0.0 + z) * np.sign(0.0) == 0)


def test_diffusion_kinds(op):
    assert np.all(diffusion_apply(DiffusionSpec("sinsininv"), np.zeros(7)) == 0)
    assert np.allclose(diffusion_apply(DiffusionSpec("sin"), np.full(3, np.pi / 2)), 1.0)
    assert np.all(diffusion_apply(DiffusionSpec("const", 2.5), np.ones(3)) == 2.5)
    tab = DiffusionSpec("custom", table=([0.0, 1.0], [0.0, 2.0]))
    assert np.allclose(tab(np.array([-1.0, 0.5, 3.0])), [0.0, 1.0, 2.0])
    assert tab.bound == 2.0
    assert np.all(diffusion_apply(DiffusionSpec("sinsininv"), op.zeros()) == 0)
    with pytest.raises(ValueError):
        DiffusionSpec("cos")


def test_diffusion_bounded():
    u = np.random.default_rng(3).normal(scale=100, size=10 ** 6)
    u[:1000] = np.random.default_rng(4).normal(scale=1e-3, size=1000)
    for kind in ("sin", "sinsininv"):
        assert np.max(np.abs(DiffusionSpec(kind)(u))) <= 1.0
