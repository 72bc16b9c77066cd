import numpy as np
import pytest

from levyrd.besov import (besov_dirac_norm, besov_dirac_ratio, dirac_besov_constant, phi_j, resolved_levels,
                          smooth_bump)


def test_bump_profile():
    x = np.array([0.0, 0.5, 1.0, 1.2, 1.5, 2.0, -1.0, -1.6])
    b = smooth_bump(x)
    assert np.array_equal(b[[0, 1, 2, 6]], [1, 1, 1, 1])
    assert np.array_equal(b[[4, 5, 7]], [0, 0, 0])
    assert 0 < b[3] < 1


def test_filter_bank_partition_of_unity():
    x = np.linspace(0, 200, 4001)
    total = sum(phi_j(j, x) for j in range(0, 10))
    assert np.allclose(total[x < 2 ** 8], 1.0, atol=1e-14)


def test_dirac_zero_function():
    assert besov_dirac_norm(lambda x: 0.0 * x, 0.3, 1.5) == 0.0


def test_resolved_levels():
    assert resolved_levels(4096, 64.0) == 7


@pytest.mark.parametrize("p", [1.5, 2.0])
def test_dirac_norm_factorizes(p):
    c = dirac_besov_constant(p)
    fs = [lambda x: np.exp(-x ** 2), lambda x: 3.0 + np.cos(x), lambda x: (1 + x ** 2) ** -2]
    for a in (0.0, 1.25, -3.5):
        ratios = [besov_dirac_norm(f, a, p) / abs(float(f(np.round(a / (64 / 4096)) * (64 / 4096)))) for f in fs]
        assert max(ratios) / min(ratios) - 1 < 1e-6
        assert ratios[0] / c - 1 < 1e-6


def test_dirac_ratio_same_for_two_functions():
    p = 2.0
    r1 = besov_dirac_ratio(lambda x: np.exp(-x ** 2 / 2), p, n=1024, length=32.0, stride=4)
    r2 = besov_dirac_ratio(lambda x: (1 + x ** 2) ** -2, p, n=1024, length=32.0, stride=4)
    assert abs(r1 / r2 - 1) < 1e-3
