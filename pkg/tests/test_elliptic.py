import numpy as np
import pytest

from smero.elliptic import WeierstrassData, weierstrass, wp_laurent_coeffs
from smero.errors import LatticePoint

LATTICES = [WeierstrassData.rectangular(), WeierstrassData.rhombic()]


def sample_points(d, n, seed):
    rng = np.random.default_rng(seed)
    s, t = rng.uniform(-0.5, 0.5, n), rng.uniform(-0.5, 0.5, n)
    z = 2 * d.omega1 * s + 2 * d.omega2 * t
    return z[np.abs(z) > 0.2]


@pytest.mark.parametrize("d", LATTICES, ids=lambda d: d.lattice_class)
def test_differential_equation(d):
    z = sample_points(d, 40, 1)[:20]
    assert len(z) == 20
    p, dp, _, _ = weierstrass(z, d)
    lhs, rhs = dp**2, 4 * p**3 - d.g2 * p - d.g3
    assert np.max(np.abs(lhs - rhs) / np.maximum(1, np.abs(lhs))) < 1e-10


@pytest.mark.parametrize("d", LATTICES, ids=lambda d: d.lattice_class)
def test_sigma_quasi_periodicity(d):
    z = sample_points(d, 20, 2)
    s0 = weierstrass(z, d)[3]
    s1 = weierstrass(z + 2 * d.omega1, d)[3]
    expect = -s0 * np.exp(2 * d.eta1 * (z + d.omega1))
    assert np.max(np.abs(s1 - expect) / np.abs(expect)) < 1e-10
    s2 = weierstrass(z + 2 * d.omega2, d)[3]
    expect2 = -s0 * np.exp(2 * d.eta2 * (z + d.omega2))
    assert np.max(np.abs(s2 - expect2) / np.abs(expect2)) < 1e-10


@pytest.mark.parametrize("d", LATTICES, ids=lambda d: d.lattice_class)
def test_laurent_limit(d):
    z = 1e-3
    p = weierstrass(np.array([z]), d)[0][0]
    assert abs(p - 1 / z**2 - d.g2 / 20 * z**2) < 1e-6
    c = wp_laurent_coeffs(d.g2, d.g3, 6)
    zz = 0.05 + 0.02j
    series = 1 / zz**2 + sum(c[k] * zz ** (2 * k - 2) for k in c)
    assert abs(weierstrass(np.array([zz]), d)[0][0] - series) < 1e-12 * abs(series)


def test_legendre_relation_and_roots():
    for d in LATTICES:
        assert abs(d.eta1 * d.omega2 - d.eta2 * d.omega1 - 0.5j * np.pi) < 1e-12
        assert abs(sum(d.roots)) < 1e-10
    e1, e2, e3 = LATTICES[0].roots
    assert abs(e2) < 1e-12  # square lattice
    assert e1.real > 0 > e3.real


def test_lattice_point_raises():
    d = LATTICES[0]
    with pytest.raises(LatticePoint):
        weierstrass(np.array([2 * d.omega1]), d)
