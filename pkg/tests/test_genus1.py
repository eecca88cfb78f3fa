import csv

import numpy as np
import pytest

from smero.elliptic import WeierstrassData, weierstrass
from smero.genus1 import (
    _project,
    _unwrap_to,
    _w,
    bloch_element,
    bloch_norm_signs,
    bloch_points,
    canonical_contour,
    lame_alpha,
    lame_bloch,
    quasimomentum,
    sample,
    spectrum_projection,
    write_spectrum_csv,
)
from smero.oracles import hill_discriminant
from smero.space import SpaceSpec, check_membership, negative_count_formula

RECT = WeierstrassData.rectangular()
RHOMB = WeierstrassData.rhombic()
LATTICES = [RECT, RHOMB]


@pytest.fixture(scope="module")
def contours():
    return {d.lattice_class: canonical_contour(d, 256) for d in LATTICES}


def random_a(d, n, seed):
    rng = np.random.default_rng(seed)
    a = 2 * d.omega1 * rng.uniform(-0.5, 0.5, n) + 2 * d.omega2 * rng.uniform(-0.5, 0.5, n)
    return a[np.abs(a) > 0.3]


def cauchy_second(fun, x, radius=0.05, n=64):
    z = x + radius * np.exp(2j * np.pi * np.arange(n) / n)
    c = np.fft.fft(fun(z)) / n
    return 2 * c[2] / radius**2


@pytest.mark.parametrize("d", LATTICES, ids=lambda d: d.lattice_class)
def test_lame_residual(d):
    rng = np.random.default_rng(3)
    for a in random_a(d, 30, 4)[:20]:
        x = rng.uniform(0.3, 1.7)
        psi, alpha = lame_bloch(a, np.array([x]), d)
        d2 = cauchy_second(lambda z: lame_bloch(a, z, d)[0], x)
        wp = weierstrass(np.array([x]), d)[0][0]
        assert abs(-d2 + 2 * wp * psi[0] - alpha * psi[0]) < 1e-8
        assert alpha == pytest.approx(-weierstrass(np.array([a]), d)[0][0], rel=1e-12)


@pytest.mark.parametrize("d", LATTICES, ids=lambda d: d.lattice_class)
def test_multiplier_and_quasimomentum(d):
    T = 2 * d.omega1
    for a in random_a(d, 14, 5)[:10]:
        x = np.array([0.4, 1.3])
        r = lame_bloch(a, x + T, d)[0] / lame_bloch(a, x, d)[0]
        assert abs(r[0] - r[1]) < 1e-10 * abs(r[0])
        p = quasimomentum(a, d)
        assert abs(np.exp(1j * p * T) - r[0]) < 1e-9 * abs(r[0])
        assert abs((quasimomentum(a + T, d) - p).imag) < 1e-10
        smp = sample(a, d)
        assert smp.kappa == pytest.approx(np.exp(1j * p * T))


@pytest.mark.parametrize("name", ["rectangular", "rhombic"])
def test_contour_geometry(contours, name):
    c = contours[name]
    d = c.data
    assert len(c.components) >= 2
    pts = c.points
    assert np.max(np.abs(quasimomentum(pts, d).imag)) < 1e-8
    limit = d.diameter() / c.resolution
    for comp in c.components:
        a = comp.points
        gaps = np.abs(np.diff(a))
        assert np.max(gaps) <= limit * (1 + 1e-9)
    near_p = [comp for comp in c.components if comp.through_pole]
    assert len(near_p) == 1
    ends = d.reduce(near_p[0].points[[0, -1]])[0]
    assert np.all(np.abs(ends) < 2 * limit)
    # near P, p ~ -i/a is real only along the imaginary a-direction
    assert np.all(np.abs(ends.real) < 0.1 * np.abs(ends))


def test_rectangular_contour_is_conjugation_symmetric(contours):
    c = contours["rectangular"]
    d = c.data
    pts = d.reduce(c.points)[0]
    conj = d.reduce(np.conj(pts))[0]
    # torus distance from each conjugated point to the sampled contour
    diff = conj[:, None] - pts[None, :]
    diff = diff - 2 * d.omega1 * np.round(d.lattice_coords(diff)[0]) - 2 * d.omega2 * np.round(d.lattice_coords(diff)[1])
    assert np.max(np.min(np.abs(diff), axis=1)) < 2 / c.resolution


@pytest.mark.parametrize("name", ["rectangular", "rhombic"])
def test_spectrum_is_conjugation_symmetric(contours, name):
    c = contours[name]
    d = c.data
    a = c.points[::7]
    moved = _project(np.conj(a), d)
    assert np.max(np.abs(_w(moved, d)[0].real)) < 1e-10
    # the spectral curve contains conj(alpha) up to the projection distance
    alpha_conj = np.conj(lame_alpha(a, d))
    alpha_back = lame_alpha(moved, d)
    assert np.max(np.abs(alpha_back - alpha_conj) / np.maximum(1, np.abs(alpha_conj))) < 1e-5


def test_rectangular_spectrum_matches_hill_discriminant(contours):
    comps = spectrum_projection(contours["rectangular"])
    assert all(k.label == "real" for k in comps)
    assert max(k.max_imag for k in comps) < 1e-5
    d = RECT
    u = lambda x: (2 * weierstrass(x + d.omega2, d)[0]).real
    alphas = np.concatenate([k.alpha.real[(np.abs(k.alpha) < 30)][::16] for k in comps])
    disc, err = hill_discriminant(u, 2 * d.omega1, alphas, steps=4096)
    assert np.all(np.abs(disc.real) <= 2 + 1e-5)
    band_lo = min(k.alpha.real.max() for k in comps)
    band_hi = max(k.alpha.real.min() for k in comps)
    gap = np.linspace(band_lo, band_hi, 7)[1:-1]
    disc, _ = hill_discriminant(u, 2 * d.omega1, gap, steps=4096)
    assert np.all(np.abs(disc.real) > 2)


def test_rhombic_spectrum_has_complex_component(contours):
    comps = spectrum_projection(contours["rhombic"])
    assert any(k.label == "complex" and k.max_imag > 1e-2 for k in comps)


def test_spectrum_csv(tmp_path, contours):
    comps = spectrum_projection(contours["rhombic"])
    path = tmp_path / "s.csv"
    write_spectrum_csv(comps, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["re_a", "im_a", "re_alpha", "im_alpha", "re_p", "im_p", "component"]
    assert len(rows) - 1 == sum(len(k.points) for k in comps)


def test_bloch_points_conjugation(contours):
    c = contours["rectangular"]
    d = c.data
    kappa = np.exp(1j * np.pi / 7)
    a = bloch_points(kappa, c, max_count=20)
    b = bloch_points(np.conj(kappa), c, max_count=20)
    assert len(a) == len(b) == 20
    for z in a[:-2]:  # the last entries may swap with ties just past the cutoff
        dist = min(abs(_unwrap_to(np.array([np.conj(z)]), np.array([w]), d)[0] - w) for w in b)
        assert dist < 1e-6
    pts = np.array(a)
    gaps = np.abs(pts[:, None] - pts[None, :]) + np.eye(len(pts))
    assert gaps.min() > 0


def test_bloch_element_is_admissible(contours):
    d = RECT
    (a,) = bloch_points(1j, contours["rectangular"], max_count=1)
    s = SpaceSpec(((0.0, 1),), mode="bloch", period=2 * d.omega1, kappa=1j)
    f = bloch_element(a, d, s)
    assert check_membership(f, s)


@pytest.mark.parametrize("name", ["rectangular", "rhombic"])
@pytest.mark.parametrize("kappa", [1, 1j, np.exp(1j * np.pi / 7)])
def test_bloch_count_equals_formula(contours, name, kappa):
    c = contours[name]
    res = bloch_norm_signs(kappa, c.data, count=40, contour=c)
    s = SpaceSpec(((0.0, 1),), mode="bloch", period=2 * c.data.omega1, kappa=kappa)
    assert res.negative_total == negative_count_formula(s) == 1
    assert all(v == 1 for v in res.signs[10:])
