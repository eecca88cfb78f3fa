"""The eight acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible with or without ``-s``)
before asserting.
"""
import itertools
import math
import time
from dataclasses import replace

import numpy as np

from conftest import local_op
from smero.elliptic import WeierstrassData, weierstrass
from smero.genus1 import bloch_norm_signs, canonical_contour, lame_bloch, quasimomentum, spectrum_projection
from smero.local import is_s_meromorphic_at_pole
from smero.oracles import monodromy_deviation
from smero.potentials import RationalSingular, SolitonTau, event_snapshot, evolve_track, local_expansion
from smero.space import (
    SpaceSpec,
    element_norm,
    negative_count_formula,
    negative_count_gram,
    pairwise_products,
    random_admissible_element,
    symmetry_defect,
)

LATTICES = {"rectangular": WeierstrassData(1.0, 1j), "rhombic": WeierstrassData(1.0, 0.5 + 0.6j)}
# one representative position set per pole configuration r_j <= 3, at most 3 poles
CONFIGS = [c for n in (1, 2, 3) for c in itertools.combinations_with_replacement((1, 2, 3), n)]


def space_for(orders):
    xs = np.linspace(-0.6, 0.6, len(orders)) if len(orders) > 1 else [0.0]
    return SpaceSpec(tuple(zip(xs, orders)), interval=(-1, 1))


def report(capsys, n, ok, text, elapsed):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'}  criterion {n}: {text}  [{elapsed:.1f} s]")
    assert ok, text


def test_criterion_1_normal_form_classification(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    agree, cases, worst_good, best_bad = 0, 200, 0.0, math.inf
    for i in range(cases):
        r = (1, 2, 3)[i % 3]
        terms = {-2: r * (r + 1)}
        for k in range(0, 2 * r + 6, 2):
            terms[k] = 0.5 * rng.normal()
        perturbed = i % 2 == 1
        if perturbed:
            terms[int(rng.choice(list(range(-1, 2 * r, 2))))] = 1e-3
        op = local_op(terms, max_degree=2 * r + 6)
        verdict = is_s_meromorphic_at_pole(op).verdict
        alphas = rng.normal(size=3) * 3 + 3j * rng.normal(size=3)
        dev = monodromy_deviation(op.u_coeffs, alphas)
        oracle = dev < 1e-6
        agree += verdict == oracle
        if perturbed:
            best_bad = min(best_bad, dev)
        else:
            worst_good = max(worst_good, dev)
    elapsed = time.perf_counter() - start
    ok = agree == cases and elapsed < 60
    report(capsys, 1, ok, f"{agree}/{cases} agree with monodromy oracle "
                          f"(max |M-I| admissible {worst_good:.1e}, min perturbed {best_bad:.1e})", elapsed)


def test_criterion_2_lemma_counts(capsys):
    start = time.perf_counter()
    rows = [(c, negative_count_gram(space_for(c)), negative_count_formula(space_for(c))) for c in CONFIGS]
    elapsed = time.perf_counter() - start
    bad = [(c, g, f) for c, g, f in rows if g != f]
    ok = not bad and elapsed < 300
    report(capsys, 2, ok, f"gram == formula for {len(rows) - len(bad)}/{len(rows)} configurations "
                          f"{[c for c, _, _ in rows]}", elapsed)


def test_criterion_3_detour_independence(capsys):
    start = time.perf_counter()
    worst_orient, worst_rho = 0.0, 0.0
    for idx, c in enumerate(CONFIGS):
        s = space_for(c)
        rng = np.random.default_rng(100 + idx)
        F = [random_admissible_element(s, rng, real=False) for _ in range(100)]
        G = [random_admissible_element(s, rng, real=False) for _ in range(100)]
        up = pairwise_products(F, G, s)
        lo = pairwise_products(F, G, s, orientation="lower")
        half = pairwise_products(F, G, s, rho=s.rho / 2)
        worst_orient = max(worst_orient, float(np.max(np.abs(up - lo))))
        worst_rho = max(worst_rho, float(np.max(np.abs(up - half))))
    elapsed = time.perf_counter() - start
    ok = worst_orient < 1e-12 and worst_rho < 1e-8
    report(capsys, 3, ok, f"100 pairs x {len(CONFIGS)} spaces: max |upper-lower| {worst_orient:.1e}, "
                          f"max |rho - rho/2| {worst_rho:.1e}", elapsed)


def test_criterion_4_symmetry(capsys):
    start = time.perf_counter()
    worst = 0.0
    for r in (1, 2):
        s = SpaceSpec(((0.0, r),), interval=(-1, 1))
        p = RationalSingular(((0.0, r),))
        rng = np.random.default_rng(40 + r)
        for _ in range(20):
            f, g = random_admissible_element(s, rng), random_admissible_element(s, rng)
            worst = max(worst, symmetry_defect(p, f, g, s) / (element_norm(f, s) * element_norm(g, s)))
    elapsed = time.perf_counter() - start
    report(capsys, 4, worst < 1e-7, f"max relative defect {worst:.1e} over 2 x 20 pairs (u = 2/x^2, 6/x^2)", elapsed)


def test_criterion_5_soliton_jump(capsys):
    start = time.perf_counter()
    p = SolitonTau((1.0, 2.0), (0.0, 0.0), (-1, 1))
    tl = evolve_track(p, (-2.0, 2.0), 81, (-10.0, 10.0))
    jumps = [e for e in tl.events if e.transition == "2/y^2 → 6/y^2" and e.m_before == 1 and e.m_at == 3]
    ok = len(jumps) >= 1
    detail = f"{len(jumps)} jump(s)"
    if ok:
        ev = jumps[0]
        at = replace(p, time=ev.time)
        op = local_expansion(at, ev.position_exact, precision=60, multiplicity=3, time_exact=ev.time_exact)
        cert = is_s_meromorphic_at_pole(op)
        counts = set(tl.negative_counts) | {event_snapshot(p, ev)}
        ok = (abs(op.c_minus2 - 6) < 1e-3 and cert.verdict and cert.r == 2 and counts == {1}
              and abs(ev.time - math.log(3) / 48) < 1e-9)
        detail += (f" at t* = {ev.time:.12f} (ln3/48 = {math.log(3) / 48:.12f}), x* = {ev.position:.9f}, "
                   f"c_-2 = {op.c_minus2.real:.6f}, certificate r = {cert.r}, negative counts {sorted(counts)}")
    elapsed = time.perf_counter() - start
    report(capsys, 5, ok and elapsed < 120, detail, elapsed)


def test_criterion_6_genus1_spectra(capsys):
    start = time.perf_counter()
    out = {}
    max_im_p = 0.0
    for name, d in LATTICES.items():
        c = canonical_contour(d, 256)
        max_im_p = max(max_im_p, float(np.max(np.abs(quasimomentum(c.points, d).imag))))
        out[name] = spectrum_projection(c)
    rect_im = max(k.max_imag for k in out["rectangular"])
    rhomb_im = max(k.max_imag for k in out["rhombic"] if k.label == "complex") if any(
        k.label == "complex" for k in out["rhombic"]) else 0.0
    elapsed = time.perf_counter() - start
    ok = rect_im < 1e-5 and rhomb_im > 1e-2 and max_im_p < 1e-8 and elapsed < 300
    report(capsys, 6, ok, f"rectangular max|Im alpha| {rect_im:.1e}, rhombic complex component "
                          f"max|Im alpha| {rhomb_im:.3f}, max|Im p| on contour {max_im_p:.1e}", elapsed)


def test_criterion_7_bloch_count(capsys):
    start = time.perf_counter()
    totals, positive_tail = {}, True
    for name, d in LATTICES.items():
        c = canonical_contour(d, 256)
        for label, kappa in (("1", 1.0), ("i", 1j), ("e^{i pi/7}", np.exp(1j * np.pi / 7))):
            res = bloch_norm_signs(kappa, d, count=40, contour=c)
            totals[(name, label)] = res.negative_total
            positive_tail &= all(v == 1 for v in res.signs[10:])
    elapsed = time.perf_counter() - start
    ok = set(totals.values()) == {1} and positive_tail and elapsed < 600
    report(capsys, 7, ok, f"negative totals {sorted(set(totals.values()))} over {len(totals)} "
                          f"(lattice, kappa) runs; signs beyond 10th point all positive: {positive_tail}", elapsed)


def test_criterion_8_special_functions(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_ode, worst_sigma, worst_lame = 0.0, 0.0, 0.0
    for d in LATTICES.values():
        z = 2 * d.omega1 * rng.uniform(-0.5, 0.5, 40) + 2 * d.omega2 * rng.uniform(-0.5, 0.5, 40)
        z = z[np.abs(z) > 0.2][:20]
        p, dp, _, s0 = weierstrass(z, d)
        worst_ode = max(worst_ode, float(np.max(np.abs(dp**2 - (4 * p**3 - d.g2 * p - d.g3))
                                                / np.maximum(1, np.abs(dp) ** 2))))
        s1 = weierstrass(z + 2 * d.omega1, d)[3]
        expect = -s0 * np.exp(2 * d.eta1 * (z + d.omega1))
        worst_sigma = max(worst_sigma, float(np.max(np.abs(s1 - expect) / np.abs(expect))))
        for a in z[:10]:
            x = rng.uniform(0.3, 1.7)
            psi, alpha = lame_bloch(a, np.array([x]), d)
            ring = x + 0.05 * np.exp(2j * np.pi * np.arange(64) / 64)
            d2 = 2 * (np.fft.fft(lame_bloch(a, ring, d)[0]) / 64)[2] / 0.05**2
            wp = weierstrass(np.array([x]), d)[0][0]
            worst_lame = max(worst_lame, abs(-d2 + 2 * wp * psi[0] - alpha * psi[0]))
    elapsed = time.perf_counter() - start
    ok = worst_ode < 1e-10 and worst_sigma < 1e-10 and worst_lame < 1e-8
    report(capsys, 8, ok, f"wp ODE {worst_ode:.1e}, sigma quasi-periodicity {worst_sigma:.1e}, "
                          f"Lame residual {worst_lame:.1e}", elapsed)
