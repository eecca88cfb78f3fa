"""Lamé n = 1 spectral data on a genus-one curve.

The Bloch function of ``L = -d^2/dx^2 + 2 wp(x)`` is

    psi(a, x) = sigma(a - x) / (sigma(a) sigma(x)) * exp(zeta(a) x),   alpha(a) = -wp(a),

with Bloch multiplier ``exp(2 omega1 w(a))`` over the period ``T = 2 omega1``
where ``w(a) = zeta(a) - eta1 a / omega1``.  The quasimomentum is ``p = -i w``;
``w`` is ``2 omega1``-periodic and shifts by ``-i pi/omega1`` under
``a -> a + 2 omega2``, so ``Re w`` is a well-defined function on the torus and
its zero set is the canonical contour.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .elliptic import WeierstrassData, weierstrass
from .errors import DegenerateLevelSet, LatticePoint, NormTooSmall
from .laurent import TruncatedLaurentSeries
from .space import SpaceElement, SpaceSpec, gram_matrix, signature

__all__ = [
    "QuasimomentumSample",
    "ContourComponent",
    "Contour",
    "SpectrumComponent",
    "BlochNormResult",
    "lame_bloch",
    "lame_alpha",
    "quasimomentum",
    "sample",
    "canonical_contour",
    "spectrum_projection",
    "bloch_points",
    "bloch_element",
    "bloch_norm_signs",
    "write_spectrum_csv",
]

NEWTON_TOL = 1e-13
REAL_LABEL_TOL = 1e-6


# ---------------------------------------------------------------------------
# Pointwise quantities
# ---------------------------------------------------------------------------


def _w(a, data: WeierstrassData):
    """w(a) = zeta(a) - eta1 a / omega1 and its derivative -wp(a) - eta1/omega1."""
    p, _, z, _ = weierstrass(a, data)
    return z - data.eta1 * a / data.omega1, -p - data.eta1 / data.omega1


def lame_alpha(a, data: WeierstrassData):
    return -weierstrass(a, data)[0]


def lame_bloch(a: complex, x, data: WeierstrassData):
    """(psi(a, x), alpha(a)) for ``-psi'' + 2 wp psi = alpha psi``."""
    a = complex(a)
    x = np.asarray(x, dtype=np.complex128)
    wa, _, za, sa = weierstrass(np.array([a]), data)
    _, _, _, s_ax = weierstrass(a - x, data, check=False)
    _, _, _, s_x = weierstrass(x, data, check=False)
    if np.any(np.abs(s_x) == 0):
        raise LatticePoint("x lies on the period lattice")
    psi = s_ax / (sa[0] * s_x) * np.exp(za[0] * x)
    _check_alpha_convention(data)
    return psi, complex(-wa[0])


@lru_cache(maxsize=64)
def _check_alpha_convention(data: WeierstrassData):
    """Residual of the Bloch function at a fixed sample; guards the alpha = -wp(a) convention.

    With g = psi'/psi = zeta(a) - zeta(a - x) - zeta(x) one has
    psi''/psi = g' + g^2, g' = wp(x) - wp(a - x).
    """
    a, x = 0.37 * data.omega1 + 0.41 * data.omega2, 0.29 * data.omega1
    pw = weierstrass(np.array([a, a - x, x]), data)
    wp_a, wp_ax, wp_x = pw[0]
    z_a, z_ax, z_x = pw[2]
    g = z_a - z_ax - z_x
    alpha = -(wp_x - wp_ax + g * g) + 2 * wp_x
    if abs(alpha - (-wp_a)) > 1e-8 * max(1.0, abs(wp_a)):
        raise RuntimeError(f"eigenvalue convention check failed: {alpha} vs {-wp_a}")
    return True


@lru_cache(maxsize=64)
def _check_multiplier_convention(data: WeierstrassData):
    """exp(i p T) must equal psi(x + T)/psi(x); fails loudly otherwise."""
    a = 0.31 * data.omega1 + 0.27 * data.omega2
    x = np.array([0.23 * data.omega1])
    p = -1j * _w(np.array([a]), data)[0][0]
    psi0, _ = lame_bloch(a, x, data)
    psi1, _ = lame_bloch(a, x + 2 * data.omega1, data)
    ratio = psi1[0] / psi0[0]
    kappa = np.exp(1j * p * 2 * data.omega1)
    if abs(ratio - kappa) > 1e-9 * max(1.0, abs(kappa)):
        raise RuntimeError(f"quasimomentum convention check failed: {kappa} vs {ratio}")
    return True


def quasimomentum(a, data: WeierstrassData):
    """p(a) = -i (zeta(a) - eta1 a / omega1)."""
    _check_multiplier_convention(data)
    scalar = np.ndim(a) == 0
    w, _ = _w(np.atleast_1d(np.asarray(a, dtype=np.complex128)), data)
    p = -1j * w
    return complex(p[0]) if scalar else p


@dataclass(frozen=True)
class QuasimomentumSample:
    a: complex
    alpha: complex
    p: complex
    kappa: complex

    def to_dict(self):
        return {k: [v.real, v.imag] for k, v in (("a", self.a), ("alpha", self.alpha), ("p", self.p),
                                                  ("kappa", self.kappa))}


def sample(a: complex, data: WeierstrassData) -> QuasimomentumSample:
    p = quasimomentum(a, data)
    kappa = complex(np.exp(1j * p * 2 * data.omega1))
    return QuasimomentumSample(complex(a), complex(lame_alpha(np.array([a]), data)[0]), p, kappa)


# ---------------------------------------------------------------------------
# Canonical contour
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContourComponent:
    """A polyline of contour points ``a`` (unwrapped, so consecutive points are close).

    ``through_pole`` components pass through the marked point a = 0 on the
    torus; they are stored open, running from next to P back to next to P.
    """

    points: np.ndarray
    through_pole: bool

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Contour:
    data: WeierstrassData
    resolution: int
    components: tuple

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([c.points for c in self.components])

    @property
    def labels(self) -> np.ndarray:
        return np.concatenate([np.full(len(c), i) for i, c in enumerate(self.components)])


def _project(a, data: WeierstrassData, iters=8):
    """Newton steps a <- a - F conj(w')/|w'|^2 towards Re w = 0."""
    a = np.asarray(a, dtype=np.complex128).copy()
    for _ in range(iters):
        w, dw = _w(a, data)
        f = w.real
        step = f * np.conj(dw) / np.abs(dw) ** 2
        a = a - step
        if np.all(np.abs(step) < NEWTON_TOL * np.maximum(1.0, np.abs(a))):
            break
    return a


def _grid_point(data, N, i, j):
    s = (i - N // 2 + 0.5) / N
    t = (j - N // 2 + 0.5) / N
    return 2 * data.omega1 * s + 2 * data.omega2 * t


def _unwrap_to(a, ref, data):
    """Lattice translate of ``a`` closest to ``ref``."""
    s, t = data.lattice_coords(a - ref)
    return a - 2 * data.omega1 * np.round(s) - 2 * data.omega2 * np.round(t)


def canonical_contour(data: WeierstrassData, resolution: int = 256) -> Contour:
    """Zero set of Im p on the a-torus by periodic marching squares.

    The grid is offset by half a cell so the marked point a = 0 sits at the
    centre of a cell.  Crossings are bracketed on cell edges, refined by
    Brent's method and polished by Newton steps on Re w.
    """
    N = int(resolution)
    if N < 64:
        raise ValueError("resolution must be at least 64")
    ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    nodes = _grid_point(data, N, ii, jj)
    F = _w(nodes.ravel(), data)[0].real.reshape(N, N)
    pos = F >= 0

    def crossing(kind, i, j):
        a0 = nodes[i % N, j % N]
        d = 2 * data.omega1 / N if kind == "H" else 2 * data.omega2 / N
        f = lambda lam: float(_w(np.array([a0 + lam * d]), data)[0][0].real)
        lam = brentq(f, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return a0 + lam * d

    edges = {}
    for i in range(N):
        for j in range(N):
            if pos[i, j] != pos[(i + 1) % N, j]:
                edges[("H", i, j)] = None
            if pos[i, j] != pos[i, (j + 1) % N]:
                edges[("V", i, j)] = None
    if not edges:
        raise DegenerateLevelSet("Im p has no sign change on the grid")
    keys = list(edges)
    pts = np.array([crossing(*k) for k in keys])
    pts = _project(pts, data)
    index = {k: n for n, k in enumerate(keys)}

    pole_cell = (N // 2 - 1, N // 2 - 1)
    adj = {n: [] for n in range(len(keys))}
    pole_links = set()
    for i in range(N):
        for j in range(N):
            e = [("H", i, j), ("V", (i + 1) % N, j), ("H", i, (j + 1) % N), ("V", i, j)]
            present = [k in index for k in e]
            if sum(present) == 0:
                continue
            if sum(present) == 2:
                u, v = [index[k] for k, p in zip(e, present) if p]
                pairs = [(u, v)]
            elif sum(present) == 4:
                ctr = _w(np.array([_grid_point(data, N, i + 0.5, j + 0.5)]), data)[0][0].real
                if (ctr >= 0) == pos[i, j]:
                    pairs = [(index[e[0]], index[e[1]]), (index[e[2]], index[e[3]])]
                else:
                    pairs = [(index[e[3]], index[e[0]]), (index[e[1]], index[e[2]])]
            else:
                raise DegenerateLevelSet(f"odd number of crossings in cell {(i, j)}")
            for u, v in pairs:
                adj[u].append(v)
                adj[v].append(u)
                if (i, j) == pole_cell:
                    pole_links.add(frozenset((u, v)))

    seen = set()
    components = []
    for start in range(len(keys)):
        if start in seen:
            continue
        cycle = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [v for v in adj[cur] if v != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            if cur == start:
                break
            if cur in seen:
                raise DegenerateLevelSet("contour graph is not a union of cycles")
            seen.add(cur)
            cycle.append(cur)
        through = False
        for n in range(len(cycle)):
            if frozenset((cycle[n], cycle[(n + 1) % len(cycle)])) in pole_links:
                cycle = cycle[n + 1:] + cycle[: n + 1]
                through = True
                break
        a = [pts[cycle[0]]]
        for n in cycle[1:]:
            a.append(_unwrap_to(pts[n], a[-1], data))
        a = _refine_spacing(np.array(a), data, resolution, closed=not through)
        components.append(ContourComponent(a, through))
    components.sort(key=lambda c: (not c.through_pole, -len(c)))
    return Contour(data, N, tuple(components))


def _refine_spacing(a, data, resolution, closed):
    limit = data.diameter() / resolution
    for _ in range(4):
        nxt = np.roll(a, -1) if closed else a[1:]
        cur = a if closed else a[:-1]
        if closed:
            nxt = _unwrap_to(nxt, cur, data)
        gap = np.abs(nxt - cur)
        bad = np.nonzero(gap > limit)[0]
        if bad.size == 0:
            break
        mids = _project(0.5 * (cur[bad] + nxt[bad]), data)
        out = []
        for n in range(len(a)):
            out.append(a[n])
            if n in set(bad.tolist()):
                out.append(_unwrap_to(mids[list(bad).index(n)], a[n], data))
        a = np.array(out)
    return a


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumComponent:
    points: np.ndarray
    alpha: np.ndarray
    p: np.ndarray
    label: str

    @property
    def max_imag(self) -> float:
        return float(np.max(np.abs(self.alpha.imag)))


def spectrum_projection(contour: Contour, data: Optional[WeierstrassData] = None) -> list:
    """alpha(a) = -wp(a) over each contour component, labelled real or complex."""
    data = contour.data if data is None else data
    out = []
    for comp in contour.components:
        alpha = lame_alpha(comp.points, data)
        p = quasimomentum(comp.points, data)
        label = "real" if np.max(np.abs(alpha.imag)) < REAL_LABEL_TOL else "complex"
        out.append(SpectrumComponent(comp.points, alpha, p, label))
    return out


def write_spectrum_csv(components: Sequence[SpectrumComponent], path) -> None:
    """Columns: Re a, Im a, Re alpha, Im alpha, Re p, Im p, component id."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["re_a", "im_a", "re_alpha", "im_alpha", "re_p", "im_p", "component"])
        for cid, c in enumerate(components):
            for a, al, p in zip(c.points, c.alpha, c.p):
                wr.writerow([repr(float(a.real)), repr(float(a.imag)), repr(float(al.real)), repr(float(al.imag)),
                             repr(float(p.real)), repr(float(p.imag)), cid])


# ---------------------------------------------------------------------------
# Bloch points
# ---------------------------------------------------------------------------


def _newton_w(a, target, data, iters=30):
    """Solve w(a) = target (complex Newton)."""
    a = complex(a)
    for _ in range(iters):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                w, dw = _w(np.array([a]), data)
        except LatticePoint:
            return None
        if not (np.isfinite(w[0]) and np.isfinite(dw[0])):
            return None
        step = (w[0] - target) / dw[0]
        a -= step
        if abs(step) < NEWTON_TOL * max(1.0, abs(a)):
            return a
    return a


def bloch_points(kappa: complex, contour: Contour, data: Optional[WeierstrassData] = None,
                 max_count: int = 40, tol: float = 1e-8) -> list:
    """Points of the contour with exp(i p T) = kappa, ordered by |alpha|.

    Along each component the phase 2 omega1 Im w is bracketed against
    arg(kappa) mod 2 pi and each crossing is solved by Newton on w.  Near
    the marked point w ~ 1/a, so the accumulating solutions there are
    seeded from a = 1/w_target.
    """
    data = contour.data if data is None else data
    kappa = complex(kappa)
    if abs(abs(kappa) - 1) > 1e-12:
        raise ValueError("kappa must be unimodular")
    T = 2 * data.omega1
    phi = math.atan2(kappa.imag, kappa.real)
    found = []
    edge_w = []
    for comp in contour.components:
        w = _w(comp.points, data)[0]
        k = (T * w.imag - phi) / (2 * math.pi)
        for n in range(len(k)):
            m = n + 1
            if m >= len(k):
                if comp.through_pole:
                    break
                m = 0
            lo, hi = sorted((k[n], k[m]))
            for q in range(math.ceil(lo), math.floor(hi) + 1):
                lam = 0.5 if hi == lo else (q - k[n]) / (k[m] - k[n])
                b = _unwrap_to(comp.points[m], comp.points[n], data)
                seed = comp.points[n] + lam * (b - comp.points[n])
                a = _newton_w(seed, 1j * (phi + 2 * math.pi * q) / T + _branch_shift(seed, data), data)
                if a is not None:
                    found.append(a)
        if comp.through_pole:
            edge_w += [abs(w[0]), abs(w[-1])]
    if edge_w:
        w0 = 0.5 * min(edge_w)
        n_max = int(max_count + 4 + T * w0 / (2 * math.pi))
        for q in range(-n_max, n_max + 1):
            wt = 1j * (phi + 2 * math.pi * q) / T
            if abs(wt) < w0:
                continue
            a = _newton_w(1.0 / wt, wt, data)
            if a is not None:
                found.append(a)
    pts = []
    for a in found:
        a0 = complex(data.reduce(np.array([a]))[0][0])
        kap = np.exp(T * _w(np.array([a0]), data)[0][0])
        if abs(kap - kappa) > tol or abs(_w(np.array([a0]), data)[0][0].real) > tol:
            continue
        if all(abs(_unwrap_to(np.array([a0]), np.array([b]), data)[0] - b) > 1e-7 for b in pts):
            pts.append(a0)
    pts.sort(key=lambda a: (abs(lame_alpha(np.array([a]), data)[0]), a.real, a.imag))
    return pts[:max_count]


def _branch_shift(a, data):
    """w(a) - w(reduce(a)): zeta quasi-periodicity minus the linear term."""
    _, m, n = data.reduce(np.array([a]))
    return complex(2 * m[0] * data.eta1 + 2 * n[0] * data.eta2
                   - data.eta1 * (2 * m[0] * data.omega1 + 2 * n[0] * data.omega2) / data.omega1)


# ---------------------------------------------------------------------------
# Bloch norms
# ---------------------------------------------------------------------------


def bloch_element(a: complex, data: WeierstrassData, s: SpaceSpec, pole_shift: float = 0.0,
                  order: int = 48, nodes: int = 128) -> SpaceElement:
    """psi(a, x - pole_shift) as an element of the Bloch space ``s``.

    The local series at the pole comes from Cauchy coefficients on a circle
    of radius 2 rho; its leading terms are fixed to the exact values 1/y and
    0 after checking the numerical ones.
    """
    radius = 2 * s.rho
    y = radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    vals, _ = lame_bloch(a, y, data)
    c = np.fft.fft(vals) / nodes
    ks = np.arange(-1, order + 1)
    coeffs = c[ks % nodes] / radius ** ks
    scale = max(1.0, float(np.max(np.abs(vals))))
    if abs(coeffs[0] - 1) > 1e-8 * scale or abs(coeffs[1]) > 1e-8 * scale / radius:
        raise RuntimeError("Bloch function does not start as 1/y + O(y)")
    coeffs[0], coeffs[1] = 1.0, 0.0
    j = 0
    xj = s.positions[j]
    local = {j: TruncatedLaurentSeries(xj, -1, coeffs)}

    def value(x):
        return lame_bloch(a, np.asarray(x, dtype=float) - pole_shift, data)[0]

    return SpaceElement(value, local)


@dataclass(frozen=True)
class BlochNormResult:
    points: tuple
    alphas: tuple
    norms: tuple
    signs: tuple  # +1, -1, or 0 for norms below the noise floor
    negative_total: int
    gram_signature: tuple

    def to_dict(self):
        return {
            "points": [[a.real, a.imag] for a in self.points],
            "alphas": [[a.real, a.imag] for a in self.alphas],
            "norms": [[n.real, n.imag] for n in self.norms],
            "signs": list(self.signs),
            "negative_total": self.negative_total,
            "gram_signature": list(self.gram_signature),
        }


def bloch_norm_signs(kappa: complex, data: WeierstrassData, pole_shift: float = 0.0, count: int = 40,
                     resolution: int = 256, contour: Optional[Contour] = None, strict: bool = False,
                     eps: float = 1e-9) -> BlochNormResult:
    """Signs of <psi_l, psi_l> over one period for the first ``count`` Bloch points.

    The negative total is the number of negative eigenvalues of the Gram
    matrix of the Bloch functions.  It equals the number of negative norms
    when the functions are mutually orthogonal, and it stays meaningful when
    they are not: a complex alpha gives a neutral function paired with its
    conjugate partner, and kappa = +-1 makes a and -a share one alpha.
    ``strict=True`` raises NormTooSmall on a neutral norm instead.
    """
    contour = canonical_contour(data, resolution) if contour is None else contour
    pts = bloch_points(kappa, contour, data, max_count=count)
    s = SpaceSpec(((pole_shift, 1),), mode="bloch", period=2 * data.omega1, kappa=kappa)
    elems = [bloch_element(a, data, s, pole_shift) for a in pts]
    G = gram_matrix(elems, None, s)
    diag = np.diag(G)
    signs = []
    for l, v in enumerate(diag):
        # a norm is neutral when it is negligible next to the pairings of psi_l with the others
        if abs(v) < eps * max(np.max(np.abs(G[l])), 1e-300):
            if strict:
                raise NormTooSmall(f"<psi, psi> is {v} at a = {pts[l]}")
            signs.append(0)
        else:
            signs.append(1 if v.real > 0 else -1)
    sig = signature(G, eps=1e-10) if len(pts) else (0, 0, 0)
    return BlochNormResult(tuple(pts), tuple(complex(lame_alpha(np.array([a]), data)[0]) for a in pts),
                           tuple(complex(v) for v in diag), tuple(signs), sig[0], sig)
