"""Singular function spaces with an indefinite pairing.

Elements are functions on a real window that are smooth except at the
prescribed poles, where their Laurent expansion is confined to the parity
window ``b_1 y**-r + b_2 y**(-r+2) + ... + O(y**(r+1))``.  For such
elements every product has zero residue, so the pairing

    <f, g> = integral of f(x) conj(g(conj x)) dx

along the real line with small half-circle detours around the poles does
not depend on the detour.

The line part is integrated adaptively with singularity subtraction: on
``rho < |y| < D`` the principal part of the local product is removed from
the integrand and integrated in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import MembershipViolation, MissingLocalData, NonSMeromorphicPotential, QuadratureFailure
from .laurent import (
    DEFAULT_ORDER,
    TruncatedLaurentSeries,
    detour_integral,
    differentiate,
    mul,
    residue,
    semicircle_integral,
)
from .local import is_s_meromorphic_at_pole, negative_subspace, parity_window
from .potentials import evaluate, find_real_poles, local_expansion

__all__ = [
    "SpaceSpec",
    "SpaceElement",
    "WindowMonomial",
    "Bump",
    "MembershipReport",
    "element_from_atoms",
    "random_admissible_element",
    "check_membership",
    "pair_residue",
    "inner_product",
    "gram_matrix",
    "pairwise_products",
    "gram_basis",
    "negative_count_formula",
    "negative_count_gram",
    "apply_operator",
    "symmetry_defect",
    "element_norm",
]

DEFAULT_TOL = 1e-8
MEMBERSHIP_TOL = 1e-10
INNER_FRACTION = 0.3  # cutoff is 1 on |y| <= 0.3 sep
OUTER_FRACTION = 0.45  # and 0 beyond 0.45 sep
OPERATOR_REL = 1e-11


# ---------------------------------------------------------------------------
# Space description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceSpec:
    """Poles ``((x_j, r_j), ...)`` on a compact window or on one Bloch period.

    ``mode="compact"`` needs ``interval=(a, b)``.  ``mode="bloch"`` needs
    ``period`` and a unimodular ``kappa``; the poles are read modulo the
    period and ``interval`` (if given) fixes the start of the period window.
    """

    poles: tuple = ()
    interval: Optional[tuple] = None
    mode: str = "compact"
    period: Optional[float] = None
    kappa: complex = 1.0
    rho: Optional[float] = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        poles = tuple((float(x), int(r)) for x, r in self.poles)
        if any(r < 0 for _, r in poles):
            raise ValueError("pole orders must be nonnegative")
        object.__setattr__(self, "kappa", complex(self.kappa))
        if self.mode == "compact":
            if self.interval is None:
                raise ValueError("compact mode needs an interval")
            a, b = map(float, self.interval)
            if not b > a:
                raise ValueError("interval must be increasing")
            if any(not a < x < b for x, _ in poles):
                raise ValueError("poles must lie inside the interval")
        elif self.mode == "bloch":
            if self.period is None or not float(self.period) > 0:
                raise ValueError("bloch mode needs a positive period")
            if abs(abs(self.kappa) - 1.0) > 1e-12:
                raise ValueError("the Bloch multiplier must be unimodular")
            T = float(self.period)
            start = self._bloch_start(poles, T) if self.interval is None else float(self.interval[0])
            poles = tuple((start + (x - start) % T, r) for x, r in poles)
            a, b = start, start + T
            if any(min(x - a, b - x) < 1e-12 for x, _ in poles):
                raise ValueError("a pole sits on the period window boundary")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        poles = tuple(sorted(poles))
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "interval", (a, b))
        sep = self.separations
        if sep and min(sep) <= 0:
            raise ValueError("poles must be distinct")
        if self.rho is None:
            rho = min(0.05, 0.25 * min(sep)) if sep else 0.05
            object.__setattr__(self, "rho", rho)
        if sep and any(2 * self.rho >= s for s in sep):
            raise ValueError("poles must be separated by more than 2 rho")
        if sep and any(self.rho >= INNER_FRACTION * s for s in sep):
            raise ValueError(f"rho must be below {INNER_FRACTION} of each pole separation")

    @staticmethod
    def _bloch_start(poles, T):
        if not poles:
            return 0.0
        xs = sorted(x % T for x, _ in poles)
        gaps = [(xs[(i + 1) % len(xs)] - xs[i]) % T or T for i in range(len(xs))]
        i = int(np.argmax(gaps))
        return xs[i] + gaps[i] / 2 - T

    @property
    def window(self) -> tuple:
        return self.interval

    @property
    def is_bloch(self) -> bool:
        return self.mode == "bloch"

    @property
    def positions(self) -> list:
        return [x for x, _ in self.poles]

    @property
    def orders(self) -> list:
        return [r for _, r in self.poles]

    @property
    def separations(self) -> list:
        """Per pole: distance to the nearest other pole (or image), or twice the distance to an edge."""
        a, b = self.interval
        out = []
        for j, (x, _) in enumerate(self.poles):
            d = []
            for k, (y, _) in enumerate(self.poles):
                if self.is_bloch:
                    T = self.period
                    d += [abs(x - y - n * T) for n in (-1, 0, 1) if k != j or n != 0]
                elif k != j:
                    d.append(abs(x - y))
            if not self.is_bloch:
                d.append(2 * min(x - a, b - x))
            out.append(min(d))
        return out

    def cutoff_radii(self, j: int) -> tuple:
        s = self.separations[j]
        return INNER_FRACTION * s, OUTER_FRACTION * s

    def with_rho(self, rho: float) -> "SpaceSpec":
        return SpaceSpec(self.poles, self.interval, self.mode, self.period, self.kappa, rho, self.tol)

    def with_kappa(self, kappa: complex) -> "SpaceSpec":
        return SpaceSpec(self.poles, self.interval, self.mode, self.period, kappa, self.rho, self.tol)

    def to_dict(self) -> dict:
        d = {"poles": [[x, r] for x, r in self.poles], "mode": self.mode, "interval": list(self.interval),
             "rho": self.rho, "tol": self.tol}
        if self.is_bloch:
            d["period"] = self.period
            d["kappa"] = [self.kappa.real, self.kappa.imag]
        return d


# ---------------------------------------------------------------------------
# Smooth cutoffs
# ---------------------------------------------------------------------------


def _step(t):
    """Smooth step S(t) = 0 for t <= 0, 1 for t >= 1, and S', S''."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    ti = np.where(inside, t, 0.5)
    h = 1.0 / ti - 1.0 / (1.0 - ti)
    h1 = -1.0 / ti**2 - 1.0 / (1.0 - ti) ** 2
    h2 = 2.0 / ti**3 - 2.0 / (1.0 - ti) ** 3
    s = expit(-h)
    q = s * expit(h)  # s (1 - s) without cancellation near s = 1
    s1 = -q * h1
    s2 = -(s1 * (1.0 - 2.0 * s) * h1 + q * h2)
    s = np.where(inside, s, (t >= 1).astype(float))
    s1 = np.where(inside, s1, 0.0)
    s2 = np.where(inside, s2, 0.0)
    return s, s1, s2


def _radial_cutoff(y, inner, outer):
    """chi(|y|) with chi = 1 on |y| <= inner, 0 beyond outer; also 1 - chi and derivatives."""
    w = outer - inner
    t = (outer - np.abs(y)) / w
    s, s1, s2 = _step(t)
    comp, _, _ = _step(1.0 - t)
    sgn = np.sign(y)
    return s, -s1 * sgn / w, s2 / w**2, comp


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowMonomial:
    """``coeff * y**exponent * chi(y)`` at pole ``pole`` (cutoff radii from the space)."""

    pole: int
    exponent: int
    coeff: complex = 1.0

    def to_dict(self):
        c = complex(self.coeff)
        return {"kind": "monomial", "pole": self.pole, "exponent": self.exponent, "coeff": [c.real, c.imag]}


@dataclass(frozen=True)
class Bump:
    """``coeff * beta((x - center)/width) * cos(freq (x - center) + phase)``, supported in ``|x - center| < width``."""

    center: float
    width: float
    freq: float = 0.0
    phase: float = 0.0
    coeff: complex = 1.0

    def to_dict(self):
        c = complex(self.coeff)
        return {"kind": "bump", "center": self.center, "width": self.width, "freq": self.freq,
                "phase": self.phase, "coeff": [c.real, c.imag]}


def atom_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind")
    if "coeff" in d and isinstance(d["coeff"], (list, tuple)):
        d["coeff"] = complex(d["coeff"][0], d["coeff"][1])
    if kind == "monomial":
        return WindowMonomial(**d)
    if kind == "bump":
        return Bump(**d)
    raise ValueError(f"unknown atom kind {kind!r}")


@dataclass(frozen=True)
class SpaceElement:
    """A function on the window together with its Laurent data at every pole.

    ``smooth_part`` evaluates the function on the real axis (away from the
    poles).  ``local_data[j]`` is its expansion at pole ``j``.  The optional
    ``second_derivative`` and ``remainder`` callables give ``f''`` and,
    for ``x`` near pole ``j``, the value minus the principal part without
    cancellation.  ``magnitude`` bounds the size of the terms that cancel in
    ``smooth_part`` (used as the roundoff scale by the quadrature).
    """

    smooth_part: Callable
    local_data: Mapping[int, TruncatedLaurentSeries]
    second_derivative: Optional[Callable] = None
    remainder: Optional[Callable] = None
    atoms: tuple = field(default=())
    magnitude: Optional[Callable] = None

    def __call__(self, x):
        return self.smooth_part(x)

    def principal(self, j: int) -> TruncatedLaurentSeries:
        s = self.local_data[j]
        if s.min_degree >= 0:
            return TruncatedLaurentSeries(s.center, -1, [0.0])
        return TruncatedLaurentSeries(s.center, s.min_degree, s.coeffs[: -s.min_degree])

    def regular_coeffs(self, j: int, n: int) -> np.ndarray:
        """Coefficients of degrees 0..n-1 of the local series (needed for principal parts of products)."""
        s = self.local_data[j]
        return np.array([s.coeff(k) if k <= s.max_degree else 0j for k in range(n)])

    def remainder_at(self, x, j: int):
        if self.remainder is not None:
            return self.remainder(x, j)
        return self.smooth_part(x) - self.principal(j)(x)


def _eval_atom(atom, x, s: SpaceSpec, order: int, stable_pole: Optional[int] = None):
    """Atom value (order 0) or second derivative (order 2) at real ``x``."""
    if isinstance(atom, WindowMonomial):
        xj, _ = s.poles[atom.pole]
        inner, outer = s.cutoff_radii(atom.pole)
        y = x - xj
        e = atom.exponent
        out = np.zeros_like(y, dtype=np.complex128)
        m = np.abs(y) < outer
        if not np.any(m):
            return out
        ym = y[m]
        chi, chi1, chi2, comp = _radial_cutoff(ym, inner, outer)
        if order == 0:
            if stable_pole == atom.pole and e < 0:
                out[m] = -atom.coeff * ym**e * comp
            else:
                out[m] = atom.coeff * ym**e * chi
        else:
            v = ym**e * chi2
            if e != 0:
                v = v + 2 * e * ym ** (e - 1) * chi1
            if e not in (0, 1):
                v = v + e * (e - 1) * ym ** (e - 2) * chi
            out[m] = atom.coeff * v
        return out
    if isinstance(atom, Bump):
        z = (x - atom.center) / atom.width
        out = np.zeros_like(z, dtype=np.complex128)
        m = np.abs(z) < 1
        if not np.any(m):
            return out
        zm = z[m]
        t = (1.0 - np.abs(zm)) / 0.5
        b, b1, b2 = _step(t)
        b1 = -b1 * np.sign(zm) / (0.5 * atom.width)
        b2 = b2 / (0.25 * atom.width**2)
        ph = atom.freq * (x[m] - atom.center) + atom.phase
        c, sn = np.cos(ph), np.sin(ph)
        if order == 0:
            out[m] = atom.coeff * b * c
        else:
            w = atom.freq
            out[m] = atom.coeff * (b2 * c - 2 * w * b1 * sn - w * w * b * c)
        return out
    raise TypeError(f"unknown atom {atom!r}")


def element_from_atoms(atoms: Sequence, s: SpaceSpec, order: int = DEFAULT_ORDER) -> SpaceElement:
    """Element built from windowed monomials and bumps (Bloch mode periodizes with kappa)."""
    atoms = tuple(atoms)
    for a in atoms:
        if isinstance(a, WindowMonomial) and not 0 <= a.pole < len(s.poles):
            raise ValueError(f"atom refers to pole {a.pole}, the space has {len(s.poles)}")
    shifts = [(0.0, 1.0)]
    if s.is_bloch:
        T, k = s.period, s.kappa
        shifts = [(n * T, k**n) for n in (-1, 0, 1)]

    def total(x, order_, stable=None):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.zeros(x.shape, dtype=np.complex128)
        for sh, w in shifts:
            for a in atoms:
                out += w * _eval_atom(a, x - sh, s, order_, stable)
        return out[0] if scalar else out

    local = {}
    for j, (xj, r) in enumerate(s.poles):
        terms = {}
        for a in atoms:
            if isinstance(a, WindowMonomial) and a.pole == j:
                terms[a.exponent] = terms.get(a.exponent, 0) + complex(a.coeff)
        lo = min(list(terms) + [0])
        hi = max(list(terms) + [order])
        local[j] = TruncatedLaurentSeries.from_dict(terms, center=xj, max_degree=hi, min_degree=lo)

    return SpaceElement(
        smooth_part=lambda x: total(x, 0),
        local_data=local,
        second_derivative=lambda x: total(x, 2),
        remainder=lambda x, j: total(x, 0, j),
        atoms=atoms,
    )


def _free_intervals(s: SpaceSpec):
    a, b = s.window
    # bumps stay off the zone where the windowed monomials are exact powers
    blocked = sorted((x - s.cutoff_radii(j)[0], x + s.cutoff_radii(j)[0]) for j, (x, _) in enumerate(s.poles))
    out, cur = [], a
    for lo, hi in blocked:
        if lo > cur:
            out.append((cur, lo))
        cur = max(cur, hi)
    if b > cur:
        out.append((cur, b))
    return [(lo, hi) for lo, hi in out if hi - lo > 1e-9]


def _random_bump(s: SpaceSpec, rng: np.random.Generator, real: bool = True) -> Bump:
    free = _free_intervals(s)
    if not free:
        raise ValueError("no room for a smooth bump")
    lengths = np.array([hi - lo for lo, hi in free])
    lo, hi = free[int(rng.choice(len(free), p=lengths / lengths.sum()))]
    half = 0.5 * (hi - lo)
    width = half * rng.uniform(0.3, 0.95)
    center = rng.uniform(lo + width, hi - width)
    freq = rng.uniform(0.0, 3.0 * math.pi / (s.window[1] - s.window[0]))
    phase = rng.uniform(0.0, 2 * math.pi)
    coeff = rng.normal() if real else complex(rng.normal(), rng.normal())
    return Bump(float(center), float(width), float(freq), float(phase), coeff)


def random_admissible_element(s: SpaceSpec, rng: np.random.Generator, bumps: int = 2,
                              extra_regular: int = 2, real: bool = True) -> SpaceElement:
    """Random combination of every window monomial, a few higher monomials and bumps."""
    atoms = []
    for j, (_, r) in enumerate(s.poles):
        exps = parity_window(r) + list(range(r + 1, r + 1 + extra_regular))
        for e in exps:
            c = rng.normal() if real else complex(rng.normal(), rng.normal())
            atoms.append(WindowMonomial(j, e, c))
    atoms += [_random_bump(s, rng, real) for _ in range(bumps)]
    return element_from_atoms(atoms, s)


# ---------------------------------------------------------------------------
# Membership and residues
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MembershipReport:
    ok: bool
    reason: str = ""
    pole: Optional[int] = None
    degree: Optional[int] = None

    def __bool__(self):
        return self.ok


def check_membership(f: SpaceElement, s: SpaceSpec, tol: float = MEMBERSHIP_TOL, samples: int = 7) -> MembershipReport:
    """Parity-window test at each pole, plus the Bloch condition in Bloch mode."""
    for j, (xj, r) in enumerate(s.poles):
        if j not in f.local_data:
            raise MissingLocalData(f"element has no local data at pole {j} (x = {xj})")
        ser = f.local_data[j]
        if abs(ser.center - xj) > 1e-12:
            return MembershipReport(False, "local series centred off the pole", j)
        scale = max(1.0, float(np.max(np.abs(ser.coeffs))))
        for k in range(ser.min_degree, min(r, ser.max_degree) + 1):
            bad = k < -r or (k + r) % 2 == 1
            if bad and abs(ser.coeff(k)) > tol * scale:
                return MembershipReport(False, "coefficient outside the parity window", j, k)
    if s.is_bloch and samples:
        a, b = s.window
        x = np.linspace(a, b, samples + 2)[1:-1]
        near = np.array([min([abs(xx - p) for p in s.positions] + [np.inf]) for xx in x])
        x = x[near > 2 * s.rho]
        if x.size:
            lhs = np.asarray(f(x + s.period))
            rhs = s.kappa * np.asarray(f(x))
            if np.any(np.abs(lhs - rhs) > 1e3 * tol * (1 + np.abs(rhs))):
                return MembershipReport(False, "f(x + T) != kappa f(x)")
    return MembershipReport(True)


def _local_product(f: SpaceElement, g: SpaceElement, j: int) -> TruncatedLaurentSeries:
    return mul(f.local_data[j], g.local_data[j].conj_coeffs())


def pair_residue(f: SpaceElement, g: SpaceElement, pole_index: int) -> complex:
    """Residue of ``f * conj(g(conj y))`` at the pole, from the local series."""
    for h in (f, g):
        if pole_index not in h.local_data:
            raise MissingLocalData(f"no local data at pole {pole_index}")
    return residue(_local_product(f, g, pole_index))


# ---------------------------------------------------------------------------
# Pairing
# ---------------------------------------------------------------------------


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _integrate(fun, a, b, tol, what, rel=1e-12, max_rounds=60, max_panels=20000):
    """Adaptive panel Gauss-Legendre for vectorised integrands ``fun(x) -> (len(x), m)``.

    A panel is accepted when its 16-point rule and the sum over its two
    halves agree to the absolute budget (scaled by panel width) or to ``rel``
    times the panel integral of ``|fun|``, which keeps roundoff in cancelling
    integrands from forcing endless refinement.  ``fun`` may return a pair
    ``(values, scale)`` where ``scale`` bounds the magnitude of the terms
    summed into ``values``; ``rel`` then applies to the integral of ``scale``.
    """
    if b <= a:
        return 0.0
    epsabs = 1e-3 * tol
    edges = np.linspace(a, b, 9)
    lo, hi = edges[:-1], edges[1:]
    total = 0.0
    for _ in range(max_rounds):
        mid = 0.5 * (lo + hi)
        segs = np.stack([np.stack([lo, hi], 1), np.stack([lo, mid], 1), np.stack([mid, hi], 1)], 1)  # (P, 3, 2)
        c = 0.5 * (segs[..., 0] + segs[..., 1])
        h = 0.5 * (segs[..., 1] - segs[..., 0])
        x = c[..., None] + h[..., None] * _GL_X  # (P, 3, 16)
        vals = fun(x.ravel())
        scale = None
        if isinstance(vals, tuple):
            vals, scale = vals
        vals = np.asarray(vals)
        vals = vals.reshape(x.shape + vals.shape[1:])
        mags = np.abs(vals) if scale is None else np.maximum(np.abs(vals), np.asarray(scale).reshape(vals.shape))
        quad = np.einsum("pqn...,n->pq...", vals, _GL_W) * h.reshape(h.shape + (1,) * (vals.ndim - 3))
        coarse, fine = quad[:, 0], quad[:, 1] + quad[:, 2]
        diff = np.abs(coarse - fine).reshape(len(lo), -1).max(axis=1)
        absq = np.einsum("pqn...,n->pq...", mags, _GL_W)[:, 0]
        size = (absq * (0.5 * (hi - lo)).reshape((-1,) + (1,) * (absq.ndim - 1))).reshape(len(lo), -1).max(axis=1)
        ok = (diff <= epsabs * (hi - lo) / (b - a)) | (diff <= rel * size)
        total = total + fine[ok].sum(axis=0)
        if ok.all():
            return total
        worst = float(mid[np.argmax(np.where(ok, 0.0, diff / np.maximum(size, 1e-300)))])
        lo, hi, mid = lo[~ok], hi[~ok], mid[~ok]
        if np.min(hi - lo) < 1e-13 * (b - a) or 2 * len(lo) > max_panels:
            break
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    raise QuadratureFailure(f"{what}: adaptive quadrature did not converge on [{a}, {b}] (worst near x = {worst:.6g})")


def _principal_block(F, G, j, zipped=False):
    """Coefficient tensors for the principal parts of the local products at pole j."""
    K = max([max(0, -h.local_data[j].min_degree) for h in list(F) + list(G)] + [0])
    if K == 0:
        return K, None, None, None, None, None
    PF = np.array([h.principal(j).window(-K, -1) for h in F])
    PG = np.conj(np.array([h.principal(j).window(-K, -1) for h in G]))
    RF = np.array([h.regular_coeffs(j, K) for h in F])
    RG = np.conj(np.array([h.regular_coeffs(j, K) for h in G]))
    # principal part of fP * conj(gR) and of fR * conj(gP): degree m = i + k in -K..-1
    shape = (len(F), K) if zipped else (len(F), len(G), K)
    C = np.zeros(shape, dtype=np.complex128)
    for i in range(K):  # degree -K + i
        for k in range(K):  # degree k
            m = -K + i + k
            if m < 0:
                if zipped:
                    C[:, m + K] += PF[:, i] * RG[:, k] + RF[:, k] * PG[:, i]
                else:
                    C[:, :, m + K] += np.outer(PF[:, i], RG[:, k]) + np.outer(RF[:, k], PG[:, i])
    return K, PF, PG, RF, RG, C


def _values(H, x, fn=None):
    return np.stack([np.asarray(h(x) if fn is None else fn(h, x)) for h in H], axis=1)


def _pairing(F, G, s: SpaceSpec, rho, orientation, zipped, rel=1e-12):
    nF, nG = len(F), len(G)
    a, b = s.window
    pair = (lambda u, v: u * v) if zipped else (lambda u, v: np.einsum("xa,xb->xab", u, v))
    cpair = (lambda C, yp: yp @ C.T) if zipped else (lambda C, yp: np.einsum("abk,xk->xab", C, yp))
    shape = (nF,) if zipped else (nF, nG)

    noisy = any(h.magnitude is not None for h in list(F) + list(G))

    def mags(H, x, vals):
        m = np.abs(vals)
        for n, h in enumerate(H):
            if h.magnitude is not None:
                m[:, n] = np.maximum(m[:, n], np.abs(h.magnitude(x)))
        return m

    def far(x):
        fv, gv = _values(F, x), _values(G, x)
        out = pair(fv, np.conj(gv)).reshape(len(x), -1)
        if not noisy:
            return out
        return out, pair(mags(F, x, fv), mags(G, x, gv)).reshape(len(x), -1)

    total = np.zeros(int(np.prod(shape)), dtype=np.complex128)
    cursor = a
    for j, (xj, r) in enumerate(s.poles):
        _, outer = s.cutoff_radii(j)
        if rho >= outer:
            raise ValueError("rho exceeds the subtraction radius")
        total += _integrate(far, cursor, xj - outer, s.tol, "line", rel)
        cursor = xj + outer

        K, PF, PG, RF, RG, C = _principal_block(F, G, j, zipped)

        def near(x, j=j, xj=xj, K=K, PF=PF, PG=PG, C=C):
            rf = _values(F, x, lambda h, xx: h.remainder_at(xx, j))
            rg = np.conj(_values(G, x, lambda h, xx: h.remainder_at(xx, j)))
            out = pair(rf, rg)
            if noisy:
                mf, mg = mags(F, x, rf), mags(G, x, rg)
                scale = pair(mf, mg)
            if K:
                yp = (x - xj)[:, None] ** np.arange(-K, 0, dtype=float)
                pf, pg = yp @ PF.T, yp @ PG.T
                out = out + pair(pf, rg) + pair(rf, pg) - cpair(C, yp)
                if noisy:
                    scale = scale + pair(np.abs(pf), mg) + pair(mf, np.abs(pg))
            if not noisy:
                return out.reshape(len(x), -1)
            return out.reshape(len(x), -1), scale.reshape(len(x), -1)

        total += _integrate(near, xj - outer, xj - rho, s.tol, "near-pole", rel)
        total += _integrate(near, xj + rho, xj + outer, s.tol, "near-pole", rel)

        # closed-form pieces: principal part over the detoured segment, regular part on the half circle
        pairs = zip(range(nF), range(nG)) if zipped else ((p, q) for p in range(nF) for q in range(nG))
        for n, (p, q) in enumerate(pairs):
            prod = _local_product(F[p], G[q], j)
            val = 0j
            if prod.min_degree < 0:
                pp = TruncatedLaurentSeries(xj, prod.min_degree, prod.coeffs[: -prod.min_degree])
                val += detour_integral(pp, outer, orientation)
            if prod.max_degree >= 0:
                lo = max(prod.min_degree, 0)
                reg = TruncatedLaurentSeries(xj, lo, prod.coeffs[lo - prod.min_degree:])
                val += semicircle_integral(reg, rho, orientation)
            total[n] += val
    total += _integrate(far, cursor, b, s.tol, "line", rel)
    return total.reshape(shape)


def _check_all(H, s):
    for h in H:
        rep = check_membership(h, s)
        if not rep:
            raise MembershipViolation(f"{rep.reason} (pole {rep.pole}, degree {rep.degree})")


def gram_matrix(F: Sequence[SpaceElement], G: Optional[Sequence[SpaceElement]], s: SpaceSpec,
                rho: Optional[float] = None, orientation: str = "upper", check: bool = True,
                rel: float = 1e-12) -> np.ndarray:
    """Matrix of pairings ``<F_a, G_b>`` (``G`` defaults to ``F``).

    ``rel`` is the per-panel accuracy relative to the integral of the
    modulus; loosen it for elements whose values carry cancellation noise.
    """
    F = list(F)
    G = F if G is None else list(G)
    if check:
        _check_all(F + G, s)
    return _pairing(F, G, s, s.rho if rho is None else float(rho), orientation, zipped=False, rel=rel)


def pairwise_products(F: Sequence[SpaceElement], G: Sequence[SpaceElement], s: SpaceSpec,
                      rho: Optional[float] = None, orientation: str = "upper", check: bool = True) -> np.ndarray:
    """``<F_i, G_i>`` for matched lists, sharing one quadrature."""
    F, G = list(F), list(G)
    if len(F) != len(G):
        raise ValueError("F and G must have equal length")
    if check:
        _check_all(F + G, s)
    return _pairing(F, G, s, s.rho if rho is None else float(rho), orientation, zipped=True)


def inner_product(f: SpaceElement, g: SpaceElement, s: SpaceSpec, rho: Optional[float] = None,
                  orientation: str = "upper") -> complex:
    """The indefinite pairing ``<f, g>`` over the window (one period in Bloch mode)."""
    return complex(gram_matrix([f], [g], s, rho=rho, orientation=orientation)[0, 0])


def element_norm(f: SpaceElement, s: SpaceSpec, rho: Optional[float] = None) -> float:
    """L2 size of ``f`` on the window with the rho-disks removed (a scale, not a norm of the space)."""
    rho = s.rho if rho is None else rho
    a, b = s.window
    cuts = [a] + [v for x in s.positions for v in (x - rho, x + rho)] + [b]
    tot = 0.0
    for lo, hi in zip(cuts[::2], cuts[1::2]):
        tot += float(_integrate(lambda x: np.abs(np.asarray(f(x)))[:, None] ** 2, lo, hi, s.tol, "norm")[0])
    return math.sqrt(tot)


# ---------------------------------------------------------------------------
# Negative squares
# ---------------------------------------------------------------------------


def negative_count_formula(s: SpaceSpec) -> int:
    """Sum of floor((r_j + 1)/2) over the poles of the window."""
    return sum(negative_subspace(r)[1] for r in s.orders)


def recommended_basis_size(s: SpaceSpec) -> int:
    return max(4, sum(2 * r + 2 for r in s.orders))


def gram_basis(s: SpaceSpec, basis_size: Optional[int] = None, seed: int = 0) -> list:
    """Windowed pure singular elements (one per negative window exponent) then random bumps."""
    size = recommended_basis_size(s) if basis_size is None else int(basis_size)
    rng = np.random.default_rng(seed)
    basis = []
    for j, (_, r) in enumerate(s.poles):
        exps, _ = negative_subspace(r)
        basis += [element_from_atoms([WindowMonomial(j, e, 1.0)], s) for e in exps]
    if len(basis) > size:
        raise ValueError(f"basis_size {size} is smaller than the {len(basis)} singular elements")
    while len(basis) < size:
        basis.append(element_from_atoms([_random_bump(s, rng)], s))
    return basis


def signature(G: np.ndarray, eps: float = 1e-10) -> tuple:
    """(negative, zero, positive) eigenvalue counts of a Hermitian matrix after diagonal scaling.

    Rows are scaled by their largest entry rather than the diagonal so that
    neutral vectors (zero self-pairing) do not blow up the scaling.
    """
    H = 0.5 * (G + G.conj().T)
    d = np.sqrt(np.maximum(np.max(np.abs(H), axis=1), np.finfo(float).tiny))
    ev = np.linalg.eigvalsh(H / np.outer(d, d))
    cut = eps * max(np.max(np.abs(ev)), np.finfo(float).tiny)
    return int(np.sum(ev < -cut)), int(np.sum(np.abs(ev) <= cut)), int(np.sum(ev > cut))


def negative_count_gram(s: SpaceSpec, basis_size: Optional[int] = None, seed: int = 0, eps: float = 1e-10) -> int:
    """Negative eigenvalues of the Gram matrix of ``gram_basis``."""
    basis = gram_basis(s, basis_size, seed)
    return signature(gram_matrix(basis, None, s), eps)[0]


# ---------------------------------------------------------------------------
# The operator and its symmetry
# ---------------------------------------------------------------------------


def _fd_second(f, h=1e-3):
    w = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
    k = np.arange(-4, 5)

    def d2(x):
        x = np.asarray(x, dtype=float)
        return sum(wi * np.asarray(f(x + ki * h)) for wi, ki in zip(w, k)) / h**2

    return d2


def _certify_poles(p, s: SpaceSpec, order: int):
    series = {}
    a, b = s.window
    found = find_real_poles(p, (a, b)) if not s.is_bloch else find_real_poles(p, (a, b - 1e-12))
    for q in found:
        if min([abs(q.position - x) for x in s.positions] + [np.inf]) > 1e-8:
            raise MembershipViolation(f"potential has a pole at {q.position} that the space does not list")
    for j, (xj, r) in enumerate(s.poles):
        op = local_expansion(p, xj, order=order)
        cert = is_s_meromorphic_at_pole(op)
        if not cert.verdict:
            raise NonSMeromorphicPotential(f"pole {xj}: {cert.failed_condition} (order {cert.failed_order})")
        if cert.r != r:
            raise MembershipViolation(f"pole {xj} has r = {cert.r}, the space says {r}")
        series[j] = op.u_coeffs
    return series


def apply_operator(p, f: SpaceElement, s: SpaceSpec, order: int = DEFAULT_ORDER, u_series=None) -> SpaceElement:
    """``L f = -f'' + u f`` with local data transformed analytically."""
    u_series = _certify_poles(p, s, order) if u_series is None else u_series
    d2 = f.second_derivative or _fd_second(f.smooth_part)

    def value(x):
        x = np.asarray(x, dtype=float)
        return -np.asarray(d2(x)) + evaluate(p, x) * np.asarray(f(x))

    def magnitude(x):
        x = np.asarray(x, dtype=float)
        return np.abs(d2(x)) + np.abs(evaluate(p, x) * np.asarray(f(x)))

    local = {}
    for j in range(len(s.poles)):
        fj = f.local_data[j]
        dd = differentiate(differentiate(fj)) if fj.max_degree >= 2 else None
        prod = mul(u_series[j], fj)
        local[j] = prod - dd if dd is not None else prod
    out = SpaceElement(value, local, magnitude=magnitude)
    rep = check_membership(out, s, tol=1e-8)
    if not rep:
        raise MembershipViolation(f"L f leaves the space: {rep.reason} (pole {rep.pole}, degree {rep.degree})")
    return out


def symmetry_defect(p, f: SpaceElement, g: SpaceElement, s: SpaceSpec) -> float:
    """``|<L f, g> - <f, L g>|``; raises NonSMeromorphicPotential when u fails the local certificate."""
    u_series = _certify_poles(p, s, DEFAULT_ORDER)
    Lf = apply_operator(p, f, s, u_series=u_series)
    Lg = apply_operator(p, g, s, u_series=u_series)
    # L f is evaluated as -f'' + u f, which cancels near the poles
    left = gram_matrix([Lf], [g], s, check=False, rel=OPERATOR_REL)[0, 0]
    right = gram_matrix([f], [Lg], s, check=False, rel=OPERATOR_REL)[0, 0]
    return float(abs(left - right))
