"""Global potentials: rational-singular, KdV soliton tau functions, elliptic.

KdV convention used throughout: ``u_t = 6 u u_x - u_xxx`` with
``u = -2 (log tau)_xx`` and soliton phases ``E_i = exp(2 k_i (x - 4 k_i^2 t - x_i))``,
so a soliton of wave number ``k`` travels right with speed ``4 k^2``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import mpmath
import numpy as np
from scipy.optimize import brentq

from .elliptic import WeierstrassData, weierstrass, wp_laurent_coeffs
from .errors import (
    GridTooCoarse,
    LatticePoint,
    NotAPole,
    PoleProximity,
    RadiusCollision,
    SchemaError,
    TrackingLost,
)
from .laurent import TruncatedLaurentSeries
from .local import LocalOperatorData

__all__ = [
    "RationalSingular",
    "SolitonTau",
    "Elliptic",
    "PotentialSpec",
    "PoleInfo",
    "PoleEvent",
    "JumpEvent",
    "Timeline",
    "evaluate",
    "local_expansion",
    "find_real_poles",
    "evolve_track",
    "kdv_residual",
    "potential_from_dict",
    "potential_to_dict",
    "type_label",
]

POLE_TOL = 1e-10
MAX_SOLITONS = 8


# ---------------------------------------------------------------------------
# Variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RationalSingular:
    """u = sum_j r_j (r_j + 1) / (x - x_j)^2 + sum_i a_i x^i (time independent)."""

    poles: tuple = ()
    regular: tuple = ()
    time: float = 0.0

    def __post_init__(self):
        poles = tuple((float(x), int(r)) for x, r in self.poles)
        if any(r < 0 for _, r in poles):
            raise ValueError("pole orders must be nonnegative")
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "regular", tuple(complex(a) for a in self.regular))


@dataclass(frozen=True)
class SolitonTau:
    k: tuple
    shifts: tuple
    signs: tuple
    time: float = 0.0

    def __post_init__(self):
        k = tuple(float(v) for v in self.k)
        n = len(k)
        if not 1 <= n <= MAX_SOLITONS:
            raise ValueError(f"need 1..{MAX_SOLITONS} solitons")
        if len(self.shifts) != n or len(self.signs) != n:
            raise ValueError("k, shifts and signs must have equal length")
        if any(v <= 0 for v in k) or any(b <= a for a, b in zip(k, k[1:])):
            raise ValueError("wave numbers must be positive and strictly increasing")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError("sign flags must be +1 or -1")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "shifts", tuple(float(v) for v in self.shifts))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))

    @property
    def singular(self) -> bool:
        return any(s < 0 for s in self.signs)

    def _terms(self):
        """Per-subset (coefficient, x-rate, t-rate, constant phase)."""
        n = len(self.k)
        out = []
        for mask in range(1 << n):
            idx = [i for i in range(n) if mask >> i & 1]
            coef = 1.0
            for i in idx:
                coef *= self.signs[i]
            for i, j in itertools.combinations(idx, 2):
                coef *= ((self.k[i] - self.k[j]) / (self.k[i] + self.k[j])) ** 2
            xr = sum(2 * self.k[i] for i in idx)
            tr = sum(-8 * self.k[i] ** 3 for i in idx)
            c0 = sum(-2 * self.k[i] * self.shifts[i] for i in idx)
            out.append((coef, xr, tr, c0))
        return out

    def tau_derivs(self, x, t=None, orders=(0, 1, 2), t_order=0):
        """Scaled tau and its x-derivatives; all share one positive factor per point.

        The factor keeps exponentials finite and cancels in every ratio used
        here (u, zero locations, multiplicity tests).  Also returns the
        matching scale sum of |terms| for each order.
        """
        t = float(self.time if t is None else t)
        x = np.asarray(x, dtype=np.complex128)
        terms = self._terms()
        phases = np.array([xr * x + tr * t + c0 for _, xr, tr, c0 in terms])
        m = np.max(phases.real, axis=0)
        e = np.exp(phases - m)
        vals, scales = [], []
        for d in orders:
            w = np.array([coef * xr**d * tr**t_order for coef, xr, tr, _ in terms])
            vals.append(np.tensordot(w, e, axes=1))
            scales.append(np.tensordot(np.abs(w), np.abs(e), axes=1))
        return vals, scales

    def _terms_mp(self):
        out = []
        k = [mpmath.mpf(v) for v in self.k]
        for mask in range(1 << len(k)):
            idx = [i for i in range(len(k)) if mask >> i & 1]
            coef = mpmath.mpf(1)
            for i in idx:
                coef *= self.signs[i]
            for i, j in itertools.combinations(idx, 2):
                coef *= ((k[i] - k[j]) / (k[i] + k[j])) ** 2
            xr = sum((2 * k[i] for i in idx), mpmath.mpf(0))
            tr = sum((-8 * k[i] ** 3 for i in idx), mpmath.mpf(0))
            c0 = sum((-2 * k[i] * mpmath.mpf(self.shifts[i]) for i in idx), mpmath.mpf(0))
            out.append((coef, xr, tr, c0))
        return out

    def tau_mp(self, x, t, d=0, dt=0):
        """Unscaled tau derivative at (x, t) in mpmath (for event refinement)."""
        return mpmath.fsum(coef * xr ** d * tr ** dt * mpmath.exp(xr * x + tr * t + c0)
                           for coef, xr, tr, c0 in self._terms_mp())


@dataclass(frozen=True)
class Elliptic:
    """u = n (n + 1) wp(x - shift) on the lattice (2 omega1, 2 omega2)."""

    omega1: float = 1.0
    omega2: complex = 1j
    n: int = 1
    shift: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "omega2", complex(self.omega2))
        if int(self.n) < 0:
            raise ValueError("strength n must be nonnegative")
        object.__setattr__(self, "n", int(self.n))

    @property
    def data(self) -> WeierstrassData:
        return WeierstrassData(self.omega1, self.omega2)


PotentialSpec = Union[RationalSingular, SolitonTau, Elliptic]


@dataclass(frozen=True)
class PoleInfo:
    position: float
    multiplicity: int  # order of the tau zero, u ~ 2m / y^2
    r: Optional[int]
    kind: str


@dataclass(frozen=True)
class PoleEvent:
    time: float
    position: float
    tau_zero_multiplicity: int
    pole_type_coefficient: int
    r: Optional[int]
    artifact: bool = False


@dataclass(frozen=True)
class JumpEvent:
    time: float
    position: float
    m_before: int
    m_at: int
    r_before: Optional[int]
    r_at: Optional[int]
    complex_pair_distance: float
    tau2_normalized: float
    time_exact: object = field(default=None, repr=False, compare=False)
    position_exact: object = field(default=None, repr=False, compare=False)

    @property
    def transition(self) -> str:
        return f"{type_label(self.m_before)} → {type_label(self.m_at)}"


@dataclass
class Timeline:
    times: np.ndarray
    tracks: list  # list of lists of PoleEvent
    events: list  # JumpEvent
    negative_counts: list

    def rows(self):
        for tid, tr in enumerate(self.tracks):
            for ev in tr:
                yield tid, ev


def type_label(m: int) -> str:
    return f"{2 * m}/y^2"


def _r_from_m(m: int) -> Optional[int]:
    r = int(round((math.sqrt(1 + 8 * m) - 1) / 2))
    return r if r * (r + 1) == 2 * m else None


def _m_from_r(r: int) -> int:
    return r * (r + 1) // 2


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(p: PotentialSpec, x):
    x = np.asarray(x, dtype=np.complex128)
    if isinstance(p, RationalSingular):
        out = np.zeros_like(x)
        for xj, r in p.poles:
            d = x - xj
            if np.any(np.abs(d) < POLE_TOL):
                raise PoleProximity(f"evaluation point within {POLE_TOL} of pole {xj}")
            out = out + r * (r + 1) / d**2
        for i, a in enumerate(p.regular):
            out = out + a * x**i
        return out
    if isinstance(p, SolitonTau):
        (t0, t1, t2), (s0, _, _) = p.tau_derivs(x)
        if np.any(np.abs(t0) < 1e-13 * s0):
            raise PoleProximity("evaluation point is (numerically) a zero of tau")
        l1 = t1 / t0
        return -2.0 * (t2 / t0 - l1 * l1)
    if isinstance(p, Elliptic):
        try:
            w = weierstrass(x - p.shift, p.data)[0]
        except LatticePoint as exc:
            raise PoleProximity(str(exc)) from exc
        return p.n * (p.n + 1) * w
    raise TypeError(f"unknown potential variant {type(p).__name__}")


def _soliton_u_mp(p: SolitonTau, x, t):
    t0 = p.tau_mp(x, t, 0)
    t1 = p.tau_mp(x, t, 1)
    t2 = p.tau_mp(x, t, 2)
    return -2 * (t2 / t0 - (t1 / t0) ** 2)


# ---------------------------------------------------------------------------
# Local expansions
# ---------------------------------------------------------------------------


def _cauchy_coeffs(values, radius, lo, hi):
    n = values.size
    f = np.fft.fft(values) / n
    ks = np.arange(lo, hi + 1)
    return np.array([f[k % n] for k in ks]) / radius ** ks.astype(float)


def _tau_zero_count(p: SolitonTau, center, radius, nodes=256):
    theta = 2 * np.pi * np.arange(nodes) / nodes
    z = center + radius * np.exp(1j * theta)
    (t0,), _ = p.tau_derivs(z, orders=(0,))
    ph = np.unwrap(np.angle(np.append(t0, t0[0])))
    return int(round((ph[-1] - ph[0]) / (2 * np.pi)))


def _soliton_radius(p: SolitonTau, center, multiplicity):
    rad = 0.2
    while rad > 1e-4:
        if _tau_zero_count(p, center, rad) == multiplicity:
            return min(0.1, rad / 2)
        rad /= 2
    raise RadiusCollision(f"could not isolate the zero at {center}")


def local_expansion(p: PotentialSpec, center, order: int = 24, precision: Optional[int] = None,
                    nodes: int = 128, multiplicity: Optional[int] = None,
                    time_exact=None) -> LocalOperatorData:
    """Laurent data of u about one of its poles up to degree ``order``.

    Rational and elliptic potentials are expanded analytically.  Soliton
    potentials use Cauchy coefficients on a circle of radius at most 0.1 and
    at most half the distance to the next zero of tau; ``precision`` (decimal
    digits) evaluates on that circle in mpmath.
    """
    if isinstance(p, RationalSingular):
        return _rational_expansion(p, complex(center), order)
    if isinstance(p, Elliptic):
        return _elliptic_expansion(p, complex(center), order)
    if not isinstance(p, SolitonTau):
        raise TypeError(f"unknown potential variant {type(p).__name__}")

    c0 = complex(center)
    if multiplicity is None:
        (t0, t1), (s0, s1) = p.tau_derivs(np.array([c0]), orders=(0, 1))
        if abs(t0[0]) > 1e-8 * s0[0]:
            raise NotAPole(f"tau does not vanish at {center}")
        multiplicity = _tau_zero_count(p, c0, 1e-3) or 1
    radius = _soliton_radius(p, c0, multiplicity)
    if precision:
        with mpmath.workdps(int(precision)):
            cx = mpmath.mpf(center) if not isinstance(center, complex) else mpmath.mpc(center)
            tt = p.time if time_exact is None else time_exact
            tt = mpmath.mpf(tt)
            vals = []
            for j in range(nodes):
                z = cx + radius * mpmath.expjpi(mpmath.mpf(2 * j) / nodes)
                vals.append(_soliton_u_mp(p, z, tt))
            coeffs = []
            for k in range(-2, order + 1):
                s = mpmath.fsum(vals[j] * mpmath.expjpi(-mpmath.mpf(2 * j * k) / nodes) for j in range(nodes))
                coeffs.append(complex(s / nodes / mpmath.mpf(radius) ** k))
            lower = []
            for k in (-4, -3):
                s = mpmath.fsum(vals[j] * mpmath.expjpi(-mpmath.mpf(2 * j * k) / nodes) for j in range(nodes))
                lower.append(complex(s / nodes / mpmath.mpf(radius) ** k))
        coeffs = np.array(coeffs)
        lower = np.array(lower)
    else:
        z = c0 + radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
        vals = evaluate(p, z)
        coeffs = _cauchy_coeffs(vals, radius, -2, order)
        lower = _cauchy_coeffs(vals, radius, -4, -3)
    if abs(coeffs[0]) < 1e-6:
        raise NotAPole(f"u has no double pole at {center}")
    series = TruncatedLaurentSeries(c0, -4, np.concatenate([lower, coeffs]))
    return LocalOperatorData(c0, series)


def _rational_expansion(p: RationalSingular, c: complex, order: int) -> LocalOperatorData:
    own = [r for xj, r in p.poles if abs(xj - c) < POLE_TOL]
    if not own:
        raise NotAPole(f"{c} is not a pole of the rational potential")
    r = own[0]
    coeffs = np.zeros(order + 3, dtype=np.complex128)  # degrees -2..order
    coeffs[0] = r * (r + 1)
    deg = np.arange(0, order + 1)
    for xj, rj in p.poles:
        d = c - xj
        if abs(d) < POLE_TOL:
            continue
        # 1/(y + d)^2 = sum_n (n+1) (-1)^n y^n / d^(n+2)
        coeffs[2:] += rj * (rj + 1) * (deg + 1) * (-1.0) ** deg / d ** (deg + 2)
    if p.regular:
        poly = np.polynomial.Polynomial(np.array(p.regular))
        shifted = poly(np.polynomial.Polynomial([c, 1.0]))
        tc = shifted.coef[: order + 1]
        coeffs[2: 2 + tc.size] += tc
    series = TruncatedLaurentSeries(c, -2, coeffs)
    return LocalOperatorData(c, series)


def _elliptic_expansion(p: Elliptic, c: complex, order: int) -> LocalOperatorData:
    data = p.data
    z0, _, _ = data.reduce(np.array([c - p.shift]))
    if abs(z0[0]) > 1e-9:
        raise NotAPole(f"{c} is not a lattice point of the shifted lattice")
    n_terms = order // 2 + 2
    lc = wp_laurent_coeffs(data.g2, data.g3, n_terms)
    coeffs = np.zeros(order + 3, dtype=np.complex128)
    coeffs[0] = 1.0
    for k, v in lc.items():
        deg = 2 * k - 2
        if deg <= order:
            coeffs[deg + 2] = v
    strength = p.n * (p.n + 1)
    series = TruncatedLaurentSeries(c, -2, strength * coeffs)
    return LocalOperatorData(c, series)


# ---------------------------------------------------------------------------
# Real poles
# ---------------------------------------------------------------------------


def _hermite_has_hidden_pair(f0, f1, d0, d1, h):
    """True if the cubic Hermite interpolant has two sign changes inside the cell."""
    if f0 * f1 < 0:
        return False
    if d0 * d1 >= 0:
        return False
    # interpolant on s in [0,1]
    c0, c1 = f0, d0 * h
    c2 = 3 * (f1 - f0) - (2 * d0 + d1) * h
    c3 = 2 * (f0 - f1) + (d0 + d1) * h
    s = np.linspace(0, 1, 65)
    vals = c0 + s * (c1 + s * (c2 + s * c3))
    return bool(np.any(np.sign(vals) != np.sign(f0)) and f0 != 0)


def find_real_poles(p: PotentialSpec, window: Sequence[float], step: float = 2e-3,
                    check_grid: bool = True, mult_tol: float = 1e-7) -> list:
    """Real poles of u in ``window`` with their tau-zero multiplicity."""
    a, b = float(window[0]), float(window[1])
    if not b > a:
        raise ValueError("window must be an increasing interval")
    if isinstance(p, RationalSingular):
        return [PoleInfo(x, _m_from_r(r), r, "rational") for x, r in p.poles if a <= x <= b and r > 0]
    if isinstance(p, Elliptic):
        if p.n == 0:
            return []
        w = 2 * p.data.omega1
        lo, hi = math.ceil((a - p.shift) / w - 1e-12), math.floor((b - p.shift) / w + 1e-12)
        return [PoleInfo(p.shift + j * w, _m_from_r(p.n), p.n, "elliptic") for j in range(lo, hi + 1)]
    if not isinstance(p, SolitonTau):
        raise TypeError(f"unknown potential variant {type(p).__name__}")

    n = max(2, int(math.ceil((b - a) / step)))
    x = np.linspace(a, b, n + 1)
    (t0, t1), _ = p.tau_derivs(x, orders=(0, 1))
    t0, t1 = t0.real, t1.real
    h = x[1] - x[0]

    def f(xx):
        (v,), _ = p.tau_derivs(np.array([xx]), orders=(0,))
        return float(v[0].real)

    poles = []
    for i in range(n):
        f0, f1 = t0[i], t0[i + 1]
        if f0 == 0.0:
            root = x[i]
        elif f0 * f1 < 0:
            root = brentq(f, x[i], x[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
        else:
            if check_grid and _hermite_has_hidden_pair(f0, f1, t1[i], t1[i + 1], h):
                raise GridTooCoarse(f"possible unresolved zero pair in [{x[i]}, {x[i + 1]}]")
            continue
        m = _multiplicity(p, root, mult_tol)
        poles.append(PoleInfo(float(root), m, _r_from_m(m), "tau_zero"))
    return poles


def _multiplicity(p: SolitonTau, x0, tol):
    (t0, t1, t2, t3), (s0, s1, s2, s3) = p.tau_derivs(np.array([x0]), orders=(0, 1, 2, 3))
    m = 1
    for val, scl in ((t1, s1), (t2, s2)):
        if abs(val[0]) <= tol * scl[0]:
            m += 1
        else:
            break
    return m


# ---------------------------------------------------------------------------
# Time evolution and jump events
# ---------------------------------------------------------------------------


def _tau2_indicator(p: SolitonTau, x0, t):
    (v,), (s,) = p.tau_derivs(np.array([x0]), t=t, orders=(2,))
    return float(v[0].real / s[0])


def _mp_real_root(p: SolitonTau, t, bracket):
    """The single real zero of tau(., t) inside ``bracket``, in mpmath."""
    f = lambda xx: p.tau_mp(xx, t, 0)
    lo, hi = mpmath.mpf(bracket[0]), mpmath.mpf(bracket[1])
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise TrackingLost(f"no sign change of tau in {bracket} at t={float(t)}")
    try:
        x = mpmath.findroot(f, (lo, hi), solver="anderson")
        if lo <= x <= hi:
            return x
    except (ValueError, ZeroDivisionError):
        pass
    eps = mpmath.mpf(10) ** (-(mpmath.mp.dps - 5))
    while hi - lo > eps:
        mid = (lo + hi) / 2
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def _tau_scale_mp(p: SolitonTau, x, t, d):
    return mpmath.fsum(abs(coef) * abs(xr) ** d * mpmath.exp(xr * x + tr * t + c0)
                       for coef, xr, tr, c0 in p._terms_mp())


def _complex_pair(p: SolitonTau, x0, t, degree=8):
    """The two tau zeros nearest to the real zero x0, from the local Taylor polynomial."""
    taylor = [p.tau_mp(x0, t, d) / mpmath.factorial(d) for d in range(degree + 1)]
    roots = mpmath.polyroots(list(reversed(taylor)), maxsteps=400, extraprec=400)
    roots = sorted(roots, key=lambda z: abs(z))
    # roots[0] ~ 0 is x0 itself
    return [x0 + z for z in roots[1:3]]


def _refine_event(p: SolitonTau, t_lo, t_hi, bracket, dps=60, tol_exp=45):
    with mpmath.workdps(dps):
        lo, hi = mpmath.mpf(t_lo), mpmath.mpf(t_hi)
        x = _mp_real_root(p, lo, bracket)
        g_lo = p.tau_mp(x, lo, 2)
        while hi - lo > mpmath.mpf(10) ** (-tol_exp):
            mid = (lo + hi) / 2
            x = _mp_real_root(p, mid, bracket)
            g = p.tau_mp(x, mid, 2)
            if g == 0:
                lo = hi = mid
                break
            if (g > 0) == (g_lo > 0):
                lo, g_lo = mid, g
            else:
                hi = mid
        t_star = (lo + hi) / 2
        x_star = _mp_real_root(p, t_star, bracket)
        pair = _complex_pair(p, x_star, t_star)
        dist = float(max(abs(mpmath.im(z)) for z in pair))
        tau2 = float(abs(p.tau_mp(x_star, t_star, 2)) / _tau_scale_mp(p, x_star, t_star, 2))
        tau1 = float(abs(p.tau_mp(x_star, t_star, 1)) / _tau_scale_mp(p, x_star, t_star, 1))
        return t_star, x_star, dist, tau1, tau2


def _nearest_root(p: SolitonTau, t, lo, hi, target):
    poles = find_real_poles(replace(p, time=float(t)), (lo, hi), step=min(2e-3, (hi - lo) / 50), check_grid=False)
    if not poles:
        return None
    return min(poles, key=lambda q: abs(q.position - target)).position


def _refine_track_segment(p, ta, xa, tb, xb, max_dx, depth=0, max_depth=60):
    """Bisect [ta, tb] until the tracked zero moves less than ``max_dx`` per piece."""
    if abs(xb - xa) <= max_dx or depth >= max_depth:
        return [(tb, xb)]
    tm = 0.5 * (ta + tb)
    lo, hi = min(xa, xb) - 0.25, max(xa, xb) + 0.25
    xm = _nearest_root(p, tm, lo, hi, 0.5 * (xa + xb))
    if xm is None:
        raise TrackingLost(f"pole vanished between t={ta} and t={tb}")
    left = _refine_track_segment(p, ta, xa, tm, xm, max_dx, depth + 1, max_depth)
    right = _refine_track_segment(p, tm, xm, tb, xb, max_dx, depth + 1, max_depth)
    return left + right


def evolve_track(p: SolitonTau, t_range, t_steps: int, window, pair_eps: float = 1e-6,
                 tau2_eps: float = 1e-8, step: float = 2e-3, dps: int = 60, max_dx: float = 0.02) -> Timeline:
    """Track real poles over a time grid and locate multiplicity jumps.

    Between grid times each trajectory is refined by bisection in t until the
    zero moves less than ``max_dx`` per piece.  A jump candidate is a sign
    change of tau'' at the tracked zero; it is bisected in t in mpmath and
    accepted when the nearest complex zero pair of tau lies within
    ``pair_eps`` of the real axis and ``|tau''|`` (relative to its term scale)
    is below ``tau2_eps``.
    """
    if not isinstance(p, SolitonTau):
        raise TypeError("evolve_track needs a SolitonTau potential")
    times = np.linspace(float(t_range[0]), float(t_range[1]), int(t_steps))
    snapshots = [find_real_poles(replace(p, time=float(t)), window, step=step) for t in times]

    tracks: list = []
    open_tracks: dict = {}
    for t, poles in zip(times, snapshots):
        used = set()
        new_open = {}
        for tid, last in open_tracks.items():
            best, bd = None, math.inf
            for j, pi in enumerate(poles):
                if j not in used and abs(pi.position - last.position) < bd:
                    best, bd = j, abs(pi.position - last.position)
            if best is None:
                continue
            used.add(best)
            pi = poles[best]
            ev = PoleEvent(float(t), pi.position, pi.multiplicity, 2 * pi.multiplicity, pi.r, pi.r is None)
            tracks[tid].append(ev)
            new_open[tid] = ev
        for j, pi in enumerate(poles):
            if j in used:
                continue
            ev = PoleEvent(float(t), pi.position, pi.multiplicity, 2 * pi.multiplicity, pi.r, pi.r is None)
            tracks.append([ev])
            new_open[len(tracks) - 1] = ev
        open_tracks = new_open

    events = []
    for tr in tracks:
        for a, b in zip(tr, tr[1:]):
            fine = [(a.time, a.position)] + _refine_track_segment(p, a.time, a.position, b.time, b.position, max_dx)
            for (ta, xa), (tb, xb) in zip(fine, fine[1:]):
                ga = _tau2_indicator(p, xa, ta)
                gb = _tau2_indicator(p, xb, tb)
                if not (ga == 0 or gb == 0 or (ga > 0) != (gb > 0)):
                    continue
                bracket = (min(xa, xb) - 0.05, max(xa, xb) + 0.05)
                try:
                    t_star, x_star, dist, tau1, tau2 = _refine_event(p, ta, tb, bracket, dps=dps)
                except TrackingLost:
                    continue
                if dist < pair_eps and tau2 < tau2_eps:
                    m_at = 3 if tau1 < tau2_eps else 2
                    if any(abs(e.time - float(t_star)) < 1e-12 for e in events):
                        continue
                    events.append(JumpEvent(float(t_star), float(x_star), a.tau_zero_multiplicity, m_at,
                                            a.r, _r_from_m(m_at), dist, tau2, t_star, x_star))
    events.sort(key=lambda e: e.time)

    negatives = [sum((pi.r + 1) // 2 for pi in poles if pi.r is not None) for poles in snapshots]
    return Timeline(times, tracks, events, negatives)


def event_snapshot(p: SolitonTau, ev: JumpEvent):
    """Negative-square count at the event itself (the merged pole has type r_at)."""
    return (ev.r_at + 1) // 2 if ev.r_at is not None else None


# ---------------------------------------------------------------------------
# KdV residual
# ---------------------------------------------------------------------------


def _contour_derivs(fun, x, radius, nodes, orders):
    theta = 2 * np.pi * np.arange(nodes) / nodes
    e = np.exp(1j * theta)
    z = np.asarray(x, dtype=np.complex128)[:, None] + radius * e[None, :]
    vals = fun(z)
    f = np.fft.fft(vals, axis=1) / nodes
    return [math.factorial(k) * f[:, k] / radius**k for k in orders]


def kdv_residual(p: PotentialSpec, t: float, grid, radius: float = 0.02, nodes: int = 32,
                 pole_margin: float = 0.05) -> float:
    """max over ``grid`` of |u_t - 6 u u_x + u_xxx| at time t.

    x-derivatives come from Cauchy integrals on small circles; for soliton
    potentials ``u_t = -2 (tau_t / tau)_xx`` uses the analytic t-derivative of
    tau, and the other variants are stationary.
    """
    grid = np.asarray(grid, dtype=float)
    p = replace(p, time=t)
    window = (grid.min() - 1.0, grid.max() + 1.0)
    poles = find_real_poles(p, window, check_grid=False)
    for pi in poles:
        if np.any(np.abs(grid - pi.position) < pole_margin):
            raise PoleProximity(f"grid comes within {pole_margin} of the pole at {pi.position}")
    u0, u1, u3 = _contour_derivs(lambda z: evaluate(p, z), grid, radius, nodes, (0, 1, 3))
    if isinstance(p, SolitonTau):
        def v(z):
            (t0,), _ = p.tau_derivs(z, orders=(0,))
            (tt,), _ = p.tau_derivs(z, orders=(0,), t_order=1)
            return tt / t0
        (v2,) = _contour_derivs(v, grid, radius, nodes, (2,))
        ut = -2.0 * v2
    else:
        ut = np.zeros_like(u0)
    res = ut - 6 * u0 * u1 + u3
    return float(np.max(np.abs(res)))


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def _cplx(v):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise SchemaError(f"complex numbers are [re, im] pairs, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def potential_from_dict(d: dict) -> PotentialSpec:
    if not isinstance(d, dict) or "variant" not in d:
        raise SchemaError("potential needs a 'variant' field")
    v = d["variant"]
    allowed = {
        "RationalSingular": {"variant", "poles", "regular", "time"},
        "SolitonTau": {"variant", "k", "shifts", "signs", "time"},
        "Elliptic": {"variant", "omega1", "omega2", "n", "shift", "time"},
    }
    if v not in allowed:
        raise SchemaError(f"unknown potential variant {v!r}")
    extra = set(d) - allowed[v]
    if extra:
        raise SchemaError(f"unknown potential fields: {sorted(extra)}")
    try:
        if v == "RationalSingular":
            poles = [(float(q["x"]), int(q["r"])) for q in d.get("poles", [])]
            return RationalSingular(tuple(poles), tuple(_cplx(a) for a in d.get("regular", [])), float(d.get("time", 0.0)))
        if v == "SolitonTau":
            k = d["k"]
            return SolitonTau(tuple(k), tuple(d.get("shifts", [0.0] * len(k))), tuple(d["signs"]), float(d.get("time", 0.0)))
        return Elliptic(float(d.get("omega1", 1.0)), _cplx(d.get("omega2", [0.0, 1.0])), int(d.get("n", 1)),
                        float(d.get("shift", 0.0)), float(d.get("time", 0.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad {v} potential: {exc}") from exc


def potential_to_dict(p: PotentialSpec) -> dict:
    if isinstance(p, RationalSingular):
        return {"variant": "RationalSingular", "poles": [{"x": x, "r": r} for x, r in p.poles],
                "regular": [[a.real, a.imag] for a in p.regular], "time": float(p.time)}
    if isinstance(p, SolitonTau):
        return {"variant": "SolitonTau", "k": list(p.k), "shifts": list(p.shifts), "signs": list(p.signs),
                "time": float(p.time)}
    return {"variant": "Elliptic", "omega1": p.omega1, "omega2": [p.omega2.real, p.omega2.imag], "n": p.n,
            "shift": p.shift, "time": float(p.time)}
