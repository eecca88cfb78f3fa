"""Truncated Laurent series around a single center.

A series stores the coefficients of ``y**k`` for ``min_degree <= k <=
max_degree`` where ``y = x - center``.  Everything above ``max_degree`` is
unknown, so arithmetic never claims more accuracy than the inputs justify.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import CenterMismatch

CENTER_TOL = 1e-12
DEFAULT_ORDER = 24

__all__ = [
    "TruncatedLaurentSeries",
    "add",
    "mul",
    "differentiate",
    "residue",
    "semicircle_integral",
    "punctured_line_integral",
    "detour_integral",
    "DEFAULT_ORDER",
]


@dataclass(frozen=True, eq=False)
class TruncatedLaurentSeries:
    center: complex
    min_degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128).ravel()
        if c.size == 0:
            raise ValueError("a Laurent series needs at least one coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "min_degree", int(self.min_degree))

    # -- construction -----------------------------------------------------
    @classmethod
    def from_dict(cls, terms: Mapping[int, complex], center=0.0, max_degree=None, min_degree=None):
        """Build from ``{degree: coefficient}``; missing degrees are zero.

        ``max_degree`` defaults to ``DEFAULT_ORDER`` (or the largest key if
        that is higher), i.e. the data are treated as exact up to that order.
        """
        keys = [int(k) for k in terms] or [0]
        lo = min(keys) if min_degree is None else int(min_degree)
        hi = max(max(keys), DEFAULT_ORDER) if max_degree is None else int(max_degree)
        if min(keys) < lo or max(keys) > hi:
            raise ValueError("terms fall outside the requested window")
        c = np.zeros(hi - lo + 1, dtype=np.complex128)
        for k, v in terms.items():
            c[int(k) - lo] += complex(v)
        return cls(center, lo, c)

    @classmethod
    def monomial(cls, degree: int, coeff=1.0, center=0.0, max_degree=None):
        return cls.from_dict({degree: coeff}, center=center, max_degree=max_degree)

    @classmethod
    def zero(cls, center=0.0, min_degree=0, max_degree=DEFAULT_ORDER):
        return cls(center, min_degree, np.zeros(max_degree - min_degree + 1))

    # -- basic accessors --------------------------------------------------
    @property
    def max_degree(self) -> int:
        return self.min_degree + self.coeffs.size - 1

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.min_degree, self.max_degree + 1)

    def coeff(self, k: int) -> complex:
        """Coefficient of ``y**k``; zero below the window, error above it."""
        if k > self.max_degree:
            raise IndexError(f"degree {k} is beyond the truncation order {self.max_degree}")
        if k < self.min_degree:
            return 0j
        return complex(self.coeffs[k - self.min_degree])

    def as_dict(self, tol=0.0) -> dict:
        return {int(k): complex(c) for k, c in zip(self.degrees, self.coeffs) if abs(c) > tol}

    def is_zero(self, tol=0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= tol))

    def leading_degree(self, tol=0.0):
        """Lowest degree with a coefficient above ``tol``; None for the zero series."""
        nz = np.nonzero(np.abs(self.coeffs) > tol)[0]
        return None if nz.size == 0 else int(self.min_degree + nz[0])

    def normalized(self, tol=0.0) -> "TruncatedLaurentSeries":
        """Drop leading coefficients with modulus ``<= tol``."""
        lead = self.leading_degree(tol)
        if lead is None:
            return TruncatedLaurentSeries(self.center, self.max_degree, [0.0])
        return TruncatedLaurentSeries(self.center, lead, self.coeffs[lead - self.min_degree:])

    def truncate(self, max_degree: int) -> "TruncatedLaurentSeries":
        if max_degree > self.max_degree:
            raise ValueError("cannot extend a truncated series")
        if max_degree < self.min_degree:
            raise ValueError("truncation would leave no coefficients")
        return TruncatedLaurentSeries(self.center, self.min_degree, self.coeffs[: max_degree - self.min_degree + 1])

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients for degrees ``lo..hi`` (zero-padded below the window)."""
        return np.array([self.coeff(k) for k in range(lo, hi + 1)])

    def conj_coeffs(self) -> "TruncatedLaurentSeries":
        """Series of ``conj(f(conj(x)))``: conjugated coefficients about the conjugate center."""
        return TruncatedLaurentSeries(np.conj(self.center), self.min_degree, np.conj(self.coeffs))

    def scale(self, s) -> "TruncatedLaurentSeries":
        return TruncatedLaurentSeries(self.center, self.min_degree, self.coeffs * complex(s))

    def __call__(self, x):
        y = np.asarray(x, dtype=np.complex128) - self.center
        out = np.zeros_like(y)
        for c in self.coeffs[::-1]:
            out = out * y + c
        return out * y ** self.min_degree

    # -- operators --------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, TruncatedLaurentSeries):
            return add(self, other)
        return add(self, TruncatedLaurentSeries(self.center, 0, [other] + [0] * max(self.max_degree, 0)))

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, TruncatedLaurentSeries):
            return mul(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def __repr__(self):
        terms = ", ".join(f"{k}: {c:.6g}" for k, c in self.as_dict().items())
        return f"TruncatedLaurentSeries(center={self.center:.6g}, window=[{self.min_degree}, {self.max_degree}], {{{terms}}})"


def _check_center(a: TruncatedLaurentSeries, b: TruncatedLaurentSeries):
    if abs(a.center - b.center) > CENTER_TOL:
        raise CenterMismatch(f"centers differ: {a.center} vs {b.center}")


def add(a: TruncatedLaurentSeries, b: TruncatedLaurentSeries) -> TruncatedLaurentSeries:
    _check_center(a, b)
    lo = min(a.min_degree, b.min_degree)
    hi = min(a.max_degree, b.max_degree)
    if hi < lo:
        raise ValueError("sum has an empty truncation window")
    out = np.zeros(hi - lo + 1, dtype=np.complex128)
    for s in (a, b):
        n = min(s.max_degree, hi) - s.min_degree + 1
        if n > 0:
            out[s.min_degree - lo: s.min_degree - lo + n] += s.coeffs[:n]
    return TruncatedLaurentSeries(a.center, lo, out)


def mul(a: TruncatedLaurentSeries, b: TruncatedLaurentSeries) -> TruncatedLaurentSeries:
    """Cauchy product, truncated to the window both factors justify."""
    _check_center(a, b)
    lo = a.min_degree + b.min_degree
    hi = min(a.max_degree + b.min_degree, b.max_degree + a.min_degree)
    full = np.convolve(a.coeffs, b.coeffs)
    return TruncatedLaurentSeries(a.center, lo, full[: hi - lo + 1])


def differentiate(a: TruncatedLaurentSeries) -> TruncatedLaurentSeries:
    if a.coeffs.size == 1 and a.min_degree == 0:
        raise ValueError("derivative of a constant truncated at degree 0 carries no information")
    d = a.degrees * a.coeffs
    if a.min_degree == 0:
        return TruncatedLaurentSeries(a.center, 0, d[1:])
    return TruncatedLaurentSeries(a.center, a.min_degree - 1, d)


def residue(a: TruncatedLaurentSeries) -> complex:
    if a.min_degree <= -1 <= a.max_degree:
        return a.coeff(-1)
    return 0j


def _even_power_weights(degrees, r_lo, r_hi):
    """Integral of y**k over r_lo < |y| < r_hi on the real line (k != -1)."""
    k = degrees.astype(float)
    w = np.where(degrees % 2 == 0, 2.0 * (r_hi ** (k + 1) - (r_lo ** (k + 1) if r_lo > 0 else 0.0)) / (k + 1), 0.0)
    return w


def semicircle_integral(a: TruncatedLaurentSeries, radius: float, orientation: str = "upper") -> complex:
    """Integral of the series along a half circle from ``-radius`` to ``+radius``.

    Term by term: every degree ``k != -1`` integrates to the endpoint
    difference of ``y**(k+1)/(k+1)``, which vanishes for odd ``k``; the
    ``1/y`` term contributes ``-i*pi`` (upper) or ``+i*pi`` (lower) times the
    residue.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if orientation not in ("upper", "lower"):
        raise ValueError("orientation must be 'upper' or 'lower'")
    deg = a.degrees
    mask = deg != -1
    total = complex(np.sum(a.coeffs[mask] * _even_power_weights(deg[mask], 0.0, radius)))
    half = -1j * math.pi if orientation == "upper" else 1j * math.pi
    return total + half * residue(a)


def punctured_line_integral(a: TruncatedLaurentSeries, inner: float, outer: float, negative_only=True) -> complex:
    """Integral of the series over ``inner < |y| < outer`` along the real axis.

    The ``1/y`` term integrates to zero by symmetry.  With ``negative_only``
    only the principal part is integrated, which is what singularity
    subtraction needs.
    """
    deg = a.degrees
    mask = deg != -1
    if negative_only:
        mask &= deg < 0
    return complex(np.sum(a.coeffs[mask] * _even_power_weights(deg[mask], inner, outer)))


def detour_integral(a: TruncatedLaurentSeries, outer: float, orientation: str = "upper") -> complex:
    """Integral over ``[-outer, outer]`` with a small half-circle detour around the center.

    Equal to ``punctured_line_integral(a, rho, outer, negative_only=False) +
    semicircle_integral(a, rho, orientation)`` for any ``rho``; evaluated
    from the antiderivative so that no ``rho**k`` terms cancel.
    """
    if orientation not in ("upper", "lower"):
        raise ValueError("orientation must be 'upper' or 'lower'")
    deg = a.degrees
    mask = deg != -1
    total = complex(np.sum(a.coeffs[mask] * _even_power_weights(deg[mask], 0.0, outer)))
    half = -1j * math.pi if orientation == "upper" else 1j * math.pi
    return total + half * residue(a)


def principal_part(a: TruncatedLaurentSeries) -> TruncatedLaurentSeries:
    if a.min_degree >= 0:
        return TruncatedLaurentSeries(a.center, 0, [0.0])
    hi = min(a.max_degree, -1)
    return TruncatedLaurentSeries(a.center, a.min_degree, a.coeffs[: hi - a.min_degree + 1])


def exp_series(a: TruncatedLaurentSeries) -> TruncatedLaurentSeries:
    """exp of a series with no negative or constant terms (min_degree >= 1 after trimming)."""
    if any(abs(a.coeff(k)) > 0 for k in range(a.min_degree, min(0, a.max_degree) + 1)):
        raise ValueError("exp_series needs a series vanishing at the center")
    n = a.max_degree
    if n < 1:
        return TruncatedLaurentSeries(a.center, 0, [1.0])
    f = np.zeros(n + 1, dtype=np.complex128)
    ga = np.array([k * a.coeff(k) if k >= 1 else 0 for k in range(n + 1)], dtype=np.complex128)
    f[0] = 1.0
    # f' = a' f  =>  m f_m = sum_{k=1}^m k a_k f_{m-k}
    for m in range(1, n + 1):
        f[m] = np.dot(ga[1: m + 1], f[m - 1:: -1][:m]) / m
    return TruncatedLaurentSeries(a.center, 0, f)


def reciprocal(a: TruncatedLaurentSeries, tol=0.0) -> TruncatedLaurentSeries:
    """1/a for a series whose leading coefficient is nonzero."""
    a = a.normalized(tol)
    if a.is_zero(tol):
        raise ZeroDivisionError("reciprocal of the zero series")
    n = a.coeffs.size
    b = np.zeros(n, dtype=np.complex128)
    b[0] = 1.0 / a.coeffs[0]
    for m in range(1, n):
        b[m] = -np.dot(a.coeffs[1: m + 1], b[m - 1:: -1][:m]) / a.coeffs[0]
    return TruncatedLaurentSeries(a.center, -a.min_degree, b)
