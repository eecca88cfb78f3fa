"""Weierstrass elliptic functions from Jacobi theta_1 series.

Lattice generated by ``2*omega1`` and ``2*omega2``.  With ``v = pi z / (2
omega1)`` and nome ``q = exp(i pi omega2/omega1)``::

    zeta(z)  = eta1 z / omega1 + (pi / 2 omega1) theta1'(v) / theta1(v)
    sigma(z) = (2 omega1 / pi) exp(eta1 z^2 / (2 omega1)) theta1(v) / theta1'(0)
    wp(z)    = -zeta'(z)

Arguments are first reduced to the centred fundamental parallelogram and the
quasi-periodicity of zeta and sigma is applied afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import LatticePoint
from .kernels import theta1_series

__all__ = ["WeierstrassData", "weierstrass", "wp", "wp_prime", "zeta", "sigma", "wp_laurent_coeffs"]

N_THETA = 24
LATTICE_TOL = 1e-14


@dataclass(frozen=True)
class WeierstrassData:
    omega1: float
    omega2: complex

    def __post_init__(self):
        w1 = float(np.real(self.omega1))
        if not w1 > 0 or abs(np.imag(self.omega1)) > 0:
            raise ValueError("omega1 must be real and positive")
        w2 = complex(self.omega2)
        if not (w2 / w1).imag > 0:
            raise ValueError("Im(omega2/omega1) must be positive")
        object.__setattr__(self, "omega1", w1)
        object.__setattr__(self, "omega2", w2)

    @classmethod
    def rectangular(cls, omega1=1.0, height=1.0):
        return cls(omega1, 1j * height)

    @classmethod
    def rhombic(cls, omega1=1.0, height=0.6):
        return cls(omega1, omega1 / 2 + 1j * height)

    # -- theta machinery ---------------------------------------------------
    @cached_property
    def tau(self) -> complex:
        return self.omega2 / self.omega1

    @cached_property
    def theta_coeffs(self) -> np.ndarray:
        n = np.arange(N_THETA)
        return 2.0 * (-1.0) ** n * np.exp(1j * np.pi * self.tau * (n + 0.5) ** 2)

    @cached_property
    def _theta_at_zero(self):
        _, t1, _, t3 = theta1_series(np.zeros(1), self.theta_coeffs)
        return complex(t1[0]), complex(t3[0])

    # -- lattice invariants ------------------------------------------------
    @cached_property
    def eta1(self) -> complex:
        t1, t3 = self._theta_at_zero
        return -(math.pi**2) * t3 / (12.0 * self.omega1 * t1)

    @cached_property
    def eta2(self) -> complex:
        # Legendre relation eta1 omega2 - eta2 omega1 = i pi / 2
        return (self.eta1 * self.omega2 - 0.5j * math.pi) / self.omega1

    @cached_property
    def roots(self) -> tuple:
        """(e1, e2, e3) = wp at omega1, omega1 + omega2, omega2."""
        e = wp(np.array([self.omega1, self.omega1 + self.omega2, self.omega2]), self)
        return tuple(complex(v) for v in e)

    @cached_property
    def g2(self) -> complex:
        e1, e2, e3 = self.roots
        return 2.0 * (e1 * e1 + e2 * e2 + e3 * e3)

    @cached_property
    def g3(self) -> complex:
        e1, e2, e3 = self.roots
        return 4.0 * e1 * e2 * e3

    @property
    def period(self) -> float:
        return 2.0 * self.omega1

    @cached_property
    def lattice_class(self) -> str:
        re2 = self.omega2.real
        if abs(re2) < 1e-12 * self.omega1:
            return "rectangular"
        if abs(re2 - self.omega1 / 2) < 1e-12 * self.omega1:
            return "rhombic"
        return "generic"

    def lattice_coords(self, z):
        """Real coordinates (s, t) with z = 2 omega1 s + 2 omega2 t."""
        z = np.asarray(z, dtype=np.complex128)
        t = z.imag / (2 * self.omega2.imag)
        s = (z.real - 2 * self.omega2.real * t) / (2 * self.omega1)
        return s, t

    def reduce(self, z):
        """Split z = z0 + 2 m omega1 + 2 n omega2 with z0 in the centred cell."""
        s, t = self.lattice_coords(z)
        m, n = np.round(s), np.round(t)
        z0 = np.asarray(z, dtype=np.complex128) - 2 * m * self.omega1 - 2 * n * self.omega2
        return z0, m.astype(np.int64), n.astype(np.int64)

    def diameter(self) -> float:
        a, b = 2 * self.omega1, 2 * self.omega2
        return float(max(abs(a + b), abs(a - b)))

    def to_dict(self) -> dict:
        return {"omega1": self.omega1, "omega2": [self.omega2.real, self.omega2.imag]}


def _theta_parts(z0, data: WeierstrassData):
    v = np.pi * z0 / (2 * data.omega1)
    return theta1_series(v, data.theta_coeffs)


def weierstrass(z, data: WeierstrassData, check=True):
    """(wp, wp', zeta, sigma) at z.  Raises LatticePoint on a lattice point (for wp/zeta)."""
    z = np.asarray(z, dtype=np.complex128)
    z0, m, n = data.reduce(z)
    if check and np.any(np.abs(z0) < LATTICE_TOL * data.omega1):
        raise LatticePoint("argument lies on the period lattice")
    t0, t1, t2, t3 = _theta_parts(z0, data)
    k = np.pi / (2 * data.omega1)
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = t1 / t0
        l2 = t2 / t0
        l3 = t3 / t0
        zeta0 = data.eta1 * z0 / data.omega1 + k * l1
        p = -data.eta1 / data.omega1 - k * k * (l2 - l1 * l1)
        dp = -(k**3) * (l3 - 3 * l1 * l2 + 2 * l1**3)
    tp0, _ = data._theta_at_zero
    sig0 = (2 * data.omega1 / np.pi) * np.exp(data.eta1 * z0**2 / (2 * data.omega1)) * t0 / tp0
    shift = 2 * m * data.eta1 + 2 * n * data.eta2
    zeta_z = zeta0 + shift
    sign = np.where((m + n + m * n) % 2 == 0, 1.0, -1.0)
    sig = sign * np.exp(shift * (z0 + m * data.omega1 + n * data.omega2)) * sig0
    return p, dp, zeta_z, sig


def wp(z, data):
    return weierstrass(z, data)[0]


def wp_prime(z, data):
    return weierstrass(z, data)[1]


def zeta(z, data):
    return weierstrass(z, data)[2]


def sigma(z, data):
    return weierstrass(z, data, check=False)[3]


def wp_laurent_coeffs(g2, g3, n_terms):
    """Coefficients c_k of wp = 1/z^2 + sum_{k>=2} c_k z^(2k-2), k = 2..n_terms+1.

    c2 = g2/20, c3 = g3/28, c_k = 3/((2k+1)(k-3)) sum_{m=2}^{k-2} c_m c_{k-m}.
    """
    c = {2: g2 / 20.0, 3: g3 / 28.0}
    for k in range(4, n_terms + 2):
        c[k] = 3.0 / ((2 * k + 1) * (k - 3)) * sum(c[m] * c[k - m] for m in range(2, k - 1))
    return c
