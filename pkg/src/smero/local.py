"""Frobenius analysis of ``L = -d^2/dx^2 + u`` at a double pole of ``u``.

Near a pole ``u = c/y**2 + ...`` the indicial equation is ``rho (rho - 1) = c``.
For ``c = r (r + 1)`` the exponents are ``-r`` and ``r + 1``; they differ by
the integer ``2r + 1`` so the ``y**-r`` branch meets a resonance where a
logarithm can appear.  The operator is s-meromorphic at the pole exactly when
that logarithm is absent for every spectral parameter.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np

from .errors import (
    FirstOrderPolePresent,
    NonIntegerExponents,
    PoleTooStrong,
    TruncationTooShort,
    UnsupportedOrder,
)
from .laurent import TruncatedLaurentSeries

INTEGER_TOL = 1e-9
ODD_TOL = 1e-9
OBSTRUCTION_TOL = 1e-9
ALPHA_SEED = 20240611

__all__ = [
    "LocalOperatorData",
    "SMeroCertificate",
    "FrobeniusResult",
    "LogObstruction",
    "indicial_exponents",
    "integer_r",
    "frobenius_basis",
    "is_s_meromorphic_at_pole",
    "classify_pole",
    "negative_subspace",
    "parity_window",
    "default_alpha_samples",
]


@dataclass(frozen=True)
class LocalOperatorData:
    """Laurent data of the potential at one pole."""

    center: complex
    u_coeffs: TruncatedLaurentSeries
    claimed_r: Optional[int] = None
    tol: float = INTEGER_TOL

    def __post_init__(self):
        u = self.u_coeffs
        if abs(u.center - self.center) > 1e-12:
            raise ValueError("series center does not match the pole")
        scale = max(1.0, abs(u.coeff(-2)) if u.min_degree <= -2 <= u.max_degree else 1.0)
        for k in range(u.min_degree, -2):
            if abs(u.coeff(k)) > self.tol * scale:
                raise PoleTooStrong(f"u has a term of degree {k}; only double poles are supported")
        if u.min_degree < -2:
            object.__setattr__(self, "u_coeffs", TruncatedLaurentSeries(u.center, -2, u.coeffs[-2 - u.min_degree:]))
        if self.claimed_r is not None:
            r = int(self.claimed_r)
            if abs(self.c_minus2 - r * (r + 1)) > self.tol * max(1.0, r * (r + 1)):
                raise ValueError(f"degree -2 coefficient {self.c_minus2} is not r(r+1) for r={r}")

    @property
    def c_minus2(self) -> complex:
        return self.u_coeffs.coeff(-2)

    @classmethod
    def from_terms(cls, terms, center=0.0, max_degree=None, claimed_r=None):
        return cls(complex(center), TruncatedLaurentSeries.from_dict(terms, center=center, max_degree=max_degree), claimed_r)


@dataclass(frozen=True)
class LogObstruction:
    order: int  # degree (in y) at which the logarithm appears
    alpha: complex
    value: complex


@dataclass(frozen=True)
class FrobeniusResult:
    r: int
    singular: Optional[TruncatedLaurentSeries]  # leading y**-r
    regular: TruncatedLaurentSeries  # leading y**(r+1)
    obstruction: Optional[LogObstruction] = None

    @property
    def ok(self) -> bool:
        return self.obstruction is None

    @property
    def basis(self):
        return self.singular, self.regular


@dataclass(frozen=True)
class SMeroCertificate:
    verdict: bool
    r: Optional[int]
    failed_condition: str = "None"
    failed_order: Optional[int] = None
    failed_alpha: Optional[complex] = None
    checked_alphas: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        d = {
            "verdict": self.verdict,
            "r": self.r,
            "failed_condition": self.failed_condition,
            "failed_order": self.failed_order,
            "checked_alphas": [[a.real, a.imag] for a in self.checked_alphas],
        }
        if self.failed_alpha is not None:
            d["failed_alpha"] = [self.failed_alpha.real, self.failed_alpha.imag]
        return d


def indicial_exponents(c_minus2) -> tuple:
    """Roots of ``rho (rho - 1) = c``, larger real part first."""
    c = complex(c_minus2)
    d = cmath.sqrt(1 + 4 * c)
    a, b = (1 + d) / 2, (1 - d) / 2
    if (b.real, b.imag) > (a.real, a.imag):
        a, b = b, a
    return a, b


def integer_r(c_minus2, tol=INTEGER_TOL) -> Optional[int]:
    """The integer ``r >= 0`` with ``r (r + 1) = c`` within ``tol``, else None."""
    hi, _ = indicial_exponents(c_minus2)
    r = int(round(hi.real - 1))
    if r < 0:
        return None
    if abs(complex(c_minus2) - r * (r + 1)) < tol * max(1.0, r * (r + 1)):
        return r
    return None


def parity_window(r: int) -> list:
    """Degrees ``-r, -r+2, ..., r`` allowed in the singular window at an order-r pole."""
    return list(range(-r, r + 1, 2))


def negative_subspace(r: int):
    """Negative exponents of the admissible window and their count ``floor((r+1)/2)``."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    exps = [k for k in parity_window(r) if k < 0]
    return exps, len(exps)


def _coeff_scale(op: LocalOperatorData) -> float:
    # tolerances are relative to the pole strength, not to high-order coefficients
    return max(1.0, abs(op.c_minus2))


def default_alpha_samples(n=5, seed=ALPHA_SEED, radius=10.0):
    rng = np.random.default_rng(seed)
    rad = radius * np.sqrt(rng.random(n))
    ang = 2 * np.pi * rng.random(n)
    return tuple(complex(v) for v in rad * np.exp(1j * ang)) + (0j,)


def _recursion(q, n_max, shift_factor, resonance=None, ctx=None):
    """Coefficients c_0..c_n_max of a Frobenius branch.

    ``q[k]`` holds the coefficient of ``y**k`` in ``u - alpha`` for k >= 0.
    ``shift_factor(n)`` is the indicial polynomial offset, the factor in
    front of ``c_n``.  At ``n == resonance`` the right-hand side is returned
    as the obstruction and ``c_n`` is set to zero.
    """
    zero = ctx.mpc(0) if ctx else 0j
    c = [zero] * (n_max + 1)
    c[0] = ctx.mpc(1) if ctx else 1 + 0j
    obstruction, scale = None, None
    for n in range(1, n_max + 1):
        terms = [q[k] * c[n - 2 - k] for k in range(0, n - 1)]
        rhs = ctx.fsum(terms) if ctx else complex(sum(terms))
        if n == resonance:
            obstruction = rhs
            scale = max([abs(t) for t in terms] + [1.0])
            continue
        c[n] = rhs / shift_factor(n)
    return c, obstruction, scale


def frobenius_basis(op: LocalOperatorData, alpha, order: int, precision: Optional[int] = None,
                    tol: float = OBSTRUCTION_TOL) -> FrobeniusResult:
    """Local solutions of ``-psi'' + u psi = alpha psi`` with leading terms y**-r and y**(r+1).

    ``order`` is the number of recursion steps; the series are further cut to
    what the truncation of ``u`` justifies.  ``precision`` (decimal digits)
    switches the recursion to mpmath.  A nonzero resonance term produces a
    result with ``obstruction`` set and no singular branch.
    """
    u = op.u_coeffs
    r = integer_r(op.c_minus2, op.tol)
    if r is None:
        raise NonIntegerExponents(f"indicial exponents {indicial_exponents(op.c_minus2)} are not (r+1, -r)")
    if abs(u.coeff(-1)) > op.tol * _coeff_scale(op):
        raise FirstOrderPolePresent(f"degree -1 coefficient {u.coeff(-1)} is nonzero")
    if order < 2 * r + 4:
        raise TruncationTooShort(f"order {order} < 2r+4 = {2 * r + 4}")
    n_max = min(order, u.max_degree + 2)
    if n_max < 2 * r + 1:
        raise TruncationTooShort(f"u is known only to degree {u.max_degree}; the resonance needs {2 * r - 1}")
    alpha = complex(alpha)
    qn = [u.coeff(k) for k in range(0, n_max - 1)]
    if qn:
        qn[0] -= alpha
    else:
        qn = [-alpha]

    def run(ctx):
        q = [ctx.mpc(v) for v in qn] if ctx else qn
        sing, obs, scl = _recursion(q, n_max, lambda n: n * (n - 2 * r - 1), resonance=2 * r + 1, ctx=ctx)
        reg, _, _ = _recursion(q, n_max, lambda n: n * (n + 2 * r + 1), ctx=ctx)
        return sing, obs, scl, reg

    if precision:
        with mpmath.workdps(int(precision)):
            sing, obs, scl, reg = run(mpmath.mp)
            sing = [complex(v) for v in sing]
            reg = [complex(v) for v in reg]
            obs, scl = complex(obs), float(scl)
    else:
        sing, obs, scl, reg = run(None)
    regular = TruncatedLaurentSeries(op.center, r + 1, reg)
    if abs(obs) > tol * scl:
        return FrobeniusResult(r, None, regular, LogObstruction(r + 1, alpha, complex(obs)))
    return FrobeniusResult(r, TruncatedLaurentSeries(op.center, -r, sing), regular)


def is_s_meromorphic_at_pole(op: LocalOperatorData, alpha_samples: Optional[Sequence[complex]] = None,
                             odd_tol: float = ODD_TOL, precision: Optional[int] = None) -> SMeroCertificate:
    """Decide whether every solution of ``L psi = alpha psi`` is meromorphic at the pole.

    Checks, in order: integrality of the indicial exponents, absence of the
    ``1/y`` term, vanishing of the odd coefficients of degree < 2r, and the
    Frobenius resonance at every sampled alpha.
    """
    alphas = tuple(complex(a) for a in (default_alpha_samples() if alpha_samples is None else alpha_samples))
    u = op.u_coeffs
    r = integer_r(op.c_minus2, op.tol)
    if r is None:
        return SMeroCertificate(False, None, "NonIntegerIndicial", checked_alphas=())
    if u.max_degree < 2 * r - 1:
        raise TruncationTooShort(f"need u through degree {2 * r - 1}, have {u.max_degree}")
    scale = _coeff_scale(op)
    for k in [-1] + list(range(1, 2 * r, 2)):
        if abs(u.coeff(k)) > odd_tol * scale:
            return SMeroCertificate(False, r, "OddCoefficientNonzero", failed_order=k, checked_alphas=())
    order = max(2 * r + 4, min(u.max_degree + 2, 40))
    for a in alphas:
        res = frobenius_basis(op, a, order, precision=precision)
        if not res.ok:
            return SMeroCertificate(False, r, "LogObstruction", failed_order=res.obstruction.order,
                                    failed_alpha=a, checked_alphas=alphas)
    return SMeroCertificate(True, r, "None", checked_alphas=alphas)


def classify_pole(op: LocalOperatorData, n: int = 2, **kwargs) -> SMeroCertificate:
    """Order-n entry point; only second-order operators are supported."""
    if n != 2:
        raise UnsupportedOrder(f"operators of order {n} are not supported (only n = 2)")
    return is_s_meromorphic_at_pole(op, **kwargs)
