"""Independent ODE oracles.

These integrate ``psi'' = (u - alpha) psi`` directly with a fixed-step RK4
(Richardson-extrapolated) and never look at Laurent recursions, so they can
referee the series-based decisions in :mod:`smero.local` and the contour
spectra in :mod:`smero.genus1`.
"""
from __future__ import annotations

import numpy as np

from .kernels import rk4_linear2

__all__ = ["monodromy_around_pole", "monodromy_deviation", "hill_monodromy", "hill_discriminant"]


def _richardson(fun, steps):
    coarse = fun(steps)
    fine = fun(2 * steps)
    return (16.0 * fine - coarse) / 15.0, np.max(np.abs(fine - coarse)) / 15.0


def monodromy_around_pole(u, alphas, center=None, radius=1.0, steps=4096, use_numba=None):
    """Monodromy of ``-psi'' + u psi = alpha psi`` once around ``center``.

    ``u`` is any vectorised callable of a complex argument (a
    ``TruncatedLaurentSeries`` works).  The matrices act on ``(psi, radius *
    psi')`` at the base point ``center + radius`` so that trivial monodromy
    means the identity in a scale-balanced frame.  Returns ``(matrices,
    error_estimate)``.
    """
    if center is None:
        center = getattr(u, "center", 0.0)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.complex128))

    def run(n):
        h = 2 * np.pi / n
        theta = np.arange(2 * n + 1) * (h / 2)
        e = np.exp(1j * theta)
        dz = 1j * radius * e
        uz = np.asarray(u(center + radius * e), dtype=np.complex128)
        b = (uz[None, :] - alphas[:, None]) * dz[None, :]
        m = rk4_linear2(dz, b, h, use_numba=use_numba)
        d = np.array([1.0, radius])
        return m * d[None, :, None] / d[None, None, :]

    return _richardson(run, steps)


def monodromy_deviation(u, alphas, **kwargs) -> float:
    """max |M - I| over the sampled alphas."""
    m, _ = monodromy_around_pole(u, alphas, **kwargs)
    return float(np.max(np.abs(m - np.eye(2)[None])))


def hill_monodromy(u_values_fn, period, energies, x0=0.0, steps=2048, use_numba=None):
    """Transfer matrices of ``-y'' + u y = E y`` over ``[x0, x0 + period]``.

    ``u_values_fn`` maps an array of real abscissae to potential values.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=np.complex128))

    def run(n):
        h = period / n
        x = x0 + np.arange(2 * n + 1) * (h / 2)
        ux = np.asarray(u_values_fn(x), dtype=np.complex128)
        b = ux[None, :] - energies[:, None]
        return rk4_linear2(np.ones_like(ux), b, h, use_numba=use_numba)

    return _richardson(run, steps)


def hill_discriminant(u_values_fn, period, energies, **kwargs):
    """Trace of the period map; the spectrum of a real potential is where it lies in [-2, 2]."""
    m, err = hill_monodromy(u_values_fn, period, energies, **kwargs)
    return np.trace(m, axis1=1, axis2=2), err
