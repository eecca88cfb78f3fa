"""Hot numerical loops.

Each kernel exists twice: a numba ``@njit`` version and a vectorised numpy
version with identical semantics.  ``HAVE_NUMBA`` (see ``_accel``) picks the
default; both stay importable so they can be cross-checked and benchmarked.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit

__all__ = [
    "rk4_linear2",
    "rk4_linear2_numpy",
    "theta1_series",
    "theta1_series_numpy",
    "USING_NUMBA",
]


# --------------------------------------------------------------------------
# y'' = q y written as a first-order system along a parametrised path.
#
# State (psi, phi) with d psi/ds = a(s) phi, d phi/ds = b(s) psi.  ``a`` is
# tabulated on the 2N+1 half-step nodes, ``b`` on the same nodes for every
# batch member.  Returns the fundamental matrix after N steps for each batch
# member, started from the identity.
# --------------------------------------------------------------------------


def rk4_linear2_numpy(a_tab, b_tab, h):
    a_tab = np.asarray(a_tab, dtype=np.complex128)
    b_tab = np.atleast_2d(np.asarray(b_tab, dtype=np.complex128))
    nb, nn = b_tab.shape
    nsteps = (nn - 1) // 2
    # Y[batch, row, col]
    y = np.zeros((nb, 2, 2), dtype=np.complex128)
    y[:, 0, 0] = 1.0
    y[:, 1, 1] = 1.0
    for k in range(nsteps):
        a0, a1, a2 = a_tab[2 * k], a_tab[2 * k + 1], a_tab[2 * k + 2]
        b0, b1, b2 = b_tab[:, 2 * k, None], b_tab[:, 2 * k + 1, None], b_tab[:, 2 * k + 2, None]
        p, f = y[:, 0, :], y[:, 1, :]
        k1p, k1f = a0 * f, b0 * p
        k2p = a1 * (f + 0.5 * h * k1f)
        k2f = b1 * (p + 0.5 * h * k1p)
        k3p = a1 * (f + 0.5 * h * k2f)
        k3f = b1 * (p + 0.5 * h * k2p)
        k4p = a2 * (f + h * k3f)
        k4f = b2 * (p + h * k3p)
        y[:, 0, :] = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        y[:, 1, :] = f + h / 6.0 * (k1f + 2 * k2f + 2 * k3f + k4f)
    return y


@njit(cache=True)
def _rk4_linear2_jit(a_tab, b_tab, h):
    nb, nn = b_tab.shape
    nsteps = (nn - 1) // 2
    out = np.zeros((nb, 2, 2), dtype=np.complex128)
    for ib in range(nb):
        for col in range(2):
            p = 1.0 + 0.0j if col == 0 else 0.0j
            f = 0.0j if col == 0 else 1.0 + 0.0j
            for k in range(nsteps):
                a0 = a_tab[2 * k]
                a1 = a_tab[2 * k + 1]
                a2 = a_tab[2 * k + 2]
                b0 = b_tab[ib, 2 * k]
                b1 = b_tab[ib, 2 * k + 1]
                b2 = b_tab[ib, 2 * k + 2]
                k1p = a0 * f
                k1f = b0 * p
                k2p = a1 * (f + 0.5 * h * k1f)
                k2f = b1 * (p + 0.5 * h * k1p)
                k3p = a1 * (f + 0.5 * h * k2f)
                k3f = b1 * (p + 0.5 * h * k2p)
                k4p = a2 * (f + h * k3f)
                k4f = b2 * (p + h * k3p)
                p = p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
                f = f + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
            out[ib, 0, col] = p
            out[ib, 1, col] = f
    return out


def rk4_linear2(a_tab, b_tab, h, use_numba=None):
    """Fundamental matrices of ``psi' = a phi, phi' = b psi`` over a tabulated path.

    ``a_tab`` has shape ``(2N+1,)`` and ``b_tab`` shape ``(batch, 2N+1)``;
    entries sit on the half-step nodes ``s = j h / 2``.
    """
    if use_numba is None:
        use_numba = HAVE_NUMBA
    a_tab = np.ascontiguousarray(a_tab, dtype=np.complex128)
    b_tab = np.ascontiguousarray(np.atleast_2d(b_tab), dtype=np.complex128)
    if b_tab.shape[1] != a_tab.shape[0] or a_tab.shape[0] % 2 != 1:
        raise ValueError("tables must share an odd number of half-step nodes")
    if use_numba:
        return _rk4_linear2_jit(a_tab, b_tab, float(h))
    return rk4_linear2_numpy(a_tab, b_tab, float(h))


# --------------------------------------------------------------------------
# Jacobi theta_1 and its first three derivatives:
#   theta_1(v) = sum_n c_n sin((2n+1) v),  c_n = 2 (-1)^n q^{(n+1/2)^2}
# --------------------------------------------------------------------------


def theta1_series_numpy(v, c):
    v = np.asarray(v, dtype=np.complex128)
    c = np.asarray(c, dtype=np.complex128)
    m = (2 * np.arange(c.size) + 1).astype(np.float64)
    arg = np.multiply.outer(v, m)
    s, co = np.sin(arg), np.cos(arg)
    t0 = s @ c
    t1 = co @ (c * m)
    t2 = -(s @ (c * m**2))
    t3 = -(co @ (c * m**3))
    return t0, t1, t2, t3


@njit(cache=True)
def _theta1_series_jit(v, c):
    n = v.shape[0]
    t0 = np.zeros(n, dtype=np.complex128)
    t1 = np.zeros(n, dtype=np.complex128)
    t2 = np.zeros(n, dtype=np.complex128)
    t3 = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        a0 = 0.0j
        a1 = 0.0j
        a2 = 0.0j
        a3 = 0.0j
        for j in range(c.shape[0]):
            m = 2.0 * j + 1.0
            x = m * v[i]
            s = np.sin(x)
            co = np.cos(x)
            a0 += c[j] * s
            a1 += c[j] * m * co
            a2 -= c[j] * m * m * s
            a3 -= c[j] * m * m * m * co
        t0[i] = a0
        t1[i] = a1
        t2[i] = a2
        t3[i] = a3
    return t0, t1, t2, t3


def theta1_series(v, c, use_numba=None):
    """Return ``(theta, theta', theta'', theta''')`` at the points ``v``."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    v = np.asarray(v, dtype=np.complex128)
    shape = v.shape
    flat = np.ascontiguousarray(v.ravel())
    c = np.ascontiguousarray(c, dtype=np.complex128)
    if use_numba:
        out = _theta1_series_jit(flat, c)
    else:
        out = theta1_series_numpy(flat, c)
    return tuple(o.reshape(shape) for o in out)


USING_NUMBA = HAVE_NUMBA
