import os
import subprocess
import sys

import numpy as np
import pytest

from smero import kernels
from smero.elliptic import WeierstrassData


def test_rk4_paths_agree():
    n = 512
    h = 2 * np.pi / n
    theta = np.arange(2 * n + 1) * (h / 2)
    dz = 1j * np.exp(1j * theta)
    b = np.stack([(2 / np.exp(2j * theta) - a) * dz for a in (0.5, -1.0 + 2j)])
    ref = kernels.rk4_linear2_numpy(dz, b, h)
    got = kernels.rk4_linear2(dz, b, h, use_numba=kernels.HAVE_NUMBA)
    assert np.max(np.abs(ref - got)) < 1e-12


def test_theta_paths_agree():
    d = WeierstrassData.rhombic()
    v = np.linspace(-1, 1, 301) + 0.3j
    ref = kernels.theta1_series_numpy(v, d.theta_coeffs)
    got = kernels.theta1_series(v, d.theta_coeffs, use_numba=kernels.HAVE_NUMBA)
    for r, g in zip(ref, got):
        assert np.max(np.abs(r - g)) < 1e-12 * max(1, np.max(np.abs(r)))


def test_rk4_rejects_bad_tables():
    with pytest.raises(ValueError):
        kernels.rk4_linear2(np.ones(4), np.ones((1, 4)), 0.1)


def test_env_flag_disables_numba():
    code = "from smero import kernels; print(kernels.HAVE_NUMBA)"
    env = dict(os.environ, SMERO_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
