import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfginv import _kernels


def _data(rng, B=2, K=50, M=7):
    src = rng.normal(size=(B, K, M)) + 1j * rng.normal(size=(B, K, M))
    bc = rng.normal(size=(B, M)) + 1j * rng.normal(size=(B, M))
    q = np.exp(-rng.uniform(0, 3, M) * 0.01)
    return src, bc, q, 0.01


def test_backends_agree():
    src, bc, q, h = _data(np.random.default_rng(0))
    np.testing.assert_allclose(_kernels.backward_sweep(src, bc, q, h),
                               _kernels.backward_sweep_numpy(src, bc, q, h), rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(_kernels.forward_sweep(src, bc, q, h),
                               _kernels.forward_sweep_numpy(src, bc, q, h), rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("sweep", ["backward", "forward"])
@pytest.mark.parametrize("backend", ["default", "numpy"])
def test_sweep_recurrence(sweep, backend):
    src, bc, q, h = _data(np.random.default_rng(1))
    name = f"{sweep}_sweep" + ("_numpy" if backend == "numpy" else "")
    v = getattr(_kernels, name)(src, bc, q, h)
    if sweep == "backward":
        assert np.allclose(v[:, -1], bc)
        defect = v[:, :-1] - q * v[:, 1:] - h / 2 * (src[:, :-1] + q * src[:, 1:])
    else:
        assert np.allclose(v[:, 0], bc)
        defect = v[:, 1:] - q * v[:, :-1] - h / 2 * (q * src[:, :-1] + src[:, 1:])
    assert np.max(np.abs(defect)) < 1e-13


def test_zero_rate_is_trapezoid_integral():
    h = 0.01
    t = np.arange(101) * h
    src = np.cos(t).astype(complex).reshape(1, -1, 1)
    v = _kernels.forward_sweep(src, np.zeros((1, 1), complex), np.ones(1), h)
    assert v[0, -1, 0].real == pytest.approx(np.trapezoid(np.cos(t), dx=h), rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(-2, 2))
def test_homogeneous_sweep_is_exact_decay(lam, c):
    h, K = 0.01, 30
    q = np.array([np.exp(-lam * h)])
    v = _kernels.forward_sweep(np.zeros((1, K, 1), complex), np.full((1, 1), c, complex), q, h)
    np.testing.assert_allclose(v[0, :, 0].real, c * np.exp(-lam * h * np.arange(K)), rtol=1e-12, atol=1e-300)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, MFGINV_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", "from mfginv import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
