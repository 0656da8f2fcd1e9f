"""Time-sweep kernels for the exponential-trapezoid Duhamel scheme.

Both sweeps act on spectral coefficients laid out as ``(batch, Nt + 1, modes)``.
Per mode with decay rate ``lam`` and ``q = exp(-lam * h)``:

    backward:  v[n] = q v[n+1] + h/2 (f[n] + q f[n+1]),   v[Nt] = terminal
    forward:   v[n+1] = q v[n] + h/2 (q f[n] + f[n+1]),   v[0] = initial

The numba path is used unless ``MFGINV_NUMBA=0`` is set in the environment
before import; the numpy path loops over time with vectorized modes.
"""
import os

import numpy as np

_WANT_NUMBA = os.environ.get("MFGINV_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _WANT_NUMBA:
        raise ImportError
    from numba import njit
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def backward_sweep_numpy(src, terminal, q, h):
    B, K, M = src.shape
    out = np.empty_like(src)
    out[:, K - 1] = terminal
    half = 0.5 * h
    for n in range(K - 2, -1, -1):
        out[:, n] = q * out[:, n + 1] + half * (src[:, n] + q * src[:, n + 1])
    return out


def forward_sweep_numpy(src, initial, q, h):
    B, K, M = src.shape
    out = np.empty_like(src)
    out[:, 0] = initial
    half = 0.5 * h
    for n in range(K - 1):
        out[:, n + 1] = q * out[:, n] + half * (q * src[:, n] + src[:, n + 1])
    return out


if HAS_NUMBA:

    @njit(cache=True, nogil=True)
    def _backward_sweep_jit(src, terminal, q, h):
        B, K, M = src.shape
        out = np.empty_like(src)
        half = 0.5 * h
        for b in range(B):
            for j in range(M):
                v = terminal[b, j]
                out[b, K - 1, j] = v
                fn1 = src[b, K - 1, j]
                qj = q[j]
                for n in range(K - 2, -1, -1):
                    fn = src[b, n, j]
                    v = qj * v + half * (fn + qj * fn1)
                    out[b, n, j] = v
                    fn1 = fn
        return out

    @njit(cache=True, nogil=True)
    def _forward_sweep_jit(src, initial, q, h):
        B, K, M = src.shape
        out = np.empty_like(src)
        half = 0.5 * h
        for b in range(B):
            for j in range(M):
                v = initial[b, j]
                out[b, 0, j] = v
                fn = src[b, 0, j]
                qj = q[j]
                for n in range(K - 1):
                    fn1 = src[b, n + 1, j]
                    v = qj * v + half * (qj * fn + fn1)
                    out[b, n + 1, j] = v
                    fn = fn1
        return out

    def backward_sweep(src, terminal, q, h):
        return _backward_sweep_jit(
            np.ascontiguousarray(src, dtype=np.complex128),
            np.ascontiguousarray(terminal, dtype=np.complex128),
            np.ascontiguousarray(q, dtype=np.float64),
            float(h),
        )

    def forward_sweep(src, initial, q, h):
        return _forward_sweep_jit(
            np.ascontiguousarray(src, dtype=np.complex128),
            np.ascontiguousarray(initial, dtype=np.complex128),
            np.ascontiguousarray(q, dtype=np.float64),
            float(h),
        )

else:
    backward_sweep = backward_sweep_numpy
    forward_sweep = forward_sweep_numpy


BACKEND = "numba" if HAS_NUMBA else "numpy"
