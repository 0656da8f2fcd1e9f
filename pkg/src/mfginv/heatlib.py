"""Closed-form heat kernels, response kernels and the duality pairing.

Notation: ``phi_xi(x) = exp(2 pi i xi.x)`` and ``psi_lam(t) = exp(4 pi^2 lam t)``.
A heat mode started at ``phi_xi`` evolves as ``psi_{-|xi|^2}(t) phi_xi(x)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import FOUR_PI_SQ, SpaceField, SpaceTimeField, TorusGrid

_T_SLACK = 1e-12


def psi(lam, t):
    return np.exp(FOUR_PI_SQ * lam * np.asarray(t, dtype=float))


def _times(T, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < -_T_SLACK * T) or np.any(t > T * (1 + _T_SLACK)):
        raise ValueError(f"time outside [0, {T}]")
    return np.clip(t, 0.0, T)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def H1(xi_norm_sq, T, t):
    """``1/2 (-psi_{-b}(t) + exp(-8 pi^2 b T) psi_b(t))`` with ``b = |xi|^2``."""
    if xi_norm_sq <= 0:
        raise ValueError("H1 needs |xi|^2 > 0")
    t = _times(T, t)
    b = FOUR_PI_SQ * xi_norm_sq
    out = 0.5 * (-np.exp(-b * t) + np.exp(b * (t - 2.0 * T)))
    if np.ndim(t) == 0:
        return 0.0 if t == T else float(out)
    out = np.where(t == T, 0.0, out)
    return out


def H2(xi_norm_sq, T, t):
    """Solution of ``c' + 4 pi^2 |xi|^2 c = H1``, ``c(0) = 0``."""
    if xi_norm_sq <= 0:
        raise ValueError("H2 needs |xi|^2 > 0")
    t = _times(T, t)
    b = FOUR_PI_SQ * xi_norm_sq
    out = 0.5 * (-t * np.exp(-b * t) + np.exp(-2.0 * b * T) * 2.0 * np.sinh(b * t) / (2.0 * b))
    return _scalar(out)


def H2_printed(xi_norm_sq, T, t):
    """The alternative closed form ``1/2[-(t-T)e^{-bt} + e^{-2bT}/(2b)(e^{bt} - e^{2bT}e^{-bt})]``.

    Kept for comparison only; it does not vanish at ``t = 0``.
    """
    t = _times(T, t)
    b = FOUR_PI_SQ * xi_norm_sq
    out = 0.5 * (-(t - T) * np.exp(-b * t)
                 + np.exp(-2.0 * b * T) / (2.0 * b) * (np.exp(b * t) - np.exp(2.0 * b * T) * np.exp(-b * t)))
    return _scalar(out)


def _check_a(a, T):
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")


def _sinh_minus_id(x):
    """``sinh(x) - x`` without cancellation for small ``x``."""
    if x >= 1.0:
        return np.sinh(x) - x
    term, total, k = x**3 / 6.0, 0.0, 3
    while term > 1e-18 * (total + term):
        total += term
        term *= x * x / ((k + 1) * (k + 2))
        k += 2
    return total


def I2(a, T):
    """``int_0^T H2(t) psi_{-|xi|^2}(t) dt`` with ``a = 8 pi^2 |xi|^2``; negative for a, T > 0.

    Equals ``(e^{-2x} + 2x e^{-x} - 1) / (2 a^2) = -e^{-x}(sinh x - x) / a^2`` with ``x = aT``.
    """
    _check_a(a, T)
    x = a * T
    if x >= 1.0:
        return float(-(-0.5 * np.expm1(-2.0 * x) - x * np.exp(-x)) / (a * a))
    return float(-np.exp(-x) * _sinh_minus_id(x) / (a * a))


def I2_printed(a, T):
    """``e^{-aT}(aT + e^{aT}(aT - 2) + 2) / a^2``: twice the integral of the printed integrand."""
    _check_a(a, T)
    aT = a * T
    return np.exp(-aT) * (aT + np.exp(aT) * (aT - 2.0) + 2.0) / (a * a)


def J(a, T):
    """``int_0^T psi_{-|xi|^2}(t)^2 dt = (1 - e^{-aT}) / a``."""
    _check_a(a, T)
    return -np.expm1(-a * T) / a


# -- weights of the Fourier pairing --------------------------------------------------

def time_weight(sigma, T):
    """``int_0^T exp(-4 pi^2 sigma t) dt``."""
    x = FOUR_PI_SQ * sigma * T
    return float(T) if x == 0 else float(-T * np.expm1(-x) / x)


def terminal_weight(sigma, T):
    return float(np.exp(-FOUR_PI_SQ * sigma * T))


def growth_weight(sigma, T):
    """``(e^{4 pi^2 sigma T} - 1) / (4 pi^2 sigma)``, strictly increasing in sigma."""
    x = FOUR_PI_SQ * sigma * T
    return float(T) if x == 0 else float(T * np.expm1(x) / x)


def time_weight_grid(sigma, grid):
    """Trapezoid value of ``int exp(-4 pi^2 sigma t)`` on the time nodes of ``grid``.

    This is the weight that makes the pairing identity exact for the discrete solver.
    """
    return float(np.trapezoid(np.exp(-FOUR_PI_SQ * sigma * grid.times), dx=grid.h))


# -- discrete counterparts of the response kernels ------------------------------------

@dataclass(frozen=True)
class DiscreteKernels:
    """Grid versions of H1, H2, I2, J for one ``|xi|^2`` (time series and integrals)."""

    xi_norm_sq: float
    H1: np.ndarray
    H2: np.ndarray
    I2: float
    J: float


def discrete_kernels(grid, xi_norm_sq):
    """Run the solver's own time stepping on the defining ODEs of H1 and H2.

    ``H1_h = -lam * B[psi]`` where ``B`` is the backward sweep for ``-c' + lam c = psi``,
    ``H2_h`` is the forward sweep for ``c' + lam c = H1_h``.  The integrals use the
    trapezoid rule, matching the pairing identity of the discrete scheme.
    """
    lam = FOUR_PI_SQ * xi_norm_sq
    q = np.array([np.exp(-lam * grid.h)])
    decay = np.exp(-lam * grid.times)
    src = decay.astype(np.complex128).reshape(1, -1, 1)
    back = _kernels.backward_sweep(src, np.zeros((1, 1), complex), q, grid.h)
    h1 = (-lam * back).reshape(-1)
    fwd = _kernels.forward_sweep(h1.reshape(1, -1, 1), np.zeros((1, 1), complex), q, grid.h)
    h2 = fwd.reshape(-1)
    i2 = np.trapezoid(h2 * decay, dx=grid.h)
    j = np.trapezoid(decay * decay, dx=grid.h)
    return DiscreteKernels(xi_norm_sq, h1.real.copy(), h2.real.copy(), float(i2.real), float(j))


# -- probes -------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeProbe:
    """Initial datum ``phi_xi + M`` placed on population ``population`` in slot ``slot``."""

    xi: tuple
    offset: float = 0.0
    population: int = 0
    slot: int = 0
    scale: complex = 1.0

    def initial(self, grid):
        return SpaceField.mode(grid, self.xi, self.scale, self.offset)

    def evolved(self, grid):
        b = float(np.sum(np.square(self.xi)))
        t = grid.times.reshape((-1,) + (1,) * grid.d)
        return SpaceTimeField(grid, self.scale * psi(-b, t) * grid.mode(self.xi) + self.offset)


# -- duality ------------------------------------------------------------------------

def heat_residual(w):
    """Relative defect of ``w`` as a discrete forward heat solution with zero source."""
    grid = w.grid
    wh = grid.fft(w.values).reshape(grid.Nt + 1, -1)
    q = grid.step_decay
    defect = wh[1:] - q * wh[:-1]
    scale = max(np.max(np.abs(wh)), 1e-300)
    return float(np.max(np.abs(defect)) / scale)


def duality_pairing(source, terminal, initial_trace, w, tol=1e-8):
    """Return ``int_Q f w - (int u_0 w_0 - int u_T w_T)``.

    ``source`` (f), ``terminal`` (u_T) and ``initial_trace`` (u_0) belong to one
    backward solution; ``w`` must solve the forward heat equation.  Space integrals
    are means over the torus and the time integral uses the trapezoid rule.
    """
    grid = source.grid
    for f in (terminal, initial_trace, w):
        if f.grid != grid:
            raise ValueError("all pairing fields must share one grid")
    res = heat_residual(w)
    if res > tol:
        raise ValueError(f"test function fails the heat equation check (residual {res:.2e})")
    axes = grid.space_axes
    bulk = np.trapezoid(np.mean(source.values * w.values, axis=axes), dx=grid.h)
    rhs = np.mean(initial_trace.values * w.values[0]) - np.mean(terminal.values * w.values[-1])
    return complex(bulk - rhs)


def heat_test_function(grid, xi, offset=0.0):
    """Sampled ``psi_{-|xi|^2}(t) phi_xi(x) + offset`` (a forward heat solution)."""
    return ModeProbe(tuple(np.atleast_1d(xi)), offset).evolved(grid)


__all__ = [
    "psi", "H1", "H2", "H2_printed", "I2", "I2_printed", "J",
    "time_weight", "terminal_weight", "growth_weight", "time_weight_grid",
    "DiscreteKernels", "discrete_kernels", "ModeProbe",
    "heat_residual", "duality_pairing", "heat_test_function", "TorusGrid",
]
