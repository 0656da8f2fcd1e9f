"""Picard solver for the coupled multipopulation HJB / Fokker-Planck system.

    -d_t u_i - Lap u_i + 1/2 grad u_i . grad u_i = F_i(x, m),   u_i(T) = G_i(x, m(T))
     d_t m_i - Lap m_i - div(m_i grad u_i) = 0,                 m_i(0) = m_{i,0}

The quadratic term is the bilinear product (no conjugation) so the solution map
stays holomorphic for complex data.  Each linear solve is the exponential
trapezoid sweep from ``_kernels``; diffusion is exact per Fourier mode.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import GridMismatchError, SolverError
from .grid import SpaceField, SpaceTimeField


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-10
    max_iters: int = 200
    relaxation: float = 1.0
    ball_radius: float = 0.1
    dealias: bool = False
    fallback_relaxation: float = 0.5

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")
        if not 0 < self.fallback_relaxation <= 1:
            raise ValueError("fallback relaxation must lie in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def replace(self, **kw):
        vals = {k: getattr(self, k) for k in self.__dataclass_fields__}
        vals.update(kw)
        return SolverParams(**vals)


@dataclass(frozen=True, eq=False)
class MfgSolution:
    u: tuple
    m: tuple
    iterations: int
    final_update: float
    history: list = field(default_factory=list)
    ratios: list = field(default_factory=list)

    @property
    def grid(self):
        return self.u[0].grid

    def mass(self, i):
        """Spatial mean of ``m_i`` at every time node."""
        g = self.grid
        return self.m[i].values.reshape(g.Nt + 1, -1).mean(axis=1)


# -- spectral helpers shared with the linearized cascade ------------------------------

def to_spec(grid, a):
    """Physical ``(..., N, .., N)`` -> spectral with flattened modes ``(..., M)``."""
    lead = a.shape[: a.ndim - grid.d]
    return grid.fft(a).reshape(lead + (grid.size,))


def to_phys(grid, ah):
    lead = ah.shape[:-1]
    return grid.ifft(ah.reshape(lead + grid.shape))


def grad_phys(grid, uh):
    """Physical gradient components of spectral ``uh``; returns list of length d."""
    ik = grid.ik.reshape(grid.d, -1)
    return [to_phys(grid, uh * ik[j]) for j in range(grid.d)]


def div_spec(grid, fluxes, dealias=False):
    """Spectral divergence of physical flux components."""
    ik = grid.ik.reshape(grid.d, -1)
    out = 0
    for j, fl in enumerate(fluxes):
        out = out + to_spec(grid, fl) * ik[j]
    return out


def mask_spec(grid, ah, dealias):
    if not dealias:
        return ah
    return ah * grid.dealias_mask.reshape(-1)


def backward_solve(grid, src_h, term_h):
    """Spectral backward solve; src_h ``(B, Nt+1, M)``, term_h ``(B, M)``."""
    return _kernels.backward_sweep(src_h, term_h, grid.step_decay, grid.h)


def forward_solve(grid, src_h, init_h):
    return _kernels.forward_sweep(src_h, init_h, grid.step_decay, grid.h)


# -- nonlinear solver -------------------------------------------------------------------

def _stack_m0(m0):
    m0 = tuple(m0)
    if not m0 or not all(isinstance(f, SpaceField) for f in m0):
        raise GridMismatchError("m0 must be a tuple of SpaceFields")
    grid = m0[0].grid
    if any(f.grid != grid for f in m0):
        raise GridMismatchError("initial densities live on different grids")
    return grid, np.stack([f.values for f in m0])


def _check_costs(F, G, n, grid):
    for name, series in (("F", F), ("G", G)):
        if series.n != n:
            raise GridMismatchError(f"{name} describes {series.n} populations, m0 has {n}")
        if series.grid is not None and series.grid.shape != grid.shape:
            raise GridMismatchError(f"{name} coefficients live on another spatial grid")


def solve_arrays(grid, F, G, m0, params):
    """Array-level Picard loop.  Returns ``(u, m, iterations, history, ratios)``.

    ``m0`` has shape ``(n,) + grid.shape``; ``u`` and ``m`` come back as
    ``(n, Nt+1) + grid.shape`` physical arrays.
    """
    n = m0.shape[0]
    K = grid.Nt + 1
    m0_h = to_spec(grid, m0)
    u_h = np.zeros((n, K, grid.size), dtype=np.complex128)
    u = np.zeros((n, K) + grid.shape, dtype=np.complex128)
    m = np.broadcast_to(m0[:, None], (n, K) + grid.shape).copy()
    theta = params.relaxation
    history, ratios = [], []
    eps = np.finfo(float).eps
    for it in range(1, params.max_iters + 1):
        grads = grad_phys(grid, u_h)
        flux = [m * g for g in grads]
        src_m = mask_spec(grid, div_spec(grid, flux), params.dealias)
        m_new_h = forward_solve(grid, src_m, m0_h)
        m_new = to_phys(grid, m_new_h)

        quad = sum(g * g for g in grads)
        Fm = np.stack([F.evaluate(i, m_new) for i in range(n)])
        src_u = mask_spec(grid, to_spec(grid, Fm - 0.5 * quad), params.dealias)
        Gm = np.stack([G.evaluate(i, m_new[:, -1]) for i in range(n)])
        term_u = mask_spec(grid, to_spec(grid, Gm), params.dealias)
        u_new_h = backward_solve(grid, src_u, term_u)
        u_new = to_phys(grid, u_new_h)

        if theta < 1.0:
            u_new_h = theta * u_new_h + (1 - theta) * u_h
            u_new = theta * u_new + (1 - theta) * u
            m_new = theta * m_new + (1 - theta) * m
        upd = max(float(np.max(np.abs(u_new - u))), float(np.max(np.abs(m_new - m))))
        if not np.isfinite(upd):
            raise SolverError(f"non-finite Picard update at iteration {it}", history)
        if history:
            ratios.append(upd / history[-1] if history[-1] > 0 else 0.0)
        history.append(upd)
        u, u_h, m = u_new, u_new_h, m_new
        floor = 16 * eps * max(float(np.max(np.abs(u))), float(np.max(np.abs(m))), 1.0)
        if upd < params.tol or (upd <= floor and it > 2):
            return u, m, it, history, ratios
        if theta == 1.0 and len(history) >= 3 and history[-1] > history[-2] > history[-3]:
            theta = params.fallback_relaxation
    raise SolverError(
        f"Picard iteration did not reach tol={params.tol:g} in {params.max_iters} iterations "
        f"(last update {history[-1]:.3e})",
        history,
    )


def solve_mfg(F, G, m0, params=SolverParams()):
    """Solve the coupled system for initial densities ``m0`` (tuple of SpaceFields)."""
    grid, m0_arr = _stack_m0(m0)
    _check_costs(F, G, m0_arr.shape[0], grid)
    size = float(np.sum(np.max(np.abs(m0_arr.reshape(m0_arr.shape[0], -1)), axis=1)))
    if size > params.ball_radius:
        warnings.warn(
            f"initial data size {size:.3g} exceeds the small-data radius {params.ball_radius:g}",
            RuntimeWarning,
            stacklevel=2,
        )
    u, m, its, history, ratios = solve_arrays(grid, F, G, m0_arr, params)
    return MfgSolution(
        tuple(SpaceTimeField(grid, x) for x in u),
        tuple(SpaceTimeField(grid, x) for x in m),
        its,
        history[-1],
        history,
        ratios,
    )


def measure_full(F, G, m0, params=SolverParams()):
    """Measurement map ``m0 -> (u_0(., 0), ..., u_{n-1}(., 0))``."""
    sol = solve_mfg(F, G, m0, params)
    return tuple(x.initial for x in sol.u)


def measure_single(F, G, m0, i, params=SolverParams()):
    """Single-population measurement ``m0 -> u_i(., 0)``."""
    if not 0 <= i < len(tuple(m0)):
        raise IndexError(f"population {i} out of range")
    return measure_full(F, G, m0, params)[i]
