"""Linear parabolic solves and the multilinearization cascade.

For initial data ``m_0(eps) = sum_l eps_l f_l`` the mixed derivative
``d_{eps_A} (u, m)`` at ``eps = 0`` for a direction subset ``A`` solves

    -d_t u^A - Lap u^A = -1/2 sum_{B} grad u^B . grad u^{A\\B} + sum_pi sum_k F^{(sum e_k)} prod m_k^{block}
     d_t m^A - Lap m^A = div( sum_{B} m^B grad u^{A\\B} )

where ``B`` ranges over nonempty proper subsets of ``A`` and ``pi`` over set
partitions of ``A`` with one population ``k`` per block.  The terminal datum is
the same partition sum with ``G`` at ``t = T``; ``m^A(0) = f_l`` if ``A = {l}``
and zero otherwise.  All products use the same discrete operators as the
nonlinear solver, so divided differences of that solver converge to these fields.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .costs import from_slots
from .errors import CascadeOrderError, GridMismatchError
from .forward import (
    backward_solve,
    div_spec,
    forward_solve,
    grad_phys,
    mask_spec,
    to_phys,
    to_spec,
)
from .grid import SpaceField, SpaceTimeField


# -- single linear solves -------------------------------------------------------------

def _same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError("source and boundary datum live on different grids")
    return a.grid


def solve_linear_forward(source, initial):
    """``d_t v - Lap v = source``, ``v(0) = initial``."""
    grid = _same_grid(source, initial)
    vh = forward_solve(grid, to_spec(grid, source.values)[None], to_spec(grid, initial.values)[None])
    return SpaceTimeField(grid, to_phys(grid, vh[0]))


def solve_linear_backward(source, terminal):
    """``-d_t v - Lap v = source``, ``v(T) = terminal``."""
    grid = _same_grid(source, terminal)
    vh = backward_solve(grid, to_spec(grid, source.values)[None], to_spec(grid, terminal.values)[None])
    return SpaceTimeField(grid, to_phys(grid, vh[0]))


def scheme_residual(v, source, backward=True):
    """Relative defect of ``v`` in the discrete recurrence it is supposed to satisfy."""
    grid = _same_grid(v, source)
    vh = to_spec(grid, v.values)
    fh = to_spec(grid, source.values)
    q, h = grid.step_decay, grid.h
    if backward:
        defect = vh[:-1] - q * vh[1:] - 0.5 * h * (fh[:-1] + q * fh[1:])
    else:
        defect = vh[1:] - q * vh[:-1] - 0.5 * h * (q * fh[:-1] + fh[1:])
    scale = max(float(np.max(np.abs(vh))), 1e-300)
    return float(np.max(np.abs(defect)) / scale)


def pde_residual(v, source, backward=True):
    """Residual of the continuous PDE with centered time differences (interior nodes)."""
    grid = _same_grid(v, source)
    vh = to_spec(grid, v.values)
    fh = to_spec(grid, source.values)
    dt = (vh[2:] - vh[:-2]) / (2 * grid.h)
    lap = grid.lap.reshape(-1)
    sign = -1.0 if backward else 1.0
    r = sign * dt - lap * vh[1:-1] - fh[1:-1]
    scale = max(float(np.max(np.abs(fh))), float(np.max(np.abs(vh))), 1e-300)
    return float(np.max(np.abs(r)) / scale)


# -- combinatorics ------------------------------------------------------------------

@lru_cache(maxsize=None)
def set_partitions(elems):
    """All set partitions of the tuple ``elems`` as tuples of tuples."""
    if not elems:
        return ((),)
    first, rest = elems[0], elems[1:]
    out = []
    for part in set_partitions(rest):
        out.append(((first,),) + part)
        for j in range(len(part)):
            out.append(part[:j] + ((first,) + part[j],) + part[j + 1:])
    return tuple(out)


def _members(mask):
    return tuple(j for j in range(mask.bit_length()) if mask >> j & 1)


def _mask(members):
    return sum(1 << j for j in members)


def _proper_subsets(mask):
    sub = (mask - 1) & mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


# -- cascade --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CascadeLevel:
    """Fields of one cascade order, keyed by direction subsets (sorted tuples).

    ``directions`` lists every probe direction; ``u`` and ``m`` hold the fields of
    each subset of size ``order``.
    """

    order: int
    directions: tuple
    u: dict
    m: dict

    def trace(self, subset=None):
        """``u^A(., 0)`` for every population; ``A`` defaults to the first ``order`` directions."""
        key = tuple(subset) if subset is not None else self.directions[: self.order]
        return tuple(f.initial for f in self.u[key])


def _normalize_probes(probes, n):
    arrays = []
    grid = None
    for p in probes:
        if isinstance(p, tuple) and len(p) == 2 and isinstance(p[1], SpaceField) and not isinstance(p[0], SpaceField):
            r, f = p
            if not 0 <= r < n:
                raise IndexError(f"population {r} out of range")
            fields = [None] * n
            fields[r] = f
        else:
            fields = list(p)
            if len(fields) != n:
                raise GridMismatchError(f"probe has {len(fields)} components, expected {n}")
        g = next(f.grid for f in fields if f is not None)
        if grid is None:
            grid = g
        if any(f is not None and f.grid != grid for f in fields):
            raise GridMismatchError("probe fields live on different grids")
        arrays.append(np.stack([f.values if f is not None else np.zeros(grid.shape, complex) for f in fields]))
    if not arrays:
        raise ValueError("at least one probe direction is needed")
    return grid, np.stack(arrays)


class _Table:
    """Nonzero (F_i, G_i) coefficients per multi-index, one entry per population."""

    def __init__(self, F, G, n):
        self.n = n
        self.F = [F.table(i) for i in range(n)]
        self.G = [G.table(i) for i in range(n)]

    def lookup(self, beta):
        f = [t.get(beta) for t in self.F]
        g = [t.get(beta) for t in self.G]
        return f, g


def cascade_arrays(grid, F, G, f, order=None, dealias=False, strict=True):
    """Array-level cascade for probe directions ``f`` of shape ``(D, n) + grid.shape``.

    Returns ``{mask: (u_h, m)}`` for every nonempty direction subset with at most
    ``order`` members, ``u_h`` spectral ``(n, Nt+1, M)`` and ``m`` physical
    ``(n, Nt+1) + grid.shape``.
    """
    D, n = f.shape[:2]
    order = D if order is None else order
    if order > D:
        raise CascadeOrderError(f"order {order} needs at least {order} probe directions, got {D}")
    if strict and order > min(F.S, G.S):
        raise CascadeOrderError(f"order {order} exceeds the cost truncation S={min(F.S, G.S)}")
    if F.n != n or G.n != n:
        raise GridMismatchError("probe population count does not match the costs")
    table = _Table(F, G, n)
    K = grid.Nt + 1
    store = {}
    grads = {}
    zero_init = np.zeros((n, grid.size), dtype=np.complex128)
    for size in range(1, order + 1):
        for members in itertools.combinations(range(D), size):
            A = _mask(members)
            # Fokker-Planck level
            if size == 1:
                src_m = np.zeros((n, K, grid.size), dtype=np.complex128)
                init = to_spec(grid, f[members[0]])
            else:
                flux = [0] * grid.d
                for B in _proper_subsets(A):
                    mB = store[B][1]
                    for j, g in enumerate(grads[A ^ B]):
                        flux[j] = flux[j] + mB * g
                src_m = mask_spec(grid, div_spec(grid, flux), dealias)
                init = zero_init
            m_A = to_phys(grid, forward_solve(grid, src_m, init))
            store[A] = (None, m_A)
            # Hamilton-Jacobi level
            src = np.zeros((n, K) + grid.shape, dtype=np.complex128)
            term = np.zeros((n,) + grid.shape, dtype=np.complex128)
            if size > 1:
                for B in _proper_subsets(A):
                    for gB, gC in zip(grads[B], grads[A ^ B]):
                        src -= 0.5 * gB * gC
            for part in set_partitions(members):
                blocks = [store[_mask(b)][1] for b in part]
                for ks in itertools.product(range(n), repeat=len(part)):
                    fc, gc = table.lookup(from_slots(ks, n))
                    if all(c is None for c in fc) and all(c is None for c in gc):
                        continue
                    prod = blocks[0][ks[0]]
                    for blk, k in zip(blocks[1:], ks[1:]):
                        prod = prod * blk[k]
                    for i in range(n):
                        if fc[i] is not None:
                            src[i] += fc[i] * prod
                        if gc[i] is not None:
                            term[i] += gc[i] * prod[-1]
            src_h = mask_spec(grid, to_spec(grid, src), dealias)
            term_h = mask_spec(grid, to_spec(grid, term), dealias)
            u_h = backward_solve(grid, src_h, term_h)
            store[A] = (u_h, m_A)
            grads[A] = grad_phys(grid, u_h)
    return store


def cascade_trace(grid, F, G, f, dealias=False, strict=True):
    """``u^A(., 0)`` for the full direction set, shape ``(n,) + grid.shape``."""
    store = cascade_arrays(grid, F, G, f, None, dealias, strict)
    u_h = store[(1 << f.shape[0]) - 1][0]
    return to_phys(grid, u_h[:, 0])


def solve_cascade(F, G, probes, up_to_order=None, dealias=False, strict=True):
    """Cascade levels ``1..up_to_order`` for the given probe directions.

    ``probes`` is a sequence with one entry per direction, either a
    ``(population, SpaceField)`` pair or an n-tuple of SpaceFields (``None`` = 0).
    """
    n = F.n
    grid, f = _normalize_probes(probes, n)
    store = cascade_arrays(grid, F, G, f, up_to_order, dealias, strict)
    order = f.shape[0] if up_to_order is None else up_to_order
    levels = []
    for s in range(1, order + 1):
        u, m = {}, {}
        for members in itertools.combinations(range(f.shape[0]), s):
            u_h, m_arr = store[_mask(members)]
            u_phys = to_phys(grid, u_h)
            u[members] = tuple(SpaceTimeField(grid, u_phys[i]) for i in range(n))
            m[members] = tuple(SpaceTimeField(grid, m_arr[i]) for i in range(n))
        levels.append(CascadeLevel(s, tuple(range(f.shape[0])), u, m))
    return levels
