"""Multi-index helpers and truncated power-series costs.

A cost family ``F = (F_0, ..., F_{n-1})`` is stored as Taylor coefficients
``F_i^{(beta)}`` so that ``F_i(x, z) = sum_beta F_i^{(beta)}(x) z^beta / beta!``
with ``1 <= |beta| <= S``.  Coefficients are either complex constants or
arrays sampled on a TorusGrid.  Populations are indexed from 0.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridMismatchError
from .grid import SpaceField, TorusGrid, load_field, save_field

KINDS = ("general", "shared", "state-independent")


# -- multi-indices ----------------------------------------------------------------

def unit(n, k):
    return tuple(int(j == k) for j in range(n))


def order(beta):
    return sum(beta)


def factorial(beta):
    return math.prod(math.factorial(b) for b in beta)


def add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def sub(a, b):
    out = tuple(x - y for x, y in zip(a, b))
    if min(out) < 0:
        raise ValueError(f"{b} is not contained in {a}")
    return out


def multi_indices(n, s):
    """All ``beta`` in N^n with ``|beta| = s``, in lexicographic order."""
    out = []
    for slots in itertools.combinations_with_replacement(range(n), s):
        out.append(from_slots(slots, n))
    return sorted(out, reverse=True)


def all_multi_indices(n, S):
    return [b for s in range(1, S + 1) for b in multi_indices(n, s)]


def from_slots(slots, n):
    """Canonical multi-index for a tuple of population indices (any order)."""
    beta = [0] * n
    for k in slots:
        beta[k] += 1
    return tuple(beta)


def expand(beta):
    """Sorted population tuple whose multi-index is ``beta``."""
    return tuple(k for k, b in enumerate(beta) for _ in range(b))


# -- cost series ----------------------------------------------------------------

def _as_coeff(value, grid):
    if isinstance(value, SpaceField):
        if grid is not None and value.grid != grid:
            raise GridMismatchError("coefficient field lives on another grid")
        v = value.values
    elif np.ndim(value) == 0:
        return complex(value)
    else:
        v = np.asarray(value, dtype=np.complex128)
        if grid is None or v.shape != grid.shape:
            raise GridMismatchError(f"coefficient array of shape {v.shape} does not fit the grid")
    v = np.array(v, dtype=np.complex128)
    v.flags.writeable = False
    return v


class CostSeries:
    """Truncated Taylor series of a running or terminal cost family.

    ``coeffs`` maps ``beta -> value`` for the shared and state-independent kinds
    when a single dict is given; for ``general`` it is a list with one dict per
    population.  ``shared`` stores one dict served to every population.
    """

    def __init__(self, n, S, coeffs=None, kind="general", grid=None):
        if kind not in KINDS:
            raise ValueError(f"unknown cost kind {kind!r}")
        if S < 1:
            raise ValueError("truncation order S must be >= 1")
        self.n = int(n)
        self.S = int(S)
        self.kind = kind
        self.grid = grid
        coeffs = coeffs if coeffs is not None else ({} if kind == "shared" else [{} for _ in range(n)])
        if kind == "shared":
            if not isinstance(coeffs, dict):
                raise ValueError("shared series take a single coefficient dict")
            tables = [coeffs]
        else:
            if isinstance(coeffs, dict):
                raise ValueError(f"{kind} series take one coefficient dict per population")
            if len(coeffs) != n:
                raise ValueError(f"expected {n} coefficient dicts, got {len(coeffs)}")
            tables = coeffs
        self._tables = []
        for table in tables:
            clean = {}
            for beta, value in table.items():
                beta = tuple(int(b) for b in beta)
                if len(beta) != n or min(beta) < 0:
                    raise ValueError(f"multi-index {beta} does not match n={n}")
                if not 1 <= order(beta) <= S:
                    raise ValueError(f"multi-index {beta} outside 1 <= |beta| <= {S}")
                value = _as_coeff(value, grid)
                if kind == "state-independent" and not isinstance(value, complex):
                    raise ValueError("state-independent coefficients must be scalars")
                clean[beta] = value
            self._tables.append(clean)

    # -- access --------------------------------------------------------------
    def table(self, i):
        self._check_population(i)
        return self._tables[0] if self.kind == "shared" else self._tables[i]

    def _check_population(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"population {i} out of range for n={self.n}")

    def coefficient(self, i, beta):
        """Coefficient value (complex or array); zero when absent."""
        return self.table(i).get(tuple(beta), 0j)

    def items(self, i):
        return sorted(self.table(i).items(), key=lambda kv: (order(kv[0]), tuple(-b for b in kv[0])))

    def field(self, i, beta):
        if self.grid is None:
            raise GridMismatchError("series has no grid attached")
        v = self.coefficient(i, beta)
        return SpaceField(self.grid, np.broadcast_to(v, self.grid.shape))

    def max_order(self):
        orders = [order(b) for t in self._tables for b in t]
        return max(orders, default=0)

    def is_zero(self):
        return all(np.all(np.asarray(v) == 0) for t in self._tables for v in t.values())

    def per_population(self):
        """Coefficient dicts for every population (shared tables are repeated)."""
        return [dict(self.table(i)) for i in range(self.n)]

    def with_grid(self, grid):
        return CostSeries(self.n, self.S, self._raw(), self.kind, grid)

    def _raw(self):
        if self.kind == "shared":
            return dict(self._tables[0])
        return [dict(t) for t in self._tables]

    # -- evaluation ------------------------------------------------------------
    def evaluate(self, i, m):
        """Evaluate ``F_i`` on stacked densities ``m`` of shape ``(n, ...)``.

        Coefficient arrays broadcast against the trailing spatial axes, so ``m``
        may carry a leading time axis after the population axis.
        """
        m = np.asarray(m)
        if m.shape[0] != self.n:
            raise GridMismatchError(f"expected {self.n} densities, got {m.shape[0]}")
        table = self.table(i)
        out = np.zeros(m.shape[1:], dtype=np.complex128)
        if not table:
            return out
        top = max(order(b) for b in table)
        powers = [[None] * (top + 1) for _ in range(self.n)]
        for beta, c in table.items():
            term = c / factorial(beta)
            prod = None
            for k, p in enumerate(beta):
                if p == 0:
                    continue
                if powers[k][p] is None:
                    powers[k][p] = m[k] ** p
                prod = powers[k][p] if prod is None else prod * powers[k][p]
            out += term * prod
        return out

    # -- serialization ---------------------------------------------------------
    def to_dict(self, field_dir=None, prefix="coef"):
        entries = []
        pops = [None] if self.kind == "shared" else range(self.n)
        for i in pops:
            for beta, value in self.items(0 if i is None else i):
                entry = {"beta": list(beta)}
                if i is not None:
                    entry["population"] = i
                entry["value"] = _encode_value(value, self.grid, field_dir, f"{prefix}_{i}_{'-'.join(map(str, beta))}")
                entries.append(entry)
        out = {"n": self.n, "S": self.S, "kind": self.kind, "entries": entries}
        if self.grid is not None:
            out["grid"] = self.grid.to_json()
        return out

    @classmethod
    def from_dict(cls, data, grid=None, base_dir=None):
        n, S, kind = data["n"], data["S"], data.get("kind", "general")
        if grid is None and "grid" in data:
            g = data["grid"]
            grid = TorusGrid(g["d"], g["N"], g["T"], g["Nt"])
        tables = {} if kind == "shared" else [{} for _ in range(n)]
        for e in data["entries"]:
            beta = tuple(e["beta"])
            value = _decode_value(e["value"], grid, base_dir)
            if kind == "shared":
                tables[beta] = value
            else:
                tables[e.get("population", 0)][beta] = value
        return cls(n, S, tables, kind, grid)

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        field_dir = path.parent / (path.stem + "_fields")
        data = self.to_dict(field_dir=field_dir)
        path.write_text(json.dumps(data, indent=1))
        return path

    @classmethod
    def load(cls, path, grid=None):
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), grid=grid, base_dir=path.parent)


def _encode_value(value, grid, field_dir, name):
    if isinstance(value, complex):
        return value.real if value.imag == 0 else [value.real, value.imag]
    if field_dir is not None:
        field_dir = Path(field_dir)
        field_dir.mkdir(parents=True, exist_ok=True)
        save_field(field_dir / f"{name}.fld", SpaceField(grid, value))
        return {"field": f"{field_dir.name}/{name}.fld"}
    amps = grid.fft(value)
    modes = []
    f = grid.freqs.reshape(grid.d, -1).T
    for xi, a in zip(f, amps.ravel()):
        if a != 0:
            modes.append([int(v) for v in xi] + [a.real, a.imag])
    return {"modes": modes}


def _decode_value(value, grid, base_dir):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list):
        return complex(value[0], value[1])
    if "field" in value:
        path = Path(value["field"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        fld = load_field(path)
        if grid is not None and fld.grid != grid:
            raise GridMismatchError("stored coefficient field has a different grid")
        return fld.values
    if "modes" in value:
        if grid is None:
            raise GridMismatchError("mode-list coefficients need a grid")
        amps = np.zeros(grid.shape, dtype=np.complex128)
        for row in value["modes"]:
            xi, re, im = row[:grid.d], row[grid.d], row[grid.d + 1]
            amps[grid.index(xi)] += complex(re, im)
        return grid.ifft(amps)
    raise ValueError(f"cannot decode coefficient value {value!r}")


def cost_eval(series, i, m):
    """Pointwise value of the truncated series ``F_i`` at densities ``m``."""
    series._check_population(i)
    fields = list(m)
    if len(fields) != series.n:
        raise GridMismatchError(f"expected {series.n} densities, got {len(fields)}")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields) or (series.grid is not None and series.grid != grid):
        raise GridMismatchError("densities and series must share one grid")
    stacked = np.stack([f.values for f in fields])
    return SpaceField(grid, series.evaluate(i, stacked))


def zero_series(n, S, kind="general", grid=None):
    return CostSeries(n, S, None, kind, grid)


# -- synthetic ground truth ----------------------------------------------------------

@dataclass(frozen=True)
class PlantSpec:
    """Recipe for a reproducible random cost family pair ``(F, G)``."""

    n: int
    S: int
    kind: str = "general"
    band: int = 2
    magnitude: float = 1.0
    seed: int = 0
    terminal: bool | None = None
    coupling_min: float | None = None
    decoupled: bool = False
    real: bool = True


def _random_field(rng, grid, band, magnitude, real):
    amps = np.zeros(grid.shape, dtype=np.complex128)
    inside = (np.abs(grid.freqs) <= band).all(axis=0)
    k = int(inside.sum())
    amps[inside] = magnitude * (rng.uniform(-1, 1, k) + 1j * rng.uniform(-1, 1, k)) / 2
    if real:
        flipped = np.conj(amps[tuple(np.negative(np.indices(grid.shape)) % grid.N)])
        amps = 0.5 * (amps + flipped)
    values = grid.ifft(amps)
    if real:
        values = values.real.astype(np.complex128)
    return values


def make_planted(spec, grid=None):
    """Random ``(F, G)`` following ``spec``; bit-identical for a fixed seed."""
    if spec.S < 1:
        raise ValueError("truncation order S must be >= 1")
    if spec.kind not in KINDS:
        raise ValueError(f"unknown cost kind {spec.kind!r}")
    n, S = spec.n, spec.S
    if spec.kind != "state-independent":
        if grid is None:
            raise GridMismatchError("state-dependent plants need a grid")
        if 2 * spec.band >= grid.N:
            raise GridMismatchError(f"band {spec.band} not resolved on N={grid.N}")
    terminal = spec.terminal if spec.terminal is not None else spec.kind != "state-independent"
    rng = np.random.default_rng(spec.seed)
    betas = all_multi_indices(n, S)

    def allowed(i, beta):
        return not spec.decoupled or beta[i] == order(beta)

    def draw(i, beta):
        if spec.kind == "state-independent":
            return complex(rng.uniform(-spec.magnitude, spec.magnitude))
        return _random_field(rng, grid, spec.band, spec.magnitude, spec.real)

    pops = [0] if spec.kind == "shared" else range(n)
    F_tables, G_tables = [], []
    for i in pops:
        F_tables.append({b: draw(i, b) for b in betas if allowed(i, b)})
    for i in pops:
        G_tables.append({b: draw(i, b) for b in betas if allowed(i, b)} if terminal else {})

    if spec.coupling_min is not None and spec.kind == "state-independent" and not spec.decoupled:
        lo, hi = spec.coupling_min, max(spec.magnitude, spec.coupling_min)
        for k in range(n):
            sign = 1.0 if rng.uniform() < 0.5 else -1.0
            F_tables[0][unit(n, k)] = complex(sign * rng.uniform(lo, hi))

    if spec.kind == "shared":
        F = CostSeries(n, S, F_tables[0], "shared", grid)
        G = CostSeries(n, S, G_tables[0], "shared", grid)
    else:
        g = grid if spec.kind != "state-independent" else None
        F = CostSeries(n, S, F_tables, spec.kind, g)
        G = CostSeries(n, S, G_tables, spec.kind, g)
    return F, G
