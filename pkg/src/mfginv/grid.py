"""Unit-torus discretization, spectral transforms, differential operators and quadrature.

Spatial nodes are ``x_j = j / N`` per axis and time nodes ``t_k = k T / Nt``.
Amplitudes follow the convention ``f(x) = sum_xi a_xi exp(2 pi i xi . x)``, so
``a_xi = fftn(f) / N**d``.  Space-time arrays are time-major: ``(Nt + 1, N, ..., N)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridMismatchError

TWO_PI = 2.0 * np.pi
FOUR_PI_SQ = 4.0 * np.pi**2


@dataclass(frozen=True)
class TorusGrid:
    """Discretization of the unit torus ``T^d`` times ``[0, T]``."""

    d: int
    N: int
    T: float
    Nt: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise GridMismatchError(f"d must be a positive integer, got {self.d}")
        if int(self.N) != self.N or self.N < 2 or self.N % 2:
            raise GridMismatchError(f"N must be a positive even integer, got {self.N}")
        if not self.T > 0:
            raise GridMismatchError(f"T must be positive, got {self.T}")
        if int(self.Nt) != self.Nt or self.Nt < 1:
            raise GridMismatchError(f"Nt must be a positive integer, got {self.Nt}")
        object.__setattr__(self, "T", float(self.T))

    # -- geometry -----------------------------------------------------------
    @property
    def shape(self):
        return (self.N,) * self.d

    @property
    def size(self):
        return self.N**self.d

    @property
    def spacetime_shape(self):
        return (self.Nt + 1,) + self.shape

    @property
    def h(self):
        return self.T / self.Nt

    @property
    def space_axes(self):
        return tuple(range(-self.d, 0))

    @cached_property
    def times(self):
        return np.linspace(0.0, self.T, self.Nt + 1)

    @cached_property
    def nodes(self):
        """Coordinate arrays, one per axis, each of full spatial shape."""
        x = np.arange(self.N) / self.N
        return np.meshgrid(*([x] * self.d), indexing="ij")

    # -- spectral multipliers ----------------------------------------------
    @cached_property
    def freqs(self):
        """Integer frequencies, shape ``(d,) + shape``, range ``-N/2 .. N/2-1``."""
        k = np.fft.fftfreq(self.N, 1.0 / self.N).round().astype(int)
        return np.stack(np.meshgrid(*([k] * self.d), indexing="ij"))

    @cached_property
    def ksq(self):
        return (self.freqs**2).sum(axis=0).astype(float)

    @cached_property
    def nyquist(self):
        return (self.freqs == -self.N // 2).any(axis=0)

    @cached_property
    def ik(self):
        """Gradient multipliers ``2 pi i xi`` with the Nyquist mode zeroed."""
        m = 1j * TWO_PI * self.freqs.astype(float)
        m[:, self.nyquist] = 0.0
        return m

    @cached_property
    def lap(self):
        """Laplacian multiplier ``-4 pi^2 |xi|^2`` with the Nyquist mode zeroed."""
        m = -FOUR_PI_SQ * self.ksq
        m[self.nyquist] = 0.0
        return m

    @cached_property
    def rate(self):
        """Heat decay rate ``4 pi^2 |xi|^2`` used by the propagators (all modes)."""
        return FOUR_PI_SQ * self.ksq

    @cached_property
    def step_decay(self):
        """Per-step propagator ``exp(-4 pi^2 |xi|^2 h)``, flattened over modes."""
        return np.exp(-self.rate * self.h).ravel()

    @cached_property
    def dealias_mask(self):
        return (np.abs(self.freqs) <= self.N // 3).all(axis=0)

    def index(self, xi):
        """Array index of frequency ``xi`` (tuple or int) in FFT order."""
        xi = np.atleast_1d(np.asarray(xi, dtype=int))
        if xi.shape != (self.d,):
            raise GridMismatchError(f"frequency {tuple(xi)} is not a {self.d}-vector")
        if np.any(xi < -self.N // 2) or np.any(xi >= self.N // 2):
            raise GridMismatchError(f"frequency {tuple(xi)} not resolved on N={self.N}")
        return tuple(int(v) % self.N for v in xi)

    # -- array-level transforms (trailing d axes are space) ------------------
    def fft(self, a):
        return np.fft.fftn(a, axes=self.space_axes) / self.size

    def ifft(self, a_hat):
        return np.fft.ifftn(a_hat, axes=self.space_axes) * self.size

    def mode(self, xi):
        """Sampled ``exp(2 pi i xi . x)`` as a complex array."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        phase = sum(k * x for k, x in zip(xi, self.nodes))
        return np.exp(1j * TWO_PI * phase)

    def to_json(self):
        return {"d": self.d, "N": self.N, "T": self.T, "Nt": self.Nt}


def _check(grid, values, shape, what):
    values = np.asarray(values, dtype=np.complex128)
    if values.shape != shape:
        raise GridMismatchError(f"{what} has shape {values.shape}, grid expects {shape}")
    return values


@dataclass(frozen=True, eq=False)
class SpaceField:
    """Complex samples of a function on the spatial nodes of ``grid``."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = _check(self.grid, self.values, self.grid.shape, "SpaceField")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, c, dtype=np.complex128))

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(*grid.nodes))

    @classmethod
    def mode(cls, grid, xi, scale=1.0, offset=0.0):
        return cls(grid, scale * grid.mode(xi) + offset)

    def sup(self):
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        other = other.values if isinstance(other, SpaceField) else other
        return SpaceField(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        other = other.values if isinstance(other, SpaceField) else other
        return SpaceField(self.grid, self.values - other)

    def __mul__(self, other):
        other = other.values if isinstance(other, SpaceField) else other
        return SpaceField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return SpaceField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Complex samples on every (time node, spatial node) pair."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = _check(self.grid, self.values, self.grid.spacetime_shape, "SpaceTimeField")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def at(self, k):
        return SpaceField(self.grid, self.values[k])

    @property
    def initial(self):
        return self.at(0)

    @property
    def final(self):
        return self.at(self.grid.Nt)

    def sup(self):
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier amplitudes of a SpaceField, stored in FFT order."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __getitem__(self, xi):
        return complex(self.coeffs[self.grid.index(xi)])

    def items(self):
        """Yield ``(xi, amplitude)`` pairs with ``xi`` as an integer tuple."""
        f = self.grid.freqs.reshape(self.grid.d, -1).T
        for xi, a in zip(f, self.coeffs.ravel()):
            yield tuple(int(v) for v in xi), complex(a)


def _values(field, grid=None):
    if isinstance(field, (SpaceField, SpaceTimeField)):
        if grid is not None and field.grid != grid:
            raise GridMismatchError("field lives on a different grid")
        return field.grid, field.values
    if grid is None:
        raise GridMismatchError("a raw array needs an explicit grid")
    return grid, _check(grid, field, grid.shape, "array")


def spectral_transform(field, grid=None):
    grid, v = _values(field, grid)
    return Spectrum(grid, grid.fft(v))


def inverse_transform(spectrum):
    grid = spectrum.grid
    return SpaceField(grid, grid.ifft(_check(grid, spectrum.coeffs, grid.shape, "Spectrum")))


def heat_propagate(field, dt):
    """Exact heat flow ``exp(dt * Laplacian)`` applied to a SpaceField."""
    if dt < 0:
        raise ValueError(f"heat_propagate needs dt >= 0, got {dt}")
    grid, v = _values(field)
    if dt == 0:
        return SpaceField(grid, v)
    return SpaceField(grid, grid.ifft(grid.fft(v) * np.exp(-grid.rate * dt)))


def laplacian(field):
    grid, v = _values(field)
    return SpaceField(grid, grid.ifft(grid.fft(v) * grid.lap))


def gradient(field):
    grid, v = _values(field)
    vh = grid.fft(v)
    return tuple(SpaceField(grid, grid.ifft(vh * grid.ik[j])) for j in range(grid.d))


def divergence(fields):
    fields = tuple(fields)
    if not fields or not all(isinstance(f, SpaceField) for f in fields):
        raise GridMismatchError("divergence needs a tuple of SpaceFields")
    grid = fields[0].grid
    if len(fields) != grid.d or any(f.grid != grid for f in fields):
        raise GridMismatchError(f"divergence needs exactly d={grid.d} fields on one grid")
    acc = sum(grid.fft(f.values) * grid.ik[j] for j, f in enumerate(fields))
    return SpaceField(grid, grid.ifft(acc))


def integrate(field):
    """Spatial mean for SpaceField; trapezoid in time of spatial means for SpaceTimeField."""
    if isinstance(field, SpaceTimeField):
        means = field.values.reshape(field.grid.Nt + 1, -1).mean(axis=1)
        return complex(np.trapezoid(means, dx=field.grid.h))
    grid, v = _values(field)
    return complex(v.mean())


def time_trapezoid(series, h):
    """Trapezoid rule along axis 0 for a uniformly sampled series."""
    return np.trapezoid(series, dx=h, axis=0)


# -- serialization -------------------------------------------------------------

def save_field(path, field):
    """Write a JSON header line followed by little-endian interleaved (re, im) float64."""
    kind = "spacetime" if isinstance(field, SpaceTimeField) else "space"
    grid = field.grid
    header = {
        **grid.to_json(),
        "kind": kind,
        "dtype": "complex128",
        "layout": "row-major, time-major",
    }
    payload = np.ascontiguousarray(field.values, dtype="<c16").tobytes()
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)
    return path


def load_field(path):
    with Path(path).open("rb") as fh:
        header = json.loads(fh.readline())
        raw = fh.read()
    if header.get("dtype") != "complex128":
        raise GridMismatchError(f"unsupported dtype {header.get('dtype')}")
    grid = TorusGrid(header["d"], header["N"], header["T"], header["Nt"])
    shape = grid.spacetime_shape if header["kind"] == "spacetime" else grid.shape
    values = np.frombuffer(raw, dtype="<c16")
    if values.size != int(np.prod(shape)):
        raise GridMismatchError("payload size does not match header")
    values = values.reshape(shape).astype(np.complex128)
    cls = SpaceTimeField if header["kind"] == "spacetime" else SpaceField
    return cls(grid, values)
