"""Periodic grids, unitary Fourier transforms and Fourier multipliers.

The whole space R^N is replaced by the box [-L, L)^N with M nodes per axis.
Spectra are normalised to approximate the continuous unitary transform

    F f(xi) = (2 pi)^(-N/2) * integral exp(-i x.xi) f(x) dx

so that sum |f|^2 dx^N == sum |F f|^2 dxi^N holds exactly on the grid.
Multi-component fields carry their components on the leading axis.
"""

from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .errors import GridMismatch, OrderTooHigh, SymbolSingular

__all__ = [
    "GridSpec",
    "FrequencyLattice",
    "Field",
    "SpaceTag",
    "lattice",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "spectral_derivative",
    "spectral_derivatives",
    "weight_multiply",
    "multi_indices",
    "bracket_x",
    "periodic_bracket",
    "l2_norm",
    "linf_norm",
    "spectral_tail",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [-L, L)^N.

    Parameters
    ----------
    dim : int
        Spatial dimension N.
    half_length : float
        Box half-length L.
    points : int
        Nodes per axis M (power of two, at least 8).
    """

    dim: int
    half_length: float
    points: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.half_length > 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        m = int(self.points)
        if m != self.points or m < 8 or m & (m - 1):
            raise ValueError(f"points must be a power of two >= 8, got {self.points}")
        if self.dim > 3:
            raise ValueError("grids are supported for dim 1, 2 and 3 only")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.points

    @property
    def dxi(self) -> float:
        return np.pi / self.half_length

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    def axis(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.points)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable per-axis node coordinates (sparse meshgrid)."""
        return _coords(self)

    def origin_index(self) -> tuple[int, ...]:
        return (self.points // 2,) * self.dim


@functools.lru_cache(maxsize=64)
def _coords(grid: GridSpec) -> tuple[np.ndarray, ...]:
    ax = grid.axis()
    out = np.meshgrid(*([ax] * grid.dim), indexing="ij", sparse=True)
    for a in out:
        a.setflags(write=False)
    return tuple(out)


@functools.lru_cache(maxsize=64)
def _radius_sq(grid: GridSpec) -> np.ndarray:
    r2 = sum(c**2 for c in grid.coords())
    r2 = np.broadcast_to(r2, grid.shape).copy()
    r2.setflags(write=False)
    return r2


def bracket_x(grid: GridSpec, power: float = 1.0) -> np.ndarray:
    """<x>^power = (1 + |x|^2)^(power/2) at the grid nodes."""
    return (1.0 + _radius_sq(grid)) ** (0.5 * power)


@functools.lru_cache(maxsize=64)
def _periodic_radius_sq(grid: GridSpec) -> np.ndarray:
    L = grid.half_length
    s2 = sum((2 * L / np.pi) ** 2 * np.sin(np.pi * c / (2 * L)) ** 2 for c in grid.coords())
    s2 = np.broadcast_to(s2, grid.shape).copy()
    s2.setflags(write=False)
    return s2


def periodic_bracket(grid: GridSpec, power: float = 1.0) -> np.ndarray:
    """Smooth 2L-periodic surrogate of <x>^power.

    |x|^2 is replaced by sum_j (2L/pi)^2 sin^2(pi x_j / 2L), which agrees with
    |x|^2 to fourth order at the origin and never exceeds it, so
    <x>^n * periodic_bracket(grid, -n) >= 1 with equality at x = 0.
    """
    return (1.0 + _periodic_radius_sq(grid)) ** (0.5 * power)


@dataclass(frozen=True, eq=False)
class FrequencyLattice:
    """Discrete frequencies (pi/L) * {-M/2, ..., M/2-1} per axis, FFT ordered."""

    grid: GridSpec
    xi: tuple[np.ndarray, ...]
    index: tuple[np.ndarray, ...]
    bracket: np.ndarray

    @property
    def xi_sq(self) -> np.ndarray:
        return self.bracket**2 - 1.0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.grid.shape


@functools.lru_cache(maxsize=64)
def lattice(grid: GridSpec) -> FrequencyLattice:
    M, N = grid.points, grid.dim
    k1 = np.fft.fftfreq(M, d=1.0 / M).round().astype(np.int64)
    index = tuple(np.meshgrid(*([k1] * N), indexing="ij", sparse=True))
    xi = tuple(grid.dxi * k for k in index)
    br = np.sqrt(1.0 + sum(x**2 for x in xi))
    br = np.broadcast_to(br, grid.shape).copy()
    for a in (*index, *xi, br):
        a.setflags(write=False)
    return FrequencyLattice(grid=grid, xi=xi, index=index, bracket=br)


@functools.lru_cache(maxsize=64)
def _phase(grid: GridSpec) -> np.ndarray:
    # exp(i xi L) = (-1)^k shifts the DFT origin from x = -L to x = 0
    idx = lattice(grid).index
    ph = np.broadcast_to((-1.0) ** (sum(idx) % 2), grid.shape).copy()
    ph.setflags(write=False)
    return ph


def _fwd(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    axes = tuple(range(-grid.dim, 0))
    scale = (grid.dx / np.sqrt(2 * np.pi)) ** grid.dim
    return np.fft.fftn(values, axes=axes) * (scale * _phase(grid))


def _inv(grid: GridSpec, spectrum: np.ndarray) -> np.ndarray:
    axes = tuple(range(-grid.dim, 0))
    scale = (grid.dx / np.sqrt(2 * np.pi)) ** grid.dim
    return np.fft.ifftn(spectrum * (_phase(grid) / scale), axes=axes)


class SpaceTag(enum.Enum):
    PHYSICAL = "physical"
    SPECTRAL = "spectral"
    BOTH = "both"


class Field:
    """A d-component complex function sampled on a GridSpec.

    Values have shape ``(d, M, ..., M)``.  A Field is immutable; the missing
    representation (physical or spectral) is computed on first access and
    cached.
    """

    __slots__ = ("grid", "_values", "_spectrum")

    def __init__(self, grid: GridSpec, values=None, spectrum=None):
        if values is None and spectrum is None:
            raise ValueError("a Field needs values or a spectrum")
        self.grid = grid
        self._values = None if values is None else _freeze(grid, values)
        self._spectrum = None if spectrum is None else _freeze(grid, spectrum)
        if self._values is not None and self._spectrum is not None:
            if self._values.shape != self._spectrum.shape:
                raise ValueError("values and spectrum shapes differ")

    @classmethod
    def from_spectrum(cls, grid: GridSpec, spectrum) -> "Field":
        return cls(grid, spectrum=spectrum)

    @classmethod
    def zeros(cls, grid: GridSpec, components: int = 1) -> "Field":
        return cls(grid, np.zeros((components, *grid.shape), dtype=complex))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            v = _inv(self.grid, self._spectrum)
            v.setflags(write=False)
            self._values = v
        return self._values

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            s = _fwd(self.grid, self._values)
            s.setflags(write=False)
            self._spectrum = s
        return self._spectrum

    @property
    def space_tag(self) -> SpaceTag:
        if self._values is not None and self._spectrum is not None:
            return SpaceTag.BOTH
        return SpaceTag.PHYSICAL if self._values is not None else SpaceTag.SPECTRAL

    @property
    def components(self) -> int:
        arr = self._values if self._values is not None else self._spectrum
        return arr.shape[0]

    def component(self, j: int) -> "Field":
        if self._values is not None:
            return Field(self.grid, self._values[j : j + 1])
        return Field(self.grid, spectrum=self._spectrum[j : j + 1])

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise GridMismatch(f"{other.grid} != {self.grid}")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def __mul__(self, c) -> "Field":
        if isinstance(c, Field):
            return NotImplemented
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Field(grid={self.grid}, components={self.components}, tag={self.space_tag.value})"


def _freeze(grid: GridSpec, arr) -> np.ndarray:
    a = np.array(arr, dtype=complex)
    if a.shape == grid.shape:
        a = a[None]
    if a.shape[1:] != grid.shape:
        raise ValueError(f"array shape {a.shape} does not match grid shape {grid.shape}")
    a.setflags(write=False)
    return a


def forward_transform(f: Field) -> Field:
    """Return ``f`` with its spectrum populated (space tag BOTH)."""
    return Field(f.grid, values=f.values, spectrum=f.spectrum)


def inverse_transform(f: Field) -> Field:
    return Field(f.grid, values=f.values, spectrum=f.spectrum)


Symbol = Union[np.ndarray, complex, float, Callable[[FrequencyLattice], np.ndarray]]


def _contract(sym: np.ndarray, spec: np.ndarray, grid: GridSpec) -> np.ndarray:
    nd = grid.dim
    if sym.ndim <= nd:  # scalar symbol, broadcast over components
        return spec * sym
    if sym.ndim == nd + 1:  # diagonal symbol, one scalar per component
        return spec * sym
    return np.einsum("ij...,j...->i...", sym, spec)


def apply_multiplier(f: Field, symbol: Symbol) -> Field:
    """Multiply the spectrum of ``f`` pointwise by ``symbol``.

    ``symbol`` is an array (or a callable of the FrequencyLattice returning
    one) of shape ``lattice``, ``(d, lattice)`` for a diagonal matrix, or
    ``(d, d, lattice)`` for a full matrix symbol.
    """
    lat = lattice(f.grid)
    sym = symbol(lat) if callable(symbol) else symbol
    sym = np.asarray(sym)
    if not np.all(np.isfinite(sym)):
        raise SymbolSingular("symbol is not finite on the frequency lattice")
    return Field.from_spectrum(f.grid, _contract(sym, f.spectrum, f.grid))


def _derivative_symbol(lat: FrequencyLattice, beta: Sequence[int]) -> np.ndarray:
    out = np.ones(lat.shape, dtype=complex)
    for xi, b in zip(lat.xi, beta):
        if b:
            out = out * (1j * xi) ** b
    return out


def spectral_derivative(f: Field, beta: Sequence[int], max_order: int | None = None) -> Field:
    """D^beta f through the multiplier (i xi)^beta.

    Raises OrderTooHigh if |beta| exceeds ``max_order`` (usually J).
    """
    beta = tuple(int(b) for b in beta)
    if len(beta) != f.grid.dim or min(beta) < 0:
        raise ValueError(f"multi-index {beta} does not fit dimension {f.grid.dim}")
    if max_order is not None and sum(beta) > max_order:
        raise OrderTooHigh(f"|beta| = {sum(beta)} exceeds {max_order}")
    if not any(beta):
        return f
    return apply_multiplier(f, _derivative_symbol(lattice(f.grid), beta))


def spectral_derivatives(f: Field, betas: Sequence[Sequence[int]]) -> np.ndarray:
    """Physical values of D^beta f for every beta, stacked on axis 0."""
    lat = lattice(f.grid)
    syms = np.stack([_derivative_symbol(lat, b) for b in betas])
    spec = f.spectrum[None] * syms[:, None]
    return _inv(f.grid, spec)


@functools.lru_cache(maxsize=256)
def multi_indices(dim: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices beta in N^dim with |beta| == order."""
    return tuple(
        b for b in itertools.product(range(order + 1), repeat=dim) if sum(b) == order
    )


def weight_multiply(f: Field, power: float) -> Field:
    """Pointwise product with <x>^power at the grid nodes."""
    if power == 0:
        return f
    return Field(f.grid, f.values * bracket_x(f.grid, power))


def l2_norm(f: Field | np.ndarray, grid: GridSpec | None = None) -> float:
    """Grid L^2 norm of a (d, ...) array or Field, C^d norm pointwise."""
    if isinstance(f, Field):
        grid, arr = f.grid, f.values
    else:
        arr = f
    return float(np.sqrt(np.sum(np.abs(arr) ** 2) * grid.cell_volume))


def linf_norm(f: Field | np.ndarray) -> float:
    arr = f.values if isinstance(f, Field) else f
    return float(np.sqrt(np.max(np.sum(np.abs(arr) ** 2, axis=0))))


def spectral_tail(f: Field) -> float:
    """Largest spectral amplitude in the outer quarter band, relative to the peak.

    The outer band is every lattice point with |k_j| >= 3M/8 on some axis.
    """
    lat = lattice(f.grid)
    amp = np.sqrt(np.sum(np.abs(f.spectrum) ** 2, axis=0))
    peak = amp.max()
    if peak == 0:
        return 0.0
    cut = 3 * f.grid.points // 8
    mask = np.zeros(f.grid.shape, dtype=bool)
    for k in lat.index:
        mask |= np.broadcast_to(np.abs(k) >= cut, f.grid.shape)
    return float(amp[mask].max() / peak)


def stack_fields(fields: Iterable[Field]) -> Field:
    fields = list(fields)
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatch("cannot stack fields on different grids")
    return Field(grid, np.concatenate([f.values for f in fields], axis=0))
