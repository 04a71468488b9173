"""Linear groups, Bessel potentials, the Klein-Gordon <-> half-wave maps and
the nonlinearities of both equations.

The half-wave system is

    i u_t - gamma <i grad> u = L(u) + N(u),   gamma = diag(1, -1),

with u = (w a + i [<i grad>^-1 w_t] b) / 2, a = (1, 1), b = (1, -1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .clifford import DiracAlgebra, dirac_symbol_field
from .errors import AlgebraMismatch, GridMismatch, InvalidOverride
from .spectral import Field, GridSpec, _fwd, _inv, apply_multiplier, lattice

__all__ = [
    "ParamSet",
    "SystemPair",
    "SYSTEM",
    "make_params",
    "check_params",
    "power_nonlinearity",
    "bessel_power",
    "halfwave_group",
    "halfwave_propagator",
    "dirac_group",
    "dirac_propagator",
    "kg_to_system",
    "system_to_kg",
    "recover_time_derivative",
    "nonlinearity_L",
    "nonlinearity_N",
    "halfwave_forcing",
    "dirac_nonlinearity",
    "kg_rhs",
    "dealias_mask",
]


@dataclass(frozen=True)
class ParamSet:
    """Exponent, couplings and the integers (k, m, n, J) of the function spaces."""

    alpha: float
    dim: int
    k: int
    m: int
    n: int
    mu1: complex = 1.0
    mu2: complex = 1.0
    lam: complex = 1.0

    @property
    def J(self) -> int:
        return 2 * self.m + 2 + self.k

    @property
    def linear_exponent(self) -> int:
        """2m + n + 1, the growth exponent of the linear estimate."""
        return 2 * self.m + self.n + 1

    def with_couplings(self, **kw) -> "ParamSet":
        return replace(self, **kw)


def _exact(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def check_params(p: ParamSet) -> None:
    """Raise InvalidOverride naming the first violated inequality."""
    N = p.dim
    alpha = _exact(p.alpha)
    if not p.alpha > 0:
        raise InvalidOverride(f"alpha must be positive, got {p.alpha}")
    if not 2 * p.k > N:
        raise InvalidOverride(f"k must exceed N/2 (k={p.k}, N={N})")
    if not p.n > Fraction(N) / (2 * alpha):
        raise InvalidOverride(
            f"n must exceed N/(2*alpha) (n={p.n}, N/(2*alpha)={float(Fraction(N) / (2 * alpha)):g})"
        )
    if not p.n > Fraction(N, 2) + 1:
        raise InvalidOverride(f"n must exceed N/2 + 1 (n={p.n}, N={N})")
    if not 2 * p.m >= p.k + p.n + 3:
        raise InvalidOverride(f"2m must be >= k + n + 3 (k={p.k}, m={p.m}, n={p.n})")


def make_params(
    alpha: float,
    dim: int,
    k: int | None = None,
    m: int | None = None,
    n: int | None = None,
    mu1: complex = 1.0,
    mu2: complex = 1.0,
    lam: complex = 1.0,
) -> ParamSet:
    """Smallest admissible (k, n, m) for ``alpha`` and ``dim`` unless overridden.

    >>> make_params(1.0, 1).J
    9
    """
    if not alpha > 0:
        raise InvalidOverride(f"alpha must be positive, got {alpha}")
    if k is None:
        k = dim // 2 + 1
    if n is None:
        bound = max(Fraction(dim, 2) + 1, Fraction(dim) / (2 * _exact(alpha)))
        n = math.floor(bound) + 1
    if m is None:
        m = -(-(k + n + 3) // 2)
    p = ParamSet(alpha=float(alpha), dim=dim, k=int(k), m=int(m), n=int(n), mu1=mu1, mu2=mu2, lam=lam)
    check_params(p)
    return p


@dataclass(frozen=True)
class SystemPair:
    a: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0]))
    b: np.ndarray = field(default_factory=lambda: np.array([1.0, -1.0]))
    gamma: np.ndarray = field(default_factory=lambda: np.diag([1.0, -1.0]))


SYSTEM = SystemPair()


def power_nonlinearity(values: np.ndarray, alpha: float) -> np.ndarray:
    """|v|^alpha v with |.| the Euclidean norm over axis 0; zero where |v| < 1e-300."""
    mod = np.sqrt(np.sum(np.abs(values) ** 2, axis=0))
    safe = mod >= 1e-300
    factor = np.zeros_like(mod)
    factor[safe] = np.exp(alpha * np.log(mod[safe]))
    return factor * values


def dealias_mask(grid: GridSpec) -> np.ndarray:
    """Boolean mask keeping modes with |k_j| <= M/3 on every axis."""
    keep = np.ones(grid.shape, dtype=bool)
    for k in lattice(grid).index:
        keep &= np.broadcast_to(np.abs(k) <= grid.points // 3, grid.shape)
    return keep


def bessel_power(f: Field, s: float) -> Field:
    """<i grad>^s f."""
    if s == 0:
        return f
    return apply_multiplier(f, lattice(f.grid).bracket ** s)


def halfwave_propagator(grid: GridSpec, t) -> np.ndarray:
    """Diagonal symbol of exp(-i t gamma <i grad>), shape (2, *lattice).

    ``t`` may be an array; its shape is prepended.
    """
    br = lattice(grid).bracket
    t = np.asarray(t, dtype=float)
    ph = np.exp(-1j * t.reshape(t.shape + (1,) * grid.dim) * br)
    return np.stack([ph, ph.conj()], axis=t.ndim)


def halfwave_group(u: Field, t: float) -> Field:
    """exp(-i t gamma <i grad>) u."""
    if u.components != 2:
        raise ValueError("the half-wave group acts on 2-component fields")
    if t == 0:
        return u
    return apply_multiplier(u, halfwave_propagator(u.grid, t))


def dirac_propagator(A: DiracAlgebra, grid: GridSpec, t) -> np.ndarray:
    """exp(-i t H(xi)) = cos(t<xi>) I - i sin(t<xi>) H(xi)/<xi>.

    Shape (l, l, *lattice), or (*t.shape, l, l, *lattice) for array ``t``.
    """
    lat = lattice(grid)
    if A.dim != grid.dim:
        raise AlgebraMismatch(f"algebra dimension {A.dim} != grid dimension {grid.dim}")
    ell = A.spinor_size
    H = dirac_symbol_field(A, lat.xi) / lat.bracket
    t = np.asarray(t, dtype=float)
    tb = t.reshape(t.shape + (1, 1) + (1,) * grid.dim)
    eye = np.eye(ell).reshape((ell, ell) + (1,) * grid.dim)
    return np.cos(tb * lat.bracket) * eye - 1j * np.sin(tb * lat.bracket) * H


def dirac_group(psi: Field, t: float, A: DiracAlgebra) -> Field:
    """exp(-i t H) psi for the free Dirac operator H = -i sum gamma_k d_k + eta."""
    if psi.components != A.spinor_size:
        raise AlgebraMismatch(
            f"field has {psi.components} components, algebra spinor size is {A.spinor_size}"
        )
    if t == 0:
        return psi
    return apply_multiplier(psi, dirac_propagator(A, psi.grid, t))


def kg_to_system(w0: Field, w1: Field) -> Field:
    """u0 = (w0 a + i [<i grad>^-1 w1] b) / 2."""
    if w0.grid != w1.grid:
        raise GridMismatch("w0 and w1 live on different grids")
    if w0.components != 1 or w1.components != 1:
        raise ValueError("Klein-Gordon data must be scalar fields")
    v = bessel_power(w1, -1.0).values[0]
    w = w0.values[0]
    return Field(w0.grid, np.stack([0.5 * (w + 1j * v), 0.5 * (w - 1j * v)]))


def system_to_kg(u: Field) -> Field:
    """w = a . u."""
    if u.components != 2:
        raise ValueError("expected a 2-component field")
    return Field(u.grid, u.values[0] + u.values[1])


def recover_time_derivative(u: Field) -> Field:
    """w_t = -i <i grad> (b . u)."""
    if u.components != 2:
        raise ValueError("expected a 2-component field")
    bu = Field(u.grid, u.values[0] - u.values[1])
    return bessel_power(bu, 1.0) * (-1j)


def _along_b(grid: GridSpec, g_spec: np.ndarray) -> np.ndarray:
    """Spectra of g b from the spectrum of scalar g (leading axes preserved)."""
    return np.stack([g_spec, -g_spec], axis=-grid.dim - 1)


def halfwave_forcing(grid: GridSpec, values: np.ndarray, p: ParamSet, dealias: bool = False) -> np.ndarray:
    """Spectrum of L(u) + N(u) for a batch of physical values (..., 2, *grid).

    Both terms are multiples of b:  <i grad>^-1 [ (mu1-1)/2 w - mu2/2 |w|^alpha w ] b,
    with w = a . u evaluated pointwise.
    """
    ax = -grid.dim - 1
    w = np.take(values, 0, axis=ax) + np.take(values, 1, axis=ax)
    spec = np.zeros(w.shape, dtype=complex)
    if p.mu1 != 1:
        spec = spec + 0.5 * (p.mu1 - 1) * _fwd(grid, w)
    if p.mu2 != 0:
        nl = _fwd(grid, power_nonlinearity(w[None], p.alpha)[0])
        if dealias:
            nl = nl * dealias_mask(grid)
        spec = spec - 0.5 * p.mu2 * nl
    spec = spec / lattice(grid).bracket
    return _along_b(grid, spec)


def nonlinearity_L(u: Field, p: ParamSet) -> Field:
    """L(u) = ((mu1 - 1)/2) [<i grad>^-1 (a . u)] b."""
    q = replace(p, mu2=0.0)
    return Field.from_spectrum(u.grid, halfwave_forcing(u.grid, u.values, q))


def nonlinearity_N(u: Field, p: ParamSet, dealias: bool = False) -> Field:
    """N(u) = -(mu2/2) [<i grad>^-1 (|a.u|^alpha a.u)] b."""
    q = replace(p, mu1=1.0)
    return Field.from_spectrum(u.grid, halfwave_forcing(u.grid, u.values, q, dealias))


def dirac_nonlinearity(psi: Field, p: ParamSet) -> Field:
    """lambda |psi|^alpha psi, pointwise."""
    if p.lam == 0:
        return Field.zeros(psi.grid, psi.components)
    return Field(psi.grid, p.lam * power_nonlinearity(psi.values, p.alpha))


def kg_rhs(w: Field, p: ParamSet) -> Field:
    """Delta w - mu1 w + mu2 |w|^alpha w, the forcing of w_tt."""
    lat = lattice(w.grid)
    lap = Field.from_spectrum(w.grid, -lat.xi_sq * w.spectrum).values
    out = lap - p.mu1 * w.values
    if p.mu2 != 0:
        out = out + p.mu2 * power_nonlinearity(w.values, p.alpha)
    return Field(w.grid, out)


def kg_rhs_array(grid: GridSpec, w: np.ndarray, p: ParamSet) -> np.ndarray:
    """kg_rhs on a raw scalar array of shape grid.shape."""
    lat = lattice(grid)
    out = _inv(grid, -lat.xi_sq * _fwd(grid, w)) - p.mu1 * w
    if p.mu2 != 0:
        out = out + p.mu2 * power_nonlinearity(w[None], p.alpha)[0]
    return out
