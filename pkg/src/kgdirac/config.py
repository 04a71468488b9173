"""Flat key=value run configuration and the initial-data constructors."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from typing import Any

import numpy as np

from .clifford import spinor_size
from .errors import ParseError, ProfileViolation, ValidationError
from .operators import ParamSet, bessel_power, kg_to_system, make_params
from .spectral import Field, GridSpec, bracket_x, linf_norm, periodic_bracket
from .solvers import PicardConfig
from .weighted import weighted_inf

__all__ = ["RunConfig", "InitialData", "parse_config", "echo_config", "make_initial_data", "PROFILES"]

PROFILES = ("bracket_decay", "bracket_plus_bump", "plane_modulated", "constant_spinor")
EQUATIONS = ("kg", "dirac")


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run.  ``k``, ``m``, ``n`` are resolved at parse time."""

    equation: str = "kg"
    dim: int = 1
    half_length: float = 16.0
    points: int = 256
    alpha: float = 1.0
    mu1: complex = 1.0
    mu2: complex = 1.0
    lam: complex = 1.0
    k: int | None = None
    m: int | None = None
    n: int | None = None
    profile: str = "bracket_decay"
    z: complex = 1.0
    bump_amplitude: float = 0.5
    bump_width: float = 1.0
    bump_center: float = 0.0
    freq_index: int = 1
    spinor: tuple[complex, ...] | None = None
    decay: bool = True
    T: float = 0.1
    quad_nodes: int = 16
    tol: float = 1e-9
    max_iters: int = 60
    snapshots: int = 17
    dealias: bool = False
    two_sided: bool = False
    C_tilde: float | None = None
    enforce_T_star: bool = False
    seed: int = 20240601
    family_size: int = 50
    output: str = "run"
    write_snapshots: bool = False

    def grid(self) -> GridSpec:
        return GridSpec(self.dim, self.half_length, self.points)

    def params(self) -> ParamSet:
        return make_params(self.alpha, self.dim, self.k, self.m, self.n, self.mu1, self.mu2, self.lam)

    def picard(self, direction: int = 1) -> PicardConfig:
        return PicardConfig(
            T=self.T,
            quad_nodes=self.quad_nodes,
            tol=self.tol,
            max_iters=self.max_iters,
            num_snapshots=self.snapshots,
            dealias=self.dealias,
            direction=direction,
        )

    @property
    def components(self) -> int:
        return 2 if self.equation == "kg" else spinor_size(self.dim)


_ALIASES = {"lambda": "lam", "N": "dim", "L": "half_length", "M": "points"}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_number(s: str) -> complex | float:
    c = complex(s.replace(" ", ""))
    return c.real if c.imag == 0 else c


def _parse_optional_int(s: str):
    return None if s.strip().lower() in ("auto", "none") else int(s)


def _parse_optional_float(s: str):
    return None if s.strip().lower() in ("fit", "auto", "none") else float(s)


def _parse_spinor(s: str):
    if s.strip().lower() in ("auto", "none"):
        return None
    return tuple(complex(v) for v in s.split(","))


_PARSERS = {
    "equation": str,
    "profile": str,
    "output": str,
    "dim": int,
    "points": int,
    "quad_nodes": int,
    "max_iters": int,
    "snapshots": int,
    "freq_index": int,
    "family_size": int,
    "seed": int,
    "half_length": float,
    "alpha": float,
    "bump_amplitude": float,
    "bump_width": float,
    "bump_center": float,
    "T": float,
    "tol": float,
    "mu1": _parse_number,
    "mu2": _parse_number,
    "lam": _parse_number,
    "z": _parse_number,
    "k": _parse_optional_int,
    "m": _parse_optional_int,
    "n": _parse_optional_int,
    "C_tilde": _parse_optional_float,
    "spinor": _parse_spinor,
    "decay": _parse_bool,
    "dealias": _parse_bool,
    "two_sided": _parse_bool,
    "enforce_T_star": _parse_bool,
    "write_snapshots": _parse_bool,
}
assert set(_PARSERS) == set(_FIELD_TYPES)


def parse_config(text: str, overrides: dict[str, str] | None = None) -> RunConfig:
    """Parse ``key=value`` pairs (whitespace separated, ``#`` starts a comment).

    The result is validated; the space integers k, m, n are filled with their
    minimal admissible values when not given.
    """
    raw: dict[str, Any] = {}
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        for token in body.split():
            if "=" not in token:
                raise ParseError(f"expected key=value, got {token!r}", lineno)
            key, value = token.split("=", 1)
            key = _ALIASES.get(key.strip(), key.strip())
            if key not in _PARSERS:
                raise ParseError(f"unknown key {key!r}", lineno)
            if key in seen:
                raise ParseError(f"duplicate key {key!r} (first set on line {seen[key]})", lineno)
            try:
                raw[key] = _PARSERS[key](value)
            except ValueError as exc:
                raise ParseError(f"bad value for {key}: {exc}", lineno) from None
            seen[key] = lineno
    for key, value in (overrides or {}).items():
        key = _ALIASES.get(key, key)
        if key not in _PARSERS:
            raise ParseError(f"unknown key {key!r}", 0)
        try:
            raw[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ParseError(f"bad value for {key}: {exc}", 0) from None
    cfg = RunConfig(**raw)
    return _validate(cfg)


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.equation not in EQUATIONS:
        raise ValidationError(f"equation must be one of {EQUATIONS}, got {cfg.equation!r}")
    if cfg.profile not in PROFILES:
        raise ValidationError(f"profile must be one of {PROFILES}, got {cfg.profile!r}")
    try:
        cfg.grid()
        PicardConfig(T=cfg.T, quad_nodes=cfg.quad_nodes, tol=cfg.tol, max_iters=cfg.max_iters)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    if cfg.snapshots < 2:
        raise ValidationError("snapshots must be >= 2")
    p = cfg.params()  # raises InvalidOverride on a bad (k, m, n)
    if cfg.z == 0:
        raise ValidationError("amplitude z must be nonzero")
    if not cfg.bump_amplitude >= 0:
        raise ValidationError("bump_amplitude must be >= 0")
    if not cfg.bump_width > 0:
        raise ValidationError("bump_width must be positive")
    if cfg.freq_index < 1 or cfg.freq_index > cfg.points // 4:
        raise ValidationError(f"freq_index must lie in [1, points/4], got {cfg.freq_index}")
    if cfg.spinor is not None:
        if cfg.equation != "dirac":
            raise ValidationError("spinor is only used by Dirac runs")
        if len(cfg.spinor) != cfg.components:
            raise ValidationError(f"spinor needs {cfg.components} entries, got {len(cfg.spinor)}")
        if not any(cfg.spinor):
            raise ValidationError("spinor must be nonzero")
    if cfg.C_tilde is not None and not cfg.C_tilde > 0:
        raise ValidationError("C_tilde must be positive")
    if cfg.family_size < 2:
        raise ValidationError("family_size must be >= 2")
    return dataclasses.replace(cfg, k=p.k, m=p.m, n=p.n)


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(repr(complex(c)) for c in v)
    if isinstance(v, (float, complex)):
        return repr(v)
    return str(v)


def echo_config(cfg: RunConfig) -> str:
    """Every field, one per line, in a form parse_config reads back identically."""
    return "".join(f"{f.name}={_fmt(getattr(cfg, f.name))}\n" for f in fields(RunConfig))


@dataclass
class InitialData:
    """Initial fields and the weighted infimum they achieve.

    ``u0`` is the half-wave field (kg) or the spinor (dirac); ``w0``/``w1`` are
    the Klein-Gordon data when relevant.
    """

    u0: Field
    w0: Field | None
    w1: Field | None
    achieved_inf: float


def _default_spinor(ell: int) -> np.ndarray:
    s = np.zeros(ell, dtype=complex)
    s[0] = 1.0
    return s


def _node_trig(grid: GridSpec, k0: int) -> tuple[np.ndarray, np.ndarray]:
    """cos and sin of (pi k0 / L) x_1 at the nodes, with the zeros of cos exact.

    At node j the phase is pi r with r = (2 k0 j - k0 M) / M, so cos vanishes
    exactly when the numerator is M/2 modulo M.
    """
    M = grid.points
    j = np.arange(M)
    numer = (2 * k0 * j - k0 * M) % (2 * M)
    cos = np.cos(np.pi * numer / M)
    cos[numer % M == M // 2] = 0.0
    sin = np.sin(np.pi * numer / M)
    shape = (M,) + (1,) * (grid.dim - 1)
    return cos.reshape(shape), sin.reshape(shape)


def make_initial_data(cfg: RunConfig, grid: GridSpec | None = None, p: ParamSet | None = None) -> InitialData:
    """Build the named profile on the grid.

    Profiles use the periodized bracket <x>_per^{-n}, which stays smooth on the
    periodic box and satisfies <x>^n <x>_per^{-n} >= 1 with equality at x = 0.
    """
    grid = grid or cfg.grid()
    p = p or cfg.params()
    n = p.n
    base = periodic_bracket(grid, -n)
    z = cfg.z
    coords = grid.coords()
    if cfg.profile == "bracket_decay":
        prof = z * base
    elif cfg.profile == "bracket_plus_bump":
        r2 = sum((c - cfg.bump_center) ** 2 for c in coords)
        psi = cfg.bump_amplitude * np.exp(-r2 / cfg.bump_width**2)
        sup = float(np.max(bracket_x(grid, n) * np.abs(psi)))
        if sup >= 1:
            raise ProfileViolation(f"bump gives ||<x>^n psi||_inf = {sup:.4g}, which must stay below 1")
        prof = z * (base + psi)
    elif cfg.profile == "plane_modulated":
        cos, sin = _node_trig(grid, cfg.freq_index)
        prof = None
    else:  # constant_spinor
        prof = z * (base if cfg.decay else np.ones(grid.shape))

    if cfg.equation == "dirac":
        ell = spinor_size(grid.dim)
        s = np.asarray(cfg.spinor, dtype=complex) if cfg.spinor is not None else _default_spinor(ell)
        shape = (ell,) + (1,) * grid.dim
        if prof is None:
            prof = z * base * (cos + 1j * sin)
        psi0 = Field(grid, s.reshape(shape) * prof)
        return InitialData(psi0, None, None, weighted_inf(psi0, n))

    if prof is None:
        w0 = Field(grid, z * base * cos)
        w1 = bessel_power(Field(grid, z * base * sin), 1.0)
    else:
        w0 = Field(grid, prof)
        w1 = Field.zeros(grid)
    return InitialData(kg_to_system(w0, w1), w0, w1, weighted_inf(w0, n))


def profile_bump_sup(grid: GridSpec, n: int, amplitude: float, width: float = 1.0, center: float = 0.0) -> float:
    """||<x>^n psi||_inf for the Gaussian bump psi of bracket_plus_bump."""
    r2 = sum((c - center) ** 2 for c in grid.coords())
    return linf_norm((bracket_x(grid, n) * amplitude * np.exp(-r2 / width**2))[None])
