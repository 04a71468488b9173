"""Weighted norms, the weighted infimum and numerical checks of the a-priori
estimates for the linear groups and the nonlinearities.

Every inequality with an unnamed constant is only testable as a uniform bound
over a family of inputs, so the diagnostics here return an EstimateReport with
the observed ratios lhs / rhs and leave the bound to the caller.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import LowerBoundViolated, QuadratureFail, UnresolvedField
from .operators import ParamSet, bessel_power, halfwave_group, nonlinearity_N
from .spectral import (
    Field,
    _derivative_symbol,
    _inv,
    _phase,
    GridSpec,
    bracket_x,
    l2_norm,
    lattice,
    linf_norm,
    multi_indices,
    periodic_bracket,
    spectral_tail,
    weight_multiply,
)

__all__ = [
    "NormBreakdown",
    "EstimateReport",
    "x_norm",
    "y_norm",
    "y_norm_breakdown",
    "hs_norm",
    "weighted_inf",
    "bessel_kernel",
    "commutator_residual",
    "linear_growth_diag",
    "small_time_diag",
    "nonlinear_ratio_diag",
    "y_growth_diag",
    "bessel_census",
    "ste1_census",
    "embedding_census",
    "commutator_census",
    "inf_decay_check",
    "random_schwartz_field",
    "random_nonvanishing_field",
    "check_resolved",
    "derived_x_norm",
]

Beta = tuple[int, ...]
Group = Callable[[Field, float], Field]

DEFAULT_TAIL_TOL = 1e-8
NOISE_FLOOR = 1e-13


@dataclass
class NormBreakdown:
    """Per-multi-index terms of the X-type norm."""

    linf_terms: dict[Beta, float]
    l2_terms: dict[Beta, float]

    @property
    def total(self) -> float:
        return float(sum(self.linf_terms.values()) + sum(self.l2_terms.values()))


def check_resolved(u: Field, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    tail = spectral_tail(u)
    if tail > tail_tol:
        raise UnresolvedField(
            f"spectral tail {tail:.3e} exceeds {tail_tol:.1e}; refine the grid (points) "
            "or shrink the box"
        )
    return tail


def _derivative_spectra(u: Field, betas, noise_floor: float = 0.0) -> np.ndarray:
    lat = lattice(u.grid)
    syms = np.stack([_derivative_symbol(lat, b) for b in betas])
    spec = u.spectrum
    if noise_floor > 0:
        amp = np.sqrt(np.sum(np.abs(spec) ** 2, axis=0))
        spec = np.where(amp >= noise_floor * amp.max(), spec, 0.0)
    return spec[None] * syms[:, None]


def _interpolant(grid: GridSpec, spec: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Trigonometric interpolant through the node values of ``spec`` (d, *grid)."""
    lat = lattice(grid)
    scale = (grid.dx / np.sqrt(2 * np.pi)) ** grid.dim
    coeff = spec * (_phase(grid) / (scale * grid.points**grid.dim))
    axes = tuple(range(1, grid.dim + 1))
    L = grid.half_length

    def at(x):
        ph = np.exp(1j * sum(xi * (xj + L) for xi, xj in zip(lat.xi, x)))
        return np.sum(coeff * ph, axis=axes)

    return at


def _refined_max(grid: GridSpec, spec: np.ndarray, mod2: np.ndarray, n: float, candidates: int = 3) -> float:
    """Max of <x>^n |v(x)| over the box for the interpolant v, seeded at the best nodes."""
    best = float(mod2.max())
    if best == 0:
        return 0.0
    f = _interpolant(grid, spec)
    dx = grid.dx
    axis = grid.axis()

    def neg(x):
        x = np.atleast_1d(x)
        return -float((1.0 + np.dot(x, x)) ** n * np.sum(np.abs(f(x)) ** 2))

    flat = np.argsort(mod2, axis=None)[::-1][:candidates]
    for idx in flat:
        x0 = np.array([axis[i] for i in np.unravel_index(idx, grid.shape)])
        if grid.dim == 1:
            res = optimize.minimize_scalar(
                neg, bounds=(x0[0] - dx, x0[0] + dx), method="bounded", options={"xatol": 1e-10 * dx}
            )
        else:
            res = optimize.minimize(neg, x0, method="L-BFGS-B", bounds=[(c - dx, c + dx) for c in x0])
        best = max(best, -float(res.fun))
    return math.sqrt(best)


def _order_terms(
    u: Field,
    order: int,
    weight_power: float | None,
    kind: str,
    refine: bool = False,
    noise_floor: float = 0.0,
) -> dict[Beta, float]:
    grid = u.grid
    betas = multi_indices(grid.dim, order)
    specs = _derivative_spectra(u, betas, noise_floor)
    ders = _inv(grid, specs)
    mod2 = np.sum(np.abs(ders) ** 2, axis=1)
    if weight_power is not None:
        mod2 = mod2 * bracket_x(grid, 2 * weight_power)
    out = {}
    for b, sp, m2 in zip(betas, specs, mod2):
        if kind == "linf":
            if refine:
                out[b] = _refined_max(grid, sp, m2, weight_power or 0.0)
            else:
                out[b] = float(np.sqrt(m2.max()))
        else:
            out[b] = float(np.sqrt(m2.sum() * grid.cell_volume))
    return out


def x_norm(
    u: Field,
    p: ParamSet,
    check: bool = True,
    tail_tol: float = DEFAULT_TAIL_TOL,
    refine: bool | None = None,
    noise_floor: float | None = None,
) -> NormBreakdown:
    """Weighted norm: <x>^n D^beta u in L^inf for |beta| <= 2m-2, in L^2 up to J.

    With ``check`` (the default) the field must pass the resolution check,
    spectral coefficients below NOISE_FLOOR times the peak are discarded
    before differentiating (order-J derivatives would otherwise amplify FFT
    roundoff), and L^inf terms are maxima of the trigonometric interpolant
    found by local optimization from the best grid nodes.  ``check=False`` is
    the raw variant used for iterate distances; ``refine`` and ``noise_floor``
    override the two treatments individually.
    """
    if check:
        check_resolved(u, tail_tol)
    refine = check if refine is None else refine
    floor = (NOISE_FLOOR if check else 0.0) if noise_floor is None else noise_floor
    linf: dict[Beta, float] = {}
    l2: dict[Beta, float] = {}
    for order in range(0, 2 * p.m - 1):
        linf.update(_order_terms(u, order, p.n, "linf", refine, floor))
    for order in range(2 * p.m - 1, p.J + 1):
        l2.update(_order_terms(u, order, p.n, "l2", noise_floor=floor))
    return NormBreakdown(linf, l2)


def y_norm_breakdown(
    u: Field,
    p: ParamSet,
    check: bool = True,
    tail_tol: float = DEFAULT_TAIL_TOL,
    noise_floor: float | None = None,
) -> NormBreakdown:
    """Auxiliary norm: D^beta u in unweighted L^2 up to 2m-2, weighted L^2 beyond.

    The unweighted block is returned in ``linf_terms`` for uniformity.
    """
    if check:
        check_resolved(u, tail_tol)
    floor = (NOISE_FLOOR if check else 0.0) if noise_floor is None else noise_floor
    low: dict[Beta, float] = {}
    high: dict[Beta, float] = {}
    for order in range(0, 2 * p.m - 1):
        low.update(_order_terms(u, order, None, "l2", noise_floor=floor))
    for order in range(2 * p.m - 1, p.J + 1):
        high.update(_order_terms(u, order, p.n, "l2", noise_floor=floor))
    return NormBreakdown(low, high)


def y_norm(
    u: Field,
    p: ParamSet,
    check: bool = True,
    tail_tol: float = DEFAULT_TAIL_TOL,
    noise_floor: float | None = None,
) -> float:
    return y_norm_breakdown(u, p, check, tail_tol, noise_floor).total


def derived_x_norm(u: Field, p: ParamSet) -> float:
    # fields built from checked inputs (images, differences): no tail check,
    # same noise floor and L^inf refinement as a checked norm
    return x_norm(u, p, check=False, refine=True, noise_floor=NOISE_FLOOR).total


def hs_norm(u: Field, s: float) -> float:
    """Sobolev norm ||<xi>^s F u||_{l^2} with the lattice quadrature weight."""
    br = lattice(u.grid).bracket
    return float(np.sqrt(np.sum(np.abs(u.spectrum * br**s) ** 2) * u.grid.dxi**u.grid.dim))


def weighted_inf(u: Field, n: float) -> float:
    """min over grid nodes of <x>^n |u(x)|, |.| the Euclidean norm on C^d."""
    mod = np.sqrt(np.sum(np.abs(u.values) ** 2, axis=0))
    return float(np.min(bracket_x(u.grid, n) * mod))


def bessel_kernel(x_abs: float, N: int, rtol: float = 1e-8) -> float:
    """Kernel of <i grad>^-1 in R^N at radius ``x_abs`` > 0.

    G(x) = (1/2pi) int_0^inf exp(-pi|x|^2/theta - theta/(4pi)) theta^(-1-(N-1)/2) dtheta,
    evaluated after the substitution theta = exp(s).
    """
    if not x_abs > 0:
        raise ValueError("the Bessel kernel is evaluated at |x| > 0 only")
    r2 = float(x_abs) ** 2

    def integrand(s):
        if abs(s) > 700.0:  # the integrand underflows long before either end
            return 0.0
        return math.exp(-math.pi * r2 * math.exp(-s) - math.exp(s) / (4 * math.pi) - s * (N - 1) / 2)

    peak = math.log(2 * math.pi * float(x_abs))
    total, err = 0.0, 0.0
    for a, b in ((-np.inf, peak), (peak, np.inf)):
        val, e = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol * 1e-2, limit=200)
        total += val
        err += e
    if not np.isfinite(total) or err > rtol * abs(total):
        raise QuadratureFail(f"Bessel kernel quadrature error {err:.2e} at |x| = {x_abs}")
    return total / (2 * math.pi)


def commutator_residual(f: Field, ell: int) -> Field:
    """R(f) = <x>^{2 ell} <i grad> f - <i grad>(<x>^{2 ell} f)."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    a = weight_multiply(bessel_power(f, 1.0), 2 * ell)
    b = bessel_power(weight_multiply(f, 2 * ell), 1.0)
    return a - b


@dataclass
class EstimateReport:
    """Ratios lhs / rhs collected over a family of inputs."""

    name: str
    rows: list[tuple[str, str, float, float, float]] = field(default_factory=list)
    fitted_exponent: float | None = None
    notes: dict[str, float] = field(default_factory=dict)

    def add(self, input_id: str, where, lhs: float, rhs: float, ratio: float | None = None):
        if ratio is None:
            ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        self.rows.append((str(input_id), str(where), float(lhs), float(rhs), float(ratio)))

    @property
    def family_size(self) -> int:
        return len({r[0] for r in self.rows})

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r[4] for r in self.rows])

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max()) if self.rows else 0.0

    def merge(self, other: "EstimateReport") -> "EstimateReport":
        return EstimateReport(self.name, self.rows + other.rows, self.fitted_exponent, {**self.notes, **other.notes})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["input_id", "t_or_pair", "lhs", "rhs", "ratio"])
            for r in self.rows:
                wr.writerow([r[0], r[1], *(f"{v:.16e}" for v in r[2:])])
            summary = f"# summary name={self.name} family_size={self.family_size} max_ratio={self.max_ratio:.16e}"
            if self.fitted_exponent is not None:
                summary += f" fitted_exponent={self.fitted_exponent:.16e}"
            for k, v in self.notes.items():
                summary += f" {k}={v:.16e}"
            fh.write(summary + "\n")


def _slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def linear_growth_diag(
    psi: Field, p: ParamSet, times: Iterable[float], group: Group | None = None, input_id: str = "psi"
) -> EstimateReport:
    """||G(t) psi||_X / ((1+|t|)^{2m+n+1} ||psi||_X) along ``times``."""
    group = group or halfwave_group
    base = x_norm(psi, p).total
    rep = EstimateReport("linear_growth")
    for t in times:
        lhs = x_norm(group(psi, t), p).total
        rep.add(input_id, t, lhs, (1 + abs(t)) ** p.linear_exponent * base)
    return rep


def _low_order_linf(u: Field, p: ParamSet, max_order: int) -> float:
    best = 0.0
    for order in range(max_order + 1):
        best = max(best, max(_order_terms(u, order, p.n, "linf", True, NOISE_FLOOR).values()))
    return best


def small_time_diag(
    psi: Field, p: ParamSet, times: Iterable[float], group: Group | None = None, input_id: str = "psi"
) -> EstimateReport:
    """sup_{|beta| <= 2m} ||<x>^n D^beta (G(t) psi - psi)||_inf against |t|(1+|t|)^{2m+n+1}||psi||_X.

    ``fitted_exponent`` is the log-log slope of the left side in t.
    """
    group = group or halfwave_group
    times = [float(t) for t in times]
    base = x_norm(psi, p).total
    rep = EstimateReport("small_time")
    lhs_all = []
    for t in times:
        lhs = _low_order_linf(group(psi, t) - psi, p, 2 * p.m)
        lhs_all.append(lhs)
        rep.add(input_id, t, lhs, abs(t) * (1 + abs(t)) ** p.linear_exponent * base)
    pos = [(t, v) for t, v in zip(times, lhs_all) if t > 0 and v > 0]
    if len(pos) >= 2:
        rep.fitted_exponent = _slope(*zip(*pos))
    return rep


def nonlinear_ratio_diag(
    family: Sequence[Field],
    p: ParamSet,
    eta: float,
    lipschitz: bool = True,
    nonlinearity: Callable[[Field, ParamSet], Field] | None = None,
) -> EstimateReport:
    """Bound and Lipschitz ratios for the nonlinearity over a family.

    ratio = ||N(u)||_X / ((1 + eta||u||_X)^{2J} ||u||_X^{alpha+1}) for each member and
    ||N(u1) - N(u2)||_X / ((1 + eta S)^{2J+1} S^alpha ||u1 - u2||_X), S = ||u1|| + ||u2||,
    for consecutive pairs.  Right sides are handled in log form.
    """
    nonlinearity = nonlinearity or nonlinearity_N
    for i, u in enumerate(family):
        if eta * weighted_inf(u, p.n) < 1:
            raise LowerBoundViolated(
                f"member {i}: eta * inf <x>^n |u| = {eta * weighted_inf(u, p.n):.4g} < 1"
            )
    norms = [x_norm(u, p).total for u in family]
    images = [nonlinearity(u, p) for u in family]
    img_norms = [derived_x_norm(v, p) for v in images]
    rep = EstimateReport("nonlinear")
    for i, (nu, ni) in enumerate(zip(norms, img_norms)):
        log_rhs = 2 * p.J * math.log1p(eta * nu) + (p.alpha + 1) * math.log(nu)
        ratio = 0.0 if ni == 0 else math.exp(math.log(ni) - log_rhs)
        rep.add(f"u{i}", "self", ni, _safe_exp(log_rhs), ratio)
    if lipschitz:
        for i in range(len(family) - 1):
            j = i + 1
            diff = derived_x_norm(family[i] - family[j], p)
            if diff == 0:
                continue
            S = norms[i] + norms[j]
            lhs = derived_x_norm(images[i] - images[j], p)
            log_rhs = (2 * p.J + 1) * math.log1p(eta * S) + p.alpha * math.log(S) + math.log(diff)
            ratio = 0.0 if lhs == 0 else math.exp(math.log(lhs) - log_rhs)
            rep.add(f"u{i}", f"u{j}", lhs, _safe_exp(log_rhs), ratio)
    return rep


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709 else math.inf


def y_growth_diag(
    psi: Field, p: ParamSet, times: Iterable[float], group: Group | None = None, input_id: str = "psi"
) -> EstimateReport:
    """||G(t) psi||_Y / ((1+t)^n ||psi||_Y) along ``times``.

    ``fitted_exponent`` is the envelope exponent max_t log(Y(t)/Y(0)) / log(1+t),
    the smallest e with Y(t) <= (1+t)^e Y(0) at every sampled t > 0.
    """
    group = group or halfwave_group
    times = [float(t) for t in times]
    base = y_norm(psi, p)
    rep = EstimateReport("y_growth")
    exps = []
    for t in times:
        lhs = y_norm(group(psi, t), p)
        rep.add(input_id, t, lhs, (1 + abs(t)) ** p.n * base)
        if t != 0:
            exps.append(math.log(lhs / base) / math.log1p(abs(t)))
    if exps:
        rep.fitted_exponent = max(exps)
    return rep


def bessel_census(fields: Sequence[Field], n: int, norm: str = "2") -> EstimateReport:
    """||<x>^n <i grad>^-1 f||_p / ||<x>^n f||_p for p in {"2", "inf"}."""
    measure = (lambda g: l2_norm(g)) if norm == "2" else linf_norm
    rep = EstimateReport(f"bessel_L{norm}")
    for i, f in enumerate(fields):
        lhs = measure(weight_multiply(bessel_power(f, -1.0), n))
        rhs = measure(weight_multiply(f, n))
        rep.add(f"f{i}", norm, lhs, rhs)
    return rep


def ste1_census(fields: Sequence[Field], p: ParamSet) -> EstimateReport:
    """sup_{2m-1 <= |beta| <= 2m} ||<x>^n D^beta u||_inf / ||u||_Y."""
    rep = EstimateReport("ste1")
    for i, u in enumerate(fields):
        lhs = 0.0
        for order in (2 * p.m - 1, 2 * p.m):
            lhs = max(lhs, max(_order_terms(u, order, p.n, "linf", True, NOISE_FLOOR).values()))
        rep.add(f"u{i}", "-", lhs, y_norm(u, p))
    return rep


def embedding_census(fields: Sequence[Field], p: ParamSet) -> EstimateReport:
    """||u||_{H^J} / ||u||_X."""
    rep = EstimateReport("embedding")
    for i, u in enumerate(fields):
        rep.add(f"u{i}", "-", hs_norm(u, p.J), x_norm(u, p).total)
    return rep


def commutator_census(fields: Sequence[Field], ell: int) -> EstimateReport:
    """||R(f)||_{L^2} / ||<x>^{2 ell - 1} f||_{H^1}."""
    rep = EstimateReport(f"commutator_l{ell}")
    for i, f in enumerate(fields):
        lhs = l2_norm(commutator_residual(f, ell))
        rhs = hs_norm(weight_multiply(f, 2 * ell - 1), 1.0)
        rep.add(f"f{i}", ell, lhs, rhs)
    return rep


def inf_decay_check(
    psi: Field, n: int, t: float, samples: int = 33, group: Group | None = None
) -> tuple[float, float, float]:
    """Lower bound of the weighted infimum along the free flow.

    Returns (inf at t, inf at 0, B) with B = max_s ||<x>^n <i grad> G(s) psi||_inf over
    ``samples`` times in [0, t]; the bound inf(t) >= inf(0) - t B should hold.
    """
    group = group or halfwave_group
    B = 0.0
    for s in np.linspace(0.0, t, samples):
        v = bessel_power(group(psi, float(s)), 1.0)
        B = max(B, linf_norm(weight_multiply(v, n)))
    return weighted_inf(group(psi, t), n), weighted_inf(psi, n), B


def random_schwartz_field(
    grid: GridSpec,
    components: int,
    rng: np.random.Generator,
    bumps: tuple[int, int] = (1, 3),
    spread: float = 3.0,
    widths: tuple[float, float] = (0.7, 1.5),
    max_freq: float = 2.0,
) -> Field:
    """Sum of modulated Gaussians with random centres, widths and complex amplitudes."""
    coords = grid.coords()
    vals = np.zeros((components, *grid.shape), dtype=complex)
    for _ in range(rng.integers(bumps[0], bumps[1] + 1)):
        c = rng.uniform(-spread, spread, grid.dim)
        s = rng.uniform(*widths)
        kappa = rng.uniform(-max_freq, max_freq, grid.dim)
        amp = rng.normal(size=components) + 1j * rng.normal(size=components)
        r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
        phase = sum(k * x for k, x in zip(kappa, coords))
        g = np.exp(-r2 / (2 * s**2) + 1j * phase)
        vals += amp.reshape((components,) + (1,) * grid.dim) * g
    return Field(grid, vals)


def random_nonvanishing_field(
    grid: GridSpec, components: int, n: int, rng: np.random.Generator, max_ratio: float = 0.5
) -> Field:
    """z s <x>_per^{-n} + psi with ||<x>^n psi||_inf < max_ratio |z|.

    ``s`` is a random unit vector of C^d, so the weighted infimum is at least
    |z| (1 - max_ratio).
    """
    z = rng.uniform(0.5, 2.0)
    s = rng.normal(size=components) + 1j * rng.normal(size=components)
    s /= np.linalg.norm(s)
    base = z * s.reshape((components,) + (1,) * grid.dim) * periodic_bracket(grid, -n)
    bump = random_schwartz_field(grid, components, rng, bumps=(1, 1), spread=2.0)
    scale = linf_norm(weight_multiply(bump, n))
    r = rng.uniform(0.0, max_ratio)
    return Field(grid, base + bump.values * (r * z / scale))
