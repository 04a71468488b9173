"""Picard iteration of Duhamel's formula, contraction parameters, the leapfrog
Klein-Gordon oracle and the non-vanishing certificate.

Trajectories are collocated at Chebyshev-Lobatto snapshot times on [0, T].
The Duhamel integral at each snapshot t_i is a Gauss-Legendre sum on [0, t_i]
whose integrand values come from polynomial (barycentric) interpolation of the
forcing through the snapshot values.  Everything is kept as spectra, so the
group factors are diagonal (or small matrix) multiplications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import BarycentricInterpolator, CubicSpline
from scipy.optimize import brentq

from .clifford import DiracAlgebra
from .errors import AlgebraMismatch, DegenerateData, LowerBoundLost, NoConvergence, UnstableStep
from .operators import (
    ParamSet,
    dealias_mask,
    dirac_propagator,
    halfwave_forcing,
    halfwave_propagator,
    kg_rhs_array,
    nonlinearity_L,
    power_nonlinearity,
    system_to_kg,
)
from .spectral import Field, GridSpec, _fwd, _inv, l2_norm, lattice
from .weighted import (
    check_resolved,
    derived_x_norm,
    linear_growth_diag,
    nonlinear_ratio_diag,
    weighted_inf,
    x_norm,
)

__all__ = [
    "PicardConfig",
    "ContractionParams",
    "Certificate",
    "SolveReport",
    "LeapfrogTrajectory",
    "chebyshev_times",
    "picard_solve",
    "dirac_picard_solve",
    "contraction_params",
    "fit_t0",
    "fit_c_tilde",
    "leapfrog_kg",
    "kg_energy",
    "certify_nonvanishing",
    "uniqueness_probe",
    "kg_residual",
    "merge_two_sided",
]


@dataclass(frozen=True)
class PicardConfig:
    """Discretization and stopping rule of the Picard iteration.

    ``tol`` is relative: iteration stops once
    sup_t ||u_{k+1}(t) - u_k(t)||_X <= tol * sup_t ||u_{k+1}(t)||_X.
    ``direction = -1`` solves on [-T, 0] instead of [0, T].
    """

    T: float
    quad_nodes: int = 16
    tol: float = 1e-9
    max_iters: int = 60
    snapshot_times: tuple[float, ...] | None = None
    num_snapshots: int = 17
    dealias: bool = False
    tail_tol: float = 1e-8
    enforce_lower_bound: bool = True
    direction: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.quad_nodes < 8:
            raise ValueError(f"quad_nodes must be >= 8, got {self.quad_nodes}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.snapshot_times is not None:
            ts = np.asarray(self.snapshot_times, dtype=float)
            if ts[0] != 0 or np.any(np.diff(ts) <= 0) or ts[-1] > self.T * (1 + 1e-14):
                raise ValueError("snapshot_times must increase from 0 and stay within [0, T]")

    def times(self) -> np.ndarray:
        if self.snapshot_times is not None:
            ts = np.asarray(self.snapshot_times, dtype=float)
        else:
            ts = chebyshev_times(self.T, self.num_snapshots)
        return self.direction * ts


def chebyshev_times(T: float, count: int) -> np.ndarray:
    """Chebyshev-Lobatto points on [0, T], increasing, endpoints included."""
    j = np.arange(count)
    ts = 0.5 * T * (1.0 - np.cos(np.pi * j / (count - 1)))
    ts[0], ts[-1] = 0.0, T
    return ts


@dataclass(frozen=True)
class ContractionParams:
    eta: float
    K: float
    K_t0: float
    T_star: float
    C_tilde: float
    t0: float
    log_T_star: float


@dataclass(frozen=True)
class Certificate:
    T1: float
    eta: float
    verdict: bool

    @property
    def label(self) -> str:
        return "pass" if self.verdict else "fail"


# group application on batches of spectra (B, d, *grid) at times (B,)
GroupBatch = Callable[[np.ndarray, np.ndarray], np.ndarray]
ForcingBatch = Callable[[np.ndarray], np.ndarray]


def _halfwave_batch(grid: GridSpec) -> GroupBatch:
    def apply(spec, ts):
        return halfwave_propagator(grid, ts) * spec

    return apply


def _dirac_batch(grid: GridSpec, A: DiracAlgebra) -> GroupBatch:
    def apply(spec, ts):
        return np.einsum("bij...,bj...->bi...", dirac_propagator(A, grid, ts), spec)

    return apply


class _Duhamel:
    """u(t) = G(t) u0 - i int_0^t G(t - s) F(s) ds with F given at collocation nodes."""

    def __init__(self, grid: GridSpec, nodes: np.ndarray, Q: int, group: GroupBatch, u0_spec: np.ndarray):
        self.grid = grid
        self.nodes = nodes
        self.Q = Q
        self.group = group
        self.u0_spec = u0_spec
        self._x, self._w = np.polynomial.legendre.leggauss(Q)
        # the interpolation matrix only depends on s / T; normalizing keeps the
        # barycentric weights finite for tiny horizons
        self._scale = float(np.max(np.abs(nodes)))
        self._interp = BarycentricInterpolator(nodes / self._scale, np.eye(len(nodes)))
        self._rules = [self._rule(t) for t in nodes]
        self.free = np.stack([self.free_at(t) for t in nodes])

    def _rule(self, t: float):
        s = 0.5 * t * (1.0 + self._x)
        return self._interp(s / self._scale), 0.5 * t * self._w, t - s

    def free_at(self, t: float) -> np.ndarray:
        if t == 0:
            return np.array(self.u0_spec)
        return self.group(self.u0_spec[None], np.array([t]))[0]

    def integral(self, F: np.ndarray, t: float, rule=None) -> np.ndarray:
        if t == 0:
            return np.zeros_like(F[0])
        P, w, tau = rule if rule is not None else self._rule(t)
        Fs = np.tensordot(P, F, axes=(1, 0))
        Gs = self.group(Fs, tau)
        return np.tensordot(w, Gs, axes=(0, 0))

    def sweep(self, F: np.ndarray) -> np.ndarray:
        out = np.empty_like(self.free)
        for i, t in enumerate(self.nodes):
            out[i] = self.free[i] - 1j * self.integral(F, t, self._rules[i])
        return out

    def at(self, F: np.ndarray, t: float) -> np.ndarray:
        return self.free_at(t) - 1j * self.integral(F, t)


@dataclass
class SolveReport:
    """Converged Picard trajectory with diagnostics.

    ``picard_history`` holds sup_t ||u_{k+1} - u_k||_X per iteration and
    ``contraction_factors`` the successive ratios of that sequence.
    """

    kind: str
    params: ParamSet
    config: PicardConfig
    times: np.ndarray
    spectra: np.ndarray
    picard_history: list[float]
    relative_history: list[float]
    norm_curve: list[tuple[float, float]]
    inf_curve: list[tuple[float, float]]
    converged: bool
    lower_bound: float
    certificate: Certificate | None = None
    oracle_gap: float | None = None
    contraction: ContractionParams | None = None
    extras: dict = field(default_factory=dict)
    _duhamel: _Duhamel | None = None
    _forcing: np.ndarray | None = None
    _initial: Field | None = None

    @property
    def grid(self) -> GridSpec:
        return self._duhamel.grid

    @property
    def iterations(self) -> int:
        return len(self.picard_history)

    @property
    def contraction_factors(self) -> list[float]:
        h = self.picard_history
        return [h[i + 1] / h[i] for i in range(len(h) - 1) if h[i] > 0]

    @property
    def snapshots(self) -> list[tuple[float, Field]]:
        out = [(float(t), Field.from_spectrum(self.grid, s)) for t, s in zip(self.times, self.spectra)]
        if self._initial is not None:
            out[0] = (0.0, self._initial)
        return out

    def evaluate(self, t: float) -> Field:
        """Trajectory at any t in the solved interval, through Duhamel's formula."""
        lo, hi = sorted((self.times[0], self.times[-1]))
        if not lo - 1e-14 <= t <= hi + 1e-14:
            raise ValueError(f"t = {t} outside the solved interval [{lo}, {hi}]")
        return Field.from_spectrum(self.grid, self._duhamel.at(self._forcing, float(t)))

    def observable(self, u: Field) -> Field:
        """w = a.u for Klein-Gordon runs, the spinor itself for Dirac runs."""
        return system_to_kg(u) if self.kind == "kg" else u


def _observable_inf(kind: str, u: Field, n: int) -> float:
    return weighted_inf(system_to_kg(u) if kind == "kg" else u, n)


def _picard(
    kind: str,
    u0: Field,
    p: ParamSet,
    cfg: PicardConfig,
    group: GroupBatch,
    forcing: ForcingBatch,
    seed: np.ndarray | None = None,
) -> SolveReport:
    grid = u0.grid
    check_resolved(u0, cfg.tail_tol)
    inf0 = weighted_inf(u0, p.n)
    if not inf0 > 0:
        raise DegenerateData("initial data vanish somewhere: inf <x>^n |u0| = 0")
    floor = 0.5 * inf0
    nodes = cfg.times()
    duh = _Duhamel(grid, nodes, cfg.quad_nodes, group, np.asarray(u0.spectrum))
    u = duh.free.copy() if seed is None else np.array(seed, dtype=complex)
    if u.shape != duh.free.shape:
        raise ValueError(f"seed has shape {u.shape}, expected {duh.free.shape}")

    history: list[float] = []
    rel_history: list[float] = []
    converged = False
    for _ in range(cfg.max_iters):
        F = forcing(_inv(grid, u))
        new = duh.sweep(F)
        diff = max(x_norm(Field.from_spectrum(grid, d), p, check=False).total for d in new - u)
        size = max(x_norm(Field.from_spectrum(grid, s), p, check=False).total for s in new)
        u = new
        history.append(diff)
        rel_history.append(diff / size if size > 0 else 0.0)
        if cfg.enforce_lower_bound:
            for t, s in zip(nodes, u):
                lb = weighted_inf(Field.from_spectrum(grid, s), p.n)
                if lb < floor:
                    raise LowerBoundLost(
                        f"iterate {len(history)} at t = {t:.4g}: inf <x>^n|u| = {lb:.4g} < {floor:.4g}"
                    )
        if rel_history[-1] <= cfg.tol:
            converged = True
            break
    if not converged:
        h = history
        factor = h[-1] / h[-2] if len(h) > 1 and h[-2] > 0 else float("nan")
        raise NoConvergence(
            f"no convergence in {cfg.max_iters} iterations (last relative change {rel_history[-1]:.3e})",
            factor,
        )
    F = forcing(_inv(grid, u))
    fields = [Field.from_spectrum(grid, s) for s in u]
    fields[0] = u0  # the t = 0 snapshot is u0 exactly; keep its node values
    report = SolveReport(
        kind=kind,
        params=p,
        config=cfg,
        times=nodes,
        spectra=u,
        picard_history=history,
        relative_history=rel_history,
        norm_curve=[(float(t), derived_x_norm(f, p)) for t, f in zip(nodes, fields)],
        inf_curve=[(float(t), _observable_inf(kind, f, p.n)) for t, f in zip(nodes, fields)],
        converged=converged,
        lower_bound=min(weighted_inf(f, p.n) for f in fields),
        _duhamel=duh,
        _forcing=F,
        _initial=u0,
    )
    return report


def picard_solve(
    u0: Field, p: ParamSet, cfg: PicardConfig, seed: np.ndarray | None = None
) -> SolveReport:
    """Fixed point of u = e^{-it gamma<i grad>} u0 - i int_0^t e^{-i(t-s) gamma<i grad>} (L+N)(u) ds.

    ``seed`` optionally replaces the free flow as the first iterate; it holds
    spectra at the snapshot times, shape (S, 2, *grid).
    """
    if u0.components != 2:
        raise ValueError("picard_solve expects a 2-component half-wave field")
    grid = u0.grid

    def forcing(values):
        return halfwave_forcing(grid, values, p, cfg.dealias)

    return _picard("kg", u0, p, cfg, _halfwave_batch(grid), forcing, seed)


def dirac_picard_solve(
    psi0: Field, p: ParamSet, A: DiracAlgebra, cfg: PicardConfig, seed: np.ndarray | None = None
) -> SolveReport:
    """Picard iteration for i psi_t = H psi + lambda |psi|^alpha psi."""
    if psi0.components != A.spinor_size:
        raise AlgebraMismatch(f"field has {psi0.components} components, spinor size is {A.spinor_size}")
    grid = psi0.grid
    lam = p.lam
    mask = None
    if cfg.dealias:
        mask = dealias_mask(grid)

    def forcing(values):
        if lam == 0:
            return np.zeros_like(values)
        nl = np.moveaxis(power_nonlinearity(np.moveaxis(values, 1, 0), p.alpha), 0, 1)
        spec = _fwd(grid, lam * nl)
        return spec * mask if mask is not None else spec

    return _picard("dirac", psi0, p, cfg, _dirac_batch(grid, A), forcing, seed)


def merge_two_sided(backward: SolveReport, forward: SolveReport) -> dict:
    """Join the inf and norm curves of runs on [-T, 0] and [0, T]."""
    inf = sorted(backward.inf_curve[1:] + forward.inf_curve)
    norms = sorted(backward.norm_curve[1:] + forward.norm_curve)
    return {"inf_curve": inf, "norm_curve": norms}


def fit_t0(C: float, m: int) -> float:
    """Largest t with C t (1+t)^{2m} <= 1/2."""
    if not C > 0:
        raise ValueError("C must be positive")

    def g(t):
        return math.log(C * t) + 2 * m * math.log1p(t) - math.log(0.5)

    hi = 1.0
    while g(hi) < 0:
        hi *= 2
    lo = min(hi, 0.5 / C)
    while g(lo) > 0:
        lo *= 0.5
    return brentq(g, lo, hi, xtol=1e-300, rtol=1e-15)


def contraction_params(u0: Field, p: ParamSet, C_tilde: float, t0: float | None = None) -> ContractionParams:
    """eta, K, K_t0 and the largest admissible horizon T_star.

    Both conditions on T are linear in T, so T_star is the smaller of the two
    closed-form bounds (and of t0); everything is evaluated in log form since
    T_star is usually far below floating point range.
    """
    if not C_tilde > 0:
        raise ValueError("C_tilde must be positive")
    inf0 = weighted_inf(u0, p.n)
    if not inf0 > 0:
        raise DegenerateData("weighted infimum of the data is 0; eta is undefined")
    eta = 2.0 / inf0
    X = x_norm(u0, p).total
    if t0 is None:
        t0 = fit_t0(C_tilde, p.m)
    log_kt0 = p.linear_exponent * math.log1p(t0)
    K_t0 = math.exp(log_kt0)
    K = 2.0 * C_tilde * K_t0 * X
    lK, lE = math.log(K), math.log1p(eta * K)
    base = math.log(C_tilde) + log_kt0
    log_a = -math.log(2.0) - base - np.logaddexp(0.0, (2 * p.J + 1) * lE + p.alpha * lK)
    log_b = -math.log(eta) - base - np.logaddexp(
        np.logaddexp(math.log(X), lK), 2 * p.J * lE + (p.alpha + 1) * lK
    )
    log_T = float(min(log_a, log_b, math.log(t0)))
    return ContractionParams(
        eta=eta, K=K, K_t0=K_t0, T_star=math.exp(log_T), C_tilde=C_tilde, t0=t0, log_T_star=log_T
    )


def fit_c_tilde(
    u0: Field, p: ParamSet, times: Sequence[float] = (0.0, 0.05, 0.1, 0.2), safety: float = 2.0
) -> float:
    """Safety multiple of the largest observed linear and nonlinear ratio for u0 (at least 1)."""
    ratios = [linear_growth_diag(u0, p, times).max_ratio]
    eta = 2.0 / weighted_inf(u0, p.n)
    ratios.append(nonlinear_ratio_diag([u0], p, eta, lipschitz=False).max_ratio)
    if p.mu1 != 1:
        ratios.append(derived_x_norm(nonlinearity_L(u0, p), p) / x_norm(u0, p).total)
    return max(1.0, safety * max(ratios))


def certify_nonvanishing(report: SolveReport, p: ParamSet, dense: int = 0) -> Certificate:
    """eta = inf_curve(0) / 2 and the largest T1 with inf_curve >= eta on [0, T1].

    With ``dense > 0`` each gap between snapshots is also sampled at ``dense``
    interior times through ``report.evaluate``.
    """
    curve = list(report.inf_curve)
    if dense > 0:
        extra = []
        for (a, _), (b, _) in zip(curve[:-1], curve[1:]):
            for s in np.linspace(a, b, dense + 2)[1:-1]:
                f = report.observable(report.evaluate(float(s)))
                extra.append((float(s), weighted_inf(f, p.n)))
        curve = sorted(curve + extra, key=lambda c: abs(c[0]))
    else:
        curve = sorted(curve, key=lambda c: abs(c[0]))
    eta = 0.5 * curve[0][1]
    T1 = 0.0
    for t, v in curve:
        if v < eta or eta <= 0:
            break
        T1 = abs(t)
    cert = Certificate(T1=T1, eta=eta, verdict=bool(eta > 0 and T1 > 0))
    report.certificate = cert
    return cert


def uniqueness_probe(u0: Field, p: ParamSet, cfg: PicardConfig, seeds: Sequence) -> float:
    """Max pairwise sup_t X-distance between Picard fixed points started from ``seeds``.

    Seeds are "free" (the free flow), "constant" (u0 at every time), a Field
    (held constant in time) or an array of spectra at the snapshot times.
    """
    nodes = cfg.times()
    runs = []
    for s in seeds:
        if isinstance(s, str) and s == "free":
            arr = None
        elif isinstance(s, str) and s == "constant":
            arr = np.broadcast_to(u0.spectrum, (len(nodes), *u0.spectrum.shape)).copy()
        elif isinstance(s, Field):
            arr = np.broadcast_to(s.spectrum, (len(nodes), *s.spectrum.shape)).copy()
        else:
            arr = np.asarray(s)
        runs.append(picard_solve(u0, p, cfg, seed=arr).spectra)
    gap = 0.0
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            d = max(
                x_norm(Field.from_spectrum(u0.grid, a - b), p, check=False).total
                for a, b in zip(runs[i], runs[j])
            )
            gap = max(gap, d)
    return gap


def kg_residual(report: SolveReport, p: ParamSet, t: float, h: float) -> float:
    """L^2 norm of (w(t+h) - 2w(t) + w(t-h))/h^2 - kg_rhs(w(t)) with w = a.u."""
    if report.kind != "kg":
        raise ValueError("kg_residual needs a Klein-Gordon run")
    grid = report.grid
    w = [system_to_kg(report.evaluate(s)).values[0] for s in (t - h, t, t + h)]
    wtt = (w[2] - 2 * w[1] + w[0]) / h**2
    return l2_norm((wtt - kg_rhs_array(grid, w[1], p))[None], grid)


@dataclass
class LeapfrogTrajectory:
    grid: GridSpec
    params: ParamSet
    dt: float
    times: np.ndarray
    values: np.ndarray  # (steps + 1, *grid)

    def at(self, t: float) -> np.ndarray:
        """Cubic-spline interpolation in time of the stored levels."""
        i = int(round(t / self.dt))
        if abs(i * self.dt - t) < 1e-12 * max(1.0, abs(t)) and 0 <= i < len(self.times):
            return self.values[i]
        spline = CubicSpline(self.times, self.values, axis=0)
        return spline(t)

    def time_derivative(self, i: int) -> np.ndarray:
        """Centred difference (one-sided second order at the ends)."""
        v, dt = self.values, self.dt
        if 0 < i < len(v) - 1:
            return (v[i + 1] - v[i - 1]) / (2 * dt)
        if i == 0:
            return (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dt)
        return (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * dt)


def leapfrog_kg(w0: Field, w1: Field, p: ParamSet, dt: float, T: float) -> LeapfrogTrajectory:
    """Explicit second-difference scheme for w_tt = Delta w - mu1 w + mu2 |w|^alpha w.

    The first step is the Taylor step w0 + dt w1 + dt^2/2 rhs(w0); the time step
    is shrunk so that T is an integer number of steps.
    """
    grid = w0.grid
    br = lattice(grid).bracket
    omega = float(np.sqrt(np.max(br**2 - 1.0) + max(np.real(p.mu1), 0.0)))
    if not dt * omega < 2.0:
        raise UnstableStep(f"dt = {dt} violates the stability bound 2/max<xi> = {2.0 / omega:.4g}")
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / steps
    out = np.empty((steps + 1, *grid.shape), dtype=complex)
    out[0] = w0.values[0]
    out[1] = w0.values[0] + h * w1.values[0] + 0.5 * h**2 * kg_rhs_array(grid, w0.values[0], p)
    for j in range(1, steps):
        out[j + 1] = 2 * out[j] - out[j - 1] + h**2 * kg_rhs_array(grid, out[j], p)
    return LeapfrogTrajectory(grid, p, h, h * np.arange(steps + 1), out)


def kg_energy(grid: GridSpec, w: np.ndarray, wt: np.ndarray, p: ParamSet) -> float:
    """int (|w_t|^2 + |grad w|^2 + mu1 |w|^2)/2 - mu2 int |w|^{alpha+2}/(alpha+2), real couplings."""
    lat = lattice(grid)
    spec = _fwd(grid, w)
    grad2 = float(np.sum(lat.xi_sq * np.abs(spec) ** 2) * grid.dxi**grid.dim)
    dv = grid.cell_volume
    kin = float(np.sum(np.abs(wt) ** 2) * dv)
    mass = float(np.real(p.mu1) * np.sum(np.abs(w) ** 2) * dv)
    pot = float(np.real(p.mu2) * np.sum(np.abs(w) ** (p.alpha + 2)) * dv / (p.alpha + 2))
    return 0.5 * (kin + grad2 + mass) - pot
