import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from kgdirac.clifford import construct_algebra
from kgdirac.config import make_initial_data, parse_config
from kgdirac.errors import DegenerateData, LowerBoundLost, NoConvergence, UnstableStep
from kgdirac.operators import dirac_group, halfwave_group, make_params, system_to_kg
from kgdirac.solvers import (
    PicardConfig,
    certify_nonvanishing,
    chebyshev_times,
    contraction_params,
    dirac_picard_solve,
    fit_t0,
    kg_energy,
    kg_residual,
    leapfrog_kg,
    picard_solve,
    uniqueness_probe,
)
from kgdirac.spectral import Field, GridSpec
from kgdirac.weighted import x_norm


def setup(text=""):
    cfg = parse_config(text)
    p = cfg.params()
    return cfg, p, make_initial_data(cfg, cfg.grid(), p)


def test_chebyshev_times():
    ts = chebyshev_times(2.0, 5)
    assert ts[0] == 0.0 and ts[-1] == 2.0
    assert np.allclose(ts, 1.0 - np.cos(np.pi * np.arange(5) / 4))


def test_picard_config_validation():
    with pytest.raises(ValueError):
        PicardConfig(T=0.0)
    with pytest.raises(ValueError):
        PicardConfig(T=1.0, direction=0)
    with pytest.raises(ValueError):
        PicardConfig(T=1.0, snapshot_times=(0.0, 2.0))
    assert np.all(PicardConfig(T=1.0, direction=-1).times() <= 0)


def test_free_flow_is_a_fixed_point():
    cfg, p, data = setup("mu2=0")
    rep = picard_solve(data.u0, p, cfg.picard())
    assert rep.iterations == 1 and rep.picard_history[0] == 0.0
    for t, f in rep.snapshots:
        assert np.abs(f.values - halfwave_group(data.u0, t).values).max() < 1e-13


def test_constant_data_against_ode():
    # spatially constant w solves w'' = -mu1 w + mu2 |w|^alpha w
    cfg, p, data = setup("profile=constant_spinor decay=false z=0.5 mu1=1.3 mu2=0.7 alpha=2 T=0.4")
    rep = picard_solve(data.u0, p, cfg.picard())

    def rhs(t, y):
        w, v = y
        return [v, -1.3 * w + 0.7 * abs(w) ** 2 * w]

    ode = solve_ivp(rhs, (0, 0.4), [0.5, 0.0], method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
    for t, f in rep.snapshots:
        w = system_to_kg(f).values[0]
        assert np.abs(w - ode.sol(t)[0]).max() < 1e-10


def test_constant_spinor_closed_form():
    # N = 1 and zero frequency: i psi_t = eta psi + lam |psi|^alpha psi with |psi| conserved
    cfg, p, data = setup("equation=dirac profile=constant_spinor decay=false z=0.8 lam=0.5 alpha=2 T=0.3")
    rep = dirac_picard_solve(data.u0, p, construct_algebra(1), cfg.picard())
    for t, f in rep.snapshots:
        expect = 0.8 * np.exp(-1j * (1 + 0.5 * 0.8**2) * t)
        assert np.abs(f.values[0] - expect).max() < 1e-10
        assert np.abs(f.values[1]).max() < 1e-14


def test_dirac_without_coupling_is_free():
    cfg, p, data = setup("equation=dirac lam=0")
    A = construct_algebra(1)
    rep = dirac_picard_solve(data.u0, p, A, cfg.picard())
    assert rep.iterations == 1
    t, f = rep.snapshots[-1]
    assert np.abs(f.values - dirac_group(data.u0, t, A).values).max() < 1e-13


def test_contraction_params_scaling():
    cfg, p, data = setup()
    a = contraction_params(data.u0, p, 2.0)
    b = contraction_params(2.0 * data.u0, p, 2.0)
    assert b.K == pytest.approx(2 * a.K, rel=1e-12)
    assert b.eta == pytest.approx(a.eta / 2, rel=1e-12)
    assert 0 < a.T_star < a.t0
    assert a.log_T_star == pytest.approx(math.log(a.T_star))
    with pytest.raises(DegenerateData):
        contraction_params(Field.zeros(data.u0.grid, 2), p, 2.0)


def test_fit_t0_solves_its_equation():
    for C, m in ((1.0, 3), (2.0, 4), (50.0, 3)):
        t0 = fit_t0(C, m)
        assert C * t0 * (1 + t0) ** (2 * m) == pytest.approx(0.5, rel=1e-12)


def test_picard_factors_small_at_short_time():
    cfg, p, data = setup()
    rep = picard_solve(data.u0, p, cfg.picard())
    assert rep.converged and rep.relative_history[-1] <= cfg.tol
    assert max(rep.contraction_factors) < 0.5


def test_no_convergence_and_lower_bound_loss():
    cfg, p, data = setup()
    with pytest.raises(NoConvergence):
        picard_solve(data.u0, p, PicardConfig(T=0.1, max_iters=1))
    with pytest.raises(LowerBoundLost):
        picard_solve(data.u0, p, PicardConfig(T=3.0, max_iters=200))


def test_evaluate_matches_snapshots_and_bounds():
    cfg, p, data = setup()
    rep = picard_solve(data.u0, p, cfg.picard())
    t, f = rep.snapshots[5]
    assert np.abs(rep.evaluate(t).values - f.values).max() < 1e-12
    with pytest.raises(ValueError):
        rep.evaluate(2 * cfg.T)


def test_two_sided_symmetry():
    # real data with w_t(0) = 0 give w(-t) = w(t)
    cfg, p, data = setup()
    fwd = picard_solve(data.u0, p, cfg.picard(1))
    bwd = picard_solve(data.u0, p, cfg.picard(-1))
    assert np.all(bwd.times <= 0)
    for (tf, f), (tb, b) in zip(fwd.snapshots, bwd.snapshots):
        assert tb == pytest.approx(-tf)
        assert np.abs(system_to_kg(f).values - system_to_kg(b).values).max() < 1e-10


def test_uniqueness_from_different_seeds():
    cfg, p, data = setup()
    pc = cfg.picard()
    size = x_norm(data.u0, p).total
    # identical seeds agree to roundoff only: numpy reductions are not bitwise reproducible
    assert uniqueness_probe(data.u0, p, pc, ["free", "free"]) < pc.tol * size
    assert uniqueness_probe(data.u0, p, pc, ["free", "constant"]) < 10 * pc.tol * size


def test_kg_residual_second_order():
    cfg, p, data = setup()
    rep = picard_solve(data.u0, p, cfg.picard())
    r1 = kg_residual(rep, p, 0.05, 0.02)
    r2 = kg_residual(rep, p, 0.05, 0.01)
    assert r2 < r1 and r1 / r2 == pytest.approx(4.0, rel=0.05)


def test_certificate_examples():
    rep = SimpleNamespace(inf_curve=[(0.0, 1.0), (0.5, 0.6), (1.0, 0.4)], certificate=None)
    cert = certify_nonvanishing(rep, None)
    assert (cert.eta, cert.T1, cert.label) == (0.5, 0.5, "pass")
    flat = SimpleNamespace(inf_curve=[(0.0, 0.0), (1.0, 0.0)], certificate=None)
    assert certify_nonvanishing(flat, None).label == "fail"
    drop = SimpleNamespace(inf_curve=[(0.0, 1.0), (0.1, 0.2)], certificate=None)
    assert certify_nonvanishing(drop, None).T1 == 0.0


def test_leapfrog_plane_wave_second_order():
    g = GridSpec(1, 2 * np.pi, 32)
    p = make_params(1.0, 1, mu1=1.0, mu2=0.0)
    x = g.axis()
    xi = 3 * g.dxi
    om = math.sqrt(xi**2 + 1)
    w0, w1 = Field(g, np.cos(xi * x)), Field.zeros(g)
    errs = []
    for dt in (0.02, 0.01):
        lf = leapfrog_kg(w0, w1, p, dt, 1.0)
        errs.append(np.abs(lf.at(1.0) - np.cos(om) * np.cos(xi * x)).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    with pytest.raises(UnstableStep):
        leapfrog_kg(w0, w1, p, 1.0, 1.0)


def test_leapfrog_energy_drift():
    g = GridSpec(1, 16.0, 128)
    p = make_params(2.0, 1, mu1=1.0, mu2=1.0)
    x = g.axis()
    w0, w1 = Field(g, 0.5 * np.exp(-x**2)), Field.zeros(g)
    lf = leapfrog_kg(w0, w1, p, 1e-3, 1.0)
    e = [kg_energy(g, lf.values[i], lf.time_derivative(i), p) for i in (1, len(lf.times) - 2)]
    assert abs(e[1] - e[0]) < 1e-6 * abs(e[0])
