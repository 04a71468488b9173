import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kgdirac.clifford import construct_algebra
from kgdirac.errors import AlgebraMismatch, GridMismatch, InvalidOverride
from kgdirac.operators import (
    ParamSet,
    bessel_power,
    check_params,
    dealias_mask,
    dirac_group,
    dirac_nonlinearity,
    halfwave_group,
    kg_rhs,
    kg_to_system,
    make_params,
    nonlinearity_L,
    nonlinearity_N,
    power_nonlinearity,
    recover_time_derivative,
    system_to_kg,
)
from kgdirac.spectral import Field, GridSpec, apply_multiplier, lattice, spectral_derivative
from kgdirac.weighted import random_schwartz_field

G = GridSpec(1, 16.0, 256)


@pytest.mark.parametrize(
    "alpha,N,kmn,J",
    [(1.0, 1, (1, 3, 2), 9), (0.25, 3, (2, 6, 7), 16), (2.0, 2, (2, 4, 3), 12), (0.5, 1, (1, 3, 2), 9)],
)
def test_minimal_integers(alpha, N, kmn, J):
    p = make_params(alpha, N)
    assert (p.k, p.m, p.n) == kmn and p.J == J


@given(st.floats(0.05, 8.0), st.integers(1, 4))
def test_minimal_integers_are_admissible_and_minimal(alpha, N):
    p = make_params(alpha, N)
    check_params(p)
    for field, value in (("k", p.k - 1), ("n", p.n - 1), ("m", p.m - 1)):
        kw = dict(k=p.k, m=p.m, n=p.n)
        kw[field] = value
        with pytest.raises(InvalidOverride):
            make_params(alpha, N, **kw)


def test_override_messages():
    with pytest.raises(InvalidOverride, match=r"N/\(2\*alpha\)"):
        make_params(0.25, 3, n=1)
    with pytest.raises(InvalidOverride, match="2m"):
        make_params(1.0, 1, m=2)
    with pytest.raises(InvalidOverride, match="positive"):
        make_params(0.0, 1)


def test_exact_boundary_n_equals_N_over_2alpha():
    # alpha = 0.1, N = 1: N/(2 alpha) = 5 exactly, so n = 5 is not admissible
    with pytest.raises(InvalidOverride):
        make_params(0.1, 1, n=5)
    assert make_params(0.1, 1).n == 6


def test_power_nonlinearity():
    v = np.array([[3.0, 0.0, 1e-320], [4.0, 0.0, 0.0]], dtype=complex)
    out = power_nonlinearity(v, 0.5)
    assert np.allclose(out[:, 0], np.sqrt(5.0) * v[:, 0])
    assert np.all(out[:, 1:] == 0)


def test_bessel_power_inverse_and_laplacian():
    x = G.coords()[0]
    f = Field(G, np.exp(-x**2))
    back = bessel_power(bessel_power(f, -1.0), 1.0)
    assert np.abs(back.values - f.values).max() < 1e-13
    # <i grad>^2 = 1 - Laplacian
    expect = np.exp(-x**2) * (1 - (4 * x**2 - 2))
    assert np.abs(bessel_power(f, 2.0).values[0] - expect).max() < 1e-12


def test_halfwave_group_on_plane_wave():
    k = 7
    xi = k * G.dxi
    x = G.coords()[0]
    u = Field(G, np.stack([np.exp(1j * xi * x), np.exp(1j * xi * x)]))
    t = 0.37
    out = halfwave_group(u, t).values
    br = np.sqrt(1 + xi**2)
    assert np.abs(out[0] - np.exp(-1j * t * br) * u.values[0]).max() < 1e-12
    assert np.abs(out[1] - np.exp(1j * t * br) * u.values[1]).max() < 1e-12


def test_kg_to_system_examples():
    w0 = Field(G, np.ones(G.shape))
    u = kg_to_system(w0, Field.zeros(G))
    assert np.allclose(u.values, 0.5)
    with pytest.raises(GridMismatch):
        kg_to_system(w0, Field.zeros(GridSpec(1, 8.0, 256)))


def _system_time_derivative(u, p):
    gamma_bracket = np.stack([lattice(G).bracket, -lattice(G).bracket])
    lin = apply_multiplier(u, gamma_bracket)
    return (lin + nonlinearity_L(u, p) + nonlinearity_N(u, p)) * (-1j)


@pytest.mark.parametrize("alpha,mu1,mu2", [(0.5, 1.0, 1.0), (2.0, 1.7, -0.3), (1.0, 0.4, 0.0)])
def test_halfwave_system_reproduces_klein_gordon(alpha, mu1, mu2):
    # w = a.u for a solution of the system satisfies w_tt = Lap w - mu1 w + mu2 |w|^alpha w
    rng = np.random.default_rng(11)
    p = make_params(alpha, 1, mu1=mu1, mu2=mu2)
    u = random_schwartz_field(G, 2, rng)
    ut = _system_time_derivative(u, p)
    assert np.abs(system_to_kg(ut).values - recover_time_derivative(u).values).max() < 1e-12
    wtt = recover_time_derivative(ut)
    assert np.abs(wtt.values - kg_rhs(system_to_kg(u), p).values).max() < 1e-10


def test_nonlinearities_along_b():
    p = make_params(1.0, 1, mu1=3.0)
    u = random_schwartz_field(G, 2, np.random.default_rng(5))
    for term in (nonlinearity_L(u, p), nonlinearity_N(u, p)):
        assert np.abs(term.values[0] + term.values[1]).max() < 1e-14
    assert np.abs(nonlinearity_N(u, p.with_couplings(mu2=0.0)).values).max() == 0
    assert np.abs(nonlinearity_L(u, p.with_couplings(mu1=1.0)).values).max() == 0


def test_kg_rhs_gaussian():
    x = G.coords()[0]
    p = make_params(1.0, 1, mu1=2.0, mu2=0.0)
    w = Field(G, np.exp(-x**2 / 2))
    expect = (x**2 - 1) * np.exp(-x**2 / 2) - 2.0 * np.exp(-x**2 / 2)
    assert np.abs(kg_rhs(w, p).values[0] - expect).max() < 1e-12


def test_dirac_group_solves_free_dirac_equation():
    # i psi_t = -i sigma1 psi_x + sigma3 psi, checked by a centred difference in t
    A = construct_algebra(1)
    psi = random_schwartz_field(G, 2, np.random.default_rng(9))
    t, h = 0.3, 1e-4
    dt = (dirac_group(psi, t + h, A).values - dirac_group(psi, t - h, A).values) / (2 * h)
    now = dirac_group(psi, t, A)
    dx = spectral_derivative(now, (1,)).values
    H = -1j * np.einsum("ij,j...->i...", A.gammas[0], dx) + np.einsum("ij,j...->i...", A.eta, now.values)
    assert np.abs(1j * dt - H).max() < 1e-6


def test_dirac_group_mismatch():
    with pytest.raises(AlgebraMismatch):
        dirac_group(Field.zeros(G, 4), 0.1, construct_algebra(1))
    with pytest.raises(AlgebraMismatch):
        dirac_group(Field.zeros(G, 4), 0.1, construct_algebra(3))


def test_dirac_nonlinearity_pointwise():
    p = ParamSet(alpha=2.0, dim=1, k=1, m=3, n=2, lam=0.5)
    psi = Field(G, np.stack([np.full(G.points, 1.0), np.full(G.points, 1j)]))
    out = dirac_nonlinearity(psi, p).values
    assert np.allclose(out, 0.5 * 2.0 * psi.values)


def test_dealias_mask_keeps_two_thirds():
    assert dealias_mask(G).sum() == 2 * (G.points // 3) + 1
