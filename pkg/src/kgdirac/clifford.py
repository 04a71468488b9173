"""Hermitian gamma matrices for the free Dirac operator in any dimension."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SIGMA1",
    "SIGMA2",
    "SIGMA3",
    "DiracAlgebra",
    "AlgebraReport",
    "spinor_size",
    "construct_algebra",
    "verify_algebra",
    "dirac_symbol",
    "dirac_symbol_field",
]

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = (SIGMA1, SIGMA2, SIGMA3)


def spinor_size(dim: int) -> int:
    """2 ** floor((N + 1) / 2)."""
    return 2 ** ((dim + 1) // 2)


@dataclass(frozen=True, eq=False)
class DiracAlgebra:
    dim: int
    gammas: tuple[np.ndarray, ...]
    eta: np.ndarray

    @property
    def spinor_size(self) -> int:
        return self.eta.shape[0]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def construct_algebra(dim: int) -> DiracAlgebra:
    """Matrices gamma_1..gamma_N, eta with the Dirac anticommutation relations.

    N = 1, 2, 3 use the textbook Pauli / block conventions.  For N >= 4 the
    algebra is obtained from the one in dimension N - 2 by

        gamma_j' = s1 (x) gamma_j   (j <= N-2)
        gamma_{N-1}' = s1 (x) eta
        gamma_N' = s2 (x) I
        eta' = s3 (x) I

    which doubles the spinor size every two dimensions.
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if dim == 1:
        gammas, eta = (SIGMA1,), SIGMA3
    elif dim == 2:
        gammas, eta = (SIGMA1, SIGMA2), SIGMA3
    elif dim == 3:
        zero = np.zeros((2, 2), dtype=complex)
        eye = np.eye(2, dtype=complex)
        gammas = tuple(np.block([[zero, s], [s, zero]]) for s in _PAULI)
        eta = np.block([[eye, zero], [zero, -eye]])
    else:
        base = construct_algebra(dim - 2)
        eye = np.eye(base.spinor_size, dtype=complex)
        gammas = tuple(np.kron(SIGMA1, g) for g in base.gammas)
        gammas += (np.kron(SIGMA1, base.eta), np.kron(SIGMA2, eye))
        eta = np.kron(SIGMA3, eye)
    return DiracAlgebra(dim=dim, gammas=tuple(_freeze(g) for g in gammas), eta=_freeze(eta))


@dataclass(frozen=True)
class AlgebraReport:
    anticommutator: float
    gamma_eta: float
    eta_square: float
    hermiticity: float

    @property
    def max_deviation(self) -> float:
        return max(self.anticommutator, self.gamma_eta, self.eta_square, self.hermiticity)


def verify_algebra(A: DiracAlgebra) -> AlgebraReport:
    """Maximum entrywise defect of each defining identity."""
    eye = np.eye(A.spinor_size)
    anti = 0.0
    for j, gj in enumerate(A.gammas):
        for k, gk in enumerate(A.gammas):
            target = 2.0 * eye if j == k else 0.0
            anti = max(anti, np.abs(gj @ gk + gk @ gj - target).max())
    ge = max((np.abs(g @ A.eta + A.eta @ g).max() for g in A.gammas), default=0.0)
    eta2 = np.abs(A.eta @ A.eta - eye).max()
    herm = max(np.abs(M - M.conj().T).max() for M in (*A.gammas, A.eta))
    return AlgebraReport(float(anti), float(ge), float(eta2), float(herm))


def dirac_symbol(A: DiracAlgebra, xi) -> np.ndarray:
    """H(xi) = sum_k gamma_k xi_k + eta; satisfies H(xi)^2 = <xi>^2 I."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (A.dim,):
        raise ValueError(f"xi must have {A.dim} entries")
    H = A.eta.copy()
    for g, x in zip(A.gammas, xi):
        H = H + x * g
    return H


def dirac_symbol_field(A: DiracAlgebra, xi: tuple[np.ndarray, ...]) -> np.ndarray:
    """H(xi) on a whole frequency lattice, shape (l, l, *lattice)."""
    shape = np.broadcast_shapes(*(x.shape for x in xi))
    ell = A.spinor_size
    H = np.broadcast_to(A.eta.reshape(ell, ell, *([1] * len(shape))), (ell, ell, *shape)).copy()
    for g, x in zip(A.gammas, xi):
        H += g.reshape(ell, ell, *([1] * len(shape))) * x
    return H
