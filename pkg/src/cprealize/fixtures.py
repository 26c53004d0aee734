"""Generators for the worked qubit, two-qubit, direct-sum, cone and tridiagonal examples.

Conventions shared by all generators:

* the alphabet is ``+ - x y z t``;
* ``P+`` and ``P-`` are the spectral projectors of ``sigma_z``;
* rotations are ``U_j = exp(+i theta sigma_j / 2)``;
* the spin flip is ``Phi(Y) = sigma_y Y^T sigma_y``;
* on ``C^2 (+) C^2`` the block index is the leading tensor factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import block_diag

from .process_core import Alphabet, QuasiRealization
from .quantum_ops import (CPRealization, QuantumInstrument, SuperOperator, coords, expm_hermitian,
                          stationary_state, unitary_channel)
from .quotient import Subspace
from .sdr_cones import MappingConeSpec, SDRCone, subspace_from_matrices

ALPHABET = Alphabet(("+", "-", "x", "y", "z", "t"))

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]])
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
PAULI = (I2, SIGMA_X, SIGMA_Y, SIGMA_Z)
PROJ = {+1: (I2 + SIGMA_Z) / 2, -1: (I2 - SIGMA_Z) / 2}
SWAP = np.eye(4)[[0, 2, 1, 3]].astype(complex)


@dataclass(frozen=True)
class FixtureParams:
    gamma: float = 0.5
    theta: float = 1.0
    m: int = 4
    permutation: tuple = (0, 2, 1)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        object.__setattr__(self, "permutation", tuple(int(p) for p in self.permutation))

    def with_(self, **kw) -> "FixtureParams":
        return replace(self, **kw)


def _params(params, **kw) -> FixtureParams:
    params = params or FixtureParams()
    return params.with_(**kw) if kw else params


def spin_flip(Y: np.ndarray) -> np.ndarray:
    return SIGMA_Y @ np.asarray(Y).T @ SIGMA_Y


def rotation(j: int, theta: float) -> np.ndarray:
    return expm_hermitian(PAULI[j], 1j * theta / 2)


# Qubit level ------------------------------------------------------------------

def example1_quasi(params: FixtureParams | None = None, **kw) -> QuasiRealization:
    """Four-dimensional quasi-realization in Pauli coordinates."""
    p = _params(params, **kw)
    g, c, s = p.gamma, np.cos(p.theta), np.sin(p.theta)
    half = np.zeros((4, 4))
    half[np.ix_([0, 3], [0, 3])] = 0.5
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    Dp = g / 2 * half
    Dm = g / 2 * flip @ half @ flip
    Dx = g / 6 * np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, c, s], [0, 0, -s, c]])
    Dy = g / 6 * np.array([[1, 0, 0, 0], [0, c, 0, -s], [0, 0, 1, 0], [0, s, 0, c]])
    Dz = g / 6 * np.array([[1, 0, 0, 0], [0, c, s, 0], [0, -s, c, 0], [0, 0, 0, 1]])
    Dt = (1 - g) * np.diag([1.0, -1.0, -1.0, -1.0])
    e0 = np.array([1.0, 0, 0, 0])
    return QuasiRealization(ALPHABET, e0, e0, (Dp, Dm, Dx, Dy, Dz, Dt))


def _qubit_maps(g: float, theta: float) -> list:
    maps = [unitary_channel(PROJ[q], g / 2) for q in (+1, -1)]
    maps += [unitary_channel(rotation(j, theta), g / 6) for j in (1, 2, 3)]
    maps.append(SuperOperator.from_function(2, lambda X: (1 - g) * spin_flip(X)))
    return maps


def example2_qubit(params: FixtureParams | None = None, **kw) -> CPRealization:
    """Qubit instrument with ``rho = 1/2``; the flip map ``t`` is not CP for ``gamma < 1``."""
    p = _params(params, **kw)
    return CPRealization(QuantumInstrument(ALPHABET, _qubit_maps(p.gamma, p.theta)), I2 / 2, I2)


def example2_isomorphism() -> np.ndarray:
    """Map from orthonormal Herm(2) coordinates to Pauli coordinates (``sigma_mu -> e_mu``)."""
    return np.eye(4) / np.sqrt(2)


def example2_spec() -> MappingConeSpec:
    """Full Herm(2) on both sides with ``L(sigma_mu) = e_mu``."""
    full = Subspace(4, np.eye(4))
    return MappingConeSpec(2, full, full, example2_isomorphism())


def example3_cone() -> SDRCone:
    """The Lorentz cone ``x0 >= |x|`` as ``L(Herm(2)+)`` with ``L(sigma_mu) = e_mu``."""
    return SDRCone(2, Subspace(4, np.eye(4)), example2_isomorphism())


# Two qubits -------------------------------------------------------------------

def _two_qubit_maps(g: float, theta: float) -> list:
    maps = []
    for q in (+1, -1):
        detector = np.kron(PROJ[q], PROJ[-q])
        target = np.kron(PROJ[q], I2)
        maps.append(SuperOperator.from_function(
            4, lambda X, A=detector, B=target: g / 2 * np.trace(A @ X) * B))
    for j in (1, 2, 3):
        generator = np.kron(PAULI[j], I2) + np.kron(I2, PAULI[j])
        maps.append(unitary_channel(expm_hermitian(generator, 1j * theta / 2), g / 6))
    maps.append(unitary_channel(SWAP, 1 - g))
    return maps


def two_qubit_quotient_basis():
    """``(omega_mu, k_i)``: ``1``, ``(sA - sB)/2`` and the kernel directions ``(sA + sB)/2``."""
    omegas = [np.eye(4, dtype=complex)]
    omegas += [(np.kron(s, I2) - np.kron(I2, s)) / 2 for s in PAULI[1:]]
    kernel = [(np.kron(s, I2) + np.kron(I2, s)) / 2 for s in PAULI[1:]]
    return omegas, kernel


def two_qubit_dual_basis() -> list:
    """The ten spanning operators of the observable side, as listed for the two-qubit example."""
    mats = [np.kron(s, s) for s in PAULI]
    mats += [np.kron(s, I2) - np.kron(I2, s) for s in PAULI[1:]]
    for i in range(1, 4):
        for j in range(i + 1, 4):
            mats.append(np.kron(PAULI[i], PAULI[j]) + np.kron(PAULI[j], PAULI[i]))
    return mats


@dataclass(frozen=True)
class TwoQubitFixture:
    realization: CPRealization
    L: np.ndarray                   # 4 x 16 on Herm(4) coordinates, zero on W^perp
    spec: MappingConeSpec
    omegas: list = field(repr=False)
    kernel: list = field(repr=False)


def example4_two_qubits(params: FixtureParams | None = None, **kw) -> TwoQubitFixture:
    p = _params(params, **kw)
    maps = _two_qubit_maps(p.gamma, p.theta)
    instrument = QuantumInstrument(ALPHABET, maps)
    total = instrument.total()
    rho = stationary_state(SuperOperator(4, total.matrix.T))
    omegas, kernel = two_qubit_quotient_basis()
    Omega = coords(np.array(omegas + kernel)).T
    targets = np.hstack([np.eye(4), np.zeros((4, 3))])
    L = targets @ np.linalg.pinv(Omega)
    W = Subspace.span(Omega)
    spec = MappingConeSpec(4, W, subspace_from_matrices(two_qubit_dual_basis()), L @ W.basis)
    return TwoQubitFixture(CPRealization(instrument, rho, np.eye(4)), L, spec, omegas, kernel)


# Direct sum -------------------------------------------------------------------

def _direct_sum_maps(g: float, theta: float, alternative: bool) -> list:
    Z2 = np.zeros((2, 2))
    maps = []
    for q in (+1, -1):
        if alternative:
            maps.append(unitary_channel(block_diag(PROJ[q], Z2), g / 2)
                        + unitary_channel(block_diag(Z2, PROJ[-q]), g / 2))
        else:
            maps.append(unitary_channel(block_diag(PROJ[q], PROJ[-q]), g / 2))
    for j in (1, 2, 3):
        U = rotation(j, theta)
        if alternative:
            maps.append(unitary_channel(block_diag(U, Z2), g / 6) + unitary_channel(block_diag(Z2, U), g / 6))
        else:
            maps.append(unitary_channel(block_diag(U, U), g / 6))
    if alternative:
        def moved(X):
            out = np.zeros((4, 4), complex)
            out[2:, 2:] = X[:2, :2]
            out[:2, :2] = X[2:, 2:]
            return (1 - g) * out
        maps.append(SuperOperator.from_function(4, moved))
    else:
        maps.append(unitary_channel(np.kron(SIGMA_X, I2), 1 - g))
    return maps


@dataclass(frozen=True)
class DirectSumFixture:
    realization: CPRealization
    alternative: CPRealization
    L: np.ndarray                   # 4 x 16: Y (+) Phi(Y) -> Pauli coordinates of Y
    W: Subspace


def direct_sum_subspace() -> tuple[Subspace, np.ndarray]:
    """``W = {Y (+) Phi(Y)}`` and the identification with the Pauli coordinates of ``Y``."""
    mats = [block_diag(s, spin_flip(s)) for s in PAULI]
    G = coords(np.array(mats)).T
    W = Subspace.span(G)
    return W, np.eye(4) @ np.linalg.pinv(G)


def example5_direct_sum(params: FixtureParams | None = None, **kw) -> DirectSumFixture:
    p = _params(params, **kw)
    W, L = direct_sum_subspace()
    rho = np.eye(4) / 4
    make = lambda alt: CPRealization(QuantumInstrument(ALPHABET, _direct_sum_maps(p.gamma, p.theta, alt)),
                                     rho, np.eye(4))
    return DirectSumFixture(make(False), make(True), L, W)


# Cones ------------------------------------------------------------------------

def example7_cones() -> tuple[SDRCone, SDRCone]:
    """Two representations of the qubit PSD cone in orthonormal Herm(2) coordinates.

    The first is ``Herm(2)+`` itself; the second is ``{Y (+) Phi(Y)}+`` read off
    through ``Y``, whose level-2 extension adds a partial-transpose constraint.
    """
    full = SDRCone(2, Subspace(4, np.eye(4)), np.eye(4))
    mats = [block_diag(B, spin_flip(B)) for B in _orthonormal_qubit_basis()]
    G = coords(np.array(mats)).T
    W = Subspace.span(G)
    return full, SDRCone(4, W, np.linalg.pinv(G) @ W.basis)


def _orthonormal_qubit_basis():
    from .quantum_ops import hermitian_basis

    return hermitian_basis(2).elements()


def bell_projector() -> np.ndarray:
    v = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return np.outer(v, v.conj())


# Tridiagonal ------------------------------------------------------------------

def _unit(m, j, k):
    E = np.zeros((m, m), complex)
    E[j, k] = 1
    return E


@dataclass(frozen=True)
class TridiagonalFixture:
    spec: MappingConeSpec
    D: np.ndarray
    generator_map: SuperOperator
    permutation: tuple
    m: int


def tridiagonal_spec(m: int) -> MappingConeSpec:
    """Tridiagonal Hermitian ``W`` with the traceless diagonal as kernel (``W~ = K^perp``)."""
    W_mats = [_unit(m, j, j) for j in range(m)]
    for j in range(m - 1):
        W_mats.append(_unit(m, j, j + 1) + _unit(m, j + 1, j))
        W_mats.append(1j * (_unit(m, j, j + 1) - _unit(m, j + 1, j)))
    W = subspace_from_matrices(W_mats)
    K = subspace_from_matrices([_unit(m, j, j) - _unit(m, j + 1, j + 1) for j in range(m - 1)])
    return MappingConeSpec(m, W, K.complement())


def example8_tridiagonal(m: int = 4, permutation=None) -> TridiagonalFixture:
    """``D^pi`` permuting the off-diagonal generators ``|j><j+1|`` of the tridiagonal quotient.

    ``permutation`` acts on the ``m - 1`` generator indices (zero-based).
    """
    permutation = tuple(range(m - 1)) if permutation is None else tuple(int(p) for p in permutation)
    if sorted(permutation) != list(range(m - 1)):
        raise ValueError(f"permutation must rearrange 0..{m - 2}, got {permutation}")
    spec = tridiagonal_spec(m)

    def generator_action(X):
        out = np.trace(X).real * np.eye(m, dtype=complex) / m
        for j, pj in enumerate(permutation):
            out += X[j, j + 1] * _unit(m, pj, pj + 1) + X[j + 1, j] * _unit(m, pj + 1, pj)
        return out

    G = SuperOperator.from_function(m, generator_action)
    D = spec.cone.L_ambient @ G.matrix @ spec.cone.lift
    return TridiagonalFixture(spec, D, G, permutation, m)


def reversal(m: int) -> tuple:
    return tuple(range(m - 2, -1, -1))


def all_fixture_realizations(params: FixtureParams | None = None):
    """The four process representations as quasi-realizations, keyed by name."""
    from .quantum_ops import as_quasi_realization

    p = _params(params)
    ex5 = example5_direct_sum(p)
    return {
        "example1": example1_quasi(p),
        "example2": as_quasi_realization(example2_qubit(p)),
        "example4": as_quasi_realization(example4_two_qubits(p).realization),
        "example5": as_quasi_realization(ex5.realization),
        "example5_alternative": as_quasi_realization(ex5.alternative),
    }
