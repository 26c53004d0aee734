"""Block constructions with planted spurious subspaces for reduction tests."""
import numpy as np

from cprealize.quantum_ops import CPRealization, SuperOperator, expm_hermitian
from cprealize.fixtures import SIGMA_X, SIGMA_Z, example4_two_qubits


def extend_with_block(base: CPRealization, junk_maps, rho_junk, identity_junk):
    """``E'(X) = E(P X P) (+) J(Q X Q)`` on ``C^n (+) C^k`` with block-diagonal ``rho`` and ``identity``."""
    n = base.n
    k = junk_maps[0].n
    maps = []
    for F, J in zip(base.instrument.maps, junk_maps):
        def fn(X, F=F, J=J):
            out = np.zeros((n + k, n + k), complex)
            out[:n, :n] = F(X[:n, :n])
            out[n:, n:] = J(X[n:, n:])
            return out
        maps.append(SuperOperator.from_function(n + k, fn))
    rho = np.zeros((n + k, n + k), complex)
    rho[:n, :n], rho[n:, n:] = base.rho, rho_junk
    identity = np.zeros((n + k, n + k), complex)
    identity[:n, :n], identity[n:, n:] = base.identity, identity_junk
    return maps, rho, identity


def planted(kind: str, k: int = 2, params=None):
    """``(maps, rho, identity, base, planted_dim)`` for a named junk construction."""
    base = example4_two_qubits(params).realization
    m = len(base.instrument.maps)
    zero = np.zeros((k, k), complex)
    one = np.eye(k, dtype=complex)
    if kind == "growing":
        junk = [SuperOperator.identity(k) * (2.0 / m)] * m
        return (*extend_with_block(base, junk, zero, one), base, k)
    if kind == "rotating":
        if k != 2:
            raise ValueError("rotating block is a qubit")
        V = expm_hermitian(SIGMA_Z, 0.5j * np.sqrt(2))
        junk = [SuperOperator.from_kraus([V], 1.5 / m)] * m
        return (*extend_with_block(base, junk, zero, one + 0.5 * SIGMA_X), base, k)
    if kind == "null":
        junk = [SuperOperator.zero(k)] * m
        return (*extend_with_block(base, junk, zero, one), base, k)
    if kind == "dual":
        junk = [SuperOperator.identity(k) * (2.0 / m)] * m
        return (*extend_with_block(base, junk, one / k, zero), base, k)
    if kind == "decaying":
        junk = [SuperOperator.identity(k) * (0.5 / m)] * m
        return (*extend_with_block(base, junk, zero, zero), base, k)
    raise ValueError(kind)
