import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cprealize.fixtures import ALPHABET, SWAP, example2_qubit, example4_two_qubits
from cprealize.quantum_ops import (CPRealization, NonUniqueStationaryWarning, QuantumInstrument, SuperOperator,
                                   adjoint, as_quasi_realization, choi, compose, coords,
                                   cp_realization_from_dict, cp_realization_to_dict, from_choi, from_coords,
                                   hermitian_basis, is_completely_positive, is_positive_sampled,
                                   matrix_from_json, matrix_to_json, partial_trace, partial_transpose,
                                   random_density_matrix, random_unitary, rank_one_map, stationary_state,
                                   unitary_channel)
from cprealize.process_core import probability_array

TRANSPOSE = SuperOperator.from_function(2, lambda X: X.T)


def random_hermitian(n, rng):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return G + G.conj().T


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_basis_is_orthonormal(n):
    E = hermitian_basis(n).elements()
    gram = np.einsum("aij,bji->ab", E, E)
    np.testing.assert_allclose(gram, np.eye(n * n), atol=1e-14)
    np.testing.assert_allclose(E[0], np.eye(n) / np.sqrt(n), atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_coordinate_round_trip_and_trace_pairing(n, seed):
    rng = np.random.default_rng(seed)
    X, Y = random_hermitian(n, rng), random_hermitian(n, rng)
    np.testing.assert_allclose(from_coords(coords(X)), X, atol=1e-12)
    assert coords(X) @ coords(Y) == pytest.approx(np.trace(X @ Y).real, abs=1e-9)


def test_choi_of_transpose_is_swap():
    np.testing.assert_allclose(choi(TRANSPOSE), SWAP, atol=1e-14)
    ok, lam = is_completely_positive(TRANSPOSE)
    assert not ok and lam == pytest.approx(-1.0)


def test_choi_of_identity_is_unnormalized_bell_projector():
    v = np.eye(2).reshape(-1)
    np.testing.assert_allclose(choi(SuperOperator.identity(2)), np.outer(v, v), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_choi_round_trip_and_kraus_cp(seed):
    rng = np.random.default_rng(seed)
    K = [rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) for _ in range(2)]
    F = SuperOperator.from_kraus(K)
    np.testing.assert_allclose(from_choi(choi(F)).matrix, F.matrix, atol=1e-10)
    assert is_completely_positive(F)[0]
    X = random_hermitian(3, rng)
    np.testing.assert_allclose(F(X), sum(k @ X @ k.conj().T for k in K), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_adjoint_matches_trace_pairing(seed):
    rng = np.random.default_rng(seed)
    F = SuperOperator.from_kraus([random_unitary(2, rng)], 0.7) + rank_one_map(np.eye(2), random_hermitian(2, rng))
    X, Y = random_hermitian(2, rng), random_hermitian(2, rng)
    assert np.trace(Y @ F(X)).real == pytest.approx(np.trace(adjoint(F)(Y) @ X).real, abs=1e-10)


def test_compose_order():
    U = random_unitary(2, np.random.default_rng(3))
    F, G = TRANSPOSE, unitary_channel(U)
    X = random_hermitian(2, np.random.default_rng(4))
    np.testing.assert_allclose(compose(F, G)(X), (U @ X @ U.conj().T).T, atol=1e-12)


def test_transpose_is_positive_but_not_cp():
    ok, worst = is_positive_sampled(TRANSPOSE, samples=50)
    assert ok and worst >= -1e-9
    ok, worst = is_positive_sampled(SuperOperator.identity(2) * -1.0, samples=10)
    assert not ok


def test_partial_operations():
    rng = np.random.default_rng(0)
    A, B = random_density_matrix(2, rng), random_density_matrix(3, rng)
    AB = np.kron(A, B)
    np.testing.assert_allclose(partial_transpose(AB, (2, 3), 0), np.kron(A.T, B), atol=1e-14)
    np.testing.assert_allclose(partial_transpose(AB, (2, 3), 1), np.kron(A, B.T), atol=1e-14)
    np.testing.assert_allclose(partial_trace(AB, (2, 3), 1), A, atol=1e-14)
    np.testing.assert_allclose(partial_trace(AB, (2, 3), 0), B, atol=1e-14)


def test_stationary_state():
    total = example4_two_qubits().realization.instrument.total()
    rho = stationary_state(adjoint(total))
    np.testing.assert_allclose(adjoint(total)(rho), rho, atol=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(rho)[0] > 0
    with pytest.warns(NonUniqueStationaryWarning):
        stationary_state(SuperOperator.identity(2))


def test_not_hermitian_preserving_rejected():
    with pytest.raises(ValueError):
        SuperOperator.from_function(2, lambda X: 1j * X)
    with pytest.raises(ValueError):
        SuperOperator(2, np.eye(3))


def test_cp_realization_probabilities_match_quasi_form():
    Q = example2_qubit(gamma=0.5, theta=1.0)
    R = as_quasi_realization(Q)
    arr = probability_array(R, 2)
    assert Q.probability("+x") == pytest.approx(arr[0, 2], abs=1e-15)
    assert Q.probability("tz") == pytest.approx(arr[5, 4], abs=1e-15)


def test_matrix_json_encoding():
    M = np.array([[1, 2j], [-2j, 3]])
    data = matrix_to_json(M)
    assert set(data) == {"re", "im"}
    np.testing.assert_array_equal(matrix_from_json(data), M)
    assert matrix_to_json(np.eye(2)) == [[1.0, 0.0], [0.0, 1.0]]


def test_cp_realization_dict_round_trip_and_alternative_encodings():
    Q = example2_qubit()
    back = cp_realization_from_dict(cp_realization_to_dict(Q))
    for F, G in zip(Q.instrument.maps, back.instrument.maps):
        np.testing.assert_array_equal(F.matrix, G.matrix)
    P = np.diag([1.0, 0.0])
    data = {"alphabet": ["a", "b"], "n": 2, "rho": [[0.5, 0], [0, 0.5]],
            "maps": {"a": {"kraus": [P.tolist()]}, "b": {"choi": choi(unitary_channel(np.diag([0, 1.0]))).real.tolist()}}}
    R = cp_realization_from_dict(data)
    assert R.probability("a") == pytest.approx(0.5)
    assert R.probability("ab") == pytest.approx(0.0)


def test_instrument_requires_one_map_per_symbol():
    with pytest.raises(ValueError):
        QuantumInstrument(ALPHABET, [SuperOperator.identity(2)])
    with pytest.raises(ValueError):
        CPRealization(QuantumInstrument(ALPHABET, [SuperOperator.identity(2)] * 6), np.eye(3))
