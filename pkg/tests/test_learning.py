import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cprealize.fixtures import ALPHABET, example1_quasi, example4_two_qubits
from cprealize.learning import (InvariantViolationError, MissingDataError, RankAmbiguityWarning, WordTable,
                                empirical_table, exact_table, hankel_matrix, load_table, load_trajectories,
                                reconstruction_report, sample_array, sample_trajectories, save_table,
                                save_trajectories, spectral_realization)
from cprealize.process_core import Alphabet, StructuralError, probability_array
from cprealize.quantum_ops import CPRealization, QuantumInstrument, SuperOperator
from cprealize.quotient import equivalence_isomorphism, order


@pytest.fixture(scope="module")
def two_qubit():
    return example4_two_qubits().realization


def test_exact_table_and_hankel_layout():
    R = example1_quasi()
    T = exact_table(R, 3)
    assert len(T.entries) == 1 + 6 + 36 + 216
    H = hankel_matrix(T, 1, 1)
    assert H.shape == (7, 7)
    assert H[0, 0] == 1.0
    assert H[1, 3] == pytest.approx(T[(0, 2)])       # row "+", column "x"
    Hx = hankel_matrix(T, 1, 1, infix=(5,))
    assert Hx[2, 0] == pytest.approx(T[(1, 5)])


@pytest.mark.parametrize("gamma,theta,dim", [(0.5, 1.0, 4), (1.0, 1.0, 4), (0.5, 0.0, 2)])
def test_reconstruction_from_exact_table_is_equivalent(gamma, theta, dim):
    R = example1_quasi(gamma=gamma, theta=theta)
    S = spectral_realization(exact_table(R, 7))
    res = equivalence_isomorphism(R, S)
    assert res.found and max(res.residuals.values()) < 1e-7
    assert S.dim == dim


def test_missing_entries_are_reported():
    T = exact_table(example1_quasi(), 2)
    with pytest.raises(MissingDataError):
        spectral_realization(T, 1, 1)
    with pytest.raises(MissingDataError):
        hankel_matrix(T, 2, 1)
    with pytest.raises(MissingDataError):
        T[(0, 0, 0)]


def test_weak_spectral_gap_warns():
    rng = np.random.default_rng(0)
    T = exact_table(example1_quasi(), 3)
    noisy = WordTable(T.alphabet, {w: p + 1e-6 * rng.standard_normal() if w else p for w, p in T.entries.items()}, 3)
    with pytest.warns(RankAmbiguityWarning):
        spectral_realization(noisy, 1, 1, tol=1e-6)


def test_table_validation():
    T = WordTable(Alphabet(("a",)), {(): 1.0, (0,): 1.5}, 1)
    with pytest.raises(StructuralError):
        T.validate()
    exact_table(example1_quasi(), 3).validate()


def test_standard_errors():
    T = WordTable(Alphabet(("a", "b")), {(): 1.0, (0,): 0.25, (1,): 0.75}, 1, totals={1: 10_000})
    assert T.standard_error((0,)) == pytest.approx(np.sqrt(0.25 * 0.75 / 10_000))
    T.entries[(0,)] = 0.0
    assert T.standard_error((0,)) == pytest.approx(0.5 / 100)
    assert exact_table(example1_quasi(), 1).standard_error((0,)) == 0.0


def test_table_round_trip(tmp_path):
    T = exact_table(example1_quasi(), 3)
    path = tmp_path / "t.json"
    save_table(T, path)
    back = load_table(path)
    assert back.entries == T.entries and back.max_length == 3


def test_sampling_is_reproducible_and_chunk_seeded(two_qubit):
    a = sample_array(two_qubit, 8, 300, seed=11)
    b = sample_array(two_qubit, 8, 300, seed=11)
    np.testing.assert_array_equal(a, b)
    c = sample_array(two_qubit, 8, 300, seed=12)
    assert not np.array_equal(a, c)
    assert a.shape == (300, 8) and a.min() >= 0 and a.max() < 6
    assert sample_trajectories(two_qubit, 3, 2, seed=11) == [tuple(r) for r in sample_array(two_qubit, 3, 2, 11).tolist()]


def test_forbidden_words_never_appear(two_qubit):
    arr = sample_array(two_qubit, 12, 2000, seed=3)
    E = empirical_table(arr, 2, ALPHABET)
    # + is never followed by - and vice versa
    assert E[(0, 1)] == 0.0 and E[(1, 0)] == 0.0


def test_empirical_frequencies_converge(two_qubit):
    arr = sample_array(two_qubit, 20, 20_000, seed=0)
    E = empirical_table(arr, 2, ALPHABET)
    R = example1_quasi()
    for l in (1, 2):
        exact = probability_array(R, l).reshape(-1)
        for w, p in zip(ALPHABET.words(l), exact):
            se = E.standard_error(w)
            assert abs(E[w] - p) <= 5 * se


def test_empirical_table_windows():
    E = empirical_table([(0, 1, 0), (1, 1)], 2, Alphabet(("a", "b")))
    assert E.totals == {0: 2, 1: 5, 2: 3}
    assert E[(1,)] == pytest.approx(3 / 5)
    assert E[(1, 1)] == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        empirical_table([(0,)], 2, Alphabet(("a", "b")))
    with pytest.raises(ValueError):
        empirical_table([(0,)], 1)


def test_negative_outcome_probability_is_an_invariant_violation():
    bad = SuperOperator.identity(2) * -1.0
    Q = CPRealization(QuantumInstrument(Alphabet(("a", "b")), [bad, SuperOperator.identity(2) * 2.0]), np.eye(2) / 2)
    with pytest.raises(InvariantViolationError):
        sample_array(Q, 2, 5)


def test_trajectory_file_round_trip(tmp_path, two_qubit):
    trajs = sample_trajectories(two_qubit, 6, 4, seed=1)
    path = tmp_path / "traj.txt"
    save_trajectories(trajs, ALPHABET, path)
    assert load_trajectories(path, ALPHABET) == trajs


@settings(max_examples=10, deadline=None)
@given(gamma=st.floats(0.2, 0.9), theta=st.floats(0.3, 2.5))
def test_exact_reconstruction_reproduces_probabilities(gamma, theta):
    R = example1_quasi(gamma=gamma, theta=theta)
    T = exact_table(R, 5)
    S = spectral_realization(T, 2, 2, rank_hint=order(R))
    assert reconstruction_report(S, T, 5)["max_deviation"] < 1e-9
