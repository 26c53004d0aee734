import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cprealize.fixtures import ALPHABET, example1_quasi
from cprealize.process_core import (Alphabet, QuasiRealization, StructuralError, batch_probabilities,
                                    check_realization, load_realization, probability_array,
                                    realization_from_dict, realization_to_dict, save_realization,
                                    scan_negativity, stationarity_residual, word_probability)

SX = np.array([[0, 1], [1, 0]], complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1, -1]).astype(complex)


def qubit_oracle(word, gamma, theta):
    """Heisenberg-picture qubit evaluation written directly with 2x2 matrices."""
    def rot(s):
        return np.cos(theta / 2) * np.eye(2) + 1j * np.sin(theta / 2) * s

    ops = {
        "+": lambda X: gamma / 2 * np.diag([1, 0]) @ X @ np.diag([1, 0]),
        "-": lambda X: gamma / 2 * np.diag([0, 1]) @ X @ np.diag([0, 1]),
        "x": lambda X: gamma / 6 * rot(SX) @ X @ rot(SX).conj().T,
        "y": lambda X: gamma / 6 * rot(SY) @ X @ rot(SY).conj().T,
        "z": lambda X: gamma / 6 * rot(SZ) @ X @ rot(SZ).conj().T,
        "t": lambda X: (1 - gamma) * SY @ X.T @ SY,
    }
    X = np.eye(2, dtype=complex)
    for a in reversed(word):
        X = ops[a](X)
    return float(np.real(np.trace(X)) / 2)


def test_single_symbol_marginals():
    R = example1_quasi(gamma=0.5, theta=1.0)
    assert word_probability(R, "+") == pytest.approx(0.125)
    assert word_probability(R, "x") == pytest.approx(0.5 / 6)
    assert word_probability(R, "t") == pytest.approx(0.5)


def test_frozen_two_letter_values():
    R = example1_quasi(gamma=0.5, theta=1.0)
    assert word_probability(R, "+x") == pytest.approx(0.010416666666666666, abs=1e-15)
    assert word_probability(R, "+-") == pytest.approx(0.0, abs=1e-15)
    assert word_probability(R, "tt") == pytest.approx(0.25)


@pytest.mark.parametrize("gamma,theta", [(1.0, 1.0), (0.5, 1.0), (0.3, 2.2)])
def test_matches_direct_qubit_evaluation(gamma, theta):
    R = example1_quasi(gamma=gamma, theta=theta)
    rng = np.random.default_rng(7)
    for _ in range(40):
        word = "".join(rng.choice(list("+-xyzt"), size=rng.integers(0, 6)))
        assert word_probability(R, word) == pytest.approx(qubit_oracle(word, gamma, theta), abs=1e-13)


def test_probability_array_agrees_with_single_words():
    R = example1_quasi()
    arr = probability_array(R, 3)
    for w in [(0, 2, 5), (5, 5, 1), (3, 4, 2)]:
        assert arr[w] == pytest.approx(word_probability(R, w), abs=1e-15)
    assert batch_probabilities(R, 2)[(2, 3)] == pytest.approx(arr.sum(axis=2)[2, 3])


@settings(max_examples=30, deadline=None)
@given(gamma=st.floats(0, 1), theta=st.floats(-3, 3), length=st.integers(0, 5))
def test_normalization_and_stationarity(gamma, theta, length):
    R = example1_quasi(gamma=gamma, theta=theta)
    assert probability_array(R, length).sum() == pytest.approx(1.0, abs=1e-12)
    assert stationarity_residual(R, min(length, 4)) < 1e-12
    assert check_realization(R).passed


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_similarity_preserves_probabilities(seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    R = example1_quasi()
    S = R.transformed(T)
    for l in range(4):
        np.testing.assert_allclose(probability_array(S, l), probability_array(R, l), atol=1e-10)


def test_negativity_scan_finds_false_certificate():
    bad = QuasiRealization(Alphabet(("a", "b")), [1, 0], [1, 0],
                           (np.diag([1.1, 1.0]), np.diag([-0.1, 0.0])))
    found = scan_negativity(bad, 2)
    assert found[0] == ((1,), pytest.approx(-0.1))
    assert all(p < 0 for _, p in found)
    assert scan_negativity(example1_quasi(), 4) == []


def test_alphabet_parsing():
    assert ALPHABET.parse("+xt") == (0, 2, 5)
    assert ALPHABET.format((1, 3)) == "-y"
    multi = Alphabet(("up", "down"))
    assert multi.parse("up down up") == (0, 1, 0)
    with pytest.raises(StructuralError):
        ALPHABET.parse("q")
    with pytest.raises(StructuralError):
        Alphabet(("a", "a"))
    assert len(ALPHABET.words_up_to(2)) == 1 + 6 + 36


def test_structural_validation():
    with pytest.raises(StructuralError):
        QuasiRealization(Alphabet(("a",)), [1, 0], [1], (np.eye(2),))
    with pytest.raises(StructuralError):
        QuasiRealization(Alphabet(("a", "b")), [1], [1], (np.eye(1),))
    with pytest.raises(StructuralError):
        QuasiRealization(Alphabet(("a",)), [np.nan], [1], (np.eye(1),))
    with pytest.raises(StructuralError):
        realization_from_dict({"alphabet": ["a"], "pi": [1], "tau": [1], "maps": {}})
    with pytest.raises(StructuralError):
        realization_from_dict({"alphabet": ["a"], "pi": [1], "tau": [1], "maps": {"a": [[1]]}, "dim": 2})


def test_arrays_are_read_only():
    R = example1_quasi()
    with pytest.raises(ValueError):
        R.maps[0][0, 0] = 3.0


def test_json_round_trip(tmp_path):
    R = example1_quasi(gamma=0.25, theta=0.7)
    path = tmp_path / "r.json"
    save_realization(R, path)
    json.loads(path.read_text())
    S = load_realization(path)
    assert S.alphabet == R.alphabet
    for l in range(4):
        np.testing.assert_array_equal(probability_array(S, l), probability_array(R, l))
    assert realization_to_dict(S) == realization_to_dict(R)
