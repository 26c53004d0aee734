"""Quasi-realizations of stationary processes over a finite alphabet.

A quasi-realization ``(pi, {D^(a)}, tau)`` assigns to a word ``u = u1 ... ul``
the value ``p(u) = pi D^(u1) ... D^(ul) tau``.  Words are tuples of symbol
indices; :class:`Alphabet` converts them to and from label strings.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

Word = tuple


class StructuralError(ValueError):
    """Malformed realization data (shapes, alphabet, finiteness)."""


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise StructuralError("alphabet must be non-empty")
        if len(set(symbols)) != len(symbols):
            raise StructuralError("alphabet symbols must be distinct")
        if any(s == "" for s in symbols):
            raise StructuralError("alphabet symbols must be non-empty strings")
        object.__setattr__(self, "symbols", symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[str]:
        return iter(self.symbols)

    def index(self, symbol) -> int:
        if isinstance(symbol, (int, np.integer)):
            if not 0 <= symbol < len(self.symbols):
                raise StructuralError(f"symbol index {symbol} out of range")
            return int(symbol)
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise StructuralError(f"unknown symbol {symbol!r}") from None

    @property
    def separator(self) -> str:
        return "" if all(len(s) == 1 for s in self.symbols) else " "

    def format(self, word: Sequence[int], sep: str | None = None) -> str:
        sep = self.separator if sep is None else sep
        return sep.join(self.symbols[a] for a in word)

    def parse(self, text: str, sep: str | None = None) -> Word:
        sep = self.separator if sep is None else sep
        if text == "":
            return ()
        if sep:
            return tuple(self.index(s) for s in text.split(sep))
        return tuple(self.index(c) for c in text)

    def words(self, length: int) -> Iterator[Word]:
        """All words of a given length in lexicographic order."""
        return itertools.product(range(len(self.symbols)), repeat=length)

    def words_up_to(self, max_length: int) -> list[Word]:
        """Words of length ``<= max_length`` ordered by length, then lexicographically."""
        return [w for l in range(max_length + 1) for w in self.words(l)]


@dataclass(frozen=True)
class QuasiRealization:
    """``(pi, {D^(a)}, tau)`` on ``R^dim``; arrays are stored read-only."""

    alphabet: Alphabet
    pi: np.ndarray
    tau: np.ndarray
    maps: tuple

    def __post_init__(self):
        alphabet = self.alphabet if isinstance(self.alphabet, Alphabet) else Alphabet(tuple(self.alphabet))
        pi = np.array(self.pi, dtype=float).reshape(-1)
        tau = np.array(self.tau, dtype=float).reshape(-1)
        d = pi.size
        if d == 0:
            raise StructuralError("dimension must be positive")
        if tau.size != d:
            raise StructuralError(f"pi has length {d} but tau has length {tau.size}")
        maps = tuple(np.array(D, dtype=float) for D in self.maps)
        if len(maps) != len(alphabet):
            raise StructuralError("one matrix per alphabet symbol is required")
        for label, D in zip(alphabet, maps):
            if D.shape != (d, d):
                raise StructuralError(f"map {label!r} has shape {D.shape}, expected {(d, d)}")
        for arr in (pi, tau, *maps):
            if not np.all(np.isfinite(arr)):
                raise StructuralError("realization entries must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "maps", maps)

    @property
    def dim(self) -> int:
        return self.pi.size

    def map(self, symbol) -> np.ndarray:
        return self.maps[self.alphabet.index(symbol)]

    def total(self) -> np.ndarray:
        return sum(self.maps)

    def stacked(self) -> np.ndarray:
        return np.stack(self.maps)

    def transformed(self, T: np.ndarray) -> "QuasiRealization":
        """Equivalent realization in new coordinates ``x' = T x``."""
        T = np.asarray(T, dtype=float)
        Tinv = np.linalg.inv(T)
        return QuasiRealization(self.alphabet, self.pi @ Tinv, T @ self.tau,
                                tuple(T @ D @ Tinv for D in self.maps))


def word_probability(R: QuasiRealization, word: Sequence) -> float:
    """``pi D^(u1) ... D^(ul) tau``, evaluated right to left."""
    v = R.tau
    for a in reversed(tuple(word)):
        v = R.maps[R.alphabet.index(a)] @ v
    return float(R.pi @ v)


def word_vector(R: QuasiRealization, word: Sequence[int]) -> np.ndarray:
    """``D^(u) tau``."""
    v = R.tau
    for a in reversed(tuple(word)):
        v = R.maps[a] @ v
    return v


def probability_array(R: QuasiRealization, length: int) -> np.ndarray:
    """All ``p(u)`` with ``|u| = length`` as an array indexed ``[u1, ..., ul]``.

    Vectors ``D^(u) tau`` are extended on the left so each prefix product is
    computed once.
    """
    if length < 0:
        raise ValueError("length must be non-negative")
    m = len(R.alphabet)
    stack = R.stacked()
    vectors = R.tau[None, :]
    for _ in range(length):
        vectors = np.einsum("aij,wj->awi", stack, vectors).reshape(-1, R.dim)
    return (vectors @ R.pi).reshape((m,) * length)


def batch_probabilities(R: QuasiRealization, length: int) -> dict:
    """``{word: p(word)}`` for every word of the given length."""
    probs = probability_array(R, length).reshape(-1)
    return dict(zip(R.alphabet.words(length), probs.tolist()))


@dataclass(frozen=True)
class RealizationReport:
    left_residual: float
    right_residual: float
    normalization_residual: float
    map_norms: dict = field(default_factory=dict)
    tol: float = 1e-9

    @property
    def passed(self) -> bool:
        return max(self.left_residual, self.right_residual, self.normalization_residual) <= self.tol

    def to_dict(self) -> dict:
        return {"left_residual": self.left_residual, "right_residual": self.right_residual,
                "normalization_residual": self.normalization_residual,
                "map_norms": self.map_norms, "tol": self.tol, "passed": self.passed}


def check_realization(R: QuasiRealization, tol: float = 1e-9) -> RealizationReport:
    """Relative residuals of ``pi D = pi``, ``D tau = tau`` and ``pi tau = 1``."""
    D = R.total()
    left = np.linalg.norm(R.pi @ D - R.pi) / max(np.linalg.norm(R.pi), 1e-300)
    right = np.linalg.norm(D @ R.tau - R.tau) / max(np.linalg.norm(R.tau), 1e-300)
    norms = {label: float(np.linalg.norm(M, 2)) for label, M in zip(R.alphabet, R.maps)}
    return RealizationReport(float(left), float(right), float(abs(R.pi @ R.tau - 1)), norms, tol)


def scan_negativity(R: QuasiRealization, max_length: int, tol: float = 1e-12) -> list:
    """Words with ``p(u) < -tol`` for ``1 <= |u| <= max_length`` (a finite false-certificate scan)."""
    found = []
    for length in range(1, max_length + 1):
        probs = probability_array(R, length).reshape(-1)
        for idx in np.flatnonzero(probs < -tol):
            found.append((tuple(np.unravel_index(idx, (len(R.alphabet),) * length)), float(probs[idx])))
    return found


def stationarity_residual(R: QuasiRealization, max_length: int) -> float:
    """Largest violation of ``sum_a p(au) = p(u) = sum_a p(ua)`` and ``sum p = 1`` up to ``max_length``."""
    worst = abs(probability_array(R, 0).item() - 1)
    previous = probability_array(R, 0)
    for length in range(1, max_length + 1):
        probs = probability_array(R, length)
        worst = max(worst, abs(probs.sum() - 1),
                    float(np.abs(probs.sum(axis=0) - previous).max()),
                    float(np.abs(probs.sum(axis=-1) - previous).max()))
        previous = probs
    return float(worst)


# JSON ---------------------------------------------------------------------

def realization_to_dict(R: QuasiRealization) -> dict:
    return {
        "alphabet": list(R.alphabet.symbols),
        "dim": R.dim,
        "pi": R.pi.tolist(),
        "tau": R.tau.tolist(),
        "maps": {label: M.tolist() for label, M in zip(R.alphabet, R.maps)},
    }


def realization_from_dict(data: dict) -> QuasiRealization:
    try:
        alphabet = Alphabet(tuple(data["alphabet"]))
        maps = data["maps"]
        missing = [s for s in alphabet if s not in maps]
        if missing:
            raise StructuralError(f"maps missing for symbols {missing}")
        R = QuasiRealization(alphabet, data["pi"], data["tau"], tuple(maps[s] for s in alphabet))
    except KeyError as exc:
        raise StructuralError(f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, StructuralError):
            raise
        raise StructuralError(str(exc)) from None
    if "dim" in data and int(data["dim"]) != R.dim:
        raise StructuralError(f"declared dim {data['dim']} does not match vectors of length {R.dim}")
    return R


def load_realization(path) -> QuasiRealization:
    with open(path) as fh:
        return realization_from_dict(json.load(fh))


def save_realization(R: QuasiRealization, path) -> None:
    with open(path, "w") as fh:
        json.dump(realization_to_dict(R), fh, indent=1)


def words_from_labels(alphabet: Alphabet, labels: Iterable[str]) -> list:
    return [alphabet.parse(s) for s in labels]
