"""Word-probability tables, Hankel factorization and trajectory sampling."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .process_core import Alphabet, QuasiRealization, StructuralError, check_realization, probability_array
from .quantum_ops import CPRealization, coords


class MissingDataError(KeyError):
    pass


class InvariantViolationError(RuntimeError):
    pass


class RankAmbiguityWarning(UserWarning):
    pass


@dataclass
class WordTable:
    """``word -> probability`` for all words up to ``max_length``.

    ``totals[l]`` is the number of observed windows of length ``l`` for an
    empirical table (absent for exact tables).
    """

    alphabet: Alphabet
    entries: dict
    max_length: int
    totals: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.alphabet, Alphabet):
            self.alphabet = Alphabet(tuple(self.alphabet))

    def __getitem__(self, word) -> float:
        try:
            return self.entries[tuple(word)]
        except KeyError:
            raise MissingDataError(f"no entry for word {self.alphabet.format(word)!r}") from None

    def __contains__(self, word) -> bool:
        return tuple(word) in self.entries

    def length_sums(self) -> list:
        sums = [0.0] * (self.max_length + 1)
        for w, p in self.entries.items():
            sums[len(w)] += p
        return sums

    def validate(self, tol: float = 1e-9) -> None:
        for w, p in self.entries.items():
            if not -tol <= p <= 1 + tol:
                raise StructuralError(f"entry {self.alphabet.format(w)!r} = {p} outside [0, 1]")
        for l, s in enumerate(self.length_sums()):
            if s > 1 + tol:
                raise StructuralError(f"probabilities of length {l} sum to {s} > 1")

    def standard_error(self, word) -> float:
        """Binomial standard error of an empirical entry (zero for exact tables).

        Entries observed at frequency 0 or 1 get the worst-case bound
        ``1 / (2 sqrt(n))`` instead of a degenerate zero.
        """
        n = self.totals.get(len(word))
        if not n:
            return 0.0
        p = self[word]
        if p <= 0.0 or p >= 1.0:
            return float(0.5 / np.sqrt(n))
        return float(np.sqrt(p * (1 - p) / n))

    def to_dict(self) -> dict:
        out = {"alphabet": list(self.alphabet.symbols), "max_length": self.max_length,
               "entries": {self.alphabet.format(w): p for w, p in self.entries.items()}}
        if self.totals:
            out["totals"] = {str(k): v for k, v in self.totals.items()}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "WordTable":
        try:
            alphabet = Alphabet(tuple(data["alphabet"]))
            entries = {alphabet.parse(k): float(v) for k, v in data["entries"].items()}
            max_length = int(data.get("max_length", max((len(w) for w in entries), default=0)))
        except KeyError as exc:
            raise StructuralError(f"missing field {exc}") from None
        entries.setdefault((), 1.0)
        totals = {int(k): int(v) for k, v in data.get("totals", {}).items()}
        return cls(alphabet, entries, max_length, totals)


def load_table(path) -> WordTable:
    with open(path) as fh:
        return WordTable.from_dict(json.load(fh))


def save_table(table: WordTable, path) -> None:
    with open(path, "w") as fh:
        json.dump(table.to_dict(), fh, indent=1)


def exact_table(R: QuasiRealization, max_length: int) -> WordTable:
    entries = {}
    for l in range(max_length + 1):
        probs = probability_array(R, l).reshape(-1)
        entries.update(zip(R.alphabet.words(l), probs.tolist()))
    return WordTable(R.alphabet, entries, max_length)


# Hankel reconstruction ----------------------------------------------------------

def hankel_matrix(table: WordTable, prefix_len: int, suffix_len: int, infix=()) -> np.ndarray:
    """``H[u, v] = p(u infix v)`` over words up to the given lengths in BFS-lexicographic order."""
    if not table.entries:
        raise MissingDataError("table is empty")
    rows = table.alphabet.words_up_to(prefix_len)
    cols = table.alphabet.words_up_to(suffix_len)
    infix = tuple(infix)
    missing = [u + infix + v for u in rows for v in cols if (u + infix + v) not in table.entries]
    if missing:
        shown = ", ".join(repr(table.alphabet.format(w)) for w in missing[:5])
        raise MissingDataError(f"{len(missing)} Hankel entries missing (e.g. {shown})")
    return np.array([[table.entries[u + infix + v] for v in cols] for u in rows])


def spectral_realization(table: WordTable, prefix_len: int | None = None, suffix_len: int | None = None,
                         rank_hint: int | None = None, tol: float = 1e-9) -> QuasiRealization:
    """Regular quasi-realization from a Hankel factorization ``H = U S V^T``.

    ``D^(a) = S^-1 U^T H_a V``, ``pi = H[empty, :] V`` and ``tau = S^-1 U^T H[:, empty]``.
    Without a rank hint the numerical rank counts singular values above
    ``tol * s_max``; a weak gap around the cut raises :class:`RankAmbiguityWarning`.
    """
    if prefix_len is None:
        prefix_len = (table.max_length - 1) // 2
    if suffix_len is None:
        suffix_len = table.max_length - 1 - prefix_len
    if prefix_len + suffix_len + 1 > table.max_length:
        raise MissingDataError(f"table of depth {table.max_length} cannot cover prefixes {prefix_len} "
                               f"and suffixes {suffix_len}")
    H = hankel_matrix(table, prefix_len, suffix_len)
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    if rank_hint is None:
        rank = int((s > tol * s[0]).sum()) if s[0] > 0 else 0
        below = s[rank] if rank < s.size else 0.0
        if rank and below > 0 and s[rank - 1] < 10 * below:
            warnings.warn(f"singular value gap at rank {rank} is weak: {s[:rank + 2]}",
                          RankAmbiguityWarning, stacklevel=2)
    else:
        rank = int(rank_hint)
    if rank == 0:
        raise ValueError("Hankel matrix is numerically zero")
    U, s, V = U[:, :rank], s[:rank], Vt[:rank].T
    left = U.T / s[:, None]
    maps = tuple(left @ hankel_matrix(table, prefix_len, suffix_len, (a,)) @ V
                 for a in range(len(table.alphabet)))
    pi = H[0] @ V
    tau = left @ H[:, 0]
    return QuasiRealization(table.alphabet, pi, tau, maps)


# Sampling ------------------------------------------------------------------------

def sample_array(Q: CPRealization, length: int, count: int, seed: int = 0, chunk: int = 65536,
                 tol: float = 1e-10) -> np.ndarray:
    """``count`` trajectories of ``length`` outcomes each, started from ``rho``.

    Each chunk of trajectories draws from its own child of
    ``SeedSequence(seed)``, so the output depends only on ``(seed, chunk)``.
    """
    if length < 0 or count < 0:
        raise ValueError("length and count must be non-negative")
    S = np.stack([F.matrix for F in Q.instrument.maps])      # (m, d, d)
    effects = S @ coords(Q.identity)                          # (m, d): coordinates of E^(a)(identity)
    m = len(S)
    out = np.empty((count, length), dtype=np.int64)
    n_chunks = max(1, -(-count // chunk))
    for c, child in enumerate(np.random.SeedSequence(seed).spawn(n_chunks)):
        rng = np.random.default_rng(child)
        lo, hi = c * chunk, min(count, (c + 1) * chunk)
        state = np.tile(coords(Q.rho), (hi - lo, 1))
        for t in range(length):
            probs = state @ effects.T
            if probs.min(initial=0.0) < -tol:
                raise InvariantViolationError(f"negative outcome probability {probs.min():.3e}")
            probs = np.clip(probs, 0.0, None)
            cum = np.cumsum(probs, axis=1)
            draw = rng.random(hi - lo) * cum[:, -1]
            symbols = np.minimum((cum < draw[:, None]).sum(axis=1), m - 1)
            out[lo:hi, t] = symbols
            for a in range(m):
                sel = symbols == a
                if sel.any():
                    state[sel] = (state[sel] @ S[a]) / probs[sel, a][:, None]
    return out


def sample_trajectories(Q: CPRealization, length: int, count: int, seed: int = 0) -> list:
    return [tuple(row) for row in sample_array(Q, length, count, seed).tolist()]


def empirical_table(trajectories, max_length: int, alphabet: Alphabet | None = None) -> WordTable:
    """Sliding-window frequencies of all words up to ``max_length``, normalized per length."""
    if alphabet is None:
        raise ValueError("alphabet is required")
    if isinstance(trajectories, np.ndarray):
        rows = [trajectories] if trajectories.ndim == 2 else [trajectories[None, :]]
    else:
        trajectories = [tuple(t) for t in trajectories]
        if not trajectories:
            raise ValueError("no trajectories given")
        by_len: dict = {}
        for t in trajectories:
            by_len.setdefault(len(t), []).append(t)
        rows = [np.array(v, dtype=np.int64).reshape(len(v), k) for k, v in by_len.items()]
    if sum(r.size for r in rows) == 0:
        raise ValueError("no symbols observed")
    m = len(alphabet)
    entries = {(): 1.0}
    totals = {0: int(sum(r.shape[0] for r in rows))}
    for l in range(1, max_length + 1):
        counts = np.zeros(m ** l, dtype=np.int64)
        for arr in rows:
            if arr.shape[1] < l:
                continue
            codes = np.zeros((arr.shape[0], arr.shape[1] - l + 1), dtype=np.int64)
            for k in range(l):
                codes = codes * m + arr[:, k:arr.shape[1] - l + 1 + k]
            counts += np.bincount(codes.ravel(), minlength=m ** l)
        total = int(counts.sum())
        if total == 0:
            raise ValueError(f"no windows of length {l}; trajectories are too short")
        totals[l] = total
        entries.update(zip(alphabet.words(l), (counts / total).tolist()))
    return WordTable(alphabet, entries, max_length, totals)


def save_trajectories(trajectories, alphabet: Alphabet, path) -> None:
    with open(path, "w") as fh:
        for t in trajectories:
            fh.write(alphabet.format(t) + "\n")


def load_trajectories(path, alphabet: Alphabet) -> list:
    with open(path) as fh:
        return [alphabet.parse(line.rstrip("\n")) for line in fh if line.strip()]


def reconstruction_report(R: QuasiRealization, table: WordTable, max_length: int) -> dict:
    """Largest deviation between a reconstruction and a table, absolute and in standard errors."""
    worst, worst_z = 0.0, 0.0
    for l in range(max_length + 1):
        probs = probability_array(R, l).reshape(-1)
        for w, p in zip(table.alphabet.words(l), probs):
            dev = abs(p - table[w])
            worst = max(worst, dev)
            se = table.standard_error(w)
            if se > 0:
                worst_z = max(worst_z, dev / se)
    rep = check_realization(R)
    return {"max_deviation": worst, "max_standard_errors": worst_z, "realization": rep.to_dict()}
