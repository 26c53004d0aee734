"""Accessible and observable subspaces, quotient realizations and equivalence.

The accessible subspace ``W = span{D^(u) tau}`` and the observable subspace
``W~ = span{pi D^(u)}`` are built by breadth-first closure.  The quotient
``W / K`` with ``K = W cap W~^perp`` is the regular (minimal) realization of
the same process; two realizations describe the same process exactly when
their quotients are similar.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .process_core import QuasiRealization, check_realization

DEFAULT_RANK_TOL = 1e-9


class IllConditionedWarning(UserWarning):
    """A singular value sits close to the rank threshold."""


@dataclass(frozen=True)
class Subspace:
    """Subspace of ``R^ambient_dim`` given by an orthonormal column basis."""

    ambient_dim: int
    basis: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL
    words: tuple = ()

    def __post_init__(self):
        B = np.array(self.basis, dtype=float).reshape(self.ambient_dim, -1)
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "words", tuple(tuple(w) for w in self.words))

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, v: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.T @ v)

    def distance(self, v: np.ndarray) -> float:
        """Distance of ``v`` (or of each column of ``v``) from the subspace, maximum over columns."""
        v = np.asarray(v, dtype=float)
        r = v - self.project(v)
        return float(np.linalg.norm(r, axis=0).max(initial=0.0))

    def complement(self) -> "Subspace":
        return Subspace(self.ambient_dim, orthonormal_complement(self.basis, self.ambient_dim), self.rank_tol)

    def contains(self, other: "Subspace", tol: float | None = None) -> bool:
        tol = self.rank_tol * 100 if tol is None else tol
        return self.distance(other.basis) <= tol

    @classmethod
    def span(cls, vectors: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> "Subspace":
        """Span of the columns of ``vectors``; singular values below ``rank_tol * s_max`` are dropped."""
        V = np.asarray(vectors, dtype=float)
        d = V.shape[0]
        if V.size == 0:
            return cls(d, np.zeros((d, 0)), rank_tol)
        U, s, _ = np.linalg.svd(V, full_matrices=False)
        if s.size == 0 or s[0] == 0:
            return cls(d, np.zeros((d, 0)), rank_tol)
        return cls(d, U[:, s > rank_tol * s[0]], rank_tol)

    def sum(self, other: "Subspace") -> "Subspace":
        return Subspace.span(np.hstack([self.basis, other.basis]), self.rank_tol)


def orthonormal_complement(B: np.ndarray, d: int) -> np.ndarray:
    B = np.asarray(B, dtype=float).reshape(d, -1)
    if B.shape[1] == 0:
        return np.eye(d)
    U, s, _ = np.linalg.svd(B, full_matrices=True)
    r = int((s > 1e-12 * max(1.0, s[0])).sum())
    return U[:, r:]


def _closure(seed: np.ndarray, maps, rank_tol: float, left: bool) -> tuple[np.ndarray, list, list]:
    """Breadth-first closure of ``seed`` under ``maps``.

    Candidates of each length are tested in lexicographic word order.  With
    ``left`` the child of ``u`` under symbol ``a`` is the word ``a u`` (vector
    ``D^(a) v``); otherwise it is ``u a`` (covector ``v D^(a)``).
    Returns the orthonormal basis, the accepted words and their unit vectors.
    """
    d = seed.size
    mats = [M if left else M.T for M in maps]
    norms = [max(np.linalg.norm(M, 2), 1e-300) for M in mats]
    Q = np.zeros((d, 0))
    words, vectors = [], []

    def try_add(word, v, scale):
        nonlocal Q
        r = v - Q @ (Q.T @ v)
        r = r - Q @ (Q.T @ r)
        nr = np.linalg.norm(r)
        if nr <= rank_tol * scale:
            return False
        Q = np.column_stack([Q, r / nr])
        words.append(word)
        vectors.append(v / np.linalg.norm(v))
        return True

    seed_norm = np.linalg.norm(seed)
    if seed_norm == 0:
        return Q, words, vectors
    try_add((), seed / seed_norm, 1.0)
    frontier = [((), vectors[0])]
    while frontier and Q.shape[1] < d:
        candidates = []
        for word, v in frontier:
            for a, M in enumerate(mats):
                child = (a,) + word if left else word + (a,)
                candidates.append((child, a, M @ v))
        candidates.sort(key=lambda c: c[0])
        frontier = []
        for child, a, w in candidates:
            if try_add(child, w, norms[a]):
                frontier.append((child, vectors[-1]))
            if Q.shape[1] == d:
                break
    return Q, words, vectors


def accessible_subspace(R: QuasiRealization, rank_tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """``W = span{D^(u) tau}`` with the generating words in breadth-first lexicographic order."""
    Q, words, _ = _closure(R.tau, R.maps, rank_tol, left=True)
    return Subspace(R.dim, Q, rank_tol, tuple(words))


def observable_subspace(R: QuasiRealization, rank_tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """``W~ = span{pi D^(u)}`` (as column vectors), closure under transposed maps."""
    Q, words, _ = _closure(R.pi, R.maps, rank_tol, left=False)
    return Subspace(R.dim, Q, rank_tol, tuple(words))


def intersect_with_annihilator(W: Subspace, Wt: Subspace, rank_tol: float = DEFAULT_RANK_TOL):
    """Split ``W`` into ``K = W cap Wt^perp`` and its orthogonal complement inside ``W``.

    The singular values of ``Wt^T W`` are the sines of the principal angles
    between ``W`` and ``Wt^perp``; directions with sine below ``rank_tol`` make up K.
    Returns ``(K, complement, singular_values)``.
    """
    M = Wt.basis.T @ W.basis
    w = W.rank
    if M.size:
        _, s, vh = np.linalg.svd(M, full_matrices=True)
    else:
        s, vh = np.zeros(0), np.eye(w)
    sines = np.concatenate([s, np.zeros(w - s.size)]) if s.size < w else s[:w]
    keep = sines > rank_tol
    K = Subspace(W.ambient_dim, W.basis @ vh[~keep].T, rank_tol)
    C = Subspace(W.ambient_dim, W.basis @ vh[keep].T, rank_tol)
    return K, C, sines


@dataclass(frozen=True)
class QuotientResult:
    quotient: QuasiRealization
    L: np.ndarray
    word_basis: tuple
    accessible: Subspace
    observable: Subspace
    kernel: Subspace
    principal_sines: np.ndarray
    equivalence_residual: float

    @property
    def order(self) -> int:
        return self.quotient.dim

    @property
    def lift(self) -> np.ndarray:
        """Orthonormal basis of the complement of K in W; ``lift @ x`` embeds quotient coordinates."""
        return self.L.T

    def to_dict(self) -> dict:
        from .process_core import realization_to_dict

        alpha = self.quotient.alphabet
        return {
            "quotient": realization_to_dict(self.quotient),
            "L": self.L.tolist(),
            "word_basis": [alpha.format(w) for w in self.word_basis],
            "dim_accessible": self.accessible.rank,
            "dim_observable": self.observable.rank,
            "dim_kernel": self.kernel.rank,
            "order": self.order,
            "principal_sines": self.principal_sines.tolist(),
            "equivalence_residual": self.equivalence_residual,
        }


def _direct_difference(R1: QuasiRealization, R2: QuasiRealization) -> QuasiRealization:
    d1, d2 = R1.dim, R2.dim
    maps = []
    for A, B in zip(R1.maps, R2.maps):
        M = np.zeros((d1 + d2, d1 + d2))
        M[:d1, :d1], M[d1:, d1:] = A, B
        maps.append(M)
    return QuasiRealization(R1.alphabet, np.concatenate([R1.pi, -R2.pi]),
                            np.concatenate([R1.tau, R2.tau]), tuple(maps))


def equivalence_residual(R1: QuasiRealization, R2: QuasiRealization,
                         rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """How far two realizations are from generating the same process.

    Builds the difference realization ``(pi1 (+) -pi2, D1 (+) D2, tau1 (+) tau2)``
    whose value on every word is ``p1(u) - p2(u)``.  Its observable subspace is
    spanned by finitely many covectors; the process vanishes identically iff
    all of them annihilate the joint ``tau``.  Returns the largest such value
    relative to ``|tau|``, which bounds ``|p1(u) - p2(u)|`` up to the scale of
    the covectors.
    """
    if R1.alphabet != R2.alphabet:
        raise ValueError("realizations use different alphabets")
    diff = _direct_difference(R1, R2)
    Wt = observable_subspace(diff, rank_tol)
    if Wt.rank == 0:
        return 0.0
    return float(np.abs(Wt.basis.T @ diff.tau).max() / np.linalg.norm(diff.tau))


def quotient_realization(R: QuasiRealization, rank_tol: float = DEFAULT_RANK_TOL,
                         tol: float = 1e-9) -> QuotientResult:
    """Regular realization ``W / K`` with ``L`` the orthogonal projection onto ``K^perp cap W``."""
    W = accessible_subspace(R, rank_tol)
    Wt = observable_subspace(R, rank_tol)
    K, C, sines = intersect_with_annihilator(W, Wt, rank_tol)
    near = sines[(sines > rank_tol * 1e-2) & (sines < rank_tol * 1e3)]
    if near.size:
        warnings.warn(f"principal-angle sines {near.tolist()} are close to rank_tol={rank_tol}",
                      IllConditionedWarning, stacklevel=2)
    lift = C.basis
    L = lift.T
    quotient = QuasiRealization(R.alphabet, R.pi @ lift, L @ R.tau, tuple(L @ D @ lift for D in R.maps))
    basis_words = []
    picked = np.zeros((quotient.dim, 0))
    for word in W.words:
        v = L @ _word_vector(R, word)
        r = v - picked @ (picked.T @ v) if picked.size else v
        if np.linalg.norm(r) > rank_tol * max(np.linalg.norm(v), 1e-300):
            picked = np.column_stack([picked, r / np.linalg.norm(r)])
            basis_words.append(word)
        if len(basis_words) == quotient.dim:
            break
    residual = equivalence_residual(R, quotient, rank_tol)
    report = check_realization(quotient, tol)
    if residual > max(tol, 1e-7) or not report.passed:
        warnings.warn(f"quotient check: equivalence residual {residual:.3g}, "
                      f"eigen-residuals {report.left_residual:.3g}/{report.right_residual:.3g}",
                      IllConditionedWarning, stacklevel=2)
    return QuotientResult(quotient, L, tuple(basis_words), W, Wt, K, sines, residual)


def _word_vector(R: QuasiRealization, word) -> np.ndarray:
    v = R.tau
    for a in reversed(word):
        v = R.maps[a] @ v
    return v


def order(R: QuasiRealization, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Dimension of the regular realization of the process."""
    W = accessible_subspace(R, rank_tol)
    Wt = observable_subspace(R, rank_tol)
    _, C, _ = intersect_with_annihilator(W, Wt, rank_tol)
    return C.rank


@dataclass(frozen=True)
class IsomorphismResult:
    found: bool
    T: np.ndarray | None
    residuals: dict = field(default_factory=dict)
    condition: float = float("inf")
    reason: str = ""
    quotients: tuple = ()

    def parent_map(self) -> np.ndarray | None:
        """``T`` expressed between the original coordinates (meaningful for regular inputs)."""
        if self.T is None:
            return None
        q1, q2 = self.quotients
        return q2.lift @ self.T @ q1.L

    def to_dict(self) -> dict:
        return {"found": self.found, "T": None if self.T is None else self.T.tolist(),
                "residuals": self.residuals, "condition": self.condition, "reason": self.reason}


def equivalence_isomorphism(R1: QuasiRealization, R2: QuasiRealization, tol: float = 1e-8,
                            rank_tol: float = DEFAULT_RANK_TOL) -> IsomorphismResult:
    """Similarity ``T`` between the quotients, built from a word basis of the first one.

    With ``e_i = D1^(u_i) tau1`` a basis of quotient 1 and ``f_i = D2^(u_i) tau2``,
    ``T e_i = f_i``.  Found iff ``pi1 = pi2 T``, ``D1 = T^-1 D2 T`` and
    ``tau1 = T^-1 tau2`` hold to ``tol`` (relative residuals).
    """
    if R1.alphabet != R2.alphabet:
        raise ValueError("realizations use different alphabets")
    q1 = quotient_realization(R1, rank_tol)
    q2 = quotient_realization(R2, rank_tol)
    Q1, Q2 = q1.quotient, q2.quotient
    if Q1.dim != Q2.dim:
        return IsomorphismResult(False, None, {}, float("inf"),
                                 f"quotient dimensions differ ({Q1.dim} vs {Q2.dim})", (q1, q2))
    E = np.column_stack([_word_vector(Q1, u) for u in q1.word_basis])
    F = np.column_stack([_word_vector(Q2, u) for u in q1.word_basis])
    condE = np.linalg.cond(E)
    if not np.isfinite(condE) or condE > 1e12:
        return IsomorphismResult(False, None, {}, float(condE), "word basis is numerically singular", (q1, q2))
    T = F @ np.linalg.inv(E)
    condT = float(np.linalg.cond(T))
    if not np.isfinite(condT) or condT > 1e12:
        return IsomorphismResult(False, T, {}, condT, "candidate T is numerically singular", (q1, q2))
    Tinv = np.linalg.inv(T)
    res = {
        "pi": float(np.linalg.norm(Q1.pi - Q2.pi @ T) / max(np.linalg.norm(Q1.pi), 1e-300)),
        "tau": float(np.linalg.norm(Q1.tau - Tinv @ Q2.tau) / max(np.linalg.norm(Q1.tau), 1e-300)),
    }
    for label, A, B in zip(Q1.alphabet, Q1.maps, Q2.maps):
        res[f"map:{label}"] = float(np.linalg.norm(A - Tinv @ B @ T) / max(np.linalg.norm(A), 1.0))
    found = max(res.values()) < tol
    reason = "" if found else "intertwining residual above tolerance"
    return IsomorphismResult(found, T, res, condT, reason, (q1, q2))


def subspace_from_words(R: QuasiRealization, words, rank_tol: float = DEFAULT_RANK_TOL) -> Subspace:
    vecs = np.column_stack([_word_vector(R, w) for w in words])
    return Subspace.span(vecs, rank_tol)
