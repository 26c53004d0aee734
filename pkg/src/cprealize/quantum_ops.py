"""Hermitian operators, superoperators and Choi matrices.

Operators on C^n are stored as plain complex ``(n, n)`` arrays.  A
superoperator is a Hermitian-preserving linear map on B(C^n); it is stored as
a real ``(n^2, n^2)`` matrix acting on coordinates with respect to a fixed
orthonormal Hermitian basis (identity first, then generalized Gell-Mann
matrices).  Because the basis is orthonormal for the trace pairing
``<X, Y> = tr(X Y)``, the adjoint of a superoperator is its transpose and
``tr(rho X)`` is the Euclidean dot product of coordinate vectors.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import linalg, optimize


class HermitianBasis:
    """Orthonormal basis of Herm(n) with vectorized coordinate conversion.

    Ordering: ``I/sqrt(n)``, then for each pair ``j < k`` (row-major) the
    symmetric and antisymmetric off-diagonal elements, then the ``n - 1``
    traceless diagonal elements.  For ``n = 2`` this is ``(I, X, Y, Z)/sqrt(2)``.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("dimension must be positive")
        self.n = n
        rows, cols = np.triu_indices(n, k=1)
        self._rows, self._cols = rows, cols
        npairs = len(rows)
        self._sym = 1 + 2 * np.arange(npairs)
        self._anti = self._sym + 1
        self._diag = np.concatenate([[0], 1 + 2 * npairs + np.arange(n - 1)])
        diag_rows = np.zeros((n, n))
        diag_rows[0] = 1 / np.sqrt(n)
        for d in range(1, n):
            diag_rows[d, :d] = 1.0
            diag_rows[d, d] = -d
            diag_rows[d] /= np.sqrt(d * (d + 1))
        self._diag_rows = diag_rows

    @property
    def dim(self) -> int:
        return self.n * self.n

    def coords(self, X: np.ndarray) -> np.ndarray:
        """Coordinates ``tr(B_k X)`` of Hermitian ``X`` (leading batch axes allowed)."""
        X = np.asarray(X)
        out = np.empty(X.shape[:-2] + (self.dim,))
        upper = X[..., self._rows, self._cols]
        out[..., self._sym] = np.sqrt(2) * upper.real
        out[..., self._anti] = -np.sqrt(2) * upper.imag
        diagonal = np.real(np.diagonal(X, axis1=-2, axis2=-1))
        out[..., self._diag] = diagonal @ self._diag_rows.T
        return out

    def matrix(self, x: np.ndarray) -> np.ndarray:
        """Hermitian matrix with coordinates ``x`` (leading batch axes allowed)."""
        x = np.asarray(x, dtype=float)
        n = self.n
        X = np.zeros(x.shape[:-1] + (n, n), dtype=complex)
        upper = (x[..., self._sym] - 1j * x[..., self._anti]) / np.sqrt(2)
        X[..., self._rows, self._cols] = upper
        X[..., self._cols, self._rows] = upper.conj()
        idx = np.arange(n)
        X[..., idx, idx] = x[..., self._diag] @ self._diag_rows
        return X

    def elements(self) -> np.ndarray:
        """All basis matrices, shape ``(n^2, n, n)``."""
        return self.matrix(np.eye(self.dim))


@functools.lru_cache(maxsize=None)
def hermitian_basis(n: int) -> HermitianBasis:
    return HermitianBasis(n)


@functools.lru_cache(maxsize=None)
def _vec_basis(n: int) -> np.ndarray:
    """Unitary whose column k is the row-major vectorization of basis element k."""
    elems = hermitian_basis(n).elements()
    U = elems.reshape(n * n, n * n).T.copy()
    U.setflags(write=False)
    return U


def coords(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X)
    return hermitian_basis(X.shape[-1]).coords(X)


def from_coords(x: np.ndarray, n: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if n is None:
        n = int(round(np.sqrt(x.shape[-1])))
    return hermitian_basis(n).matrix(x)


def is_hermitian(X: np.ndarray, tol: float = 1e-10) -> bool:
    X = np.asarray(X)
    scale = max(1.0, float(np.abs(X).max(initial=0.0)))
    return bool(np.abs(X - X.conj().T).max(initial=0.0) <= tol * scale)


def hermitize(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    return (X + X.conj().T) / 2


def min_eigenvalue(X: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(X))[0])


def psd_sqrt(X: np.ndarray, inverse: bool = False, tol: float = 0.0) -> np.ndarray:
    """Square root (or pseudo-inverse square root) of a PSD matrix."""
    w, V = np.linalg.eigh(hermitize(X))
    w = np.clip(w, 0.0, None)
    if inverse:
        keep = w > tol
        f = np.zeros_like(w)
        f[keep] = 1 / np.sqrt(w[keep])
    else:
        f = np.sqrt(w)
    return (V * f) @ V.conj().T


@dataclass(frozen=True)
class SuperOperator:
    """Hermitian-preserving linear map on B(C^n) in Gell-Mann coordinates."""

    n: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        d = self.n * self.n
        if m.shape != (d, d):
            raise ValueError(f"superoperator on C^{self.n} needs a {d}x{d} matrix, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        basis = hermitian_basis(self.n)
        return basis.matrix(self.matrix @ basis.coords(X))

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        _same_dim(self, other)
        return SuperOperator(self.n, self.matrix + other.matrix)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        _same_dim(self, other)
        return SuperOperator(self.n, self.matrix - other.matrix)

    def __mul__(self, scalar: float) -> "SuperOperator":
        return SuperOperator(self.n, float(scalar) * self.matrix)

    __rmul__ = __mul__

    @classmethod
    def from_function(cls, n: int, fn: Callable[[np.ndarray], np.ndarray]) -> "SuperOperator":
        basis = hermitian_basis(n)
        images = np.array([fn(B) for B in basis.elements()])
        if not all(is_hermitian(Y, 1e-9) for Y in images):
            raise ValueError("map is not Hermitian-preserving")
        return cls(n, basis.coords(images).T)

    @classmethod
    def from_kraus(cls, kraus: Iterable[np.ndarray], weight: float = 1.0) -> "SuperOperator":
        """The CP map ``X -> weight * sum_k K_k X K_k^dagger``."""
        kraus = [np.asarray(K, dtype=complex) for K in kraus]
        n = kraus[0].shape[0]
        if any(K.shape != (n, n) for K in kraus):
            raise ValueError("Kraus operators must be square and of equal size")
        # natural representation acting on row-major vec(X)
        natural = sum(np.kron(K, K.conj()) for K in kraus) * weight
        return from_natural(n, natural)

    @classmethod
    def identity(cls, n: int) -> "SuperOperator":
        return cls(n, np.eye(n * n))

    @classmethod
    def zero(cls, n: int) -> "SuperOperator":
        return cls(n, np.zeros((n * n, n * n)))


def _same_dim(F: SuperOperator, G: SuperOperator) -> None:
    if F.n != G.n:
        raise ValueError(f"dimension mismatch: {F.n} vs {G.n}")


def natural(F: SuperOperator) -> np.ndarray:
    """Complex matrix of ``F`` acting on row-major ``vec(X)``."""
    U = _vec_basis(F.n)
    return U @ F.matrix @ U.conj().T


def from_natural(n: int, N: np.ndarray) -> SuperOperator:
    U = _vec_basis(n)
    S = U.conj().T @ np.asarray(N) @ U
    if np.abs(S.imag).max(initial=0.0) > 1e-9 * max(1.0, np.abs(S).max(initial=0.0)):
        raise ValueError("map is not Hermitian-preserving")
    return SuperOperator(n, S.real)


def _reshuffle(M: np.ndarray, n: int) -> np.ndarray:
    return M.reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n)


def choi(F: SuperOperator) -> np.ndarray:
    """``C(F) = sum_ij F(|i><j|) (x) |i><j|``; F is CP iff this is PSD."""
    return _reshuffle(natural(F), F.n)


def from_choi(M: np.ndarray) -> SuperOperator:
    """Inverse of :func:`choi`: ``F(X) = tr_2[M (1 (x) X^T)]``."""
    M = np.asarray(M, dtype=complex)
    N2 = M.shape[0]
    n = int(round(np.sqrt(N2)))
    if n * n != N2 or M.shape != (N2, N2):
        raise ValueError("Choi matrix must be n^2 x n^2")
    if not is_hermitian(M, 1e-9):
        raise ValueError("Choi matrix must be Hermitian")
    return from_natural(n, _reshuffle(M, n))


def adjoint(F: SuperOperator) -> SuperOperator:
    """Adjoint under the trace pairing ``tr(Y F(X)) = tr(F*(Y) X)``."""
    return SuperOperator(F.n, F.matrix.T)


def compose(F: SuperOperator, G: SuperOperator) -> SuperOperator:
    """``F o G`` (apply G first)."""
    _same_dim(F, G)
    return SuperOperator(F.n, F.matrix @ G.matrix)


def is_completely_positive(F: SuperOperator, tol: float = 1e-9) -> tuple[bool, float]:
    """``(flag, lambda_min(Choi))`` with flag set when ``lambda_min >= -tol``."""
    lam = min_eigenvalue(choi(F))
    return lam >= -tol, lam


def is_positive_sampled(
    F: SuperOperator,
    samples: int = 200,
    tol: float = 1e-9,
    seed: int = 0,
    refine: int = 5,
) -> tuple[bool, float]:
    """Heuristic positivity test on random pure states with local refinement.

    Returns the worst ``lambda_min(F(|psi><psi|))`` found.  A negative value is a
    certificate of non-positivity; a non-negative one is only evidence.
    """
    n = F.n
    rng = np.random.default_rng(seed)

    def worst(params: np.ndarray) -> float:
        psi = params[:n] + 1j * params[n:]
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            return 0.0
        psi = psi / nrm
        return min_eigenvalue(F(np.outer(psi, psi.conj())))

    starts = rng.standard_normal((samples, 2 * n))
    values = np.array([worst(p) for p in starts])
    best = float(values.min())
    for idx in np.argsort(values)[:refine]:
        res = optimize.minimize(worst, starts[idx], method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best >= -tol, best


def partial_transpose(X: np.ndarray, dims: Sequence[int], system: int = 0) -> np.ndarray:
    """Transpose on one tensor factor of ``C^{d1} (x) C^{d2}`` (first by default)."""
    d1, d2 = dims
    X = np.asarray(X).reshape(d1, d2, d1, d2)
    if system == 0:
        X = X.transpose(2, 1, 0, 3)
    elif system == 1:
        X = X.transpose(0, 3, 2, 1)
    else:
        raise ValueError("system must be 0 or 1")
    return X.reshape(d1 * d2, d1 * d2)


def partial_trace(X: np.ndarray, dims: Sequence[int], system: int = 1) -> np.ndarray:
    """Trace out one factor of ``C^{d1} (x) C^{d2}`` (second by default)."""
    d1, d2 = dims
    X = np.asarray(X).reshape(d1, d2, d1, d2)
    if system == 1:
        return np.einsum("ajbj->ab", X)
    if system == 0:
        return np.einsum("jajb->ab", X)
    raise ValueError("system must be 0 or 1")


class NonUniqueStationaryWarning(UserWarning):
    """The eigenvalue-1 eigenspace has dimension larger than one."""


def stationary_state(
    channel: SuperOperator,
    identity: np.ndarray | None = None,
    tol: float = 1e-9,
) -> np.ndarray:
    """Fixed point ``rho`` of ``channel``, normalized so that ``tr(rho identity) = 1``.

    ``channel`` is normally the adjoint of a unital CP sum.  When the fixed
    space is degenerate a representative (the Cesaro average of the maximally
    mixed state) is returned and a :class:`NonUniqueStationaryWarning` is emitted.
    """
    import warnings

    n = channel.n
    identity = np.eye(n) if identity is None else np.asarray(identity)
    A = channel.matrix - np.eye(n * n)
    _, s, vh = np.linalg.svd(A)
    scale = max(1.0, float(np.abs(channel.matrix).max()))
    null = vh[s <= tol * scale * 10]
    if len(null) == 0:
        raise ValueError("channel has no fixed point")
    if len(null) == 1:
        x = null[0]
    else:
        warnings.warn(f"fixed space has dimension {len(null)}; returning a representative",
                      NonUniqueStationaryWarning, stacklevel=2)
        x = null.T @ (null @ coords(np.eye(n) / n))
    rho = from_coords(x, n)
    norm = np.real(np.trace(rho @ identity))
    if abs(norm) < tol:
        raise ValueError("fixed point is orthogonal to the identity element")
    rho = rho / norm
    return hermitize(rho)


@dataclass(frozen=True)
class QuantumInstrument:
    """Indexed family of superoperators, one per alphabet symbol.

    Complete positivity is not enforced at construction; call
    :meth:`check_cp` (or :func:`is_completely_positive` per member).
    """

    alphabet: "object"
    maps: tuple

    def __post_init__(self):
        maps = tuple(self.maps)
        if len(maps) != len(self.alphabet):
            raise ValueError("one superoperator per symbol is required")
        n = maps[0].n
        if any(F.n != n for F in maps):
            raise ValueError("all members must act on the same space")
        object.__setattr__(self, "maps", maps)

    @property
    def n(self) -> int:
        return self.maps[0].n

    def __getitem__(self, symbol) -> SuperOperator:
        return self.maps[self.alphabet.index(symbol)]

    def total(self) -> SuperOperator:
        return SuperOperator(self.n, sum(F.matrix for F in self.maps))

    def check_cp(self, tol: float = 1e-9) -> dict:
        return {label: is_completely_positive(F, tol) for label, F in zip(self.alphabet.symbols, self.maps)}


def apply_word(instrument: QuantumInstrument, word: Sequence[int], X: np.ndarray) -> np.ndarray:
    """``E^(u1) o ... o E^(ul)(X)``, the last symbol acting first."""
    basis = hermitian_basis(instrument.n)
    x = basis.coords(X)
    for a in reversed(tuple(word)):
        x = instrument.maps[a].matrix @ x
    return basis.matrix(x)


def unitary_channel(U: np.ndarray, weight: float = 1.0) -> SuperOperator:
    return SuperOperator.from_kraus([U], weight)


def rank_one_map(A: np.ndarray, B: np.ndarray) -> SuperOperator:
    """``X -> A tr(B X)``."""
    n = np.asarray(A).shape[0]
    return SuperOperator(n, np.outer(coords(A), coords(B)))


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def expm_hermitian(H: np.ndarray, factor: complex = 1j) -> np.ndarray:
    """``exp(factor * H)``."""
    return linalg.expm(factor * np.asarray(H, dtype=complex))


@dataclass(frozen=True)
class CPRealization:
    """``p(u) = tr(rho E^(u)(identity))`` for a CP instrument on M_n."""

    instrument: QuantumInstrument
    rho: np.ndarray
    identity: np.ndarray | None = None

    def __post_init__(self):
        n = self.instrument.n
        rho = hermitize(np.asarray(self.rho, dtype=complex))
        identity = np.eye(n) if self.identity is None else hermitize(np.asarray(self.identity, dtype=complex))
        if rho.shape != (n, n) or identity.shape != (n, n):
            raise ValueError(f"rho and identity must be {n}x{n}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "identity", identity)

    @property
    def n(self) -> int:
        return self.instrument.n

    @property
    def alphabet(self):
        return self.instrument.alphabet

    def probability(self, word: Sequence) -> float:
        idx = [self.alphabet.index(a) for a in word]
        return float(np.real(np.trace(self.rho @ apply_word(self.instrument, idx, self.identity))))


def as_quasi_realization(R: CPRealization):
    """The same process as a real quasi-realization in Hermitian-basis coordinates."""
    from .process_core import QuasiRealization

    return QuasiRealization(R.alphabet, coords(R.rho), coords(R.identity),
                            tuple(F.matrix for F in R.instrument.maps))


def matrix_to_json(M: np.ndarray):
    """Real nested lists, or ``{"re": ..., "im": ...}`` for complex entries."""
    M = np.asarray(M)
    if np.iscomplexobj(M) and np.abs(M.imag).max(initial=0.0) > 0:
        return {"re": M.real.tolist(), "im": M.imag.tolist()}
    return np.real(M).tolist()


def matrix_from_json(data) -> np.ndarray:
    if isinstance(data, dict):
        return np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    return np.asarray(data, dtype=complex)


def cp_realization_to_dict(R: CPRealization) -> dict:
    return {"alphabet": list(R.alphabet.symbols), "n": R.n,
            "maps": {label: F.matrix.tolist() for label, F in zip(R.alphabet, R.instrument.maps)},
            "rho": matrix_to_json(R.rho), "identity": matrix_to_json(R.identity)}


def cp_realization_from_dict(data: dict) -> CPRealization:
    from .process_core import Alphabet, StructuralError

    try:
        alphabet = Alphabet(tuple(data["alphabet"]))
        n = int(data["n"])
        maps = []
        for s in alphabet:
            entry = data["maps"][s]
            if isinstance(entry, dict) and "kraus" in entry:
                maps.append(SuperOperator.from_kraus([matrix_from_json(K) for K in entry["kraus"]]))
            elif isinstance(entry, dict) and "choi" in entry:
                maps.append(from_choi(matrix_from_json(entry["choi"])))
            else:
                maps.append(SuperOperator(n, np.asarray(entry, dtype=float)))
        identity = matrix_from_json(data["identity"]) if "identity" in data else None
        return CPRealization(QuantumInstrument(alphabet, maps), matrix_from_json(data["rho"]), identity)
    except KeyError as exc:
        raise StructuralError(f"missing field {exc}") from None
