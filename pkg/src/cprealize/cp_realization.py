"""Checks for completely positive realizations and the reduction to a unital one.

:func:`reduce_to_realization` takes CP maps ``E^(u)`` with PSD ``rho`` and
``identity`` reproducing a process through ``tr[rho E^(u)(identity)]`` and
removes spurious contributions until ``identity`` is a fixed point of
``E = sum_u E^(u)``, ``rho`` is a fixed point of ``E*``, and finally
``identity`` becomes the unit.  Growth rates and peripheral eigenvectors are
computed spectrally on the Krylov space generated by the current operator.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .process_core import Alphabet, probability_array
from .quantum_ops import (CPRealization, QuantumInstrument, SuperOperator, as_quasi_realization, coords,
                          from_coords, hermitian_basis, hermitize, is_completely_positive, psd_sqrt)
from .quotient import accessible_subspace, intersect_with_annihilator, observable_subspace

UNIT_EIGENVALUE_TOL = 1e-8


class ReductionError(RuntimeError):
    """The reduction could not finish; ``trace`` holds the steps taken so far."""

    def __init__(self, message: str, trace: "ReductionTrace | None" = None):
        super().__init__(message)
        self.trace = trace


class PreconditionError(ValueError):
    pass


# Verification ----------------------------------------------------------------

def verify_cp_realization(Q: CPRealization, tol: float = 1e-9) -> dict:
    n = Q.n
    I = np.eye(n)
    cp = {}
    for label, F in zip(Q.alphabet, Q.instrument.maps):
        ok, lam = is_completely_positive(F, tol)
        cp[label] = {"cp": bool(ok), "min_choi_eigenvalue": lam}
    total = Q.instrument.total()
    unital = float(np.abs(total(I) - I).max())
    identity_dev = float(np.abs(Q.identity - I).max())
    rho_min = float(np.linalg.eigvalsh(Q.rho)[0])
    stationarity = float(np.abs(total.matrix.T @ coords(Q.rho) - coords(Q.rho)).max())
    normalization = float(abs(np.trace(Q.rho @ Q.identity).real - 1))
    checks = {
        "completely_positive": all(v["cp"] for v in cp.values()),
        "unital": unital <= tol,
        "identity_is_unit": identity_dev <= tol,
        "rho_psd": rho_min >= -tol,
        "stationary": stationarity <= tol,
        "normalized": normalization <= tol,
    }
    return {"passed": all(checks.values()), "checks": checks, "maps": cp,
            "residuals": {"unital": unital, "identity": identity_dev, "rho_min_eigenvalue": rho_min,
                          "stationarity": stationarity, "normalization": normalization},
            "tol": tol}


def verify_quotient_relation(Q: CPRealization, R, L: np.ndarray, tol: float = 1e-9) -> dict:
    """Check ``L o E^(a)|_W = D^(a) o L``, ``tau = L(identity)`` and ``pi o L = rho`` on W.

    ``L`` is an ``r x n^2`` matrix on Hermitian-basis coordinates; only its
    restriction to the accessible subspace W matters.
    """
    L = np.asarray(L, dtype=float)
    quasi = as_quasi_realization(Q)
    if L.shape != (R.dim, quasi.dim):
        raise ValueError(f"L must be {R.dim}x{quasi.dim}, got {L.shape}")
    W = accessible_subspace(quasi)
    Wt = observable_subspace(quasi)
    K, _, _ = intersect_with_annihilator(W, Wt)
    Wb = W.basis
    scale = max(1.0, float(np.abs(L).max()))
    maps = {}
    for label, S, D in zip(R.alphabet, quasi.maps, R.maps):
        maps[label] = float(np.abs(L @ S @ Wb - D @ L @ Wb).max(initial=0.0))
    tau_res = float(np.abs(L @ quasi.tau - R.tau).max())
    pi_res = float(np.abs(R.pi @ L @ Wb - quasi.pi @ Wb).max(initial=0.0))
    kernel_res = float(np.abs(L @ K.basis).max(initial=0.0))
    violations = [f"map {k}" for k, v in maps.items() if v > tol * scale]
    if tau_res > tol * scale:
        violations.append("tau")
    if pi_res > tol * scale:
        violations.append("pi")
    if kernel_res > tol * scale:
        violations.append("L does not annihilate K")
    return {"passed": not violations, "violations": violations, "maps": maps, "tau": tau_res,
            "pi": pi_res, "kernel": kernel_res, "dim_W": W.rank, "dim_K": K.rank, "tol": tol}


# Spectral tools --------------------------------------------------------------

def _krylov(S: np.ndarray, x: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of ``span{S^k x}``."""
    nx = np.linalg.norm(x)
    if nx == 0:
        return np.zeros((x.size, 0))
    Q = [x / nx]
    scale = max(1.0, np.linalg.norm(S, 2))
    while len(Q) < x.size:
        v = S @ Q[-1]
        for _ in range(2):
            v = v - np.array(Q).T @ (np.array(Q) @ v)
        nv = np.linalg.norm(v)
        if nv <= tol * scale:
            break
        Q.append(v / nv)
    return np.array(Q).T


def _cluster_component(A: np.ndarray, z: np.ndarray, select) -> tuple[np.ndarray, np.ndarray]:
    """Spectral projection of ``z`` onto the eigenvalues chosen by ``select``, and ``A`` on that subspace."""
    T, Z, k = linalg.schur(A.astype(complex), output="complex", sort=select)
    if k == 0:
        return np.zeros_like(z, dtype=complex), T[:0, :0], Z[:, :0]
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    if T22.size:
        Y = linalg.solve_sylvester(T11, -T22, T12)
    else:
        Y = np.zeros((k, 0))
    w = Z.conj().T @ z
    top = w[:k] + Y @ w[k:]
    return top, T11, Z[:, :k]


def cesaro_limit(channel: SuperOperator, X: np.ndarray, tol: float = 1e-9) -> tuple[float, np.ndarray]:
    """Growth rate ``lambda`` of ``channel^k(X)`` and the normalized limit of its Cesaro means.

    ``lambda`` is the largest positive eigenvalue of the channel restricted to
    the Krylov space of ``X`` whose spectral component of ``X`` is not
    negligible.  ``omega`` is that component (its highest nilpotent power when
    the eigenvalue is defective), so rotating peripheral parts average out.
    ``omega`` is the unscaled spectral component, except for a defective
    eigenvalue where the divergent direction is returned with unit trace.
    """
    n = channel.n
    S = channel.matrix
    x = coords(X)
    B = _krylov(S, x, 1e-11)
    if B.shape[1] == 0:
        return 0.0, np.zeros((n, n), complex)
    A = B.T @ S @ B
    xb = B.T @ x
    mu = np.linalg.eigvals(A)
    candidates = sorted({round(float(m.real), 12) for m in mu
                         if m.real > 0 and abs(m.imag) <= 1e-7 * max(1.0, abs(m))}, reverse=True)
    xnorm = np.linalg.norm(xb)
    for lam in candidates:
        width = 1e-6 * max(1.0, lam)
        top, T11, Z1 = _cluster_component(A, xb, lambda m, lam=lam, width=width: abs(m - lam) <= width)
        if np.linalg.norm(top) <= 1e-9 * xnorm:
            continue
        lam_exact = float(np.real(np.trace(T11)) / T11.shape[0])
        N = T11 - lam_exact * np.eye(T11.shape[0])
        v = top
        jordan = 0
        while True:
            nxt = N @ v
            if np.linalg.norm(nxt) <= 1e-7 * max(1.0, np.linalg.norm(v)) * max(1.0, lam_exact):
                break
            v, jordan = nxt, jordan + 1
        omega = hermitize(from_coords(np.real(B @ (Z1 @ v)), n))
        evals = np.linalg.eigvalsh(omega)
        if evals[-1] < -evals[0]:
            omega = -omega
            evals = -evals[::-1]
        scale = np.abs(evals).max()
        if evals[0] < -max(tol, 1e-7) * max(1.0, scale):
            raise ReductionError(f"peripheral eigenvector is not PSD (min eigenvalue {evals[0]:.3e})")
        omega = _clip_psd(omega, max(tol, 1e-7) * max(1.0, scale))
        if jordan:
            omega = omega / np.trace(omega).real
        if jordan:
            warnings.warn(f"defective eigenvalue {lam_exact:.6g} (Jordan depth {jordan})", RuntimeWarning,
                          stacklevel=2)
        if jordan and abs(lam_exact - 1) <= UNIT_EIGENVALUE_TOL:
            # polynomial growth at rate one still diverges; report it as growing
            lam_exact = 1 + 10 * UNIT_EIGENVALUE_TOL
        return lam_exact, omega
    return 0.0, np.zeros((n, n), complex)


def _clip_psd(X: np.ndarray, tol: float) -> np.ndarray:
    w, V = np.linalg.eigh(hermitize(X))
    w = np.where(w < 0, 0.0, w)
    w = np.where(w <= tol, 0.0, w) if tol > 0 else w
    return hermitize((V * w) @ V.conj().T)


# Compression -----------------------------------------------------------------

def _embedding(V: np.ndarray) -> np.ndarray:
    """Matrix of ``X' -> V X' V^dagger`` from Herm(k) to Herm(n) coordinates."""
    k = V.shape[1]
    elems = hermitian_basis(k).elements()
    imgs = np.einsum("ia,xab,jb->xij", V, elems, V.conj())
    return coords(imgs).T


def compress(maps, rho, identity, V):
    """Compress everything to ``range(V)`` (``V`` an isometry) by the hereditary projection."""
    J = _embedding(V)
    k = V.shape[1]
    new_maps = [SuperOperator(k, J.T @ F.matrix @ J) for F in maps]
    squeeze = lambda X: hermitize(V.conj().T @ X @ V)
    return new_maps, squeeze(rho), squeeze(identity)


def _kernel_isometry(omega: np.ndarray, tol: float) -> tuple[np.ndarray, int]:
    w, V = np.linalg.eigh(hermitize(omega))
    cut = tol * max(1.0, np.abs(w).max())
    return V[:, w <= cut], int((w > cut).sum())


def remove_spurious_eigenvector(maps, rho, identity, omega, tol: float = 1e-8):
    """Compress to ``ker(omega)`` given a PSD eigenvector ``omega`` of ``sum maps`` with ``tr[rho omega] = 0``."""
    omega = hermitize(np.asarray(omega, dtype=complex))
    evals = np.linalg.eigvalsh(omega)
    scale = max(np.abs(evals).max(), 1e-300)
    if evals[0] < -tol * scale:
        raise PreconditionError(f"omega is not PSD (min eigenvalue {evals[0]:.3e})")
    overlap = abs(np.trace(rho @ omega).real)
    if overlap > tol * scale * max(1.0, np.abs(rho).max()) * rho.shape[0]:
        raise PreconditionError(f"tr[rho omega] = {overlap:.3e} is not zero")
    V, removed = _kernel_isometry(omega, tol)
    if V.shape[1] == 0:
        raise PreconditionError("omega is strictly positive; its kernel is trivial")
    return compress(maps, rho, identity, V)


# Reduction -------------------------------------------------------------------

@dataclass
class ReductionStep:
    kind: str
    eigenvalue: float | None
    removed: int
    dim: int
    deviation: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lambda": self.eigenvalue, "removed_dim": self.removed,
                "hilbert_dim": self.dim, "max_probability_deviation": self.deviation,
                "detail": self.detail}


@dataclass
class ReductionTrace:
    initial_dim: int
    scale: float = 1.0
    steps: list = field(default_factory=list)

    def add(self, step: ReductionStep) -> None:
        last = self.steps[-1].dim if self.steps else self.initial_dim
        if step.dim > last:
            raise AssertionError("Hilbert dimension increased during reduction")
        self.steps.append(step)

    def kinds(self) -> list:
        return [s.kind for s in self.steps]

    @property
    def sieve_count(self) -> int:
        return sum(1 for s in self.steps if s.removed and s.kind in ("sieve", "dual-pass"))

    @property
    def max_deviation(self) -> float:
        return max((s.deviation for s in self.steps), default=0.0)

    def to_dict(self) -> dict:
        return {"initial_dim": self.initial_dim, "normalization_scale": self.scale,
                "steps": [s.to_dict() for s in self.steps]}


def _probabilities(maps, rho, identity, length: int, alphabet) -> list:
    R = as_quasi_realization(CPRealization(QuantumInstrument(alphabet, maps), rho, identity))
    return [probability_array(R, l) for l in range(length + 1)]


def _boundary_pass(maps, rho, identity, trace, reference, alphabet, check_length, tol, dual):
    """STEP 1 on ``identity`` (or on ``rho`` for the dual pass); returns the updated triple and a change flag."""
    changed = False
    while True:
        current = identity if not dual else rho
        other = rho if not dual else identity
        total = SuperOperator(maps[0].n, sum(F.matrix for F in maps))
        channel = total if not dual else SuperOperator(total.n, total.matrix.T)
        lam, omega = cesaro_limit(channel, current, tol)
        if lam > 1 + UNIT_EIGENVALUE_TOL:
            overlap = abs(np.trace(other @ omega).real)
            if overlap > 1e-6:
                raise ReductionError(f"growing eigenvector overlaps the dual operator (tr = {overlap:.3e}); "
                                     "the input does not define a bounded process", trace)
            V, removed = _kernel_isometry(omega, 1e-9)
            if V.shape[1] == 0:
                raise ReductionError("growing eigenvector is strictly positive", trace)
            maps, rho, identity = compress(maps, rho, identity, V)
            changed = True
            kind, detail = ("dual-pass", "sieve") if dual else ("sieve", "")
            trace.add(ReductionStep(kind, lam, removed, V.shape[1],
                                    _deviation(maps, rho, identity, reference, alphabet, check_length), detail))
            continue
        if lam < 1 - UNIT_EIGENVALUE_TOL:
            raise ReductionError(f"growth rate {lam:.6g} < 1: the input does not define a normalized process",
                                 trace)
        moved = float(np.abs(omega - current).max())
        if dual:
            rho = omega
        else:
            identity = omega
        if moved > 1e-10:
            changed = True
        kind, detail = ("dual-pass", "cesaro") if dual else ("cesaro", "")
        trace.add(ReductionStep(kind, lam, 0, maps[0].n,
                                _deviation(maps, rho, identity, reference, alphabet, check_length), detail))
        return maps, rho, identity, changed


def _deviation(maps, rho, identity, reference, alphabet, check_length) -> float:
    probs = _probabilities(maps, rho, identity, check_length, alphabet)
    return max(float(np.abs(p - q).max()) for p, q in zip(probs, reference))


def reduce_to_realization(maps, rho, identity, tol: float = 1e-9, alphabet=None, check_length: int = 4,
                          max_rounds: int | None = None) -> tuple[CPRealization, ReductionTrace]:
    """Reduce CP maps with PSD ``(rho, identity)`` to a unital CP realization of the same process."""
    maps = list(maps.maps if isinstance(maps, QuantumInstrument) else maps)
    if alphabet is None:
        alphabet = Alphabet(tuple(str(i) for i in range(len(maps))))
    elif not isinstance(alphabet, Alphabet):
        alphabet = Alphabet(tuple(alphabet))
    rho = hermitize(np.asarray(rho, dtype=complex))
    identity = hermitize(np.asarray(identity, dtype=complex))
    n = maps[0].n
    for name, X in (("rho", rho), ("identity", identity)):
        lo = np.linalg.eigvalsh(X)[0]
        if lo < -1e-7 * max(1.0, np.abs(X).max()):
            raise PreconditionError(f"{name} is not PSD (min eigenvalue {lo:.3e})")
    rho, identity = _clip_psd(rho, 0.0), _clip_psd(identity, 0.0)
    scale = float(np.trace(rho @ identity).real)
    if scale <= 0:
        raise PreconditionError("tr[rho identity] must be positive")
    rho = rho / scale
    trace = ReductionTrace(n, scale)
    reference = _probabilities(maps, rho, identity, check_length, alphabet)
    max_rounds = max_rounds or 2 * n * n + 4
    for _ in range(max_rounds):
        maps, rho, identity, primal_changed = _boundary_pass(maps, rho, identity, trace, reference, alphabet,
                                                             check_length, tol, dual=False)
        maps, rho, identity, dual_changed = _boundary_pass(maps, rho, identity, trace, reference, alphabet,
                                                           check_length, tol, dual=True)
        total = sum(F.matrix for F in maps)
        fixed = (np.abs(total @ coords(identity) - coords(identity)).max() <= 1e-9
                 and np.abs(total.T @ coords(rho) - coords(rho)).max() <= 1e-9)
        if fixed:
            break
    else:
        raise ReductionError(f"no fixed point after {max_rounds} rounds", trace)
    # restrict to the support of identity
    w, V = np.linalg.eigh(identity)
    keep = w > 1e-9 * max(1.0, w.max())
    removed = int((~keep).sum())
    if removed:
        maps, rho, identity = compress(maps, rho, identity, V[:, keep])
    trace.add(ReductionStep("restrict", None, removed, maps[0].n,
                            _deviation(maps, rho, identity, reference, alphabet, check_length)))
    root = psd_sqrt(identity)
    inv_root = psd_sqrt(identity, inverse=True)
    k = maps[0].n
    basis = hermitian_basis(k)
    conj = lambda A: coords(np.einsum("ij,xjk,kl->xil", A, basis.elements(), A)).T
    N, N_inv = conj(inv_root), conj(root)
    maps = [SuperOperator(k, N @ F.matrix @ N_inv) for F in maps]
    rho = hermitize(root @ rho @ root)
    identity = np.eye(k, dtype=complex)
    trace.add(ReductionStep("normalize", None, 0, k,
                            _deviation(maps, rho, identity, reference, alphabet, check_length)))
    return CPRealization(QuantumInstrument(alphabet, maps), rho, identity), trace
