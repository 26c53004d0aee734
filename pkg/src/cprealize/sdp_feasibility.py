"""Feasibility of ``{X Hermitian : X >= 0, <A_i, X> = b_i}`` by alternating projections.

Everything is expressed in real coordinates over the orthonormal Hermitian
basis of Herm(N) (see :mod:`cprealize.quantum_ops`); complex arithmetic only
appears inside the eigendecompositions of the PSD projection.

The solver runs Dykstra's alternating projections between the PSD cone and
the affine set.  Two exits are exact in the sense that the returned point is
checked against every constraint: the iterate itself, or a *face polish*
that solves the affine constraints restricted to the dominant eigenspace of
the current PSD iterate.  The polish matters for instances whose feasible set
touches the cone boundary only (rank-deficient solutions), where plain
alternating projections converge sublinearly.  Infeasibility is declared
heuristically when the distance between the two sets stalls above a
threshold over a sliding window.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .quantum_ops import hermitian_basis

log = logging.getLogger(__name__)


class InconsistentConstraintsError(ValueError):
    """The affine constraint system has no solution at all."""


@dataclass(frozen=True)
class EngineConfig:
    max_iter: int = 10_000
    tol_feas: float = 1e-9
    tol_stall: float = 1e-6
    stall_window: int = 500
    stall_rel: float = 1e-6
    seed: int = 0
    polish_every: int = 25
    debug: bool = False

    def with_overrides(self, **kw) -> "EngineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass(frozen=True)
class FeasibilityOutcome:
    """Result of a feasibility solve.

    ``status`` is ``"feasible"``, ``"infeasible"`` or ``"undecided"``.  Feasible
    outcomes carry a witness (coordinates and matrix); infeasible ones the
    stalled gap and the window over which it stalled.
    """

    status: str
    witness: np.ndarray | None = None
    witness_coords: np.ndarray | None = None
    gap: float | None = None
    window: int | None = None
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    history: tuple = ()
    extras: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    @property
    def infeasible(self) -> bool:
        return self.status == "infeasible"

    @property
    def undecided(self) -> bool:
        return self.status == "undecided"

    def to_dict(self) -> dict:
        out = {"status": self.status, "iterations": self.iterations, "residuals": self.residuals}
        if self.gap is not None:
            out["gap"] = self.gap
            out["window"] = self.window
        if self.witness_coords is not None:
            out["witness_coords"] = self.witness_coords.tolist()
        return out


class FeasibilityProblem:
    """Affine slice of Herm(N) intersected with the PSD cone.

    :param dim: matrix side length N
    :param A: constraint rows in Herm(N) coordinates, shape ``(m, N^2)``
    :param b: right-hand sides, shape ``(m,)``
    :param subspace: optional orthonormal basis ``(N^2, s)`` restricting X
    :param rank_tol: relative threshold for dropping dependent constraint rows

    Rows are restricted to the subspace, dependent rows are removed through
    the singular value decomposition of the restricted row matrix (equivalently
    the eigendecomposition of its Gram matrix) and consistency of ``b`` is
    checked.  The problem is immutable afterwards.
    """

    def __init__(self, dim: int, A, b, subspace: np.ndarray | None = None, rank_tol: float = 1e-10):
        N2 = dim * dim
        A = np.asarray(A, dtype=float).reshape(-1, N2)
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise ValueError(f"{A.shape[0]} constraint rows but {b.size} right-hand sides")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("constraints must be finite")
        self.dim = dim
        self.basis = hermitian_basis(dim)
        if subspace is not None:
            B = np.asarray(subspace, dtype=float).reshape(N2, -1)
            gram = B.T @ B
            if np.abs(gram - np.eye(B.shape[1])).max(initial=0.0) > 1e-8:
                raise ValueError("subspace basis must be orthonormal")
        else:
            B = None
        self.subspace = B
        A_s = A @ B if B is not None else A
        if A_s.shape[0]:
            U, s, vh = np.linalg.svd(A_s, full_matrices=False)
            smax = s[0] if s.size else 0.0
            keep = s > rank_tol * max(smax, 1.0) if smax > 0 else np.zeros(s.size, bool)
        else:
            U, s, vh, keep = np.zeros((0, 0)), np.zeros(0), np.zeros((0, A_s.shape[1])), np.zeros(0, bool)
        self.rank = int(keep.sum())
        self._vh = vh[keep]
        particular = self._vh.T @ ((U[:, keep].T @ b) / s[keep]) if self.rank else np.zeros(A_s.shape[1])
        inconsistency = float(np.linalg.norm(A_s @ particular - b)) if b.size else 0.0
        if inconsistency > 1e-8 * max(1.0, float(np.linalg.norm(b))):
            raise InconsistentConstraintsError(
                f"constraint system is inconsistent (least-squares residual {inconsistency:.3g})")
        self._particular = particular
        self.A, self.b = A, b
        self.A.setflags(write=False)
        self.b.setflags(write=False)
        self.num_dropped = A.shape[0] - self.rank

    @property
    def nvars(self) -> int:
        return self.dim * self.dim if self.subspace is None else self.subspace.shape[1]

    @property
    def homogeneous(self) -> bool:
        return not np.any(self.b)

    # coordinate helpers ---------------------------------------------------
    def to_matrix(self, x: np.ndarray) -> np.ndarray:
        return self.basis.matrix(x)

    def to_coords(self, X: np.ndarray) -> np.ndarray:
        return self.basis.coords(X)

    def _reduce(self, x: np.ndarray) -> np.ndarray:
        return self.subspace.T @ x if self.subspace is not None else x

    def _expand(self, c: np.ndarray) -> np.ndarray:
        return self.subspace @ c if self.subspace is not None else c

    def residual(self, x: np.ndarray) -> float:
        """Largest violation of the linear constraints (and of the subspace restriction)."""
        r = float(np.abs(self.A @ x - self.b).max(initial=0.0))
        if self.subspace is not None:
            r = max(r, float(np.linalg.norm(x - self._expand(self._reduce(x)))))
        return r


def project_psd(X: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped)."""
    X = np.asarray(X, dtype=complex)
    w, V = np.linalg.eigh((X + X.conj().T) / 2)
    return (V * np.clip(w, 0.0, None)) @ V.conj().T


def _project_psd_coords(problem: FeasibilityProblem, x: np.ndarray):
    w, V = np.linalg.eigh(problem.to_matrix(x))
    wc = np.clip(w, 0.0, None)
    return problem.to_coords((V * wc) @ V.conj().T), w, V


def project_affine(x: np.ndarray, problem: FeasibilityProblem) -> np.ndarray:
    """Orthogonal projection of coordinates ``x`` onto the affine constraint set."""
    c = problem._reduce(np.asarray(x, dtype=float))
    vh = problem._vh
    c = c - vh.T @ (vh @ c) + problem._particular
    return problem._expand(c)


def _polish(problem: FeasibilityProblem, x: np.ndarray, tol: float, tried: set):
    """Try to land exactly on the feasible set inside a face of the PSD cone.

    The face is spanned by the dominant eigenvectors of the PSD iterate ``x``;
    the affine constraints are solved for ``Y`` in ``V Y V^dagger`` by a
    minimum-norm correction from the current point.
    """
    M = problem.to_matrix(x)
    w, V = np.linalg.eigh(M)
    wmax = w[-1]
    if wmax <= 0:
        return None
    for rel in (1e-2, 1e-4, 1e-6, 1e-8):
        k = int((w > rel * wmax).sum())
        if k == 0 or k in tried:
            continue
        tried.add(k)
        Vk = V[:, -k:]
        basis_k = hermitian_basis(k)
        face = basis_k.elements()
        T = problem.to_coords(np.einsum("ia,kab,jb->kij", Vk, face, Vk.conj())).T
        rows = [problem.A @ T]
        rhs = [problem.b]
        if problem.subspace is not None:
            B = problem.subspace
            rows.append(T - B @ (B.T @ T))
            rhs.append(np.zeros(T.shape[0]))
        G = np.vstack(rows)
        h = np.concatenate(rhs)
        y0 = T.T @ x
        corr, *_ = np.linalg.lstsq(G, G @ y0 - h, rcond=None)
        y = y0 - corr
        if np.linalg.norm(G @ y - h) <= tol * 0.1 * max(1.0, np.linalg.norm(h)):
            lam = np.linalg.eigvalsh(basis_k.matrix(y))
            cand = T @ y
            if lam[0] >= -tol * 0.1 and _acceptable(problem, cand, tol):
                return cand
        cand = _factor_refine(problem, Vk * np.sqrt(w[-k:]), tol)
        if cand is not None:
            return cand
    return None


def _acceptable(problem, x, tol) -> bool:
    return problem.residual(x) < tol and np.linalg.eigvalsh(problem.to_matrix(x))[0] >= -tol


def _factor_refine(problem: FeasibilityProblem, V: np.ndarray, tol: float, steps: int = 30):
    """Gauss-Newton on ``X = V V^dagger``: solves the linear constraints while staying PSD."""
    N, k = V.shape
    B = problem.subspace
    rows = [problem._vh if B is None else problem._vh @ B.T]
    offset = [problem._vh @ problem._particular]
    if B is not None:
        rows.append(np.eye(N * N) - B @ B.T)
        offset.append(np.zeros(N * N))
    M = np.vstack(rows)
    target = np.concatenate(offset)
    basis = problem.basis
    eye = np.eye(N)
    for _ in range(steps):
        x = basis.coords(V @ V.conj().T)
        r = M @ x - target
        if np.abs(r).max(initial=0.0) < 1e-3 * tol:
            break
        # derivative of coords(V V^dagger) along real and imaginary unit perturbations of V
        outer = np.einsum("ia,jb->abij", eye, V.conj())           # e_i v_b^dagger, indexed (i, b)
        real = outer + np.conj(np.swapaxes(outer, -1, -2))
        imag = 1j * outer - 1j * np.conj(np.swapaxes(outer, -1, -2))
        Dr = basis.coords(real.reshape(-1, N, N))
        Di = basis.coords(imag.reshape(-1, N, N))
        J = M @ np.vstack([Dr, Di]).T
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        V = V + (step[:N * k] + 1j * step[N * k:]).reshape(N, k)
        if not np.all(np.isfinite(V)):
            return None
    x = basis.coords(V @ V.conj().T)
    return x if _acceptable(problem, x, tol) else None


def solve(problem: FeasibilityProblem, config: EngineConfig | None = None,
          start: np.ndarray | None = None, **overrides) -> FeasibilityOutcome:
    """Dykstra alternating projections with face polishing and stall detection.

    :param start: optional warm-start coordinates (e.g. an order-unit interior point);
        otherwise a seeded random Hermitian start is used.
    """
    cfg = (config or EngineConfig()).with_overrides(**overrides)
    N2 = problem.dim ** 2
    if problem.homogeneous:
        zero = np.zeros(N2)
        return FeasibilityOutcome("feasible", problem.to_matrix(zero), zero, iterations=0,
                                  residuals={"affine": 0.0, "psd": 0.0})
    rng = np.random.default_rng(cfg.seed)
    if start is None:
        scale = max(float(np.linalg.norm(problem._particular)), 1.0)
        x = rng.standard_normal(N2) * scale / np.sqrt(N2)
    else:
        x = np.asarray(start, dtype=float).copy()
    q = np.zeros(N2)
    gaps = []
    tried: set = set()
    last_dist = np.inf
    for it in range(1, cfg.max_iter + 1):
        a = project_affine(x, problem)
        y = a + q
        c, _, _ = _project_psd_coords(problem, y)
        q = y - c
        x = c
        lam_a = np.linalg.eigvalsh(problem.to_matrix(a))
        dist = float(np.linalg.norm(np.clip(lam_a, None, 0.0)))
        gaps.append(dist)
        if cfg.debug:
            log.debug("iteration %d: distance %.3e", it, dist)
            assert dist <= last_dist + 1e-12 * max(1.0, last_dist), \
                f"distance increased at iteration {it}: {last_dist:.3e} -> {dist:.3e}"
        last_dist = dist
        if lam_a[0] >= -cfg.tol_feas:
            res = problem.residual(a)
            if res < cfg.tol_feas:
                return _feasible(problem, a, it, gaps, cfg)
        res_c = problem.residual(c)
        if res_c < cfg.tol_feas:
            return _feasible(problem, c, it, gaps, cfg)
        if it % cfg.polish_every == 0:
            if it % (cfg.polish_every * 20) == 0:
                tried.clear()
            cand = _polish(problem, c, cfg.tol_feas, tried)
            if cand is not None:
                return _feasible(problem, cand, it, gaps, cfg, polished=True)
        if it > cfg.stall_window:
            old = gaps[-cfg.stall_window - 1]
            if dist > cfg.tol_stall and abs(old - dist) <= cfg.stall_rel * dist:
                return FeasibilityOutcome("infeasible", gap=dist, window=cfg.stall_window, iterations=it,
                                          residuals={"affine": float(res_c), "psd": dist},
                                          history=_thin(gaps))
    lam_min = float(np.linalg.eigvalsh(problem.to_matrix(a))[0])
    return FeasibilityOutcome("undecided", gap=gaps[-1], iterations=cfg.max_iter,
                              residuals={"affine": float(problem.residual(x)), "psd": lam_min},
                              history=_thin(gaps))


def _feasible(problem, x, it, gaps, cfg, polished=False) -> FeasibilityOutcome:
    X = problem.to_matrix(x)
    lam = float(np.linalg.eigvalsh(X)[0])
    res = problem.residual(x)
    assert lam >= -cfg.tol_feas and res < cfg.tol_feas, "feasible witness violates constraints"
    return FeasibilityOutcome("feasible", X, x, iterations=it,
                              residuals={"affine": float(res), "psd": lam},
                              history=_thin(gaps), extras={"polished": polished})


def _thin(values, keep: int = 200) -> tuple:
    if len(values) <= keep:
        return tuple(values)
    idx = np.unique(np.linspace(0, len(values) - 1, keep).astype(int))
    return tuple(values[i] for i in idx)
