"""Semidefinite-representable cones and the mapping cone of quotient maps.

An :class:`SDRCone` is ``C = L(W+)``: the image of the PSD elements of a
subspace ``W`` of Herm(n) under a linear map ``L`` into ``R^r``.  Its dual is
``C* = L~((W~ + W^perp)+)`` and its level-k extension is
``C_k = (L (x) 1_k)((W (x) Herm(k))+)``.

A :class:`MappingConeSpec` fixes ``(W, W~)`` inside Herm(n).  A map ``D`` on
``V = W / K`` (``K = W cap W~^perp``) belongs to the mapping cone ``P`` when it
is induced by a completely positive map ``F`` with ``F(W) in W`` and
``F(K) in K``.  Membership is an SDP feasibility problem over the Choi matrix
of ``F``.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass

import numpy as np

from .process_core import QuasiRealization, probability_array
from .quantum_ops import (SuperOperator, choi, coords, from_coords, hermitian_basis, matrix_to_json,
                          partial_transpose)
from .quotient import Subspace, intersect_with_annihilator, orthonormal_complement, quotient_realization
from .sdp_feasibility import (EngineConfig, FeasibilityOutcome, FeasibilityProblem,
                              InconsistentConstraintsError, solve)


class PreconditionError(ValueError):
    pass


def _infeasible_by_inconsistency(exc: Exception) -> FeasibilityOutcome:
    return FeasibilityOutcome("infeasible", gap=float("inf"), window=0, iterations=0,
                              residuals={"reason": str(exc)})


def subspace_from_matrices(mats, rank_tol: float = 1e-9) -> Subspace:
    """Span of Hermitian matrices, in Herm(n) coordinates."""
    mats = np.asarray(mats)
    return Subspace.span(coords(mats).T, rank_tol)


@dataclass(frozen=True)
class SDRCone:
    """``C = L(W+)`` with ``W`` a subspace of Herm(n) and ``L: W-coordinates -> R^r``."""

    n: int
    W: Subspace
    L: np.ndarray

    def __post_init__(self):
        L = np.array(self.L, dtype=float).reshape(-1, self.W.rank)
        L.setflags(write=False)
        object.__setattr__(self, "L", L)
        if self.W.ambient_dim != self.n * self.n:
            raise ValueError("W must live in Herm(n) coordinates")

    @classmethod
    def from_matrices(cls, n: int, W_mats, images, rank_tol: float = 1e-9) -> "SDRCone":
        """Cone from spanning matrices of W and their images ``L(W_k)`` (columns of ``images``)."""
        G = coords(np.asarray(W_mats)).T
        W = Subspace.span(G, rank_tol)
        images = np.asarray(images, dtype=float)
        if images.ndim == 1:
            images = images[None, :]
        # L on orthonormal W coordinates: x = G c  ->  L x = images c
        L = images @ np.linalg.pinv(G) @ W.basis
        if np.abs(L @ W.basis.T @ G - images).max(initial=0.0) > 1e-8 * max(1.0, np.abs(images).max()):
            raise ValueError("images are inconsistent with linear dependencies among W matrices")
        return cls(n, W, L)

    @property
    def r(self) -> int:
        return self.L.shape[0]

    @functools.cached_property
    def L_ambient(self) -> np.ndarray:
        """``L`` acting on Herm(n) coordinates (zero on ``W^perp``)."""
        return self.L @ self.W.basis.T

    @functools.cached_property
    def kernel(self) -> Subspace:
        _, s, vh = np.linalg.svd(self.L, full_matrices=True)
        s = np.concatenate([s, np.zeros(self.W.rank - s.size)])
        null = vh[s <= 1e-10 * max(1.0, s.max(initial=0.0))]
        return Subspace(self.W.ambient_dim, self.W.basis @ null.T)

    @functools.cached_property
    def lift(self) -> np.ndarray:
        """Right inverse of ``L_ambient`` with range in ``W cap K^perp``."""
        C = orthonormal_complement(self.kernel.basis, self.W.ambient_dim)
        C = self.W.basis @ (self.W.basis.T @ C)
        C = Subspace.span(C).basis
        return C @ np.linalg.inv(self.L_ambient @ C)

    @functools.cached_property
    def dual_subspace(self) -> Subspace:
        """``W~ + W^perp = K^perp``, the domain of ``L~``."""
        return self.kernel.complement()

    def dual_map(self, y: np.ndarray) -> np.ndarray:
        """``L~(y)``: the covector ``f`` with ``f(L(w)) = <y, w>`` for ``w`` in W."""
        return np.asarray(y, dtype=float) @ self.lift

    def image(self, w: np.ndarray) -> np.ndarray:
        """``L(w)`` for a Hermitian matrix ``w`` in W."""
        return self.L_ambient @ coords(w)


def cone_membership(C: SDRCone, x, config: EngineConfig | None = None, **kw) -> FeasibilityOutcome:
    """Find PSD ``w`` in W with ``L(w) = x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != C.r:
        raise ValueError(f"vector has length {x.size}, cone lives in R^{C.r}")
    try:
        prob = FeasibilityProblem(C.n, C.L_ambient, x, C.W.basis)
    except InconsistentConstraintsError as exc:
        return _infeasible_by_inconsistency(exc)
    return solve(prob, config, **kw)


def dual_cone_membership(C: SDRCone, f, Wt: Subspace | None = None,
                         config: EngineConfig | None = None, **kw) -> FeasibilityOutcome:
    """Find PSD ``Y`` in ``W~ + W^perp`` with ``<Y, w> = f(L(w))`` on a basis of W."""
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size != C.r:
        raise ValueError(f"covector has length {f.size}, cone lives in R^{C.r}")
    if Wt is not None:
        K, _, _ = intersect_with_annihilator(C.W, Wt)
        if K.rank != C.kernel.rank or not C.kernel.contains(K, 1e-7):
            raise PreconditionError("W cap Wt^perp does not match the kernel of L")
    Wb = C.W.basis
    try:
        prob = FeasibilityProblem(C.n, Wb.T, C.L.T @ f, C.dual_subspace.basis)
    except InconsistentConstraintsError as exc:
        return _infeasible_by_inconsistency(exc)
    return solve(prob, config, **kw)


def block_coordinates(X: np.ndarray, element_mats, level: int) -> np.ndarray:
    """Blocks ``X_i = tr_1[(B_i (x) 1) X]`` of an operator on ``C^d (x) C^level``.

    ``element_mats`` is an orthonormal Hermitian basis whose coordinates are
    the V coordinates, so ``X = sum_i B_i (x) X_i``.
    """
    X = np.asarray(X, dtype=complex)
    d = element_mats[0].shape[0]
    X4 = X.reshape(d, level, d, level)
    return np.einsum("xba,aibj->xij", np.asarray(element_mats), X4)


def cone_extension_membership(C: SDRCone, level: int, X, config: EngineConfig | None = None,
                              **kw) -> FeasibilityOutcome:
    """Level-k test: PSD ``Z`` in ``W (x) Herm(k)`` with ``(L (x) 1)(Z) = X``.

    ``X`` has shape ``(r, k, k)``: ``X = sum_i e_i (x) X_i`` with Hermitian blocks.
    """
    X = np.asarray(X, dtype=complex)
    if X.shape != (C.r, level, level):
        raise ValueError(f"block vector must have shape {(C.r, level, level)}, got {X.shape}")
    W_mats = from_coords(C.W.basis.T, C.n)
    h = hermitian_basis(level).elements()
    big = C.n * level
    prods = np.einsum("aij,bkl->abikjl", W_mats, h).reshape(len(W_mats), len(h), big, big)
    basis = hermitian_basis(big).coords(prods)          # (w, k^2, big^2)
    rows = np.einsum("ia,abx->ibx", C.L, basis).reshape(-1, big * big)
    rhs = hermitian_basis(level).coords(X).reshape(-1)
    sub = basis.reshape(-1, big * big).T
    try:
        prob = FeasibilityProblem(big, rows, rhs, sub)
    except InconsistentConstraintsError as exc:
        return _infeasible_by_inconsistency(exc)
    return solve(prob, config, **kw)


def is_proximinal(C: SDRCone, config: EngineConfig | None = None) -> bool:
    """``ker L cap PSD = {0}``: no unit-trace PSD element in the kernel."""
    K = C.kernel
    if K.rank == 0:
        return True
    trace_row = coords(np.eye(C.n))[None, :]
    try:
        prob = FeasibilityProblem(C.n, trace_row, [1.0], K.basis)
    except InconsistentConstraintsError:
        return True
    return not solve(prob, config).feasible


def is_proper(C: SDRCone, config: EngineConfig | None = None, samples: int = 3) -> bool:
    """``W = span(W+)``, tested through the support of (sums of) PSD elements of W."""
    e = from_coords(C.W.project(coords(np.eye(C.n))), C.n)
    if np.linalg.eigvalsh(e)[0] > 1e-9:
        return True
    trace_row = coords(np.eye(C.n))[None, :]
    try:
        prob = FeasibilityProblem(C.n, trace_row, [1.0], C.W.basis)
    except InconsistentConstraintsError:
        return False
    cfg = config or EngineConfig()
    acc = np.zeros((C.n, C.n), complex)
    for s in range(samples):
        out = solve(prob, cfg.with_overrides(seed=cfg.seed + s))
        if out.feasible:
            acc += out.witness
    w, V = np.linalg.eigh(acc)
    if w[-1] <= 0:
        return False
    P = V[:, w > 1e-7 * w[-1]]
    P = P @ P.conj().T
    mats = from_coords(C.W.basis.T, C.n)
    return all(np.abs(P @ M @ P - M).max() < 1e-6 for M in mats)


# Mapping cone ---------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def choi_transform(n: int, partial: bool = False) -> np.ndarray:
    """Orthogonal matrix taking flattened superoperator matrices to Choi coordinates.

    With ``partial`` the target is the partial transpose of the Choi matrix on
    the second factor, i.e. the Choi matrix of ``F o transpose``.
    """
    d = n * n
    cols = np.empty((d * d, d * d))
    for p in range(d):
        for q in range(d):
            E = np.zeros((d, d))
            E[p, q] = 1.0
            M = choi(SuperOperator(n, E))
            if partial:
                M = partial_transpose(M, (n, n), system=1)
            cols[:, p * d + q] = hermitian_basis(d).coords(M)
    cols.setflags(write=False)
    return cols


class MappingConeSpec:
    """Pair ``(W, W~)`` in Herm(n) with the induced quotient ``V = W / K``.

    :param L: optional map from orthonormal W coordinates to V coordinates with
        kernel K; by default the orthogonal complement of K in W supplies V.
    """

    def __init__(self, n: int, W: Subspace, Wt: Subspace, L: np.ndarray | None = None,
                 rank_tol: float = 1e-9):
        self.n = n
        self.W, self.Wt = W, Wt
        self.rank_tol = rank_tol
        K, Cw, sines = intersect_with_annihilator(W, Wt, rank_tol)
        self.K = K
        if L is None:
            L = Cw.basis.T @ W.basis
        L = np.asarray(L, dtype=float)
        self.cone = SDRCone(n, W, L)
        kernel = self.cone.kernel
        if kernel.rank != K.rank or not kernel.contains(K, 1e-7):
            raise PreconditionError("kernel of L differs from W cap Wt^perp")

    @classmethod
    def from_matrices(cls, n, W_mats, Wt_mats, L_images=None, rank_tol: float = 1e-9):
        Wt = subspace_from_matrices(Wt_mats, rank_tol)
        if L_images is None:
            return cls(n, subspace_from_matrices(W_mats, rank_tol), Wt, None, rank_tol)
        cone = SDRCone.from_matrices(n, W_mats, L_images, rank_tol)
        return cls(n, cone.W, Wt, cone.L, rank_tol)

    @property
    def r(self) -> int:
        return self.cone.r

    @functools.cached_property
    def proximinal(self) -> bool:
        return is_proximinal(self.cone)

    @functools.cached_property
    def map_subspace(self) -> Subspace:
        """``S = W (x) K^perp + K (x) all + all (x) W^perp`` in flattened superoperator coordinates."""
        d = self.n * self.n
        I = np.eye(d)
        Wb, Kb = self.W.basis, self.K.basis
        Kperp = orthonormal_complement(Kb, d)
        Wperp = orthonormal_complement(Wb, d)
        parts = [np.einsum("ia,jb->ijab", Wb, Kperp).reshape(d * d, -1),
                 np.einsum("ia,jb->ijab", Kb, I).reshape(d * d, -1),
                 np.einsum("ia,jb->ijab", I, Wperp).reshape(d * d, -1)]
        S = Subspace.span(np.hstack(parts), 1e-10)
        w, k = self.W.rank, self.K.rank
        c, rest = w - k, d - w
        expected = d * d - (c * k + rest * k + rest * c)
        if S.rank != expected:
            raise AssertionError(f"map subspace has dimension {S.rank}, rank formula gives {expected}")
        return S

    def stability_rows(self, strict: bool = False):
        """Linear functionals (flattened superoperator coordinates) vanishing on admissible maps."""
        d = self.n * self.n
        Wperp = orthonormal_complement(self.W.basis, d)
        rows = [np.einsum("ia,jb->abij", Wperp, self.W.basis).reshape(-1, d * d)]
        Kperp = orthonormal_complement(self.K.basis, d)
        rows.append(np.einsum("ia,jb->abij", Kperp, self.K.basis).reshape(-1, d * d))
        if strict:
            Wt_perp = orthonormal_complement(self.Wt.basis, d)
            rows.append(np.einsum("ia,jb->abij", self.Wt.basis, Wt_perp).reshape(-1, d * d))
        return np.vstack(rows)

    def order_unit_map(self) -> np.ndarray | None:
        """Flattened superoperator of ``X -> e tr(e~ X)`` for positive definite e in W, e~ in K^perp."""
        I = coords(np.eye(self.n))
        e = self.W.project(I)
        et = self.cone.dual_subspace.project(I)
        if min(np.linalg.eigvalsh(from_coords(e, self.n))[0],
               np.linalg.eigvalsh(from_coords(et, self.n))[0]) <= 1e-9:
            return None
        return np.outer(e, et).reshape(-1)

    def to_dict(self) -> dict:
        """Spec JSON; ``L`` lists the images of the listed W matrices."""
        return {"n": self.n,
                "W": [matrix_to_json(M) for M in from_coords(self.W.basis.T, self.n)],
                "Wt": [matrix_to_json(M) for M in from_coords(self.Wt.basis.T, self.n)],
                "L": self.cone.L.tolist()}


def spec_from_dict(data: dict) -> MappingConeSpec:
    from .process_core import StructuralError
    from .quantum_ops import matrix_from_json

    try:
        n = int(data["n"])
        W = [matrix_from_json(M) for M in data["W"]]
        Wt = [matrix_from_json(M) for M in data["Wt"]]
    except KeyError as exc:
        raise StructuralError(f"spec is missing field {exc}") from None
    for name, mats in (("W", W), ("Wt", Wt)):
        for k, M in enumerate(mats):
            if M.shape != (n, n):
                raise StructuralError(f"{name}[{k}] has shape {M.shape}, expected {(n, n)}")
            if np.abs(M - M.conj().T).max() > 1e-9:
                raise StructuralError(f"{name}[{k}] is not Hermitian")
    L = data.get("L")
    if L is not None:
        L = np.asarray(L, dtype=float)
        if L.ndim != 2 or L.shape[1] != len(W):
            raise StructuralError(f"L must have one column per W matrix ({len(W)}), got shape {L.shape}")
    return MappingConeSpec.from_matrices(n, W, Wt, L)


def load_spec(path) -> MappingConeSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))


def save_spec(spec: MappingConeSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=1)


def mapping_cone_problem(spec: MappingConeSpec, D: np.ndarray, strict: bool = False,
                         relaxation: str = "cp") -> FeasibilityProblem:
    D = np.asarray(D, dtype=float)
    if D.shape != (spec.r, spec.r):
        raise ValueError(f"map must be {spec.r}x{spec.r}, got {D.shape}")
    d = spec.n * spec.n
    Q = choi_transform(spec.n, partial=(relaxation == "co-cp"))
    if relaxation not in ("cp", "co-cp"):
        raise ValueError("relaxation must be 'cp' or 'co-cp'")
    L_amb = spec.cone.L_ambient
    Wb = spec.W.basis
    rows = np.einsum("ip,qk->ikpq", L_amb, Wb).reshape(-1, d * d)
    rhs = (D @ spec.cone.L).reshape(-1)
    if strict:
        extra = spec.stability_rows(strict=True)[-(spec.Wt.rank * (d - spec.Wt.rank)):]
        rows = np.vstack([rows, extra])
        rhs = np.concatenate([rhs, np.zeros(extra.shape[0])])
    sub = Q @ spec.map_subspace.basis
    return FeasibilityProblem(d, rows @ Q.T, rhs, sub)


def mapping_cone_membership(spec: MappingConeSpec, D, config: EngineConfig | None = None,
                            strict: bool = False, relaxation: str = "cp", warm_start: bool = True,
                            **kw) -> FeasibilityOutcome:
    """Is ``D`` induced by a CP map ``F`` of the spec's form?  Witness in ``extras['map']``.

    :param strict: additionally require ``F*(W~) in W~`` literally (not only modulo ``W^perp``)
    :param relaxation: ``"cp"``, or ``"co-cp"`` to search maps ``F`` with ``F o transpose`` CP
        (a diagnostic relaxation that certifies positivity of the lift without complete positivity)
    """
    if not spec.proximinal:
        raise PreconditionError("K contains nonzero PSD elements")
    try:
        prob = mapping_cone_problem(spec, D, strict, relaxation)
    except InconsistentConstraintsError as exc:
        return _infeasible_by_inconsistency(exc)
    start = None
    if warm_start and "start" not in kw:
        unit = spec.order_unit_map()
        if unit is not None:
            Q = choi_transform(spec.n, partial=(relaxation == "co-cp"))
            start = Q @ unit
    out = solve(prob, config, start=kw.pop("start", start), **kw)
    if out.feasible:
        Q = choi_transform(spec.n, partial=(relaxation == "co-cp"))
        d = spec.n * spec.n
        F = SuperOperator(spec.n, (Q.T @ out.witness_coords).reshape(d, d))
        out.extras["map"] = F
    return out


def witness_residuals(spec: MappingConeSpec, F: SuperOperator, D: np.ndarray) -> dict:
    """Stability and quotient-relation residuals of a lifted map."""
    S = F.matrix
    Wb, Kb, Wtb = spec.W.basis, spec.K.basis, spec.Wt.basis
    img_W = S @ Wb
    out = {
        "F(W) in W": spec.W.distance(img_W) if Wb.size else 0.0,
        "F(K) in K": spec.K.distance(S @ Kb) if Kb.size else 0.0,
        "F*(W~) in W~ + W^perp": spec.cone.dual_subspace.distance(S.T @ Wtb),
        "F*(W~) in W~": spec.Wt.distance(S.T @ Wtb),
        "quotient relation": float(np.abs(spec.cone.L_ambient @ img_W - D @ spec.cone.L).max(initial=0.0)),
    }
    return {k: float(v) for k, v in out.items()}


def rank_one_structure_check(spec: MappingConeSpec, a, b, config: EngineConfig | None = None) -> dict:
    """Check ``a (x) b in P  <=>  (a in C and b in C*)`` on one pair."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    D = np.outer(a, b)
    in_P = mapping_cone_membership(spec, D, config).feasible
    in_C = cone_membership(spec.cone, a, config).feasible
    in_Cd = dual_cone_membership(spec.cone, b, None, config).feasible
    trivial = not np.any(D)
    consistent = in_P == (in_C and in_Cd) or (trivial and in_P)
    return {"in_P": in_P, "a_in_C": in_C, "b_in_dual": in_Cd, "consistent": bool(consistent)}


def _boundary_samples(subspace_mats, order_unit, count, rng):
    """Random PSD elements of a span, pushed to the cone boundary along the order unit."""
    out = []
    lam_e = np.linalg.eigvalsh(order_unit)[0]
    for _ in range(count):
        c = rng.standard_normal(len(subspace_mats))
        M = np.einsum("k,kij->ij", c, subspace_mats)
        lam = np.linalg.eigvalsh(M)[0]
        t = max(0.0, -lam / lam_e)
        out.append(M + t * order_unit)
    return out


def projection_structure_check(spec: MappingConeSpec, maps, samples: int = 10, level: int = 1,
                               seed: int = 0, config: EngineConfig | None = None) -> dict:
    """Sampled containment ``D(C) in C``, ``D*(C*) in C*`` (level 1) or ``(D (x) 1)(C_2) in C_2``."""
    rng = np.random.default_rng(seed)
    cone = spec.cone
    n = spec.n
    I = np.eye(n)
    W_mats = from_coords(spec.W.basis.T, n)
    e = from_coords(spec.W.project(coords(I)), n)
    et = from_coords(cone.dual_subspace.project(coords(I)), n)
    failures = []
    checked = 0
    if level == 1:
        xs = [cone.image(w) for w in _boundary_samples(W_mats, e, samples, rng)]
        dual_mats = from_coords(cone.dual_subspace.basis.T, n)
        fs = [cone.dual_map(coords(y)) for y in _boundary_samples(dual_mats, et, samples, rng)]
        interior = cone.dual_map(coords(et))
        for idx, D in enumerate(maps):
            D = np.asarray(D, dtype=float)
            for x in xs:
                checked += 1
                if not cone_membership(cone, D @ x, config).feasible:
                    failures.append({"map": idx, "kind": "C"})
            for f in fs + [interior]:
                checked += 1
                if not dual_cone_membership(cone, f @ D, None, config).feasible:
                    failures.append({"map": idx, "kind": "C*"})
    else:
        h = hermitian_basis(level).elements()
        big_mats = np.einsum("aij,bkl->abikjl", W_mats, h).reshape(-1, n * level, n * level)
        unit = np.kron(e, np.eye(level))
        Zs = _boundary_samples(big_mats, unit, samples, rng)
        for idx, D in enumerate(maps):
            D = np.asarray(D, dtype=float)
            for Z in Zs:
                Zc = hermitian_basis(n * level).coords(Z)
                # blocks X_i = sum_a L[i, a] Z_a with Z = sum_a w_a (x) Z_a
                comps = np.einsum("abx,x->ab", hermitian_basis(n * level).coords(
                    big_mats.reshape(len(W_mats), len(h), n * level, n * level)), Zc)
                X = np.einsum("ia,ab->ib", cone.L, comps)
                DX = hermitian_basis(level).matrix(D @ X)
                checked += 1
                if not cone_extension_membership(cone, level, DX, config).feasible:
                    failures.append({"map": idx, "kind": f"C_{level}"})
    return {"passed": not failures, "checked": checked, "failures": failures, "level": level}


# Certificate ----------------------------------------------------------------

def cprp_certificate(R: QuasiRealization, spec: MappingConeSpec, config: EngineConfig | None = None,
                     check_length: int = 4, reduce: bool = True) -> tuple[dict, dict]:
    """Decide the three conditions ``D^(u) in P``, ``tau in C``, ``pi in C*`` and build a CP realization.

    Returns ``(report, witnesses)``.  ``report['status']`` is ``"pass"``, ``"fail"``
    or ``"undecided"``; on a pass the witnesses are handed to the reduction
    algorithm and ``witnesses['realization']`` holds the resulting CP realization.
    """
    from .cp_realization import reduce_to_realization
    from .quantum_ops import as_quasi_realization

    conditions = []
    witnesses: dict = {}
    q = quotient_realization(R)
    if q.order != R.dim:
        raise PreconditionError(f"realization is not regular (order {q.order} < dimension {R.dim})")
    if spec.r != R.dim:
        conditions.append({"condition": "maps in P", "status": "infeasible",
                           "detail": f"spec quotient has dimension {spec.r}, realization {R.dim}"})
        return _certificate_report(conditions, None), witnesses
    maps = []
    for label, D in zip(R.alphabet, R.maps):
        out = mapping_cone_membership(spec, D, config)
        entry = {"condition": "maps in P", "symbol": label, "status": out.status,
                 "iterations": out.iterations, "residuals": out.residuals}
        if out.feasible:
            F = out.extras["map"]
            entry["witness"] = witness_residuals(spec, F, D)
            maps.append(F)
        if out.gap is not None:
            entry["gap"] = out.gap
        conditions.append(entry)
    tau_out = cone_membership(spec.cone, R.tau, config)
    conditions.append({"condition": "tau in C", "status": tau_out.status, "residuals": tau_out.residuals})
    pi_out = dual_cone_membership(spec.cone, R.pi, None, config)
    conditions.append({"condition": "pi in C*", "status": pi_out.status, "residuals": pi_out.residuals})
    realization = None
    deviation = None
    if all(c["status"] == "feasible" for c in conditions) and reduce:
        identity, rho = tau_out.witness, pi_out.witness
        witnesses.update({"maps": maps, "identity": identity, "rho": rho})
        realization, trace = reduce_to_realization(maps, rho, identity, alphabet=R.alphabet)
        witnesses["realization"] = realization
        witnesses["trace"] = trace
        Rq = as_quasi_realization(realization)
        deviation = max(float(np.abs(probability_array(Rq, l) - probability_array(R, l)).max())
                        for l in range(check_length + 1))
    report = _certificate_report(conditions, deviation)
    if realization is not None:
        report["hilbert_dim"] = realization.n
        report["trace"] = witnesses["trace"].to_dict()
    return report, witnesses


def _certificate_report(conditions, deviation) -> dict:
    statuses = [c["status"] for c in conditions]
    if any(s == "infeasible" for s in statuses):
        status = "fail"
        failing = next(c for c in conditions if c["status"] == "infeasible")["condition"]
    elif any(s == "undecided" for s in statuses):
        status = "undecided"
        failing = next(c for c in conditions if c["status"] == "undecided")["condition"]
    else:
        status, failing = "pass", None
    out = {"status": status, "failing_condition": failing, "conditions": conditions}
    if deviation is not None:
        out["max_probability_deviation"] = deviation
    return out


# Polyhedral obstruction ------------------------------------------------------

def _extreme_count(rays: np.ndarray) -> int:
    """Number of extreme rays of the cone generated by unit rows of ``rays``."""
    from scipy.optimize import linprog
    from scipy.spatial import ConvexHull, QhullError

    k, d = rays.shape
    if k <= 1:
        return k
    res = linprog(np.zeros(d), A_ub=-rays, b_ub=-np.ones(k), bounds=[(None, None)] * d, method="highs")
    if res.status != 0:
        return -1  # not pointed: no strictly positive functional
    f = res.x
    pts = rays / (rays @ f)[:, None]
    # coordinates of the slice {f . x = 1} relative to its centroid
    basis = orthonormal_complement(f[:, None] / np.linalg.norm(f), d)
    P = (pts - pts.mean(axis=0)) @ basis
    rank = np.linalg.matrix_rank(P, tol=1e-9)
    if rank < P.shape[1]:
        U, s, vh = np.linalg.svd(P, full_matrices=False)
        P = P @ vh[:rank].T
    if P.shape[1] == 0:
        return 1
    if P.shape[1] == 1:
        return 2
    try:
        return len(ConvexHull(P).vertices)
    except QhullError:
        return -1


def polyhedral_obstruction_scan(R: QuasiRealization, max_length: int, tol: float = 1e-7,
                                extreme: bool = True) -> dict:
    """Growth of the normalized ray set ``{D^(u) tau / |D^(u) tau| : |u| <= l}``.

    Rays closer than ``tol`` (Euclidean distance between unit vectors) are
    identified.  Counts per length are cumulative.  Unbounded growth is evidence
    (not proof) that no small polyhedral cone is stable under the maps.
    """
    from scipy.spatial import cKDTree

    def unit(v):
        nv = np.linalg.norm(v)
        return v / nv if nv > 1e-12 * max(1.0, np.linalg.norm(R.tau)) else None

    rays = [unit(R.tau)]
    frontier = [rays[0]]
    counts, new_counts, extremes = [1], [1], []
    if extreme:
        extremes.append(_extreme_count(np.array(rays)))
    for _ in range(max_length):
        tree = cKDTree(np.array(rays))
        fresh = []
        for v in frontier:
            for D in R.maps:
                w = unit(D @ v)
                if w is None:
                    continue
                if tree.query(w, distance_upper_bound=tol)[0] <= tol:
                    continue
                if fresh and np.min(np.linalg.norm(np.array(fresh) - w, axis=1)) <= tol:
                    continue
                fresh.append(w)
        rays.extend(fresh)
        frontier = fresh
        counts.append(len(rays))
        new_counts.append(len(fresh))
        if extreme:
            extremes.append(_extreme_count(np.array(rays)))
    growing = all(b > a for a, b in zip(counts[1:], counts[2:]))
    return {"distinct_rays": counts, "new_rays": new_counts, "extreme_rays": extremes if extreme else None,
            "saturated": new_counts[-1] == 0, "strictly_growing_from_length_1": growing}
