import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cprealize.quantum_ops import coords, hermitian_basis, random_density_matrix
from cprealize.sdp_feasibility import (EngineConfig, FeasibilityProblem, InconsistentConstraintsError,
                                       project_affine, project_psd, solve)


def entry_problem(n, constraints):
    """Constraints ``X[i, i] = v`` and ``tr X = t`` written as rows over the Hermitian basis."""
    A, b = [], []
    for kind, value in constraints:
        E = np.eye(n) if kind == "trace" else np.diag(np.eye(n)[kind])
        A.append(coords(E))
        b.append(value)
    return FeasibilityProblem(n, np.array(A), np.array(b))


@pytest.mark.parametrize("a", [0.0, 0.3, 1.0])
def test_diagonal_entry_within_trace_is_feasible(a):
    out = solve(entry_problem(2, [("trace", 1.0), (0, a)]))
    assert out.feasible
    X = out.witness
    assert np.linalg.eigvalsh(X)[0] >= -1e-9
    assert X[0, 0].real == pytest.approx(a, abs=1e-9)
    assert np.trace(X).real == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("a", [-0.5, 1.5])
def test_diagonal_entry_outside_trace_is_infeasible(a):
    out = solve(entry_problem(2, [("trace", 1.0), (0, a)]))
    assert out.infeasible
    # closest affine point is diag(a, 1 - a); its negative part has norm 0.5
    assert out.gap == pytest.approx(0.5, rel=1e-4)


def test_boundary_solution_found_by_polish():
    out = solve(entry_problem(3, [("trace", 1.0), (0, 1.0)]))
    assert out.feasible
    X = out.witness
    np.testing.assert_allclose(np.diag(X).real, [1.0, 0, 0], atol=1e-9)
    # off-diagonal couplings to a zero diagonal are only pinned to sqrt(tol)
    np.testing.assert_allclose(X, np.diag([1.0, 0, 0]), atol=1e-4)


def test_inconsistent_constraints_raise():
    A = np.array([coords(np.eye(2)), coords(np.eye(2))])
    with pytest.raises(InconsistentConstraintsError):
        FeasibilityProblem(2, A, [1.0, 2.0])


def test_dependent_rows_are_dropped():
    A = np.array([coords(np.eye(2)), 2 * coords(np.eye(2))])
    P = FeasibilityProblem(2, A, [1.0, 2.0])
    assert P.rank == 1 and P.num_dropped == 1


def test_homogeneous_problem_has_zero_witness():
    out = solve(FeasibilityProblem(2, coords(np.diag([1.0, -1.0]))[None], [0.0]))
    assert out.feasible and out.iterations == 0


def test_subspace_restriction():
    # X restricted to real diagonal matrices with entry (0, 0) fixed
    basis = hermitian_basis(2)
    B = np.stack([coords(np.eye(2)) / np.sqrt(2), coords(np.diag([1.0, -1.0])) / np.sqrt(2)], axis=1)
    P = FeasibilityProblem(2, coords(np.diag([1.0, 0]))[None], [0.25], subspace=B)
    out = solve(P)
    assert out.feasible
    X = basis.matrix(out.witness_coords)
    assert abs(X[0, 1]) < 1e-9
    with pytest.raises(ValueError):
        FeasibilityProblem(2, coords(np.eye(2))[None], [1.0], subspace=2 * B)


def test_infeasible_vs_undecided_with_tiny_budget():
    P = entry_problem(2, [("trace", 1.0), (0, -0.5)])
    assert solve(P, EngineConfig(max_iter=50)).undecided
    assert solve(P, max_iter=5000).infeasible


def test_seeded_runs_are_reproducible():
    P = entry_problem(3, [("trace", 1.0), (0, 0.2), (1, 0.3)])
    a, b = solve(P, seed=5), solve(P, seed=5)
    np.testing.assert_array_equal(a.witness_coords, b.witness_coords)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 4), m=st.integers(1, 6))
def test_random_planted_problem_is_feasible(seed, n, m):
    rng = np.random.default_rng(seed)
    X0 = random_density_matrix(n, rng)
    A = rng.standard_normal((m, n * n))
    P = FeasibilityProblem(n, A, A @ coords(X0))
    out = solve(P, seed=seed)
    assert out.feasible
    assert P.residual(out.witness_coords) < 1e-9
    assert np.linalg.eigvalsh(out.witness)[0] >= -1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_projections_are_idempotent(seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    X = G + G.conj().T
    Y = project_psd(X)
    assert np.linalg.eigvalsh(Y)[0] >= -1e-12
    np.testing.assert_allclose(project_psd(Y), Y, atol=1e-12)
    P = FeasibilityProblem(3, rng.standard_normal((2, 9)), rng.standard_normal(2))
    a = project_affine(rng.standard_normal(9), P)
    assert P.residual(a) < 1e-10
    np.testing.assert_allclose(project_affine(a, P), a, atol=1e-12)


def test_bad_shapes_are_rejected():
    with pytest.raises(ValueError):
        FeasibilityProblem(2, np.zeros((2, 4)), [1.0])
    with pytest.raises(ValueError):
        FeasibilityProblem(2, np.full((1, 4), np.inf), [1.0])


def test_debug_mode_checks_monotone_distance():
    P = entry_problem(2, [("trace", 1.0), (0, -0.5)])
    out = solve(P, EngineConfig(debug=True, max_iter=3000))
    history = np.array(out.history)
    assert out.infeasible
    assert np.all(np.diff(history) <= 1e-12 * np.maximum(1.0, history[:-1]))
