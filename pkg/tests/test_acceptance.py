"""Acceptance criteria, one check per criterion, each printing a PASS/FAIL line.

Run under pytest (lines are repeated in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import planted  # noqa: E402
from cprealize.cp_realization import reduce_to_realization, verify_cp_realization  # noqa: E402
from cprealize.fixtures import (ALPHABET, FixtureParams, all_fixture_realizations, bell_projector,  # noqa: E402
                                example1_quasi, example2_qubit, example4_two_qubits, example7_cones,
                                example8_tridiagonal)
from cprealize.learning import (empirical_table, exact_table, sample_array,  # noqa: E402
                                spectral_realization)
from cprealize.process_core import probability_array, stationarity_residual  # noqa: E402
from cprealize.quantum_ops import (as_quasi_realization, hermitian_basis, is_completely_positive,  # noqa: E402
                                   partial_transpose, random_density_matrix)
from cprealize.quotient import equivalence_isomorphism, quotient_realization  # noqa: E402
from cprealize.sdp_feasibility import EngineConfig  # noqa: E402
from cprealize.sdr_cones import (block_coordinates, cone_extension_membership, cprp_certificate,  # noqa: E402
                                 mapping_cone_membership, polyhedral_obstruction_scan, witness_residuals)

RESULTS: list = []


def _max_dev(A, B, length):
    return max(float(np.abs(probability_array(A, l) - probability_array(B, l)).max()) for l in range(length + 1))


def cross_representation_equivalence():
    start = time.perf_counter()
    worst = 0.0
    for gamma, theta in ((1.0, 1.0), (0.5, 1.0)):
        reps = all_fixture_realizations(FixtureParams(gamma, theta))
        names = ["example1", "example2", "example4", "example5"]
        arrays = {n: [probability_array(reps[n], l) for l in range(6)] for n in names}
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                worst = max(worst, max(float(np.abs(x - y).max()) for x, y in zip(arrays[a], arrays[b])))
    elapsed = time.perf_counter() - start
    return worst < 1e-9 and elapsed < 10, f"max pairwise deviation {worst:.2e}, {elapsed:.2f} s"


def quotient_dimensions():
    q = quotient_realization(as_quasi_realization(example4_two_qubits().realization), rank_tol=1e-9)
    dims = (q.accessible.rank, q.observable.rank, q.order)
    return dims == (7, 10, 4), f"dim W = {dims[0]}, dim W~ = {dims[1]} (expected 10), dim W/K = {dims[2]}"


def isomorphism():
    res = equivalence_isomorphism(example1_quasi(), as_quasi_realization(example2_qubit()))
    worst = max(res.residuals.values())
    ok = res.found and worst < 1e-8
    rng = np.random.default_rng(2024)
    reps = all_fixture_realizations()
    names = list(reps)
    trial_worst, failures = 0.0, 0
    for trial in range(20):
        R = reps[names[trial % len(names)]]
        Q, _ = np.linalg.qr(rng.standard_normal((R.dim, R.dim)))
        T = Q * rng.uniform(0.5, 2.0, R.dim) @ Q.T
        r = equivalence_isomorphism(R, R.transformed(T))
        if not r.found:
            failures += 1
        else:
            trial_worst = max(trial_worst, max(r.residuals.values()))
    ok = ok and failures == 0 and trial_worst < 1e-8
    return ok, f"pauli/hermitian residual {worst:.1e}; 20 similarity trials, {failures} failures, worst {trial_worst:.1e}"


def cp_detection():
    devs = []
    for gamma in (0.0, 0.25, 0.5):
        lam = is_completely_positive(example2_qubit(gamma=gamma).instrument.maps[5])[1]
        devs.append(abs(lam + (1 - gamma)))
    lam_min = np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for gamma in (0.0, 0.5, 1.0):
            for F in example4_two_qubits(gamma=gamma).realization.instrument.maps:
                lam_min = min(lam_min, is_completely_positive(F)[1])
    ok = max(devs) <= 1e-10 and lam_min >= -1e-10
    return ok, f"flip-map deviation {max(devs):.1e}; two-qubit min Choi eigenvalue {lam_min:.1e}"


def cone_separation():
    full, prime = example7_cones()
    E = hermitian_basis(2).elements()
    oracle = float(np.linalg.eigvalsh(partial_transpose(bell_projector(), (2, 2), 0))[0])
    X = block_coordinates(bell_projector(), E, 2)
    a, b = cone_extension_membership(full, 2, X), cone_extension_membership(prime, 2, X)
    ok = a.feasible and b.infeasible and abs(oracle + 0.5) < 1e-12
    iters = [a.iterations, b.iterations]
    rng = np.random.default_rng(7)
    separable_ok = 0
    for _ in range(50):
        Z = sum(w * np.kron(random_density_matrix(2, rng, 1), random_density_matrix(2, rng, 1))
                for w in rng.dirichlet(np.ones(3)))
        Xs = block_coordinates(Z, E, 2)
        outs = [cone_extension_membership(c, 2, Xs) for c in (full, prime)]
        iters += [o.iterations for o in outs]
        separable_ok += all(o.feasible for o in outs)
    ok = ok and separable_ok == 50 and max(iters) <= 10_000
    return ok, (f"bell: {a.status}/{b.status} (oracle eigenvalue {oracle:.3f}); "
                f"separable feasible {separable_ok}/50; max iterations {max(iters)}")


def tridiagonal_obstruction():
    f = example8_tridiagonal(4, (0, 2, 1))
    outs = [mapping_cone_membership(f.spec, f.D, EngineConfig(seed=s, max_iter=50_000), warm_start=False)
            for s in (1, 2, 3)]
    gaps = [o.gap for o in outs]
    consistent = all(o.infeasible for o in outs) and (max(gaps) - min(gaps)) <= 1e-3 * max(gaps)
    g = example8_tridiagonal(4)
    out = mapping_cone_membership(g.spec, g.D)
    ok = consistent and out.feasible
    detail = f"swap: {[o.status for o in outs]} gaps {[round(x, 6) for x in gaps]}; identity: {out.status}"
    if out.feasible:
        F = out.extras["map"]
        res = max(witness_residuals(g.spec, F, g.D).values())
        dev = float(np.abs(F.matrix - np.eye(16)).max())
        ok = ok and res < 1e-8 and dev < 1e-8
        detail += f", witness residual {res:.1e}, distance to identity {dev:.1e}"
    return ok, detail


def certificate_end_to_end():
    start = time.perf_counter()
    R = example1_quasi(gamma=0.5, theta=1.0)
    report, witnesses = cprp_certificate(R, example4_two_qubits().spec)
    dev = np.inf
    if "realization" in witnesses:
        dev = _max_dev(as_quasi_realization(witnesses["realization"]), R, 4)
    elapsed = time.perf_counter() - start
    ok = report["status"] == "pass" and dev < 1e-7 and elapsed < 300
    return ok, f"status {report['status']}, deviation {dev:.1e}, dimension {report.get('hilbert_dim')}, {elapsed:.1f} s"


def reduction():
    parts, ok = [], True
    for kind in ("growing", "rotating", "null"):
        maps, rho, identity, base, k = planted(kind)
        Q, trace = reduce_to_realization(maps, rho, identity, alphabet=ALPHABET)
        dev = _max_dev(as_quasi_realization(Q), as_quasi_realization(base), 4)
        verified = verify_cp_realization(Q)["passed"]
        removed = trace.initial_dim - Q.n
        ok = ok and removed == k and dev < 1e-8 and verified
        parts.append(f"{kind}: removed {removed}/{k}, deviation {dev:.1e}, verified {verified}")
    return ok, "; ".join(parts)


def spectral_learning():
    R = example1_quasi()
    S = spectral_realization(exact_table(R, 7))
    res = equivalence_isomorphism(R, S)
    exact_ok = res.found and max(res.residuals.values()) < 1e-7
    Q = example4_two_qubits().realization
    arr = sample_array(Q, 10, 100_000, seed=0)            # 10^6 symbols
    E = empirical_table(arr, 5, ALPHABET)
    Rs = spectral_realization(E, 2, 2, rank_hint=4)
    worst = 0.0
    for l in range(1, 4):
        exact = probability_array(R, l).reshape(-1)
        recon = probability_array(Rs, l).reshape(-1)
        for w, p, q in zip(ALPHABET.words(l), exact, recon):
            worst = max(worst, abs(p - q) / E.standard_error(w))
    ok = exact_ok and worst <= 4
    return ok, (f"exact table: order {S.dim}, residual {max(res.residuals.values()):.1e}; "
                f"sampled: worst deviation {worst:.2f} standard errors")


def polyhedral_diagnostic():
    grow = polyhedral_obstruction_scan(example1_quasi(theta=1.0), 5)["distinct_rays"]
    flat = polyhedral_obstruction_scan(example1_quasi(theta=np.pi / 2), 5)
    increasing = all(grow[l + 1] > grow[l] for l in range(2, 5))
    ok = increasing and flat["saturated"]
    return ok, f"theta=1 rays {grow}; theta=pi/2 rays {flat['distinct_rays']}"


def stationarity_suite():
    worst = 0.0
    for gamma, theta in ((1.0, 1.0), (0.5, 1.0), (0.25, 2.0)):
        for R in all_fixture_realizations(FixtureParams(gamma, theta)).values():
            worst = max(worst, stationarity_residual(R, 6))
    return worst < 1e-9, f"worst residual {worst:.1e}"


CRITERIA = [
    (1, "cross-representation equivalence", cross_representation_equivalence),
    (2, "quotient dimensions", quotient_dimensions),
    (3, "isomorphism", isomorphism),
    (4, "CP detection", cp_detection),
    (5, "cone separation", cone_separation),
    (6, "tridiagonal obstruction", tridiagonal_obstruction),
    (7, "certificate end to end", certificate_end_to_end),
    (8, "reduction of planted blocks", reduction),
    (9, "spectral learning", spectral_learning),
    (10, "polyhedral diagnostic", polyhedral_diagnostic),
    (11, "normalization and stationarity", stationarity_suite),
]


def run_criterion(number, name, check):
    ok, detail = check()
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} ({name}): {detail}"
    print(line)
    RESULTS.append(line)
    return ok, line


@pytest.mark.parametrize("number,name,check", CRITERIA, ids=[f"{n:02d}-{name.replace(' ', '-')}" for n, name, _ in CRITERIA])
def test_criterion(number, name, check):
    ok, line = run_criterion(number, name, check)
    assert ok, line


if __name__ == "__main__":
    outcomes = [run_criterion(*c)[0] for c in CRITERIA]
    sys.exit(0 if all(outcomes) else 1)
