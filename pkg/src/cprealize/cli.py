"""Command-line entry point: ``cprealize <subcommand> ...``.

Exit codes: 0 success / feasible / pass, 1 fail / infeasible, 2 undecided,
3 input error.  A JSON report goes to stdout and a one-line summary to stderr.

Engine settings resolve as: command-line flag, then environment variable
(``CPREALIZE_TOL``, ``CPREALIZE_MAX_ITER``, ``CPREALIZE_SEED``), then the JSON
file given by ``--config``, then the built-in default.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fixtures
from .process_core import (QuasiRealization, StructuralError, check_realization, probability_array,
                           realization_from_dict, realization_to_dict, word_probability)
from .quantum_ops import (CPRealization, as_quasi_realization, cp_realization_from_dict, cp_realization_to_dict,
                          hermitian_basis, matrix_from_json)
from .sdp_feasibility import EngineConfig, InconsistentConstraintsError

EXIT_OK, EXIT_FAIL, EXIT_UNDECIDED, EXIT_INPUT = 0, 1, 2, 3
ENV = {"tol": ("CPREALIZE_TOL", float), "max_iter": ("CPREALIZE_MAX_ITER", int),
       "seed": ("CPREALIZE_SEED", int)}
DEFAULTS = {"tol": 1e-9, "max_iter": 10000, "seed": 0}


class InputError(Exception):
    pass


# Settings and IO ----------------------------------------------------------------

def resolve_settings(args) -> dict:
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = _read_json(args.config)
        if not isinstance(file_cfg, dict):
            raise InputError(f"{args.config}: config must be a JSON object")
    out = {}
    for key, default in DEFAULTS.items():
        env_name, cast = ENV[key]
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif os.environ.get(env_name):
            try:
                out[key] = cast(os.environ[env_name])
            except ValueError:
                raise InputError(f"environment variable {env_name}={os.environ[env_name]!r} is not a valid {cast.__name__}")
        elif key in file_cfg:
            out[key] = cast(file_cfg[key])
        else:
            out[key] = default
    return out


def engine_config(settings: dict) -> EngineConfig:
    return EngineConfig(max_iter=settings["max_iter"], seed=settings["seed"], tol_feas=settings["tol"])


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _write_json(data, path) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
    return str(path)


def load_any_realization(path) -> tuple[QuasiRealization, CPRealization | None]:
    """A quasi-realization file, or a CP realization file (recognized by its ``rho`` field)."""
    data = _read_json(path)
    try:
        if isinstance(data, dict) and "rho" in data:
            Q = cp_realization_from_dict(data)
            return as_quasi_realization(Q), Q
        return realization_from_dict(data), None
    except (StructuralError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def load_cp(path) -> CPRealization:
    _, Q = load_any_realization(path)
    if Q is None:
        raise InputError(f"{path}: expected a CP realization (fields n, maps, rho)")
    return Q


def _load_spec(path):
    from .sdr_cones import spec_from_dict

    try:
        return spec_from_dict(_read_json(path))
    except (StructuralError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_array(path, name: str) -> np.ndarray:
    data = _read_json(path)
    if isinstance(data, dict):
        if name not in data:
            raise InputError(f"{path}: missing field {name!r}")
        data = data[name]
    try:
        return np.real_if_close(matrix_from_json(data))
    except (TypeError, ValueError, KeyError) as exc:
        raise InputError(f"{path}: field {name!r} is not numeric: {exc}") from None


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_ready(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _status_code(status: str) -> int:
    return {"feasible": EXIT_OK, "pass": EXIT_OK, "infeasible": EXIT_FAIL, "fail": EXIT_FAIL,
            "undecided": EXIT_UNDECIDED}[status]


# Subcommands --------------------------------------------------------------------

def cmd_eval(args, settings):
    R, _ = load_any_realization(args.realization)
    report = {"probabilities": {}}
    for text in args.word or []:
        try:
            word = R.alphabet.parse(text)
        except StructuralError as exc:
            raise InputError(str(exc)) from None
        report["probabilities"][text] = word_probability(R, word)
    if args.max_length is not None:
        report["by_length"] = {l: dict(zip((R.alphabet.format(w) for w in R.alphabet.words(l)),
                                           probability_array(R, l).reshape(-1).tolist()))
                               for l in range(args.max_length + 1)}
    report["check"] = check_realization(R, settings["tol"]).to_dict()
    return EXIT_OK, report, f"evaluated {len(report['probabilities'])} words"


def cmd_quotient(args, settings):
    from .quotient import quotient_realization

    R, _ = load_any_realization(args.realization)
    q = quotient_realization(R, tol=max(settings["tol"], 1e-9))
    report = q.to_dict()
    if args.output:
        report["output"] = _write_json(realization_to_dict(q.quotient), args.output)
    return EXIT_OK, report, f"order {q.order} (accessible {q.accessible.rank}, observable {q.observable.rank})"


def cmd_equiv(args, settings):
    from .quotient import equivalence_isomorphism

    R1, _ = load_any_realization(args.left)
    R2, _ = load_any_realization(args.right)
    res = equivalence_isomorphism(R1, R2, tol=max(settings["tol"], 1e-8))
    code = EXIT_OK if res.found else EXIT_FAIL
    return code, res.to_dict(), "equivalent" if res.found else f"not equivalent: {res.reason}"


def cmd_verify_cp(args, settings):
    from .cp_realization import verify_cp_realization, verify_quotient_relation

    Q = load_cp(args.realization)
    report = verify_cp_realization(Q, settings["tol"])
    passed = report["passed"]
    if args.quasi:
        if not args.L:
            raise InputError("--quasi requires --L")
        R, _ = load_any_realization(args.quasi)
        rel = verify_quotient_relation(Q, R, _load_array(args.L, "L"), max(settings["tol"], 1e-9))
        report["quotient_relation"] = rel
        passed = passed and rel["passed"]
    return (EXIT_OK if passed else EXIT_FAIL), report, "pass" if passed else "fail"


def cmd_reduce(args, settings):
    from .cp_realization import ReductionError, reduce_to_realization, verify_cp_realization

    data = _read_json(args.realization)
    try:
        Qin = cp_realization_from_dict(data)
    except (StructuralError, ValueError) as exc:
        raise InputError(f"{args.realization}: {exc}") from None
    try:
        Q, trace = reduce_to_realization(Qin.instrument, Qin.rho, Qin.identity, alphabet=Qin.alphabet)
    except ReductionError as exc:
        report = {"error": str(exc), "trace": exc.trace.to_dict() if exc.trace else None}
        return EXIT_FAIL, report, f"reduction failed: {exc}"
    check = verify_cp_realization(Q, 1e-8)
    report = {"hilbert_dim": Q.n, "verification": check}
    if args.trace:
        report["trace"] = trace.to_dict()
    if args.output:
        report["output"] = _write_json(cp_realization_to_dict(Q), args.output)
    return (EXIT_OK if check["passed"] else EXIT_FAIL), report, f"reduced to dimension {Q.n}"


def cmd_cone(args, settings):
    from .sdr_cones import block_coordinates, cone_extension_membership, cone_membership, dual_cone_membership

    spec = _load_spec(args.spec)
    x = _load_array(args.vector, "x")
    cfg = engine_config(settings)
    if args.level and args.level > 1:
        X = np.asarray(x, dtype=complex)
        if X.ndim == 2:
            if args.block_basis != "hermitian":
                raise InputError("an operator input needs --block-basis hermitian")
            X = block_coordinates(X, hermitian_basis(int(round(np.sqrt(spec.r)))).elements(), args.level)
        out = cone_extension_membership(spec.cone, args.level, X, cfg)
    elif args.dual:
        out = dual_cone_membership(spec.cone, np.real(x), None, cfg)
    else:
        out = cone_membership(spec.cone, np.real(x), cfg)
    return _status_code(out.status), out.to_dict(), out.status


def cmd_mapcone(args, settings):
    from .sdr_cones import PreconditionError, mapping_cone_membership, witness_residuals

    spec = _load_spec(args.spec)
    D = np.real(_load_array(args.map, "D"))
    try:
        out = mapping_cone_membership(spec, D, engine_config(settings), strict=args.strict,
                                      relaxation=args.relaxation)
    except PreconditionError as exc:
        raise InputError(str(exc)) from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    report = out.to_dict()
    if out.feasible:
        F = out.extras["map"]
        report["witness_check"] = witness_residuals(spec, F, D)
        if args.output:
            report["output"] = _write_json({"n": F.n, "superoperator": F.matrix.tolist()}, args.output)
    return _status_code(out.status), report, out.status


def cmd_cprp(args, settings):
    from .sdr_cones import PreconditionError, cprp_certificate

    R, _ = load_any_realization(args.realization)
    spec = _load_spec(args.spec)
    try:
        report, witnesses = cprp_certificate(R, spec, engine_config(settings))
    except PreconditionError as exc:
        raise InputError(str(exc)) from None
    if not args.trace:
        report.pop("trace", None)
    if "realization" in witnesses and args.output:
        report["output"] = _write_json(cp_realization_to_dict(witnesses["realization"]), args.output)
    for c in report["conditions"]:
        c.pop("witness_coords", None)
    return _status_code(report["status"]), report, f"certificate {report['status']}"


def cmd_learn(args, settings):
    from .learning import MissingDataError, WordTable, empirical_table, load_trajectories, spectral_realization
    from .process_core import Alphabet

    if args.table:
        table = WordTable.from_dict(_read_json(args.table))
    elif args.trajectories:
        if not args.alphabet:
            raise InputError("--trajectories requires --alphabet")
        alphabet = Alphabet(tuple(args.alphabet.split(",")))
        trajs = load_trajectories(args.trajectories, alphabet)
        table = empirical_table(trajs, args.max_length or 5, alphabet)
    else:
        raise InputError("give --table or --trajectories")
    try:
        R = spectral_realization(table, args.prefix, args.suffix, args.rank, settings["tol"])
    except MissingDataError as exc:
        raise InputError(str(exc)) from None
    report = {"dim": R.dim, "check": check_realization(R, 1e-6).to_dict()}
    if args.output:
        report["output"] = _write_json(realization_to_dict(R), args.output)
    else:
        report["realization"] = realization_to_dict(R)
    return EXIT_OK, report, f"reconstructed order {R.dim}"


def cmd_sample(args, settings):
    from .learning import sample_array

    Q = load_cp(args.realization)
    arr = sample_array(Q, args.length, args.count, settings["seed"])
    lines = [Q.alphabet.format(row) for row in arr.tolist()]
    report = {"count": args.count, "length": args.length}
    if args.output:
        Path(args.output).write_text("\n".join(lines) + ("\n" if lines else ""))
        report["output"] = args.output
    else:
        report["trajectories"] = lines
    return EXIT_OK, report, f"sampled {args.count} trajectories"


def cmd_examples(args, settings):
    try:
        return _write_examples(args)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _write_examples(args):
    from .sdr_cones import MappingConeSpec

    if args.permutation:
        perm = tuple(args.permutation)
    else:
        default = fixtures.FixtureParams().permutation
        perm = default if len(default) == args.m - 1 else tuple(range(args.m - 1))
    p = fixtures.FixtureParams(args.gamma, args.theta, args.m, perm)
    name = args.name
    out_dir = Path(args.output or ".")
    files = {}
    if name == "example1":
        files["example1.json"] = realization_to_dict(fixtures.example1_quasi(p))
    elif name == "example2":
        files["example2.json"] = cp_realization_to_dict(fixtures.example2_qubit(p))
        files["example2_spec.json"] = fixtures.example2_spec().to_dict()
    elif name == "example4":
        f = fixtures.example4_two_qubits(p)
        files["example4.json"] = cp_realization_to_dict(f.realization)
        files["example4_spec.json"] = f.spec.to_dict()
        files["example4_L.json"] = {"L": f.L.tolist()}
    elif name == "example5":
        f = fixtures.example5_direct_sum(p)
        files["example5.json"] = cp_realization_to_dict(f.realization)
        files["example5_alternative.json"] = cp_realization_to_dict(f.alternative)
        files["example5_L.json"] = {"L": f.L.tolist()}
    elif name == "example7":
        full, prime = fixtures.example7_cones()
        for label, cone in (("example7_full", full), ("example7_prime", prime)):
            spec = MappingConeSpec(cone.n, cone.W, cone.kernel.complement(), cone.L)
            files[f"{label}_spec.json"] = spec.to_dict()
    elif name == "example8":
        f = fixtures.example8_tridiagonal(args.m, p.permutation)
        files["example8_spec.json"] = f.spec.to_dict()
        files["example8_D.json"] = {"D": f.D.tolist(), "permutation": list(f.permutation)}
    else:
        raise InputError(f"unknown example {name!r}")
    written = [_write_json(data, out_dir / fname) for fname, data in files.items()]
    return EXIT_OK, {"written": written, "params": dataclasses.asdict(p)}, f"wrote {len(written)} files"


# Parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--config", default=None, help="JSON file with tol / max_iter / seed")
    common.add_argument("--trace", action="store_true", help="include reduction traces")

    parser = argparse.ArgumentParser(prog="cprealize", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="word probabilities")
    p.add_argument("--realization", required=True)
    p.add_argument("--word", action="append")
    p.add_argument("--max-length", dest="max_length", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("quotient", parents=[common], help="regular quotient realization")
    p.add_argument("--realization", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_quotient)

    p = sub.add_parser("equiv", parents=[common], help="equivalence and intertwining isomorphism")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("verify-cp", parents=[common], help="check a CP realization")
    p.add_argument("--realization", required=True)
    p.add_argument("--quasi", help="quasi-realization for the quotient relation")
    p.add_argument("--L", help="JSON file with the quotient map L")
    p.set_defaults(func=cmd_verify_cp)

    p = sub.add_parser("reduce", parents=[common], help="reduce CP maps to a unital realization")
    p.add_argument("--realization", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("cone", parents=[common], help="SDR cone, dual cone or level-k membership")
    p.add_argument("--spec", required=True)
    p.add_argument("--vector", required=True, help="JSON with field x (vector, or level-k blocks / operator)")
    p.add_argument("--dual", action="store_true")
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--block-basis", dest="block_basis", default="hermitian")
    p.set_defaults(func=cmd_cone)

    p = sub.add_parser("mapcone", parents=[common], help="mapping-cone membership of a quotient map")
    p.add_argument("--spec", required=True)
    p.add_argument("--map", required=True, help="JSON with field D")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--relaxation", choices=("cp", "co-cp"), default="cp")
    p.add_argument("--output")
    p.set_defaults(func=cmd_mapcone)

    p = sub.add_parser("cprp", parents=[common], help="certificate plus reduction")
    p.add_argument("--realization", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_cprp)

    p = sub.add_parser("learn", parents=[common], help="spectral reconstruction")
    p.add_argument("--table")
    p.add_argument("--trajectories")
    p.add_argument("--alphabet", help="comma-separated symbols for trajectory files")
    p.add_argument("--max-length", dest="max_length", type=int)
    p.add_argument("--prefix", type=int)
    p.add_argument("--suffix", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("sample", parents=[common], help="sample trajectories from a CP realization")
    p.add_argument("--realization", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--output")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("examples", parents=[common], help="write fixture files")
    p.add_argument("name", choices=("example1", "example2", "example4", "example5", "example7", "example8"))
    p.add_argument("--output", help="directory")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--permutation", type=int, nargs="+")
    p.set_defaults(func=cmd_examples)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        settings = resolve_settings(args)
        code, report, summary = args.func(args, settings)
    except (InputError, StructuralError, InconsistentConstraintsError) as exc:
        report = {"error": str(exc)}
        code, summary = EXIT_INPUT, f"input error: {exc}"
        settings = {"seed": getattr(args, "seed", None)}
    report = dict(report)
    report["seed"] = settings.get("seed")
    report["settings"] = settings
    report["command"] = args.command
    json.dump(_json_ready(report), sys.stdout, indent=1)
    sys.stdout.write("\n")
    print(f"[{args.command}] {summary}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())
