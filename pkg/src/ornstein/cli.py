"""Command-line entry point: ``ornstein <subcommand> ...``.

Every subcommand writes one JSON document to stdout (or CSV with ``--csv``).
Exit status is 0 on success, 1 on domain errors (reported on stdout as
``{"error": code, "detail": message}``) and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import envelope as env
from . import hessian, laminate, mat2, operators, witness

ANTISYM_UNIT = [0.0, math.sqrt(0.5), -math.sqrt(0.5), 0.0]
OFFDIAG_UNIT = [0.0, math.sqrt(0.5), math.sqrt(0.5), 0.0]


class UsageError(Exception):
    pass


class NoFactorization(ValueError):
    code = "no_factorization"


def _clean(obj):
    """Recursively convert numpy values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v + 0.0  # drop the sign of negative zero
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _load_json(text: str):
    """Inline JSON, or the contents of a file path."""
    src = text.strip()
    if not src.startswith(("{", "[")):
        try:
            src = Path(text).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {text!r}: {exc}") from exc
    try:
        return json.loads(src)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON: {exc}") from exc


def parse_matrix(text: str) -> np.ndarray:
    src = text.strip()
    try:
        vals = json.loads(src) if src.startswith("[") else [float(v) for v in src.split(",")]
        return mat2.from_list(np.asarray(vals, dtype=float).reshape(-1))
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad matrix {text!r}: expected a11,a12,a21,a22") from exc


def parse_operator(text: str) -> operators.LinearOperator:
    if text.strip().startswith("{"):
        return operators.from_json(_load_json(text))
    return operators.builtin(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_svd(args) -> str:
    d = mat2.svd(parse_matrix(args.matrix))
    return dumps({"Q": mat2.to_list(d.Q), "R": mat2.to_list(d.R), "sigma": [d.sigma1, d.sigma2]})


def cmd_laminate_make(args) -> str:
    a = parse_matrix(args.matrix)
    if args.depth > 1:
        nu = laminate.iterated_laminate(a, args.depth, symmetric=args.symmetric)
    elif args.symmetric:
        nu = laminate.ornstein_laminate_sym(a)
    else:
        nu = laminate.ornstein_laminate(a)
    return dumps(laminate.to_json(nu))


def cmd_laminate_check(args) -> str:
    nu = laminate.from_json(_load_json(args.laminate))
    return dumps(laminate.validate(nu, args.tol).summary())


def _factor_json(res: operators.FactorizationResult) -> dict:
    if res.factors:
        return {
            "verdict": "factors",
            "factorization": {"rows": res.T.tolist()},
            "residual": res.residual,
            "counterexample": None,
        }
    return {
        "factorization": None,
        "counterexample": mat2.to_list(res.counterexample),
        "verdict": "no_constant_exists",
    }


def cmd_decide(args) -> str:
    return dumps(_factor_json(operators.decide(parse_operator(args.p1), parse_operator(args.p2))))


def cmd_factor(args) -> str:
    res = operators.decide(parse_operator(args.p1), parse_operator(args.p2))
    if not res.factors:
        raise NoFactorization("P1 does not vanish on ker P2; see `decide` for a counterexample")
    return dumps({"rows": res.T.tolist(), "residual": res.residual})


def cmd_constant(args) -> str:
    c = operators.pointwise_constant(parse_operator(args.p1), parse_operator(args.p2))
    return dumps({"constant": c, "bounded": math.isfinite(c)})


def _dirs(text: str | None):
    if text is None:
        return None
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --dirs {text!r}") from exc


def cmd_envelope(args) -> str:
    ig = env.HomogeneousIntegrand(parse_operator(args.p1), parse_operator(args.p2), args.constant)
    cfg = env.EnvelopeConfig(nodes=args.nodes, dirs=_dirs(args.dirs), iters=args.iters)
    res = env.envelope_at_zero(ig, cfg)
    if args.dump:
        env.dump_csv(res.grid, args.dump)
    out = res.to_json()
    return dumps({k: out[k] for k in ("verdict", "min_value", "argmin_matrix", "iterations", "wall_time")})


def cmd_witness(args) -> str:
    if args.second_order:
        a = parse_matrix(args.matrix) if args.matrix else mat2.from_list(OFFDIAG_UNIT)
        rep = hessian.build_witness_hessian(a, args.depth, args.grid, window=args.window)
        return dumps(rep.to_json())
    p1, p2 = parse_operator(args.p1), parse_operator(args.p2)
    if args.matrix:
        a = parse_matrix(args.matrix)
    else:
        res = operators.decide(p1, p2)
        a = res.counterexample if not res.factors else mat2.from_list(ANTISYM_UNIT)
    reports = []
    fld = None
    for k in range(1, args.depth + 1):
        fld = witness.build_witness(a, k, args.layer)
        reports.append(witness.evaluate(fld, p1, p2, args.constant))
    if args.field:
        Path(args.field).write_text(dumps(witness.to_json(fld)))
    header = ["depth", "l1_p1", "l1_p2", "ratio", "predicted_mean_f", "measured_mean_f"]
    if args.csv:
        text = _csv(header, [r.row() for r in reports])
        if args.csv == "-":
            return text
        Path(args.csv).write_text(text)
    return dumps({"matrix": mat2.to_list(a), "constant": args.constant, "reports": [dict(zip(header, r.row())) for r in reports]})


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ornstein",
        description="Laminates, operator factorization, rank-one envelopes and L1 witnesses for 2x2 gradients.",
        epilog="Matrices are row-major a11,a12,a21,a22. Operators are catalog names "
        f"({', '.join(operators.CATALOG_NAMES)}) or inline JSON "
        '{"domain": "full"|"symmetric", "rows": [[4 reals], ...]}.',
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("svd", help="closed-form SVD of a 2x2 matrix")
    s.add_argument("--matrix", required=True, help="a11,a12,a21,a22")
    s.set_defaults(func=cmd_svd)

    s = sub.add_parser("laminate-make", help="three-point laminate of a matrix (JSON)")
    s.add_argument("--matrix", required=True, help="a11,a12,a21,a22")
    s.add_argument("--symmetric", action="store_true", help="use the eigendecomposition variant")
    s.add_argument("--depth", type=int, default=1, help="self-similar depth (default 1)")
    s.set_defaults(func=cmd_laminate_make)

    s = sub.add_parser("laminate-check", help="validate a laminate JSON document")
    s.add_argument("--laminate", required=True, help="inline JSON or a path")
    s.add_argument("--tol", type=float, default=1e-12, help="tolerance (default 1e-12)")
    s.set_defaults(func=cmd_laminate_check)

    for name, func, helptext in (
        ("decide", cmd_decide, "factorization P1 = T P2 or a counterexample"),
        ("factor", cmd_factor, "the factor T (exit 1 if none exists)"),
        ("constant", cmd_constant, "least pointwise constant C with |P1 A| <= C |P2 A|"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--p1", required=True, help="operator P1 (name or JSON)")
        s.add_argument("--p2", required=True, help="operator P2 (name or JSON)")
        s.set_defaults(func=func)

    s = sub.add_parser("envelope", help="rank-one convex envelope sign at zero")
    s.add_argument("--p1", required=True, help="operator P1 (name or JSON)")
    s.add_argument("--p2", required=True, help="operator P2 (name or JSON)")
    s.add_argument("--constant", type=float, required=True, help="C in f = C|P2 A| - |P1 A|")
    s.add_argument("--nodes", type=int, default=None, help="sphere nodes (default 4096 full, 1024 symmetric)")
    s.add_argument("--iters", type=int, default=50, help="iteration cap (default 50)")
    s.add_argument("--dirs", default=None, help="direction counts na,nb (full) or nq (symmetric)")
    s.add_argument("--dump", default=None, help="write node,value CSV here")
    s.set_defaults(func=cmd_envelope)

    s = sub.add_parser("witness", help="piecewise-affine witness fields and their L1 ratios")
    s.add_argument("--p1", default="grad", help="operator P1 (default grad)")
    s.add_argument("--p2", default="sym-grad", help="operator P2 (default sym-grad)")
    s.add_argument("--matrix", default=None, help="laminate matrix (default: decide's counterexample)")
    s.add_argument("--depth", type=int, default=3, help="report depths 1..k (default 3)")
    s.add_argument("--layer", type=float, default=0.01, help="layer fraction in (0, 1/4] (default 0.01)")
    s.add_argument("--constant", type=float, default=10.0, help="C in f = C|P2| - |P1| (default 10)")
    s.add_argument("--csv", default=None, help="write the report table as CSV ('-' for stdout)")
    s.add_argument("--field", default=None, help="write the deepest field as JSON")
    s.add_argument("--second-order", action="store_true", help="Hessian witness instead")
    s.add_argument("--grid", type=int, default=1024, help="finite-difference grid n (default 1024)")
    s.add_argument("--window", type=float, default=0.9, help="window fraction (default 0.9)")
    s.set_defaults(func=cmd_witness)
    return p


DOMAIN_ERRORS = (
    laminate.LaminateError,
    operators.OperatorError,
    env.ConfigInvalid,
    witness.WitnessError,
    NoFactorization,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out = args.func(args)
    except UsageError as exc:
        print(f"ornstein: error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        sys.stdout.write(dumps({"error": getattr(exc, "code", "domain_error"), "detail": str(exc)}))
        return 1
    except ValueError as exc:
        sys.stdout.write(dumps({"error": "invalid_argument", "detail": str(exc)}))
        return 1
    sys.stdout.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
