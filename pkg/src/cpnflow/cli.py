"""Command-line driver: ``cpnflow <command> ...`` writes one JSON document (or CSV table)."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import pinch, qform, sympl_core
from .flow.run import CSV_HEADER, FlowConfig, run
from .flow.state import FlowFailure

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class ValidationError(ValueError):
    pass


@dataclass
class CommandResult:
    command: str
    inputs_echo: dict
    outputs: dict
    elapsed_seconds: float = 0.0
    table: dict | None = field(default=None, repr=False)

    def to_record(self) -> dict:
        rec = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "inputs_echo": self.inputs_echo,
            "outputs": self.outputs,
            "elapsed_seconds": self.elapsed_seconds,
        }
        if self.table is not None:
            rec["table"] = self.table
        return rec


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def emit(result: CommandResult, fmt: str = "json", path: str | None = None) -> None:
    """Write a result as sorted-key JSON or, for tabular results, as CSV."""
    if fmt == "json":
        text = json.dumps(_jsonable(result.to_record()), sort_keys=True, indent=2, allow_nan=False) + "\n"
    elif fmt == "csv":
        if result.table is None:
            raise ValidationError(f"command {result.command!r} has no tabular output; use --format json")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(result.table["columns"])
        for row in result.table["rows"]:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
    else:
        raise ValidationError(f"unknown format {fmt!r}")
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write output to {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# argument helpers

def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _spectrum(vals) -> sympl_core.SingularSpectrum:
    try:
        return sympl_core.SingularSpectrum(vals)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _load_matrix(path: str) -> np.ndarray:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read matrix file {path}: {exc}") from exc
    if isinstance(data, dict):
        data = data.get("matrix")
    M = np.asarray(data, dtype=float)
    if M.ndim != 2:
        raise ValidationError("matrix file must hold a 2-D row-major array")
    return M


# ---------------------------------------------------------------------------
# commands

def cmd_svd(args) -> CommandResult:
    if args.matrix:
        M = _load_matrix(args.matrix)
        source = {"matrix_file": args.matrix}
    else:
        M = sympl_core.random_symplectic(args.random, seed=args.seed, spread=args.spread).entries
        source = {"random_n": args.random, "seed": args.seed, "spread": args.spread}
    try:
        L = sympl_core.SymplecticMap(M, tol=args.tol)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    sv = sympl_core.paired_singular_values(L)
    basis = sympl_core.adapted_basis(L)
    E = sympl_core.polar_isometry(L)
    J = sympl_core.standard_J(L.n)
    out = {
        "n": L.n,
        "singular_values": sv.lam,
        "det": L.det,
        "polar_isometry": E,
        "polar_orthogonality_error": float(np.max(np.abs(E.T @ E - np.eye(2 * L.n)))),
        "polar_commutator_error": float(np.max(np.abs(E @ J - J @ E))),
        "adapted_basis": basis.A,
        "adapted_target_basis": basis.A_tilde,
        "adapted_residual": float(np.max(np.abs(M @ basis.A - basis.A_tilde * sv.lam[None, :]))),
    }
    if args.matrix is None:
        out["matrix"] = M
    return CommandResult("svd", {**source, "tol": args.tol}, out)


def cmd_qform(args) -> CommandResult:
    if args.op == "eval":
        sp = _spectrum(args.lam)
        Q = qform.assemble_Q(sp, route=args.route)
        Qt = qform.assemble_Qtilde(sp)
        n = sp.n
        out = {
            "n": n,
            "coords": n_coords_list(n),
            "min_eig_vs_norm": qform.min_eig_ratio(Q, qform.norm_matrix(n)),
            "min_eig_vs_ordered_sum": qform.min_eig_ratio(Q, qform.ordered_sum_matrix(n)),
            "qtilde_min_eig_vs_norm": qform.min_eig_ratio(Qt, qform.norm_matrix(n)),
            "qtilde_min_eig_vs_ordered_sum": qform.min_eig_ratio(Qt, qform.ordered_sum_matrix(n)),
        }
        if args.with_matrix:
            out["Q"] = Q.mat
            out["Qtilde"] = Qt.mat
        return CommandResult("qform eval", {"lambda": sp.lam, "route": args.route}, out)
    if args.op == "blocks":
        n = args.dim
        blocks = qform.block_decomposition_at_one(n)
        Q1 = qform.assemble_Q(sympl_core.SingularSpectrum.ones(n))
        pc = qform.pair_count(n)
        mins = []
        for r, b in enumerate(blocks):
            sel = pc == r + 1
            mins.append(float(np.linalg.eigvalsh(b.mat[np.ix_(sel, sel)])[0]) if sel.any() else None)
        out = {
            "n": n,
            "block_min_eigs": mins,
            "reconstruction_error": float(np.max(np.abs(sum(b.mat for b in blocks) - Q1.mat))),
            "min_eig_vs_norm": qform.min_eig_ratio(Q1, qform.norm_matrix(n)),
        }
        return CommandResult("qform blocks", {"dim": n}, out)
    if args.op == "delta":
        try:
            est = qform.delta_box(args.dim, args.Lambda, args.grid, box=args.box)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        out = {"n": est.n, "Lambda": est.Lambda, "delta": est.delta, "minimizing_lambda": est.minimizing_lambda}
        return CommandResult(
            "qform delta", {"dim": args.dim, "Lambda": args.Lambda, "grid": args.grid, "box": args.box}, out
        )
    raise ValidationError(f"unknown qform operation {args.op!r}")


def n_coords_list(n: int) -> list[list[int]]:
    """Canonical triples, 1-based for display."""
    return [[i + 1, j + 1, k + 1] for i, j, k in qform.canonical_triples(n)]


def cmd_lambda0(args) -> CommandResult:
    if args.dim < 1:
        raise ValidationError("--dim must be >= 1")
    try:
        res = qform.lambda0(args.dim, tol=args.tol, cap=args.cap, grid_steps=args.grid, box=args.box)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    echo = {"dim": args.dim, "tol": args.tol, "cap": args.cap, "grid": args.grid, "box": args.box}
    return CommandResult("lambda0", echo, res.to_record())


def cmd_pinch(args) -> CommandResult:
    op = args.op
    try:
        if op == "star-omega":
            sp = _spectrum(args.lam)
            return CommandResult(f"pinch {op}", {"lambda": sp.lam}, {"star_omega": pinch.star_omega(sp)})
        if op == "curvature-sum":
            sp = _spectrum(args.lam)
            cs = pinch.curvature_sum(sp)
            return CommandResult(
                f"pinch {op}", {"lambda": sp.lam}, {"curvature_sum": cs, "curvature_term": cs * pinch.star_omega(sp)}
            )
        if op == "eps":
            return CommandResult(f"pinch {op}", {"dim": args.dim, "Lambda": args.Lambda},
                                 {"eps": pinch.eps_from_lambda(args.dim, args.Lambda)})
        if op == "lambda-from-eps":
            return CommandResult(f"pinch {op}", {"dim": args.dim, "eps": args.eps},
                                 {"Lambda": pinch.lambda_from_eps(args.dim, args.eps)})
        if op == "lambda1":
            return CommandResult(f"pinch {op}", {"dim": args.dim, "lambda0": args.lambda0},
                                 {"Lambda1": pinch.lambda1_from_lambda0(args.dim, args.lambda0)})
        if op == "log-comparison":
            r = pinch.log_comparison(args.lambda0, args.grid)
            return CommandResult(f"pinch {op}", {"lambda0": args.lambda0, "grid": args.grid},
                                 {"c": r.c, "inequality_holds": r.inequality_holds,
                                  "worst_margin": r.worst_margin, "x_max": r.x_max})
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    raise ValidationError(f"unknown pinch operation {op!r}")


def cmd_ode(args) -> CommandResult:
    if args.points < 2 or not args.t_max >= 0:
        raise ValidationError("need --points >= 2 and --t-max >= 0")
    t = np.linspace(0.0, args.t_max, args.points)
    params = dict(K1=args.K1, K2=args.K2, delta=args.delta, C0=args.C0, eps=args.eps)
    try:
        y = pinch.comparison_ode(y0=args.y0, t=t, **params)
        rhs = pinch.comparison_ode_rhs(y, **params)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    a = args.delta * args.C0 - args.eps * args.K1
    out = {"equilibrium": args.K2 / a, "y_final": float(y[-1])}
    table = {"columns": ["t", "y", "dydt"], "rows": np.column_stack([t, y, rhs]).tolist()}
    return CommandResult("ode", {**params, "y0": args.y0, "t_max": args.t_max, "points": args.points}, out, table=table)


def cmd_flow(args) -> CommandResult:
    try:
        cfg = FlowConfig.from_json(args.config)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad flow config {args.config}: {exc}") from exc
    kern = args.kernel
    try:
        res = run(cfg, kernel=None if kern == "auto" else kern)
    except ImportError as exc:
        raise ValidationError(str(exc)) from exc
    rows = [r.row() for r in res.reports]
    final = res.reports[-1]
    out = {
        "steps": res.steps,
        "dt": res.dt,
        "final": {k: getattr(final, k) for k in CSV_HEADER},
        "checkpoints": res.checkpoints,
    }
    echo = {**cfg.__dict__, "kernel": kern}
    return CommandResult("flow run", echo, out, table={"columns": list(CSV_HEADER), "rows": rows})


# ---------------------------------------------------------------------------

def _global_options(p, default) -> None:
    p.add_argument("--seed", type=int, default=default, help="seed for all randomness (default 0)")
    p.add_argument("--format", choices=("json", "csv"), default=default)
    p.add_argument("--output", "-o", default=default, help="output file (default stdout)")
    p.add_argument("--timing", action="store_true", default=default,
                   help="record wall time (breaks byte-identical output)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cpnflow", description=__doc__)
    _global_options(ap, argparse.SUPPRESS)
    ap.set_defaults(seed=0, format="json", output=None, timing=False)
    # global options are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_parser(subs, name, **kw):
        return subs.add_parser(name, parents=[common], **kw)

    p = add_parser(sub, "svd", help="paired singular values, polar isometry and adapted basis")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", help="JSON file with a row-major 2n x 2n array")
    src.add_argument("--random", type=int, metavar="N", help="use a seeded random symplectic matrix of size 2N")
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=sympl_core.DEFAULT_TOL)
    p.set_defaults(func=cmd_svd)

    p = add_parser(sub, "qform", help="quadratic form analysis")
    qs = p.add_subparsers(dest="op", required=True)
    q = add_parser(qs, "eval", help="smallest eigenvalues at a spectrum")
    q.add_argument("--lambda", dest="lam", type=_floats, required=True)
    q.add_argument("--route", choices=("evolution", "grouped"), default="evolution")
    q.add_argument("--with-matrix", action="store_true")
    q = add_parser(qs, "blocks", help="invariant block decomposition at lambda = 1")
    q.add_argument("--dim", type=int, required=True)
    q = add_parser(qs, "delta", help="box minimum of the smallest eigenvalue")
    q.add_argument("--dim", type=int, required=True)
    q.add_argument("--Lambda", type=float, required=True)
    q.add_argument("--grid", type=int, default=33)
    q.add_argument("--box", choices=qform.BOXES, default="singular")
    p.set_defaults(func=cmd_qform)

    p = add_parser(sub, "lambda0", help="pinching constant by bisection")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--cap", type=float, default=16.0)
    p.add_argument("--grid", type=int, default=33)
    p.add_argument("--box", choices=qform.BOXES, default="singular")
    p.set_defaults(func=cmd_lambda0)

    p = add_parser(sub, "pinch", help="pinching arithmetic")
    ps = p.add_subparsers(dest="op", required=True)
    for name in ("star-omega", "curvature-sum"):
        q = add_parser(ps, name)
        q.add_argument("--lambda", dest="lam", type=_floats, required=True)
    q = add_parser(ps, "eps")
    q.add_argument("--dim", type=int, required=True)
    q.add_argument("--Lambda", type=float, required=True)
    q = add_parser(ps, "lambda-from-eps")
    q.add_argument("--dim", type=int, required=True)
    q.add_argument("--eps", type=float, required=True)
    q = add_parser(ps, "lambda1")
    q.add_argument("--dim", type=int, required=True)
    q.add_argument("--lambda0", type=float, required=True)
    q = add_parser(ps, "log-comparison")
    q.add_argument("--lambda0", type=float, required=True)
    q.add_argument("--grid", type=int, default=10001)
    p.set_defaults(func=cmd_pinch)

    p = add_parser(sub, "flow", help="equivariant flow simulation")
    fs = p.add_subparsers(dest="op", required=True)
    q = add_parser(fs, "run")
    q.add_argument("--config", required=True)
    q.add_argument("--kernel", choices=("auto", "python", "cython"), default="auto")
    p.set_defaults(func=cmd_flow)

    p = add_parser(sub, "ode", help="closed-form comparison ODE series")
    p.add_argument("--K1", type=float, default=pinch.DEFAULT_K1)
    p.add_argument("--K2", type=float, default=pinch.DEFAULT_K2)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--C0", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(func=cmd_ode)
    return ap


def dispatch(argv=None) -> tuple[CommandResult | None, int]:
    """Parse and run; returns the result and exit code. Errors go to stderr."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return None, EXIT_VALIDATION if exc.code else EXIT_OK
    start = time.perf_counter()
    try:
        result = args.func(args)
        if args.timing:
            result.elapsed_seconds = time.perf_counter() - start
        emit(result, args.format, args.output)
    except (ValidationError, sympl_core.NotSymplecticError, sympl_core.PairingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, EXIT_VALIDATION
    except (FlowFailure, np.linalg.LinAlgError, sympl_core.AdaptedBasisError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return None, EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, EXIT_VALIDATION
    return result, EXIT_OK


def main(argv=None) -> int:
    _, code = dispatch(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
