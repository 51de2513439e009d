"""``ctx``: verification, violation reports, witness tables and searches."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import canonical
from .contextuality import (
    TERMS,
    ScenarioError,
    delta_value,
    witness_min_dimension,
    witness_table,
)
from .linalg import TOL
from .optimizer import SearchConfig, SearchError, search_optimal_delta
from .scenario_io import ScenarioFileError, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CSV_COLUMNS = ("dim", "scheme", "k", "value", "bound_nc", "bound_sos", "witness_min_dim")
TERM_LABELS = tuple(f"A{i + 1}A{j + 1}" for i, j, _ in TERMS)


class UsageError(Exception):
    """Bad flag combination or unreadable input; exits with code 2."""


def _num(x: float) -> str:
    return f"{x:.8f}"


def _dim_text(d) -> str:
    return "none" if d is None else f"d >= {d}"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().rstrip("\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _emit(args, text: str) -> None:
    if not args.quiet:
        print(text)


# verify ---------------------------------------------------------------------


def cmd_verify(args) -> int:
    from .checks import MODULES, run_checks

    if args.module is not None and args.module not in MODULES:
        raise UsageError(f"unknown module {args.module!r}; choose from {', '.join(MODULES)}")
    if args.module is None and not args.all:
        args.all = True
    results = run_checks(args.module, args.with_optimizer)
    floor = args.tolerance or 0.0
    passed = [r.residual <= max(r.tol, floor) for r in results]
    n_fail = passed.count(False)

    if args.format == "json":
        out = _json(
            {
                "passed": len(results) - n_fail,
                "failed": n_fail,
                "checks": [
                    {
                        "module": r.module,
                        "name": r.name,
                        "residual": r.residual if math.isfinite(r.residual) else None,
                        "tolerance": r.tol,
                        "passed": ok,
                        "error": r.error,
                    }
                    for r, ok in zip(results, passed)
                ],
            }
        )
        _emit(args, out)
    elif args.format == "csv":
        rows = [(r.module, r.name, repr(r.residual), repr(r.tol), ok) for r, ok in zip(results, passed)]
        _emit(args, _csv(rows, ("module", "name", "residual", "tolerance", "passed")))
    else:
        lines = []
        for r, ok in zip(results, passed):
            if ok and args.quiet:
                continue
            detail = r.error or f"residual {r.residual:.3e}, tol {r.tol:.1e}"
            lines.append(f"{'PASS' if ok else 'FAIL'}  {r.module}: {r.name} ({detail})")
        if n_fail:
            lines.append(f"{len(results) - n_fail} checks passed, {n_fail} failed")
        else:
            lines.append(f"{len(results)} checks passed")
        # failures are reported even with --quiet
        print("\n".join(lines))
    return EXIT_FAIL if n_fail else EXIT_OK


# violation ------------------------------------------------------------------


def _scenario_for(args):
    if args.scenario is not None:
        scenario, _ = load_scenario(args.scenario)
        return scenario
    if args.dim is None:
        raise UsageError("give --dim 4|8 or --scenario FILE")
    if args.dim not in (4, 8):
        raise UsageError(f"no canonical scenario for dim {args.dim}; use --dim 4|8 or --scenario FILE")
    return canonical.canonical_scenario(int(math.log2(args.dim)))


def cmd_violation(args) -> int:
    projectors = args.projectors
    if projectors == "auto":
        projectors = "coarse" if args.scheme == "dp" else "rank1"
    if args.scheme == "dp" and projectors != "coarse":
        raise UsageError("the dp scheme uses the coarse two-block projectors only")
    scenario = _scenario_for(args)
    if projectors == "rank1" and not any(len(a) for a in scenario.db_aux):
        raise UsageError("scenario has no refining families; db needs aux operators")
    kind = "dp" if projectors == "coarse" else "db"
    report = delta_value(scenario, kind)
    tol = args.tolerance if args.tolerance is not None else TOL
    witness = witness_min_dimension(min(report.value, 4.0), tol)

    data = report.as_dict()
    data["witness_min_dim"] = witness
    data["requested_scheme"] = args.scheme
    data["scenario"] = scenario.name
    data["terms"] = dict(zip(TERM_LABELS, report.per_term))
    if args.format == "json":
        _emit(args, _json(data))
    elif args.format == "csv":
        row = [data[c] for c in CSV_COLUMNS]
        row[3:6] = [_num(float(x)) for x in row[3:6]]
        row[6] = "" if witness is None else witness
        _emit(args, _csv([row], CSV_COLUMNS))
    elif args.quiet:
        print(_num(report.value))
    else:
        lines = [
            f"scenario       {scenario.name or '(file)'}",
            f"scheme         {report.scheme}  d={report.dim}  k={report.k}",
            f"value          {_num(report.value)}",
        ]
        lines += [f"  <{lab}>{' ' * (9 - len(lab))}{_num(t)}" for lab, t in zip(TERM_LABELS, report.per_term)]
        lines += [
            f"non-contextual {_num(report.bound_nc)}",
            f"sos bound      {_num(report.bound_sos)}",
            f"witness        {_dim_text(witness)}",
        ]
        print("\n".join(lines))
    return EXIT_OK


# witness --------------------------------------------------------------------


def cmd_witness(args) -> int:
    tol = args.tolerance if args.tolerance is not None else TOL
    if args.value is not None:
        try:
            d = witness_min_dimension(args.value, tol)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if args.format == "json":
            _emit(args, _json({"value": args.value, "witness_min_dim": d}))
        elif args.format == "csv":
            _emit(args, _csv([(_num(args.value), "" if d is None else d)], ("value", "witness_min_dim")))
        else:
            print(_dim_text(d) if d is not None else "none (within the non-contextual bound)")
        return EXIT_OK

    if args.max_n < 2:
        raise UsageError("--max-n must be at least 2")
    rows = witness_table(args.max_n)
    if args.format == "json":
        _emit(
            args,
            _json([{"dim": None if math.isinf(d) else d, "n": None if math.isinf(d) else int(math.log2(d)), "value": v} for d, v in rows]),
        )
    elif args.format == "csv":
        _emit(args, _csv([("inf" if math.isinf(d) else d, _num(v)) for d, v in rows], ("dim", "value")))
    else:
        lines = [] if args.quiet else [f"{'d':>8}  optimum"]
        lines += [f"{'inf' if math.isinf(d) else d:>8}  {_num(v)}" for d, v in rows]
        print("\n".join(lines))
    return EXIT_OK


# optimize -------------------------------------------------------------------


def _default_seed() -> int:
    text = os.environ.get("CTX_SEED")
    if text is None:
        return 0
    try:
        return int(text)
    except ValueError as exc:
        raise UsageError(f"CTX_SEED must be an integer, got {text!r}") from exc


def cmd_optimize(args) -> int:
    fields: dict = {}
    if args.scenario is not None:
        _, raw = load_scenario(args.scenario)
        stanza = raw.get("optimizer", {})
        if not isinstance(stanza, dict):
            raise UsageError("optimizer stanza must be an object")
        fields.update(stanza)
    for name in ("dim", "scheme", "k", "restarts", "seed", "max_iters", "workers"):
        value = getattr(args, name)
        if value is not None:
            fields[name] = value
    fields.setdefault("seed", _default_seed())
    if "dim" not in fields:
        raise UsageError("give --dim or an optimizer stanza with dim")
    try:
        config = SearchConfig.from_dict(fields)
    except (SearchError, TypeError) as exc:
        raise UsageError(str(exc)) from exc

    out = None
    if args.out is not None:
        out = Path(args.out)
        try:
            out.touch()
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc}") from exc

    try:
        result = search_optimal_delta(config)
    except SearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    data = result.as_dict()
    if out is not None:
        out.write_text(_json(data) + "\n")

    status = "converged" if result.converged else "not converged"
    if args.format == "json":
        _emit(args, _json(data))
    elif args.format == "csv":
        row = (config.dim, config.label, config.blocks, _num(result.best_value), _num(2), _num(2 * math.sqrt(2)), "")
        _emit(args, _csv([row], CSV_COLUMNS))
    elif args.quiet:
        print(_num(result.best_value))
    else:
        print(
            f"best value     {_num(result.best_value)}\n"
            f"residual       {result.residual:.2e}\n"
            f"status         {status} (restart {result.best_restart} of {config.restarts})"
            + (f"\nwritten        {out}" if out is not None else "")
        )
    return EXIT_OK


# parser ---------------------------------------------------------------------


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags; SUPPRESS keeps them from
    # clobbering values given before the subcommand
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=("text", "json", "csv"), default=d("text"))
    p.add_argument("--tolerance", type=float, default=d(None), help="numeric tolerance override")
    p.add_argument("--quiet", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctx", parents=[_global_flags(True)], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_flags(False)]

    p = sub.add_parser("verify", parents=common, help="run the self-check suite")
    p.add_argument("--all", action="store_true", help="run every module (default)")
    p.add_argument("--module", help="run one module's checks")
    p.add_argument("--with-optimizer", action="store_true", help="include short seeded searches")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("violation", parents=common, help="evaluate the functional on a scenario")
    p.add_argument("--dim", type=int)
    p.add_argument("--scheme", choices=("dp", "db"), default="dp")
    p.add_argument("--projectors", choices=("auto", "coarse", "rank1"), default="auto")
    p.add_argument("--scenario", metavar="FILE")
    p.set_defaults(func=cmd_violation)

    p = sub.add_parser("witness", parents=common, help="dimension witness table or bound")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--max-n", type=int, default=4)
    g.add_argument("--value", type=float)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("optimize", parents=common, help="seeded search for optimal observables")
    p.add_argument("--dim", type=int)
    p.add_argument("--scheme", choices=("dp", "db"))
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--scenario", metavar="FILE", help="read an optimizer stanza")
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.tolerance is not None and not args.tolerance > 0:
        parser.error("--tolerance must be positive")
    try:
        return args.func(args)
    except (UsageError, ScenarioFileError, ScenarioError) as exc:
        print(f"ctx: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
