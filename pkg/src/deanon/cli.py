"""Command-line front end.

    python -m deanon run --strategy map --users 1024 --groups 4096 --edge-prob 0.5 \\
        --trials 1000 --seed 7
    python -m deanon sweep --strategy gis,map --users 256,1024 --edge-prob 0.5
    python -m deanon oracle --strategy gis --users 2 --groups 1 --nprime 1
    python -m deanon selftest

Exit codes: 0 success, 1 usage error, 2 runtime or cell failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import __version__
from .errors import ParameterError
from .experiments import (CSV_COLUMNS, EXHAUSTIVE, GIS, MAP, SEED_SCHEME, STRATEGIES,
                          ExperimentConfig, closed_form_candidates, exact_tiny_oracle,
                          expand_sweep, monte_carlo_noiseless, run_cell, tiny_instance_params)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

PROB_FLAGS = (("edge_prob", "edge-prob"), ("e1", "e1"), ("e2", "e2"), ("f1", "f1"), ("f2", "f2"))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_model_flags(p: argparse.ArgumentParser, multi: bool):
    kind = {"action": "append"} if multi else {}
    p.add_argument("--strategy", required=True, **kind)
    p.add_argument("--users", required=True, **kind)
    p.add_argument("--groups", **kind, help="number of groups, or 'auto' (default)")
    p.add_argument("--edge-prob", dest="edge_prob", **kind)
    for name in ("e1", "e2", "f1", "f2"):
        p.add_argument(f"--{name}", **kind)
    p.add_argument("--nprime", **kind)
    p.add_argument("--epsilon", **kind)
    p.add_argument("--rounds", **kind)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deanon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"deanon {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, multi in (("run", False), ("sweep", True)):
        p = sub.add_parser(name)
        _add_model_flags(p, multi)
        p.add_argument("--trials", default="1000")
        p.add_argument("--seed", default="0")
        p.add_argument("--jobs", default="1", help="worker processes, 0 = one per CPU")
        p.add_argument("--confidence", default="0.95")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", default="-")
        p.add_argument("--fixed-graph", action="store_true",
                       help="one graph pair per cell, expectation over the victim only")
        p.add_argument("--timing", action="store_true",
                       help="write wall-clock seconds to runtime_s (breaks byte-identical reruns)")
    p = sub.add_parser("oracle")
    _add_model_flags(p, False)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p = sub.add_parser("selftest")
    p.add_argument("--trials", default="20000")
    p.add_argument("--seed", default="0")
    return parser


def _num(flag, text, cast, lo=None, hi=None):
    try:
        value = cast(text)
    except (TypeError, ValueError):
        raise UsageError(f"{flag} must be a {cast.__name__}, got {text!r}") from None
    if isinstance(value, float) and math.isnan(value):
        raise UsageError(f"{flag} must be a number")
    if lo is not None and hi is not None and not lo <= value <= hi:
        raise UsageError(f"{flag} must be in [{lo:g},{hi:g}]")
    if lo is not None and value < lo:
        raise UsageError(f"{flag} must be >= {lo}")
    return value


def _values(raw, multi):
    if raw is None:
        return [None]
    if not multi:
        return [raw]
    out = []
    for chunk in raw:
        out.extend(v.strip() for v in chunk.split(",") if v.strip())
    return out or [None]


def _model_axes(args, multi: bool) -> dict:
    """Validated value lists for every model flag."""
    axes = {}
    strategies = _values(args.strategy, multi)
    for s in strategies:
        if s not in STRATEGIES:
            raise UsageError(f"--strategy must be one of {','.join(STRATEGIES)}, got {s!r}")
    axes["strategy"] = strategies
    axes["m"] = [_num("--users", v, int, 1) for v in _values(args.users, multi)]
    groups = []
    for v in _values(args.groups, multi):
        groups.append(None if v in (None, "auto") else _num("--groups", v, int, 1))
    axes["n"] = groups
    for attr, flag in PROB_FLAGS:
        vals = _values(getattr(args, attr), multi)
        default = 0.5 if attr == "edge_prob" else 0.0
        axes["p" if attr == "edge_prob" else attr] = [
            default if v is None else _num(f"--{flag}", v, float, 0.0, 1.0) for v in vals]
    axes["n_prime"] = [None if v is None else _num("--nprime", v, int, 0)
                       for v in _values(args.nprime, multi)]
    eps = []
    for v in _values(args.epsilon, multi):
        if v is not None:
            v = _num("--epsilon", v, float)
            if not v > 0:
                raise UsageError("--epsilon must be > 0")
        eps.append(v)
    axes["epsilon"] = eps
    axes["rounds"] = [None if v is None else _num("--rounds", v, int, 1)
                      for v in _values(args.rounds, multi)]
    for k in axes["n_prime"]:
        for n in axes["n"]:
            if k is not None and n is not None and k > n:
                raise UsageError(f"--nprime {k} exceeds --groups {n}")
    return axes


def parse_and_validate(argv):
    """Parse ``argv`` into a namespace with validated ``configs``.

    Raises :class:`UsageError` naming the offending flag.
    """
    args = build_parser().parse_args(argv)
    if args.command in ("run", "sweep"):
        axes = _model_axes(args, args.command == "sweep")
        base = {
            "trials": _num("--trials", args.trials, int, 1),
            "master_seed": _num("--seed", args.seed, int, 0, 2**64 - 1),
            "confidence": _num("--confidence", args.confidence, float),
            "fixed_graph": args.fixed_graph,
        }
        if not 0.0 < base["confidence"] < 1.0:
            raise UsageError("--confidence must be in (0,1)")
        args.jobs = _num("--jobs", args.jobs, int, 0)
        try:
            args.configs = expand_sweep(base, axes)
        except ParameterError as exc:
            raise UsageError(str(exc)) from None
    elif args.command == "oracle":
        axes = _model_axes(args, False)
        args.model = {k: v[0] for k, v in axes.items()}
        if args.model["n"] is None:
            raise UsageError("oracle needs an explicit --groups")
    else:
        args.trials = _num("--trials", args.trials, int, 1)
        args.seed = _num("--seed", args.seed, int, 0)
    return args


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _rows(records, timing: bool):
    rows = []
    for rec in records:
        row = rec.row()
        if not timing:
            row["runtime_s"] = None
        rows.append(row)
    return rows


def render_report(records, fmt: str, timing: bool = False) -> str:
    """CSV (comment header, column header, one row per completed cell and a
    ``failed_cells`` footer when needed) or a JSON array of row objects."""
    done = [r for r in records if not r.failed]
    failed = [r for r in records if r.failed]
    rows = _rows(done, timing)
    if fmt == "json":
        clean = [{k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                  for k, v in row.items()} for row in rows]
        return json.dumps(clean, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# deanon {__version__}; seed-derivation: {SEED_SCHEME}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in CSV_COLUMNS])
    if failed:
        entries = "; ".join(f"cell {r.cell_index} ({r.strategy}, m={r.m}): {r.error}" for r in failed)
        buf.write(f"# failed_cells: {entries}\n")
    return buf.getvalue()


def emit_report(records, fmt: str, destination: str = "-", timing: bool = False) -> None:
    text = render_report(records, fmt, timing)
    if destination in (None, "-"):
        sys.stdout.write(text)
        return
    with open(destination, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def selftest(trials: int = 20000, seed: int = 0, out=sys.stdout) -> bool:
    """Tiny-instance oracle equivalence and closed-form checks."""
    checks = []
    for strategy in (EXHAUSTIVE, GIS, MAP, "tss"):
        for m in (2, 3):
            for n in (1, 2, 3):
                for p in (0.25, 0.5):
                    params = tiny_instance_params(strategy, n)
                    kw = {} if params is None else {
                        "n_prime": params.n_prime, "epsilon": params.epsilon, "rounds": params.rounds}
                    exact = exact_tiny_oracle(strategy, m, n, p, **kw)
                    mean, se = monte_carlo_noiseless(strategy, m, n, p, params, trials, seed)
                    z = abs(mean - exact) / se if se > 0 else (0.0 if mean == exact else math.inf)
                    checks.append((f"oracle {strategy} m={m} n={n} p={p}", z <= 4.0,
                                   f"exact={exact:.6f} mc={mean:.6f} z={z:.2f}"))
    for m in (2, 3):
        for n in (1, 2, 3):
            for p in (0.25, 0.5):
                k = max(1, n - 1)
                gis = exact_tiny_oracle(GIS, m, n, p, n_prime=k)
                mp = exact_tiny_oracle(MAP, m, n, p, n_prime=k)
                checks.append((f"dominance m={m} n={n} p={p}", mp <= gis + 1e-12,
                               f"map={mp:.6f} gis={gis:.6f}"))
    for strategy in (GIS, MAP):
        cfg = ExperimentConfig(strategy, 200, 50, 0.3, n_prime=6, trials=2000, master_seed=seed)
        rec = run_cell(cfg)
        ref = closed_form_candidates(strategy, 200, 0.3, 6)
        z = abs(rec.mean_ambiguity - ref) / rec.se_ambiguity
        checks.append((f"closed-form candidates {strategy}", z <= 4.0,
                       f"mc={rec.mean_ambiguity:.3f} closed={ref:.3f} z={z:.2f}"))
        z = abs(rec.mean_q - rec.theory_ref_value) / rec.se_q
        checks.append((f"closed-form E[Q] {strategy}", z <= 4.0,
                       f"mc={rec.mean_q:.3f} exact={rec.theory_ref_value:.3f} z={z:.2f}"))
    rec = run_cell(ExperimentConfig(EXHAUSTIVE, 100, trials=5000, master_seed=seed))
    z = abs(rec.mean_q - 50.5) / rec.se_q
    checks.append(("exhaustive mean", z <= 4.0, f"mc={rec.mean_q:.3f} exact=50.5 z={z:.2f}"))
    ok = True
    for name, passed, detail in checks:
        ok &= passed
        out.write(f"{'PASS' if passed else 'FAIL'} {name}: {detail}\n")
    out.write(f"{sum(c[1] for c in checks)}/{len(checks)} checks passed\n")
    return ok


def main(argv=None) -> int:
    try:
        args = parse_and_validate(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE

    if args.command == "selftest":
        return EXIT_OK if selftest(args.trials, args.seed) else EXIT_FAILURE

    if args.command == "oracle":
        mdl = args.model
        try:
            value = exact_tiny_oracle(mdl["strategy"], mdl["m"], mdl["n"], mdl["p"],
                                      n_prime=mdl["n_prime"] or 0, epsilon=mdl["epsilon"],
                                      rounds=mdl["rounds"],
                                      noise=(mdl["e1"], mdl["e2"], mdl["f1"], mdl["f2"]))
        except ParameterError as exc:
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_FAILURE
        row = {"strategy": mdl["strategy"], "m": mdl["m"], "n": mdl["n"], "p": mdl["p"],
               "nprime": mdl["n_prime"] or 0, "exact_mean_q": value}
        if args.format == "json":
            sys.stdout.write(json.dumps(row) + "\n")
        else:
            sys.stdout.write(",".join(row) + "\n" + ",".join(_fmt(v) for v in row.values()) + "\n")
        return EXIT_OK

    records = [run_cell(cfg, jobs=args.jobs) for cfg in args.configs]
    try:
        emit_report(records, args.format, args.out, timing=args.timing)
    except OSError as exc:
        sys.stderr.write(f"error: cannot write {args.out}: {exc}\n")
        return EXIT_FAILURE
    failed = [r for r in records if r.failed]
    for r in failed:
        sys.stderr.write(f"cell {r.cell_index} failed: {r.error}\n")
    return EXIT_FAILURE if failed else EXIT_OK
