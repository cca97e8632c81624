"""Command-line front end: per-parameter runs, sweeps, windows and reports.

Subcommands: nest, classify, sweep, capacity, parawindow, stats.  Every
output artifact embeds the effective configuration, the tool version and
the constants profile; identical configuration and seed produce
byte-identical output regardless of thread count (sweep workers compute in
parallel but all writes go through one order-preserving serializer, and
wall-clock timings are only emitted when --timings is requested).

Exit codes: 0 success (including partial results such as budget-exhausted
nests), 2 configuration error, 3 I/O error.  The environment variable
QUADNEST_PRECISION overrides the default precision.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from . import __version__
from .classify import ClassifyConfig, classify_parameter
from .constants import PaperConstants, faithful_constants, practical_constants
from .dynamics import invariant_interval
from .errors import QuadnestError
from .nest import NestBudgets, build_nest, nest_report_to_dict
from .parawindow import parameter_window
from .precision import exact_decimal
from .qscapacity import IntervalSet, capacity_bounds

SWEEP_SCHEMA = "quadnest-sweep-v1"


def _default_precision() -> int:
    env = os.environ.get("QUADNEST_PRECISION")
    if env:
        try:
            return int(env)
        except ValueError:
            pass
    return 256


@dataclass
class RunConfig:
    """Effective configuration, embedded verbatim in every artifact."""

    command: str
    a: str | None = None
    a_min: str | None = None
    a_max: str | None = None
    grid: int = 1
    precision_bits: int = field(default_factory=_default_precision)
    time_budget: int = 4096
    count_budget: int = 256
    depth: int = 3
    N: int = 1000
    window: int | None = None
    effort: int = 2
    profile: str = "practical"
    const_a: float = 0.5
    const_b: float = 2.0
    const_a_tilde: float | None = None
    const_b_tilde: float | None = None
    gamma: float = 2.0
    seed: int = 0
    threads: int = 1
    out: str | None = None
    fmt: str = "json"
    timings: bool = False
    theta: float = 0.01
    level: int = 2
    target_index: int | None = None
    target_address: str | None = None

    def constants(self) -> PaperConstants:
        if self.profile == "faithful":
            return faithful_constants()
        return practical_constants(self.const_a, self.const_b,
                                   self.const_a_tilde, self.const_b_tilde,
                                   gamma=self.gamma)

    def budgets(self) -> NestBudgets:
        return NestBudgets(time_budget=self.time_budget,
                           count_budget=self.count_budget)

    def embed(self) -> dict:
        d = asdict(self)
        d["version"] = __version__
        return d


def _emit(text: str, out: str | None) -> int:
    try:
        if out:
            with open(out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 3


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_nest(cfg: RunConfig) -> int:
    m = invariant_interval(cfg.a, cfg.precision_bits)
    report = build_nest(m, cfg.depth, cfg.budgets())
    payload = nest_report_to_dict(report)
    payload["config"] = cfg.embed()
    return _emit(_json(payload), cfg.out)


def cmd_classify(cfg: RunConfig) -> int:
    ccfg = ClassifyConfig(precision_bits=cfg.precision_bits, N=cfg.N,
                          window=cfg.window, depth=cfg.depth,
                          budgets=NestBudgets(time_budget=min(cfg.time_budget, 512),
                                              count_budget=min(cfg.count_budget, 64)),
                          theta=cfg.theta)
    verdict = classify_parameter(cfg.a, ccfg)
    payload = verdict.to_dict()
    payload["config"] = cfg.embed()
    return _emit(_json(payload), cfg.out)


def _sweep_worker(args):
    a_str, ccfg_fields, timings = args
    ccfg = ClassifyConfig(
        precision_bits=ccfg_fields["precision_bits"], N=ccfg_fields["N"],
        depth=ccfg_fields["depth"],
        budgets=NestBudgets(time_budget=ccfg_fields["time_budget"],
                            count_budget=ccfg_fields["count_budget"]),
        theta=ccfg_fields["theta"])
    t0 = time.perf_counter()
    try:
        v = classify_parameter(a_str, ccfg)
        row = {
            "a": a_str, "verdict": v.verdict,
            "lambda_est": "" if v.lambda_est is None else repr(v.lambda_est),
            "recurrence_est": "" if v.recurrence_est is None else repr(v.recurrence_est),
            "nest_depth": v.nest_depth,
            "c_seq": ";".join(repr(c) for c in v.c_seq),
            "error": "",
        }
    except QuadnestError as e:
        row = {"a": a_str, "verdict": "Error", "lambda_est": "",
               "recurrence_est": "", "nest_depth": 0, "c_seq": "",
               "error": str(e)}
    row["runtime_ms"] = str(int((time.perf_counter() - t0) * 1000)) \
        if timings else ""
    return row


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.a_min is None or cfg.a_max is None:
        print("sweep needs --a-min and --a-max", file=sys.stderr)
        return 2
    lo, hi = float(cfg.a_min), float(cfg.a_max)
    if not (-0.25 <= lo <= hi <= 2.0):
        print("sweep range must lie inside [-0.25, 2]", file=sys.stderr)
        return 2
    if cfg.grid < 0:
        print("grid must be >= 0", file=sys.stderr)
        return 2
    if cfg.grid == 0:
        points = []
    elif cfg.grid == 1:
        points = [repr(lo)]
    else:
        points = [repr(lo + (hi - lo) * i / (cfg.grid - 1))
                  for i in range(cfg.grid)]
    ccfg_fields = {"precision_bits": cfg.precision_bits, "N": cfg.N,
                   "depth": cfg.depth,
                   "time_budget": min(cfg.time_budget, 512),
                   "count_budget": min(cfg.count_budget, 64),
                   "theta": cfg.theta}
    tasks = [(p, ccfg_fields, cfg.timings) for p in points]
    if cfg.threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as ex:
            rows = list(ex.map(_sweep_worker, tasks))
    else:
        rows = [_sweep_worker(t) for t in tasks]
    fields = ["a", "verdict", "lambda_est", "recurrence_est", "nest_depth",
              "c_seq", "runtime_ms", "error"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    rc = _emit(buf.getvalue(), cfg.out)
    if rc:
        return rc
    counts = {}
    for r in rows:
        counts[r["verdict"]] = counts.get(r["verdict"], 0) + 1
    total = max(len(rows), 1)
    summary = {
        "schema": SWEEP_SCHEMA,
        "config": cfg.embed(),
        "rows": len(rows),
        "fraction_regular": counts.get("Regular", 0) / total,
        "fraction_ce_candidate": counts.get("ColletEckmannCandidate", 0) / total,
        "fraction_nonrecurrent_ce": counts.get("NonRecurrentCE", 0) / total,
        "fraction_undetermined": counts.get("Undetermined", 0) / total,
        "fraction_error": counts.get("Error", 0) / total,
    }
    summary_path = cfg.out + ".summary.json" if cfg.out else None
    return _emit(_json(summary), summary_path)


def cmd_capacity(cfg: RunConfig, ambient: str, parts: str) -> int:
    try:
        alo, ahi = (x.strip() for x in ambient.split(":"))
        part_list = []
        if parts.strip():
            for chunk in parts.split(","):
                plo, phi = (x.strip() for x in chunk.split(":"))
                part_list.append((plo, phi))
    except ValueError:
        print("expected --ambient lo:hi and --parts lo:hi[,lo:hi...]",
              file=sys.stderr)
        return 2
    X = IntervalSet.of((alo, ahi), part_list)
    bound = capacity_bounds(X, cfg.gamma, cfg.effort)
    payload = bound.to_dict()
    payload["lower"] = exact_decimal(bound.lower)
    payload["upper"] = exact_decimal(bound.upper)
    payload["config"] = cfg.embed()
    return _emit(_json(payload), cfg.out)


def cmd_parawindow(cfg: RunConfig) -> int:
    addr = None
    if cfg.target_address:
        addr = tuple(int(x) for x in cfg.target_address.split(","))
    pw = parameter_window(cfg.a, cfg.level, cfg.target_index, addr,
                          precision_bits=cfg.precision_bits,
                          budgets=NestBudgets(time_budget=min(cfg.time_budget, 1024),
                                              count_budget=min(cfg.count_budget, 64),
                                              walk_cap=50_000))
    payload = {
        "a": cfg.a, "level": cfg.level,
        "window": {"lo": exact_decimal(pw.window.lo),
                   "hi": exact_decimal(pw.window.hi)},
        "width": float(pw.window.width()),
        "target": [asdict(t) for t in pw.target],
        "evaluations": pw.evaluations,
        "config": cfg.embed(),
    }
    return _emit(_json(payload), cfg.out)


def cmd_stats(cfg: RunConfig) -> int:
    from .branchstats import (classify_landing_LS_LF, classify_returns_VG_B,
                              lambda_exponents, large_times_checklist,
                              time_statistics, torrential_rate_check)
    consts = cfg.constants()
    m = invariant_interval(cfg.a, cfg.precision_bits)
    report = build_nest(m, cfg.depth, cfg.budgets())
    levels = report.levels
    classes = {}
    # VG/B induction needs c_{n0-1}, so it starts at level 2 for real nests
    if len(levels) >= 2 and levels[1].v is not None:
        try:
            classes = classify_returns_VG_B(levels, 2, consts)
        except QuadnestError:
            classes = {}
    per_level = []
    prev_stats = []
    for rs in levels:
        entry = {"level": rs.level, "c": rs.c, "v": rs.v, "s": rs.s,
                 "tau": rs.tau, "uncovered": float(rs.uncovered),
                 "branches": len(rs.branches)}
        if rs.level <= 2 and rs.branches and \
                max(b.return_time for b in rs.branches) <= 64:
            lam = lambda_exponents(rs)
            entry["lambda_n"] = lam.lambda_n
            entry["lambda_n_sampled"] = lam.lambda_n_sampled
        if rs.c is not None:
            ts = time_statistics(rs, consts, prev_stats=prev_stats,
                                 effort=min(cfg.effort, 2))
            prev_stats.append(ts)
            entry["zeta"] = ts.zeta
            entry["alpha"] = ts.alpha
            entry["partial_tail"] = ts.partial_tail
        cls = classes.get(rs.level)
        if cls is not None:
            entry["vg_count"] = "all" if cls.vg_universal else len(cls.vg)
            entry["bad_count"] = len(cls.bad)
        if rs.level >= 2 and rs.census:
            counts = {"LS": 0, "LF": 0, "other": 0}
            for rec in rs.census:
                if not rec.entries:
                    continue
                try:
                    fl = classify_landing_LS_LF(rs, rec.entries, consts)
                except QuadnestError:
                    break
                if fl.ls:
                    counts["LS"] += 1
                elif fl.lf:
                    counts["LF"] += 1
                else:
                    counts["other"] += 1
            entry["landing_census"] = counts
        checklist = large_times_checklist(rs, consts, effort=min(cfg.effort, 2)) \
            if rs.level >= 2 else ()
        entry["checklist"] = [
            {"item": it.item, "description": it.description,
             "evaluable": it.evaluable,
             "evaluations": [
                 {"s": e[0], "lhs": e[1], "rhs": e[2], "pass": e[3]}
                 for e in it.evaluations]}
            for it in checklist]
        per_level.append(entry)
    payload = {
        "a": cfg.a,
        "termination": report.termination.value,
        "levels": per_level,
        "torrential_rate": [
            {"level": n, "value": v, "in_(a,b)": ok}
            for n, v, ok in torrential_rate_check(levels, consts)],
        "constants": consts.describe(),
        "config": cfg.embed(),
    }
    return _emit(_json(payload), cfg.out)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--precision", type=int, default=_default_precision(),
                   dest="precision_bits", help="working precision in bits")
    p.add_argument("--time-budget", type=int, default=4096)
    p.add_argument("--count-budget", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   dest="fmt")
    p.add_argument("--profile", choices=("practical", "faithful"),
                   default="practical")
    p.add_argument("--const-a", type=float, default=0.5)
    p.add_argument("--const-b", type=float, default=2.0)
    p.add_argument("--const-a-tilde", type=float, default=None)
    p.add_argument("--const-b-tilde", type=float, default=None)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--effort", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="quadnest",
        description="Principal-nest laboratory for the quadratic family a - x^2")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("nest", help="build the principal nest and emit JSON")
    p.add_argument("--a", required=True)
    p.add_argument("--depth", type=int, default=3)
    _add_common(p)

    p = sub.add_parser("classify", help="Regular / Collet-Eckmann verdict")
    p.add_argument("--a", required=True)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--theta", type=float, default=0.01)
    _add_common(p)

    p = sub.add_parser("sweep", help="classify a parameter grid to CSV")
    p.add_argument("--a-min", required=True)
    p.add_argument("--a-max", required=True)
    p.add_argument("--grid", type=int, default=11)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--theta", type=float, default=0.01)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--timings", action="store_true")
    _add_common(p)

    p = sub.add_parser("capacity", help="certified capacity bounds for a set")
    p.add_argument("--ambient", required=True, help="lo:hi")
    p.add_argument("--parts", required=True, help="lo:hi[,lo:hi...]")
    _add_common(p)

    p = sub.add_parser("parawindow", help="parameter window of constant combinatorics")
    p.add_argument("--a", required=True)
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--target-index", type=int, default=None)
    p.add_argument("--target-address", default=None)
    _add_common(p)

    p = sub.add_parser("stats", help="per-level statistics bundle")
    p.add_argument("--a", required=True)
    p.add_argument("--depth", type=int, default=3)
    _add_common(p)
    return ap


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command)
    for name in ("a", "a_min", "a_max", "grid", "precision_bits",
                 "time_budget", "count_budget", "depth", "N", "window",
                 "effort", "profile", "const_a", "const_b", "const_a_tilde",
                 "const_b_tilde", "gamma", "seed", "threads", "out", "fmt",
                 "timings", "theta", "level", "target_index",
                 "target_address"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    return cfg


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    cfg = _config_from_args(args)
    try:
        if args.command == "nest":
            return cmd_nest(cfg)
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "capacity":
            return cmd_capacity(cfg, args.ambient, args.parts)
        if args.command == "parawindow":
            return cmd_parawindow(cfg)
        if args.command == "stats":
            return cmd_stats(cfg)
    except QuadnestError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
