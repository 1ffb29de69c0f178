"""Command-line front end: verify, compare, oracle, gen, invariant."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, fields

from . import dataflow, engine, gen, lang, oracle
from .encoder import build_ts
from .engine import Algo, EngineConfig, VerdictReport

EXIT = {engine.TRUE: 0, engine.FALSE: 1, engine.UNKNOWN: 2}
EXIT_USAGE = 3

CSV_COLUMNS = ["task", "algo", "verdict", "k", "itp_queries", "sat_queries", "solver_time_s",
               "itp_time_s", "wall_time_s", "seed"]


@dataclass
class RunRecord:
    task: str
    algo: str
    verdict: str
    k: int
    itp_queries: int
    sat_queries: int
    solver_time_s: float
    itp_time_s: float
    wall_time_s: float
    seed: int

    @classmethod
    def from_report(cls, task: str, rep: VerdictReport) -> "RunRecord":
        return cls(task, rep.algo.value, rep.verdict, rep.k, rep.itp_queries, rep.sat_queries,
                   rep.solver_time, rep.itp_time, rep.wall_time, rep.seed)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        kw = {}
        for f in fields(cls):
            v = d[f.name]
            kw[f.name] = {"int": int, "float": float, "str": str}[f.type](v)
        return cls(**kw)

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def records_from_csv(text: str) -> list[RunRecord]:
    return [RunRecord.from_dict(row) for row in csv.DictReader(io.StringIO(text))]


def records_from_json(text: str) -> list[RunRecord]:
    data = json.loads(text)
    if isinstance(data, dict):
        data = data.get("records", [data.get("record", data)])
    return [RunRecord.from_dict(d) for d in data]


def _human(records) -> str:
    head = ["task", "algo", "verdict", "k", "#itp", "#sat", "solver(s)", "itp(s)", "wall(s)"]
    rows = [[r.task, r.algo, r.verdict, str(r.k), str(r.itp_queries), str(r.sat_queries),
             f"{r.solver_time_s:.3f}", f"{r.itp_time_s:.3f}", f"{r.wall_time_s:.3f}"]
            for r in records]
    widths = [max(len(x) for x in col) for col in zip(head, *rows)]
    lines = ["  ".join(x.ljust(n) for x, n in zip(line, widths)).rstrip() for line in [head] + rows]
    return "\n".join(lines) + "\n"


# -- shared helpers ---------------------------------------------------------

class UsageError(Exception):
    pass


def load_program(path: str, width: int | None = None) -> lang.Program:
    with open(path) as fh:
        src = fh.read()
    p = lang.parse(src)
    if width is not None:
        p = p.with_width(width)
    return p


def _engine_config(args, algo) -> EngineConfig:
    return EngineConfig(algo=algo, k_max=args.kmax, seed=args.seed,
                        conflict_budget=args.conflict_budget, time_budget=args.time_budget,
                        dump_cnf=getattr(args, "dump_cnf", None),
                        dump_itp=getattr(args, "dump_itp", None))


def run_task(path: str, algo, args) -> VerdictReport:
    p = load_program(path, args.width)
    ts = build_ts(p)
    cfg = _engine_config(args, algo)
    src = None
    if cfg.strengthen_fpc:
        inv_text = None
        if args.inv_file:
            with open(args.inv_file) as fh:
                inv_text = fh.read()
        src = engine.make_inv_source(ts, df_level=args.df_level, df_mode=args.df_mode,
                                     df_budget=args.df_budget, inv_text=inv_text, seed=args.seed)
    return engine.run(ts, cfg, src)


def trace_to_json(trace) -> list:
    return [{"state": dict(s), "nondet": {str(k): v for k, v in nd.items()}} for s, nd in trace]


def trace_from_json(data) -> list:
    return [(dict(e["state"]), {int(k): v for k, v in e["nondet"].items()}) for e in data]


def report_to_json(task: str, rep: VerdictReport) -> dict:
    out = {"record": asdict(RunRecord.from_report(task, rep)), "reason": rep.reason,
           "certify_queries": rep.certify_queries}
    if rep.counterexample is not None:
        out["counterexample"] = trace_to_json(rep.counterexample)
    if rep.certificate is not None:
        out["certificate"] = {"checks": rep.certificate.checks,
                              "inv": dataflow.F.to_str(rep.certificate.inv)}
    return out


# -- subcommands ------------------------------------------------------------

def cmd_verify(args) -> int:
    rep = run_task(args.file, args.algo, args)
    rec = RunRecord.from_report(args.file, rep)
    if rep.verdict == engine.FALSE and rep.counterexample is not None:
        cex_path = os.path.splitext(args.file)[0] + ".cex.json"
        with open(cex_path, "w") as fh:
            json.dump(trace_to_json(rep.counterexample), fh, indent=1)
            fh.write("\n")
    if args.format == "json":
        print(json.dumps(report_to_json(args.file, rep), indent=1))
    elif args.format == "csv":
        sys.stdout.write(records_to_csv([rec]))
    else:
        sys.stdout.write(_human([rec]))
        if rep.counterexample is not None:
            print(f"counterexample ({len(rep.counterexample)} loop-head states):")
            for s, nd in rep.counterexample:
                print("  " + " ".join(f"{n}={v}" for n, v in s.items())
                      + (f"  nondet {nd}" if nd else ""))
        if rep.reason:
            print(f"reason: {rep.reason}")
    return EXIT[rep.verdict]


def _tasks(paths) -> list[str]:
    out = []
    for path in paths:
        if os.path.isdir(path):
            out += sorted(os.path.join(path, f) for f in os.listdir(path) if f.endswith(".slp"))
        else:
            out.append(path)
    return out


def compare(tasks, algos, args) -> tuple[list[RunRecord], list[dict]]:
    """One record per (task, algo), plus paired deltas of every algo against
    the first one."""
    records: list[RunRecord] = []
    deltas = []
    for task in tasks:
        by_algo = {}
        for algo in algos:
            try:
                rep = run_task(task, algo, args)
            except (lang.ParseError, OSError, engine.EngineError, ValueError) as exc:
                logging.getLogger(__name__).warning("%s/%s failed: %s", task, algo.value, exc)
                rep = VerdictReport(engine.UNKNOWN, algo, seed=args.seed, reason=str(exc))
            rec = RunRecord.from_report(task, rep)
            records.append(rec)
            by_algo[algo] = rec
        base = by_algo[algos[0]]
        for algo in algos[1:]:
            r = by_algo[algo]
            deltas.append({"task": task, "base": algos[0].value, "algo": algo.value,
                           "dk": r.k - base.k, "ditp": r.itp_queries - base.itp_queries,
                           "dwall": r.wall_time_s - base.wall_time_s})
    return records, deltas


def cmd_compare(args) -> int:
    algos = [Algo.parse(a) for a in args.algo]
    if len(algos) < 2:
        raise UsageError("compare needs at least two --algo values")
    tasks = _tasks(args.paths)
    records, deltas = compare(tasks, algos, args)
    if args.format == "json":
        print(json.dumps({"records": [asdict(r) for r in records], "deltas": deltas}, indent=1))
    elif args.format == "csv":
        sys.stdout.write(records_to_csv(records))
    else:
        sys.stdout.write(_human(records))
        if deltas:
            print()
            print("task  algo-vs-base  dk  ditp  dwall(s)")
            for d in deltas:
                print(f"{d['task']}  {d['algo']}-{d['base']}  {d['dk']}  {d['ditp']}  {d['dwall']:.3f}")
    return 0


def cmd_oracle(args) -> int:
    p = load_program(args.file, args.width)
    try:
        rs = oracle.explore(p)
    except oracle.TooLarge as exc:
        print(f"too large: {exc}")
        return EXIT[engine.UNKNOWN]
    verdict = engine.TRUE if rs.safe else engine.FALSE
    if args.format == "json":
        out = {"verdict": verdict, "states": len(rs), "hull": oracle.hull(rs)}
        if rs.trace is not None:
            out["counterexample"] = trace_to_json(rs.trace)
        print(json.dumps(out, indent=1))
    else:
        print(f"verdict {verdict}")
        print(f"states {len(rs)}")
    return EXIT[verdict]


def cmd_gen(args) -> int:
    cfg = gen.GenConfig(width=args.width or 4, max_vars=args.max_vars, max_stmts=args.max_stmts,
                        max_nondets=args.max_nondets)
    paths = gen.write_corpus(args.out, args.seed, args.count, cfg) if args.count else []
    for path in paths:
        print(path)
    return 0


def cmd_invariant(args) -> int:
    p = load_program(args.file, args.width)
    ts = build_ts(p)
    src = engine.make_inv_source(ts, df_level=args.df_level, df_mode="sync", seed=args.seed)
    text = src.snapshot().to_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# -- argument parsing -------------------------------------------------------

def _width(s: str) -> int:
    w = int(s)
    if w not in lang.WIDTHS:
        raise argparse.ArgumentTypeError(f"width must be one of {lang.WIDTHS}")
    return w


def _level(s: str) -> int:
    v = int(s)
    if not 0 <= v <= dataflow.MAX_LEVEL:
        raise argparse.ArgumentTypeError(f"level must be in 0..{dataflow.MAX_LEVEL}")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--width", type=_width, default=None)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--format", choices=["human", "json", "csv"], default="human")

    run_opts = _Parser(add_help=False)
    run_opts.add_argument("--kmax", type=_positive, default=100)
    run_opts.add_argument("--df-level", type=_level, default=0)
    run_opts.add_argument("--df-mode", choices=["sync", "async"], default="sync")
    run_opts.add_argument("--df-budget", type=float, default=None)
    run_opts.add_argument("--inv-file", default=None)
    run_opts.add_argument("--conflict-budget", type=_positive, default=engine.sat.DEFAULT_CONFLICT_BUDGET)
    run_opts.add_argument("--time-budget", type=float, default=None)

    ap = _Parser(prog="imcaug", description="Interpolation-based model checking of single-loop programs.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", parents=[common, run_opts], help="verify one program")
    v.add_argument("file")
    v.add_argument("--algo", choices=[a.value for a in Algo], default="imc")
    v.add_argument("--dump-cnf", metavar="DIR", default=None)
    v.add_argument("--dump-itp", metavar="FILE", default=None)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("compare", parents=[common, run_opts], help="compare algorithms on tasks")
    c.add_argument("paths", nargs="+")
    c.add_argument("--algo", action="append", choices=[a.value for a in Algo], required=True)
    c.set_defaults(func=cmd_compare)

    o = sub.add_parser("oracle", parents=[common], help="explicit-state reachability")
    o.add_argument("file")
    o.set_defaults(func=cmd_oracle)

    g = sub.add_parser("gen", parents=[common], help="write random programs")
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--out", default="corpus")
    g.add_argument("--max-vars", type=int, default=3)
    g.add_argument("--max-stmts", type=int, default=6)
    g.add_argument("--max-nondets", type=int, default=2)
    g.set_defaults(func=cmd_gen)

    i = sub.add_parser("invariant", parents=[common], help="print the interval invariant")
    i.add_argument("file")
    i.add_argument("--df-level", type=_level, default=0)
    i.add_argument("--out", default=None)
    i.set_defaults(func=cmd_invariant)
    return ap


def _setup_logging():
    level = os.environ.get("IMCAUG_LOG", "").strip().lower()
    if level in ("debug", "info"):
        logging.basicConfig(level=getattr(logging, level.upper()), stream=sys.stderr,
                            format="%(asctime)s %(name)s %(levelname)s %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except lang.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.getLogger(__name__).debug("%s finished in %.3fs", args.cmd, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
