"""Command-line frontend.

    appi run SPEC [options]      run every query of a specification file
    appi parse SPEC              load a file and print what it declares
    appi selftest [--seed N]     probe demonstrations and normal-form invariants

Exit codes: 0 equivalent/success, 1 distinguished, 2 inconclusive, 3 error.
For ``run`` the exit code is the largest over all queries.
Defaults for the exploration options may come from a JSON file named by the
``APPI_CONFIG`` environment variable; command-line flags override it.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .equivalence import (
    INPUT,
    OUTPUT,
    TEST,
    DomainMismatch,
    EquivVerdict,
    ProbeSpec,
    barb_equivalent,
    build_probe,
    context_closure_check,
    fresh_barb_name,
    materialize_pair,
    naive_bisim_oracle,
    static_equivalent,
    weak_labeled_bisim,
)
from .generators import corpus
from .lts import ALIAS, LITERAL, ExplorationConfig, Explorer, build_lts, enumerate_transitions
from .normal_form import PreconditionViolated, normal_form_violations, normalize_process, struct_equiv
from .process_ast import format_process
from .rewriting import EMPTY_THEORY, StepBudgetExceeded
from .specfile import Query, SpecFile, load_spec
from .syntax import ParseError, parse_process, parse_term
from .term_core import Atom, format_term, var

log = logging.getLogger("appi")

OK, DISTINGUISHED, INCONCLUSIVE, ERROR = 0, 1, 2, 3
CONFIG_ENV = "APPI_CONFIG"
CONFIG_KEYS = {"depth", "repl_bound", "max_states", "output_label_mode", "format", "seed", "jobs"}
_CODES = {"equivalent": OK, "distinguished": DISTINGUISHED, "inconclusive": INCONCLUSIVE}


@dataclass
class Report:
    query: str
    code: int
    text: str
    data: dict = field(default_factory=dict)
    dot: str | None = None

    def to_dict(self):
        return {"query": self.query, "exit": self.code, **self.data}


def _verdict_report(q: Query, v: EquivVerdict) -> Report:
    return Report(q.describe(), _CODES[v.kind], str(v), v.to_dict())


def run_query(spec: SpecFile, q: Query, cfg: ExplorationConfig, base_dir: Path | None = None) -> Report:
    try:
        return _dispatch(spec, q, cfg, base_dir or Path.cwd())
    except (PreconditionViolated, DomainMismatch, StepBudgetExceeded, ValueError, OSError) as exc:
        return Report(q.describe(), ERROR, f"error: {exc}", {"error": str(exc)})


def _dispatch(spec: SpecFile, q: Query, cfg: ExplorationConfig, base_dir: Path) -> Report:
    theory = spec.theory
    procs = q.processes
    if q.kind == "normalize":
        nf = normalize_process(procs[0], theory)
        data = {"normal_form": str(nf), "names": [str(n) for n in nf.names],
                "frame": {str(x): format_term(e) for x, e in nf.frame.bindings}, "body": str(nf.body)}
        return Report(q.describe(), OK, str(nf), data)
    if q.kind == "transitions":
        ts = sorted(f"{t.action} -> {format_process(t.target)}"
                    for t in enumerate_transitions(procs[0], cfg, theory))
        return Report(q.describe(), OK, "\n".join(ts) if ts else "(no transitions)", {"transitions": ts})
    if q.kind == "barbs":
        ex = Explorer(theory, cfg, roots=procs)
        bs = sorted(str(b) for b in ex.barbs(ex.state_of_process(procs[0])))
        code = INCONCLUSIVE if ex.truncated else OK
        return Report(q.describe(), code, "{" + ", ".join(bs) + "}", {"barbs": bs, "truncated": ex.truncated})
    if q.kind == "lts":
        lts = build_lts(procs[0], theory, cfg)
        dot = lts.to_dot()
        data = {"states": len(lts.states), "edges": len(lts.edges), "truncated": lts.truncated}
        text = lts.to_lines().rstrip("\n")
        if q.path:
            target = Path(q.path)
            if not target.is_absolute():
                target = base_dir / target
            target.write_text(dot, encoding="utf-8")
            data["written"] = str(target)
            text += f"\n# wrote {target}"
        code = INCONCLUSIVE if lts.truncated else OK
        return Report(q.describe(), code, text, data, dot=dot)
    a, b = procs[0], procs[1]
    if q.kind == "bisim":
        return _verdict_report(q, weak_labeled_bisim(a, b, cfg, theory))
    if q.kind == "static":
        return _verdict_report(q, static_equivalent(a, b, cfg.depth, theory, cfg))
    if q.kind == "barbeq":
        return _verdict_report(q, barb_equivalent(a, b, cfg, theory))
    if q.kind == "oracle":
        la, lb = materialize_pair(a, b, cfg, theory)
        return _verdict_report(q, naive_bisim_oracle(la, lb))
    if q.kind == "struct":
        same = struct_equiv(a, b, theory)
        return Report(q.describe(), OK if same else DISTINGUISHED,
                      "structurally equivalent" if same else "not shown structurally equivalent",
                      {"verdict": "equivalent" if same else "distinguished"})
    if q.kind == "closure":
        return _verdict_report(q, context_closure_check(a, b, [(q.binders, q.context)], cfg, theory))
    if q.kind == "probe":
        barb = fresh_barb_name(a, b)
        probe = ProbeSpec(q.probe, q.terms[0], q.terms[1], barb)
        return _probe_report(q, probe, a, b, cfg, theory)
    raise ValueError(f"unknown query {q.kind!r}")


def _probe_report(q, probe, a, b, cfg, theory) -> Report:
    """Barb of the probe name on each composite, and whether some reachable state lacks it."""
    rows = []
    for p in (a, b):
        composite = build_probe(probe, p)
        ex = Explorer(theory, cfg, roots=[composite])
        st = ex.state_of_process(composite)
        has = probe.barb in ex.barbs(st)
        can_lose = any(probe.barb not in ex.barbs(s) for s in ex.tau_closure(st))
        rows.append({"barb": has, "can_lose_barb": can_lose, "truncated": ex.truncated})
    if any(r["truncated"] for r in rows):
        code = INCONCLUSIVE
    elif rows[0]["barb"] != rows[1]["barb"] or rows[0]["can_lose_barb"] != rows[1]["can_lose_barb"]:
        code = DISTINGUISHED
    else:
        code = OK
    text = (f"{probe}: left barb={rows[0]['barb']} can lose={rows[0]['can_lose_barb']}; "
            f"right barb={rows[1]['barb']} can lose={rows[1]['can_lose_barb']}")
    return Report(q.describe(), code, text, {"probe": str(probe), "left": rows[0], "right": rows[1]})


# --- configuration ------------------------------------------------------------------------

def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: configuration must be a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown configuration keys {sorted(unknown)}")
    return data


def exploration_config(args) -> ExplorationConfig:
    return ExplorationConfig(depth=args.depth, replication_bound=args.repl_bound,
                             max_states=args.max_states, output_label_mode=args.output_label_mode)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="appi", description="Applied pi-calculus workbench.")
    parser.add_argument("--version", action="version", version=f"appi {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def options(p):
        p.add_argument("--depth", type=int, default=2, help="recipe depth for inputs and frame tests")
        p.add_argument("--repl-bound", type=int, default=2, help="replication unfoldings per path")
        p.add_argument("--max-states", type=int, default=10_000)
        p.add_argument("--output-label-mode", choices=(LITERAL, ALIAS), default=LITERAL)
        p.add_argument("--format", choices=("text", "json", "dot"), default="text")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="queries evaluated concurrently")

    run = sub.add_parser("run", help="run the queries of a specification file")
    run.add_argument("spec")
    options(run)
    check = sub.add_parser("parse", help="load a specification file and summarise it")
    check.add_argument("spec")
    options(check)
    st = sub.add_parser("selftest", help="built-in probe demonstrations and invariant checks")
    st.add_argument("--count", type=int, default=200, help="random processes for the invariant check")
    options(st)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    path = os.environ.get(CONFIG_ENV)
    if path:
        file_defaults = load_config_file(path)
        given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, value in file_defaults.items():
            if key not in given:
                setattr(args, key, value)
    return args


# --- commands -----------------------------------------------------------------------------

def _emit(reports: list[Report], fmt: str, out) -> None:
    if fmt == "json":
        code = max((r.code for r in reports), default=OK)
        json.dump({"exit": code, "queries": [r.to_dict() for r in reports]}, out, indent=2)
        out.write("\n")
        return
    for r in reports:
        if fmt == "dot" and r.dot is not None:
            out.write(r.dot)
            continue
        out.write(f"== {r.query} [exit {r.code}]\n{r.text}\n")


def cmd_run(args, out) -> int:
    spec = load_spec(args.spec)
    cfg = exploration_config(args)
    base = Path(args.spec).resolve().parent
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(lambda q: run_query(spec, q, cfg, base), spec.queries))
    else:
        reports = [run_query(spec, q, cfg, base) for q in spec.queries]
    _emit(reports, args.format, out)
    return max((r.code for r in reports), default=OK)


def cmd_parse(args, out) -> int:
    spec = load_spec(args.spec)
    d = spec.declarations
    summary = {
        "functions": dict(sorted(d.functions.items())),
        "constants": sorted(d.constants),
        "names": sorted(d.names),
        "variables": sorted(d.variables),
        "rules": [str(r) for r in spec.rules],
        "processes": {k: format_process(p) for k, p in spec.processes.items()},
        "queries": [q.describe() for q in spec.queries],
    }
    if args.format == "json":
        json.dump(summary, out, indent=2)
        out.write("\n")
    else:
        for key, value in summary.items():
            out.write(f"{key}: {value}\n")
    return OK


SELFTEST_PROBES = (
    (TEST, "{0/x}", "{1/x}", ("x", "0")),
    (INPUT, "in(c,y).0", "0", ("c", "0")),
    (OUTPUT, "out(c,0)", "out(c,1)", ("c", "0")),
)


def cmd_selftest(args, out) -> int:
    cfg = exploration_config(args)
    failures = 0
    for kind, left, right, (t1, t2) in SELFTEST_PROBES:
        a, b = parse_process(left), parse_process(right)
        terms = [Atom(var("x")) if t == "x" else parse_term(t) for t in (t1, t2)]
        probe = ProbeSpec(kind, terms[0], terms[1], fresh_barb_name(a, b))
        q = Query("probe", [a, b], 0, labels=[left, right], terms=terms, probe=kind)
        r = _probe_report(q, probe, a, b, cfg, EMPTY_THEORY)
        good = r.code == DISTINGUISHED
        failures += not good
        out.write(f"{'ok  ' if good else 'FAIL'} probe {probe} separates {left} and {right}\n")
    start = time.perf_counter()
    bad = 0
    for p in corpus(args.seed, args.count):
        problems = normal_form_violations(p, normalize_process(p))
        if problems:
            bad += 1
            log.warning("normal form of %s: %s", p, problems)
    failures += bad > 0
    out.write(f"{'ok  ' if not bad else 'FAIL'} normal-form invariants on {args.count} random processes "
              f"(seed {args.seed}, {bad} failures, {time.perf_counter() - start:.2f}s)\n")
    return OK if not failures else DISTINGUISHED


def main(argv=None, out=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    out = out or sys.stdout
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return ERROR if exc.code not in (0, None) else OK
    except (OSError, ValueError) as exc:
        print(f"appi: {exc}", file=sys.stderr)
        return ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    random.seed(args.seed)
    try:
        if args.command == "run":
            return cmd_run(args, out)
        if args.command == "parse":
            return cmd_parse(args, out)
        return cmd_selftest(args, out)
    except (ParseError, OSError, ValueError) as exc:
        print(f"appi: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
