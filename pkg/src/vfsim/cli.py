"""Command line: ``vfsim run | heatmap | compile | bench``.

Exit codes: 0 ok, 1 model failure, 2 parse or usage error,
3 deadline infeasible, 4 oracle mismatch.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import sys
import time
from pathlib import Path

from vfsim import formats
from vfsim.compiler import dump_tree, graph_search_baseline, lookup
from vfsim.errors import (DeadlineInfeasibleError, InvalidArgumentError, ModelEvaluationError,
                          NoFeasibleModelError, ParseError)
from vfsim.runtime import build_knowledge, run_adaptive_simulation
from vfsim.vfg import enumerate_admissible

EXIT_OK = 0
EXIT_MODEL = 1
EXIT_PARSE = 2
EXIT_DEADLINE = 3
EXIT_ORACLE = 4

log = logging.getLogger("vfsim")


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_run(args) -> int:
    scenario = formats.load_scenario(args.scenario)
    library = formats.load_library(args.library)
    if args.deadline is not None:
        scenario = dataclasses.replace(scenario, deadline=args.deadline)
    heatmap = formats.read_heatmap(args.heatmap) if args.heatmap else None
    kb = build_knowledge(library, deadline=scenario.deadline, heatmap=heatmap)
    records = run_adaptive_simulation(scenario, kb, force_model=args.force_model,
                                      recheck=args.recheck)
    text = formats.format_trace(records)
    out = args.out or "trace.csv"
    Path(out).write_text(text)
    total = sum(r.step_cost for r in records)
    switches = sum(r.switched for r in records)
    print(f"steps={len(records)} total_cost={total:g} switches={switches} trace={out}")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    if not args.traces:
        raise InvalidArgumentError("heatmap needs at least one trace file")
    rows, bad = [], 0
    for path in args.traces:
        r, b = formats.read_trace(path)
        rows.extend(r)
        bad += b
        if b:
            log.warning("%s: skipped %d malformed row(s)", path, b)
    if bad:
        print(f"warning: skipped {bad} malformed row(s) in total", file=sys.stderr)
    if not rows:
        raise InvalidArgumentError("no usable trace rows")
    _emit(formats.format_heatmap(formats.heatmap_from_traces(rows)), args.out)
    return EXIT_OK


def cmd_compile(args) -> int:
    library = formats.load_library(args.library)
    heatmap = formats.read_heatmap(args.heatmap) if args.heatmap else None
    kb = build_knowledge(library, deadline=args.deadline, heatmap=heatmap)
    stats = kb.tree.stats()
    text = dump_tree(kb.tree)
    text += (f"# ordering: {', '.join(kb.tree.ordering) or '-'}\n"
             f"# depth={stats['depth']} leaves={stats['leaves']} "
             f"infeasible={stats['infeasible']}\n")
    _emit(text, args.out)
    return EXIT_OK


def _timed(fn, repeat):
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat * 1e6


def cmd_bench(args) -> int:
    library = formats.load_library(args.library)
    contexts = formats.read_contexts(args.contexts)
    kb = build_knowledge(library)
    tree, graph, requested = kb.tree, library.graph, library.requested
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["context", "nodes_visited", "vertices_visited", "equal"]
    if args.timing:
        header += ["tree_us", "graph_us"]
    writer.writerow(header)
    mismatches = 0
    for ctx in contexts:
        try:
            cands, visited = lookup(tree, ctx)
        except NoFeasibleModelError as exc:
            # An infeasible leaf means "no admissible frame".
            cands, visited = [], exc.visited
        g_cands, g_visited = graph_search_baseline(graph, ctx, requested)
        oracle = enumerate_admissible(graph, ctx, requested)
        equal = list(cands) == list(g_cands) == list(oracle)
        mismatches += not equal
        row = [formats.cell_text(tuple(ctx.items())), visited, g_visited,
               "true" if equal else "false"]
        if args.timing:
            row += [f"{_timed(lambda: _safe_lookup(tree, ctx), args.repeat):.3f}",
                    f"{_timed(lambda: graph_search_baseline(graph, ctx, requested), args.repeat):.3f}"]
        writer.writerow(row)
    _emit(buf.getvalue(), args.out)
    if mismatches:
        print(f"oracle mismatch on {mismatches} context(s)", file=sys.stderr)
        return EXIT_ORACLE
    return EXIT_OK


def _safe_lookup(tree, ctx):
    try:
        return lookup(tree, ctx)
    except NoFeasibleModelError:
        return None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vfsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an adaptive or fixed-model simulation")
    run.add_argument("--scenario", required=True)
    run.add_argument("--library", required=True)
    run.add_argument("--heatmap", help="heat-map report used to order the decision tree")
    run.add_argument("--deadline", type=float, help="override the scenario deadline")
    run.add_argument("--force-model", dest="force_model", metavar="ID")
    run.add_argument("--recheck", type=int, metavar="K")
    run.add_argument("--out", help="trace file (default trace.csv)")
    run.add_argument("--seed", type=int, help="reserved; the pipeline is deterministic")
    run.set_defaults(func=cmd_run)

    hm = sub.add_parser("heatmap", help="aggregate traces into a heat-map report")
    hm.add_argument("traces", nargs="*")
    hm.add_argument("--out")
    hm.set_defaults(func=cmd_heatmap)

    comp = sub.add_parser("compile", help="compile a library into a decision tree")
    comp.add_argument("--library", required=True)
    comp.add_argument("--heatmap")
    comp.add_argument("--deadline", type=float)
    comp.add_argument("--out")
    comp.set_defaults(func=cmd_compile)

    bench = sub.add_parser("bench", help="tree lookup versus graph search")
    bench.add_argument("--library", required=True)
    bench.add_argument("--contexts", required=True)
    bench.add_argument("--timing", action="store_true", help="add wall-clock columns")
    bench.add_argument("--repeat", type=int, default=200)
    bench.add_argument("--out")
    bench.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DeadlineInfeasibleError as exc:
        print(f"deadline infeasible: {exc}", file=sys.stderr)
        return EXIT_DEADLINE
    except ModelEvaluationError as exc:
        print(f"model failure: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
