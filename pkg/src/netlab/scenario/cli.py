"""``netlab`` command line: run, stats, repl, check."""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from ..wire.pcap import PcapError
from . import stats
from .commands import CommandError, parse_time
from .dsl import ScenarioError, load_scenario
from .filters import FilterError
from .runner import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, run_scenario

SCENARIO_SUFFIX = ".nls"


def exercises_dir() -> Path:
    return Path(str(resources.files("netlab") / "exercises"))


def _run_one(path: Path, out: Path | None, seed: int | None, halt: bool | None, update: bool,
             quiet: bool = False) -> int:
    try:
        sc = load_scenario(path)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_scenario(sc, out, seed=seed, halt_on_error=halt, update_goldens=update)
    if not quiet:
        for r in result.results:
            print(r.line())
    if result.halted is not None:
        print(f"halted: {result.halted}", file=sys.stderr)
    return result.exit_code


def cmd_run(args) -> int:
    return _run_one(Path(args.file), Path(args.out), args.seed, True if args.halt_on_error else None,
                    args.update_goldens)


def cmd_check(args) -> int:
    root = Path(args.dir) if args.dir else exercises_dir()
    files = sorted(root.glob(f"*{SCENARIO_SUFFIX}"))
    if not files:
        print(f"error: no {SCENARIO_SUFFIX} scenarios in {root}", file=sys.stderr)
        return EXIT_CONFIG
    worst = EXIT_OK
    for path in files:
        code = _run_one(path, Path(args.out) / path.stem, args.seed, None, False, quiet=True)
        verdict = {EXIT_OK: "ok", EXIT_ASSERT: "FAIL", EXIT_CONFIG: "ERROR"}[code]
        print(f"{verdict:<6}{path.name}")
        worst = max(worst, code)
    return worst


def cmd_stats(args) -> int:
    try:
        frames = stats.load(args.pcap)
        n = stats.count(frames, args.filter)
        print(f"{n} frames match {args.filter!r}" if args.filter else f"{n} frames")
        if args.interval is not None or args.csv:
            interval = parse_time(args.interval or "1s")
            text = stats.io_graph_csv(stats.io_graph(frames, args.filter, interval))
            if args.csv:
                Path(args.csv).write_text(text, encoding="utf-8")
            else:
                sys.stdout.write(text)
        if args.overhead:
            sys.stdout.write(stats.format_overhead(stats.overhead(frames, args.filter)))
    except (FilterError, CommandError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, PcapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_repl(args) -> int:
    from .repl import start

    try:
        start(args.file, args.seed)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netlab", description="Deterministic TCP/IP lab-network simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("file")
    r.add_argument("--seed", type=int, default=None, help="override the scenario's seed")
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--halt-on-error", action="store_true", help="stop at the first failing command")
    r.add_argument("--update-goldens", action="store_true", help="rewrite golden files from this run")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("stats", help="count and graph frames in a pcap")
    s.add_argument("pcap")
    s.add_argument("--filter", default="", help="display filter, e.g. 'arp or icmp'")
    s.add_argument("--interval", default=None, help="IO-graph bin width (default 1s when graphing)")
    s.add_argument("--csv", default=None, help="write the IO graph CSV here instead of stdout")
    s.add_argument("--overhead", action="store_true", help="print the header/payload byte ledger")
    s.set_defaults(fn=cmd_stats)

    q = sub.add_parser("repl", help="interactive console")
    q.add_argument("file", nargs="?")
    q.add_argument("--seed", type=int, default=None)
    q.set_defaults(fn=cmd_repl)

    c = sub.add_parser("check", help="run every scenario in a directory (default: bundled exercises)")
    c.add_argument("dir", nargs="?")
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--out", default="out", help="output root; one sub-directory per scenario")
    c.set_defaults(fn=cmd_check)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
