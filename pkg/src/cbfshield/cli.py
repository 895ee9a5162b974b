"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime or
solver error, 3 a filtered run left the safe set.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError
from .encoding import DEFAULT_MAX_RANGE, depth_to_turbo, read_depth_raw, write_rgb_raw
from .fixtures import emit_fixtures
from .saliency import SaliencyError, attention_mass, normalized_entropy, pearson_alignment, read_map
from .sim import ComparisonError, EpisodeLog, compare_runs, load_scenario, run_batch

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2
EXIT_VIOLATION = 3


def _seed_range(text: str) -> range:
    try:
        a, b = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}") from None
    if b <= a or a < 0:
        raise argparse.ArgumentTypeError("seed range A:B needs 0 <= A < B")
    return range(a, b)


def cmd_run(args) -> int:
    config = load_scenario(args.scenario)
    if args.no_filter:
        config = config.replace(filter_enabled=False)
    if args.seeds is not None:
        configs = [config.replace(seed=s) for s in args.seeds]
    else:
        configs = [config.replace(seed=args.seed) if args.seed is not None else config]
    logs = run_batch(configs, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    code = EXIT_OK
    for log in logs:
        tag = "filter" if log.filter_enabled else "nofilter"
        path = log.write(out / f"{log.scenario}_seed{log.seed}_{tag}.{args.format}", args.format)
        s = log.summary
        print(f"{path}: min_barrier={s['min_barrier']:.6g} violations={s['violation_count']} "
              f"intervention_rate={s['intervention_rate']:.4f} filter_errors={s['filter_errors']}")
        if log.filter_enabled and s["violation_count"] > 0:
            code = EXIT_VIOLATION
        elif s["filter_errors"] > 0 and code == EXIT_OK:
            code = EXIT_RUNTIME
    return code


def cmd_compare(args) -> int:
    a, b = EpisodeLog.read(args.a), EpisodeLog.read(args.b)
    with_f, without_f = (a, b) if a.filter_enabled else (b, a)
    report = compare_runs(with_f, without_f)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(report.render_text(), end="")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    for path in emit_fixtures(args.emit):
        print(path)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_scenario(args.scenario)
    print(f"{args.scenario}: ok ({config.name}, {config.steps} steps x {config.substeps_per_action} substeps)")
    return EXIT_OK


def cmd_encode(args) -> int:
    depth = read_depth_raw(args.depth, args.w, args.h)
    write_rgb_raw(args.out, depth_to_turbo(depth, args.max_range))
    return EXIT_OK


def cmd_metrics(args) -> int:
    weights = read_map(args.map)
    record = {"entropy": normalized_entropy(weights)}
    if args.reference:
        record["pearson"] = pearson_alignment(weights, read_map(args.reference))
    if args.mask:
        record["mass"] = attention_mass(weights, read_map(args.mask) != 0.0)
    print(json.dumps(record))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbfshield", description="CBF-QP safety filter simulator and input tools")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="roll out a scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--no-filter", action="store_true")
    r.add_argument("--seed", type=int)
    r.add_argument("--seeds", type=_seed_range, help="run seeds A..B-1 as a batch")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default=".")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="tabulate a filtered and an unfiltered log")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_compare)

    f = sub.add_parser("fixtures", help="write the shipped scenarios to a directory")
    f.add_argument("--emit", required=True)
    f.set_defaults(func=cmd_fixtures)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("--scenario", required=True)
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("encode", help="depth float32 raw -> Turbo RGB raw")
    e.add_argument("--depth", required=True)
    e.add_argument("--w", type=int, required=True)
    e.add_argument("--h", type=int, required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--max-range", type=float, default=DEFAULT_MAX_RANGE)
    e.set_defaults(func=cmd_encode)

    m = sub.add_parser("metrics", help="entropy / alignment / mass of a saliency map")
    m.add_argument("--map", required=True)
    m.add_argument("--reference")
    m.add_argument("--mask")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; here 2 means a runtime failure
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        return args.func(args)
    except (ConfigError, ComparisonError, SaliencyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
