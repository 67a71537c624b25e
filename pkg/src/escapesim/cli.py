"""Command-line harness: gen / bench / plot / serve.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

import argparse
import dataclasses
import json
import pathlib
import sys


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_scenarios(spec):
    from .scenario import load_scenario

    path = pathlib.Path(spec)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
    else:
        files = sorted(pathlib.Path(".").glob(spec)) if "*" in spec else [path]
    if not files:
        raise FileNotFoundError(f"no scenario files match {spec!r}")
    return [load_scenario(f) for f in files]


def _cmd_gen(args) -> int:
    from .scenario import (
        GeneratorConfig,
        SCENARIO_CLASSES,
        build_benchmark_sets,
        corridor_scenario,
        save_scenario,
    )

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "corridor":
        for k in range(args.count):
            s = corridor_scenario(length=args.length, seed=args.seed + k)
            save_scenario(s, out / f"corridor_{k:05d}.json")
        print(f"wrote {args.count} corridor scenarios to {out}")
        return 0
    config = GeneratorConfig(arena_size=args.arena)
    train, test = build_benchmark_sets(
        config, train_count=args.train, test_count=args.test, base_seed=args.seed
    )
    for name, scenarios in (("train", train), ("test", test)):
        sub = out / name
        sub.mkdir(exist_ok=True)
        for k, s in enumerate(scenarios):
            save_scenario(s, sub / f"scenario_{k:05d}.json")
    index = {
        "train": len(train),
        "test": len(test),
        "base_seed": args.seed,
        "classes": [sorted(c) for c in SCENARIO_CLASSES],
        "config": {
            k: (list(v) if isinstance(v, (tuple, frozenset)) else v)
            for k, v in dataclasses.asdict(config).items()
            if k != "target_features"
        },
    }
    (out / "index.json").write_text(json.dumps(index, indent=2) + "\n")
    print(f"wrote {len(train)} train + {len(test)} test scenarios to {out}")
    return 0


def _cmd_bench(args) -> int:
    from .bench import run_benchmark

    scenarios = _load_scenarios(args.scenarios)
    report = run_benchmark(
        scenarios,
        args.policy,
        episodes_per_scenario=args.episodes,
        seed=args.seed,
        max_steps=args.max_steps,
        inflation=args.inflation,
        resolution=args.resolution,
        trace_dir=args.trace_dir,
    )
    text = report.to_json()
    if args.report:
        pathlib.Path(args.report).write_text(text)
    d = report.to_dict()
    print(f"policy {d['policy']}  episodes {d['overall']['episodes']}")
    for label, row in d["classes"].items():
        extra = ""
        if row["planning_success_rate"] is not None:
            extra = (
                f"  plan {row['planning_success_rate']:.3f}"
                f"  ctrl {row['control_success_rate']:.3f}"
            )
        print(f"  {label:7s} total {row['total_success_rate']:.3f}{extra}")
    return 0


def _cmd_plot(args) -> int:
    from .plotting import plot_trajectory

    plot_trajectory(args.trace, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .env import STAGE_FIXED, STAGE_RANDOM, EpisodeConfig
    from .ipc import StdioConn, listen_one, parse_address, run_env_session

    scenarios = _load_scenarios(args.scenario)
    config = EpisodeConfig(
        max_steps=args.max_steps,
        stage=STAGE_RANDOM if args.stage == "random" else STAGE_FIXED,
        hybrid_guidance=args.train_mode,
    )
    kind = parse_address(args.ipc)
    conn = StdioConn() if kind[0] == "stdio" else listen_one(args.ipc)
    record_fh = open(args.record, "w") if args.record else None
    trace_fh = open(args.trace, "w") if args.trace else None
    try:
        summary = run_env_session(
            conn,
            scenarios,
            config,
            episodes=args.episodes,
            seed=args.seed,
            timeout=args.timeout,
            record_fh=record_fh,
            trace_fh=trace_fh,
        )
    finally:
        for fh in (record_fh, trace_fh):
            if fh is not None:
                fh.close()
        conn.close()
    print(
        f"served {summary['episodes']} episodes, {summary['successes']} successes",
        file=sys.stderr,
    )
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="escapesim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate scenario sets")
    g.add_argument("--out", required=True)
    g.add_argument("--kind", choices=("benchmark", "corridor"), default="benchmark")
    g.add_argument("--train", type=int, default=1800)
    g.add_argument("--test", type=int, default=360)
    g.add_argument("--count", type=int, default=20, help="corridor scenario count")
    g.add_argument("--length", type=float, default=2.0, help="corridor length [m]")
    g.add_argument("--arena", type=float, default=4.0)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(fn=_cmd_gen)

    b = sub.add_parser("bench", help="run a policy over scenarios")
    b.add_argument("--scenarios", required=True, help="directory or glob")
    b.add_argument(
        "--policy",
        required=True,
        help="random | scripted | guidance[:radius] | external:tcp:HOST:PORT",
    )
    b.add_argument("--inflation", type=float, default=None)
    b.add_argument("--episodes", type=int, default=1, help="episodes per scenario")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--max-steps", type=int, default=100)
    b.add_argument("--resolution", type=float, default=0.02)
    b.add_argument("--report", default=None)
    b.add_argument("--trace-dir", default=None)
    b.set_defaults(fn=_cmd_bench)

    pl = sub.add_parser("plot", help="render an episode trace as SVG")
    pl.add_argument("--trace", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(fn=_cmd_plot)

    s = sub.add_parser("serve", help="serve the environment over IPC")
    s.add_argument("--ipc", required=True, help="stdio | tcp:HOST:PORT")
    s.add_argument("--scenario", required=True, help="scenario file, dir, or glob")
    s.add_argument("--episodes", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-steps", type=int, default=100)
    s.add_argument("--stage", choices=("fixed", "random"), default="fixed")
    s.add_argument("--train-mode", action="store_true", help="enable hybrid gating")
    s.add_argument("--timeout", type=float, default=5.0)
    s.add_argument("--record", default=None, help="record client lines for replay")
    s.add_argument("--trace", default=None, help="write episode traces here")
    s.set_defaults(fn=_cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except BrokenPipeError:
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"escapesim: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
