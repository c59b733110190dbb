"""Command-line entry points: run, metrics, replay, serve, bench."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import compute_metrics, read_log, replay, run_scenario
from .scenario import ScenarioError, load_scenario


def _cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    metrics, _, failures = run_scenario(scenario, args.seed, log_path=args.log,
                                        keep_log=False)
    payload = metrics.to_json()
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(payload, indent=2, sort_keys=True))
    for failure in failures:
        print(f"ASSERTION FAILED: {failure}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_metrics(args) -> int:
    metrics = compute_metrics(read_log(args.log))
    print(json.dumps(metrics.to_json(), indent=2, sort_keys=True))
    return 0


def _cmd_replay(args) -> int:
    count = 0
    for snap in replay(read_log(args.log), speed=args.speed):
        count += 1
        if not args.quiet:
            print(json.dumps(snap, sort_keys=True, separators=(",", ":")))
    print(f"replayed {count} snapshots", file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    from .telemetry import serve

    scenario = load_scenario(args.scenario)
    host, _, port = args.bind.rpartition(":")
    serve(scenario, seed=args.seed, host=host or "127.0.0.1", port=int(port),
          snapshot_rate=args.rate, static_dir=args.static)
    return 0


def _cmd_bench(args) -> int:
    import runpy
    from pathlib import Path

    script = Path(args.script)
    if not script.exists():
        print(f"benchmark script not found: {script} (run from the repo root "
              f"or pass --script)", file=sys.stderr)
        return 2
    runpy.run_path(str(script), run_name="__main__")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="overwatch",
                                     description="Aerial overwatch simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario headless")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--log", help="write the JSONL event log here")
    p_run.add_argument("--metrics", help="write the metrics JSON here")
    p_run.set_defaults(func=_cmd_run)

    p_met = sub.add_parser("metrics", help="recompute metrics from a log")
    p_met.add_argument("log")
    p_met.set_defaults(func=_cmd_metrics)

    p_rep = sub.add_parser("replay", help="re-emit snapshots from a log")
    p_rep.add_argument("log")
    p_rep.add_argument("--speed", type=float, default=float("inf"),
                       help="pace multiplier; 0 = paused")
    p_rep.add_argument("--quiet", action="store_true")
    p_rep.set_defaults(func=_cmd_replay)

    p_srv = sub.add_parser("serve", help="serve a live simulation for the console")
    p_srv.add_argument("scenario")
    p_srv.add_argument("--bind", default="127.0.0.1:8701")
    p_srv.add_argument("--seed", type=int, default=0)
    p_srv.add_argument("--rate", type=float, default=20.0,
                       help="snapshot broadcast rate, Hz")
    p_srv.add_argument("--static", default=None,
                       help="directory with the built console bundle")
    p_srv.set_defaults(func=_cmd_serve)

    p_bench = sub.add_parser("bench", help="compare kernel backends")
    p_bench.add_argument("--script", default="benchmarks/bench_kernels.py")
    p_bench.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
