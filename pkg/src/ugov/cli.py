"""Command line entry points: run, replay, serve.

Exit codes: 0 ok, 1 trace/verify mismatch, 2 invalid input, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
import threading
import time
from pathlib import Path

from .api import DEFAULT_PORT, create_app
from .errors import (
    CorruptLogError,
    GovernanceError,
    ScenarioInvalidError,
    SchemaError,
    TraceMismatchError,
)
from .registry import Registry
from .scenario import (
    SimulationRun,
    load_policy_ref,
    load_scenario,
    render_report_text,
    run_scenario,
)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ugov", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario to completion")
    run_p.add_argument("--scenario", required=True, help="scenario file or bundled name")
    run_p.add_argument("--policy", default=None, help="policy file or bundled name")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--out", default=None, help="output directory (default out/<name>)")

    replay_p = sub.add_parser("replay", help="rebuild state from an event log")
    replay_p.add_argument("--log", required=True)
    replay_p.add_argument("--policy", default=None)
    replay_p.add_argument(
        "--verify-snapshot", default=None, help="compare replayed snapshot to this file"
    )

    serve_p = sub.add_parser("serve", help="serve the HTTP API over a stepped scenario")
    serve_p.add_argument("--port", type=int, default=DEFAULT_PORT)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--scenario", required=True)
    serve_p.add_argument("--policy", default=None)
    serve_p.add_argument("--out", default=None)
    serve_p.add_argument(
        "--tick-ms",
        type=int,
        default=None,
        help="advance automatically every N ms (pauses on pending escalations)",
    )
    return parser


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        from dataclasses import replace

        scenario = replace(scenario, seed=args.seed)
    policy = load_policy_ref(args.policy or scenario.policy_ref)
    out_dir = Path(args.out) if args.out else Path("out") / scenario.name
    try:
        report = run_scenario(scenario, policy, out_dir=out_dir)
    except TraceMismatchError as exc:
        print(f"trace mismatch: {exc.first_divergence}", file=sys.stderr)
        return EXIT_MISMATCH
    print(render_report_text(report), end="")
    print(f"outputs written to {out_dir}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    policy = load_policy_ref(args.policy)
    registry = Registry.replay(args.log, policy)
    snapshot_text = registry.snapshot().canonical_text() + "\n"
    print(
        f"replayed {registry.last_event_id} events,"
        f" {len(registry.snapshot().records)} records, now={registry.now}"
    )
    if args.verify_snapshot:
        expected = Path(args.verify_snapshot).read_text(encoding="utf-8")
        if expected != snapshot_text:
            print("snapshot verification FAILED (byte difference)", file=sys.stderr)
            return EXIT_MISMATCH
        print("snapshot verified byte-identical")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    scenario = load_scenario(args.scenario)
    policy = load_policy_ref(args.policy or scenario.policy_ref)
    sim = SimulationRun(scenario, policy, out_dir=args.out, interactive=True)
    app = create_app(sim.registry, sim=sim)

    if args.tick_ms is not None:
        def auto_step():
            while True:
                status = sim.step()
                if status["done"]:
                    return
                time.sleep(args.tick_ms / 1000.0)

        threading.Thread(target=auto_step, daemon=True).start()

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "serve":
            return _cmd_serve(args)
        return EXIT_INVALID
    except (ScenarioInvalidError, SchemaError, CorruptLogError, FileNotFoundError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except GovernanceError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
