"""Command-line entry point: ``tordir run|sweep|attack-demo|cost``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import harness
from .netsim import Scenario, ScenarioError, run


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = Scenario.load(args.scenario)
    if args.seed is not None:
        scenario = scenario.replace(seed=args.seed)
    trace = run(scenario)
    out = Path(args.out) if args.out else Path(args.scenario).with_suffix("")
    trace_path = out.parent / (out.name + ".trace.txt")
    metrics_path = out.parent / (out.name + ".metrics.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    trace_path.write_text(trace.to_text())
    metrics_path.write_text(trace.summary_json() + "\n")
    m = trace.metrics
    print(f"protocol={m['protocol']} decided={m['decided']} latency_s={m['latency_s']}")
    print(f"bytes_sent_total={m['bytes_sent_total']} messages={m['messages']}")
    print(f"trace: {trace_path}")
    print(f"metrics: {metrics_path}")
    return 0


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _cmd_sweep(args: argparse.Namespace) -> int:
    rows = harness.sweep(args.relays, args.bandwidths, protocol=args.protocol, seed=args.seed)
    print(harness.format_table(rows))
    if args.json:
        Path(args.json).write_text("\n".join(json.dumps(r.record(), sort_keys=True) for r in rows) + "\n")
    return 0


def _cmd_attack_demo(args: argparse.Namespace) -> int:
    res = harness.attack_demo(relays=args.relays, targets=args.targets, end_s=args.end_s, mbps=args.mbps, seed=args.seed)
    leg, new = res["legacy"], res["icps"]
    print(f"throttle: {args.targets} of 9 authorities at {args.mbps} Mbit/s for 0-{args.end_s:g} s, {args.relays} relays")
    print(f"legacy  decided={leg['decided']} fallback_after_attack_s={leg['fallback_after_attack_s']}")
    after = new["after_attack_s"]
    print(f"icps    decided={new['decided']} latency_s={new['latency_s']} after_attack_s={after}")
    if args.json:
        print(json.dumps(res, sort_keys=True))
    return 0


def _cmd_cost(args: argparse.Namespace) -> int:
    model = harness.CostModel(
        unit_cost_dollars_per_mbps_hour=args.unit_cost,
        instances_per_month=args.instances,
    )
    cost = harness.attack_cost(args.flood, args.targets, args.minutes, model)
    print(f"per_instance ${cost.per_instance:.3f}")
    print(f"per_month ${cost.per_month:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tordir", description="Directory-protocol simulator and experiment harness.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario file")
    r.add_argument("scenario", help="TOML scenario file")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--out", default=None, help="output prefix (default: scenario path without suffix)")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="grid over relay count and node bandwidth")
    s.add_argument("--protocol", choices=("legacy", "icps"), default="legacy")
    s.add_argument("--relays", type=_ints, default=[1000, 2000, 4000, 8000])
    s.add_argument("--bandwidths", type=_floats, default=[0.5, 1.0, 2.0, 10.0])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json", default=None, help="also write JSON-lines records here")
    s.set_defaults(func=_cmd_sweep)

    a = sub.add_parser("attack-demo", help="throttle a majority of authorities, run both protocols")
    a.add_argument("--relays", type=int, default=8000)
    a.add_argument("--targets", type=int, default=5)
    a.add_argument("--end-s", type=float, default=300.0)
    a.add_argument("--mbps", type=float, default=0.5)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--json", action="store_true", help="also print a JSON record")
    a.set_defaults(func=_cmd_attack_demo)

    c = sub.add_parser("cost", help="price of renting the flood")
    c.add_argument("--flood", type=float, default=None, help="Mbit/s per target (default: link minus required)")
    c.add_argument("--targets", type=int, default=5)
    c.add_argument("--minutes", type=float, default=5.0)
    c.add_argument("--unit-cost", type=float, default=0.00074, help="dollars per Mbit/s-hour")
    c.add_argument("--instances", type=int, default=720, help="attack instances per month")
    c.set_defaults(func=_cmd_cost)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
