"""Experiment drivers: attack cost, bandwidth searches, sweeps, attack demo."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Optional

from .netsim import Scenario, attack_scenario, run


@dataclass(frozen=True)
class CostModel:
    """Prices for renting a flood; defaults are the published stressor rates."""

    unit_cost_dollars_per_mbps_hour: float = 0.00074
    authority_link_mbps: float = 250.0
    required_mbps: float = 10.0
    instances_per_month: int = 720

    def __post_init__(self) -> None:
        for name in ("unit_cost_dollars_per_mbps_hour", "authority_link_mbps", "required_mbps", "instances_per_month"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def default_flood_mbps(self) -> float:
        return self.authority_link_mbps - self.required_mbps


@dataclass(frozen=True)
class AttackCost:
    per_instance: float
    per_month: float


def attack_cost(
    flood_mbps_per_target: Optional[float] = None,
    targets: int = 5,
    minutes: float = 5.0,
    model: CostModel = CostModel(),
) -> AttackCost:
    """Dollar cost of one attack instance and of a month of hourly attacks."""
    flood = model.default_flood_mbps if flood_mbps_per_target is None else flood_mbps_per_target
    for name, value in (("flood", flood), ("targets", targets), ("minutes", minutes)):
        if value < 0:
            raise ValueError(f"{name} must be non-negative")
    per_instance = flood * targets * (minutes / 60.0) * model.unit_cost_dollars_per_mbps_hour
    return AttackCost(per_instance, per_instance * model.instances_per_month)


def desk_scenario(protocol: str, relays: int, bandwidth_mbps: float, **overrides: Any) -> Scenario:
    """Nine authorities on uniform links of the given bandwidth."""
    base: dict[str, Any] = dict(protocol=protocol, relays=relays, node_bandwidth_mbps=bandwidth_mbps)
    if protocol == "icps":
        # slow links stretch dissemination well past the default horizon
        base["horizon_s"] = 4 * 3600.0
    base.update(overrides)
    return Scenario(**base)


def succeeds(protocol: str, relays: int, bandwidth_mbps: float, **overrides: Any) -> bool:
    return bool(run(desk_scenario(protocol, relays, bandwidth_mbps, **overrides)).metrics["decided"])


@dataclass(frozen=True)
class BandwidthResult:
    """Smallest bandwidth that worked; ``bound`` flags an exhausted search."""

    mbps: float
    bound: Optional[str] = None

    def __str__(self) -> str:
        if self.bound == "above-max":
            return f">{self.mbps:g}"
        if self.bound == "below-min":
            return f"<={self.mbps:g}"
        return f"{self.mbps:g}"


def min_bandwidth(
    relays: int,
    protocol: str = "legacy",
    lo: float = 0.25,
    hi: float = 64.0,
    resolution: float = 0.25,
    **overrides: Any,
) -> BandwidthResult:
    """Binary search on uniform node bandwidth for the smallest success.

    The search works on a grid of ``resolution`` steps, so the answer is a
    multiple of it. Success is assumed monotone in bandwidth.
    """
    if relays <= 0:
        raise ValueError("relays must be positive")
    if resolution <= 0 or lo <= 0 or hi < lo:
        raise ValueError("need 0 < lo <= hi and resolution > 0")
    lo_k = max(1, math.ceil(lo / resolution))
    hi_k = max(lo_k, math.floor(hi / resolution))

    def ok(k: int) -> bool:
        return succeeds(protocol, relays, k * resolution, **overrides)

    if not ok(hi_k):
        return BandwidthResult(hi_k * resolution, "above-max")
    if ok(lo_k):
        return BandwidthResult(lo_k * resolution, "below-min")
    bad, good = lo_k, hi_k
    while good - bad > 1:
        mid = (bad + good) // 2
        if ok(mid):
            good = mid
        else:
            bad = mid
    return BandwidthResult(good * resolution)


@dataclass(frozen=True)
class SweepRow:
    relays: int
    bandwidth_mbps: float
    protocol: str
    decided: bool
    latency_s: Optional[float]
    bytes_sent_total: int

    def record(self) -> dict[str, Any]:
        return dict(self.__dict__)


def sweep(
    relays: Iterable[int],
    bandwidths: Iterable[float],
    protocol: str = "legacy",
    **overrides: Any,
) -> list[SweepRow]:
    """Run every (relays, bandwidth) pair; rows come back in grid order."""
    rows = []
    for r in relays:
        for b in bandwidths:
            m = run(desk_scenario(protocol, r, b, **overrides)).metrics
            rows.append(SweepRow(r, b, protocol, m["decided"], m["latency_s"], m["bytes_sent_total"]))
    return rows


def format_table(rows: list[SweepRow]) -> str:
    head = f"{'relays':>7} {'mbps':>8} {'protocol':>8} {'decided':>7} {'latency_s':>10} {'bytes':>12}"
    lines = [head]
    for r in rows:
        lat = "-" if r.latency_s is None else f"{r.latency_s:.2f}"
        lines.append(
            f"{r.relays:>7} {r.bandwidth_mbps:>8g} {r.protocol:>8} {str(r.decided):>7} {lat:>10} {r.bytes_sent_total:>12}"
        )
    return "\n".join(lines)


def attack_demo(relays: int = 8000, targets: int = 5, end_s: float = 300.0, mbps: float = 0.5, seed: int = 0) -> dict:
    """Both protocols under the same throttle window, side by side."""
    out = {}
    for protocol in ("legacy", "icps"):
        sc = attack_scenario(protocol, relays=relays, targets=targets, end_s=end_s, throttled_mbps=mbps, seed=seed)
        m = run(sc).metrics
        row = {"decided": m["decided"], "latency_s": m["latency_s"]}
        if protocol == "legacy":
            row["fallback_after_attack_s"] = m["fallback_after_attack_s"]
            row["votes_per_node"] = m["votes_per_node"]
        else:
            row["after_attack_s"] = None if m["latency_s"] is None else m["latency_s"] - end_s
            row["decided_view"] = m["decided_view"]
        out[protocol] = row
    return out
