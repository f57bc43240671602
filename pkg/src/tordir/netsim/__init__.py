"""Simulated network, scenarios, and the protocol runner."""

from __future__ import annotations

from typing import Any, Optional, Sequence

from ..core import Ed25519Scheme, MacScheme, generate_keys
from ..program import NodeProgram
from ..synth import synthesize_documents
from .engine import SendRecord, Simulator, Trace, transmission_time
from .scenario import AttackWindow, Scenario, ScenarioError, attack_scenario


def make_keys(scenario: Scenario):
    scheme = Ed25519Scheme() if scenario.scheme == "ed25519" else MacScheme()
    return generate_keys(scenario.n, scheme, seed=scenario.seed)


def build_programs(scenario: Scenario, documents: Optional[Sequence] = None) -> list[NodeProgram]:
    from ..legacy import LegacyConfig, LegacyNode
    from ..protocol import BEHAVIOUR_CLASSES, IcpsNode, SilentNode

    docs = documents or synthesize_documents(
        scenario.n, scenario.relays, scenario.epoch, scenario.seed, scenario.per_relay_bytes
    )
    secrets, keyring = make_keys(scenario)
    bad = scenario.byzantine_map
    cache: dict = {}
    programs: list[NodeProgram] = []
    for i in range(scenario.n):
        if bad.get(i) == "silent":
            programs.append(SilentNode())
        elif scenario.protocol == "legacy":
            cfg = LegacyConfig(scenario.legacy_round_s, 4, scenario.legacy_quorum, scenario.legacy_rerun_delay_s)
            programs.append(LegacyNode(i, scenario.n, scenario.epoch, docs[i], secrets[i], keyring, cfg, cache))
        else:
            cls = BEHAVIOUR_CLASSES.get(bad.get(i, ""), IcpsNode)
            programs.append(
                cls(
                    i,
                    scenario.n,
                    scenario.f,
                    scenario.epoch,
                    docs[i],
                    secrets[i],
                    keyring,
                    delta_s=scenario.delta_s,
                    view_timeout_s=scenario.view_timeout_s,
                    fetch_timeout_s=scenario.fetch_timeout_s,
                    aggregate_cache=cache,
                )
            )
    return programs


def run(
    scenario: Scenario,
    programs: Optional[Sequence[NodeProgram]] = None,
    documents: Optional[Sequence] = None,
) -> Trace:
    """Simulate one run; the returned trace carries its metrics."""
    if programs is None:
        programs = build_programs(scenario, documents)
    stop = set(scenario.correct) if scenario.protocol == "icps" else set(range(scenario.n))
    sim = Simulator(scenario, programs, stop_when=stop)
    trace = sim.run()
    if scenario.protocol == "legacy":
        trace.metrics = _legacy_metrics(scenario, trace, programs)
    else:
        trace.metrics = _icps_metrics(scenario, trace, programs)
    trace.programs = list(programs)
    return trace


def _common(trace: Trace) -> dict[str, Any]:
    return {
        "bytes_sent_total": trace.bytes_sent_total,
        "bytes_per_msg_class": trace.bytes_per_class(),
        "messages": len(trace.sends),
        "end_s": trace.end_ms / 1000.0,
    }


def _icps_metrics(scenario: Scenario, trace: Trace, programs) -> dict[str, Any]:
    from ..protocol import IcpsNode

    correct = scenario.correct
    done = {i: trace.finished[i] for i in correct if i in trace.finished}
    decided = len(done) == len(correct)
    m: dict[str, Any] = {"protocol": "icps", "decided": decided}
    m["latency_s"] = max(t for t, _ in done.values()) if decided and done else None
    m["decided_view"] = max((r["decided_view"] for _, r in done.values()), default=None)
    m["present_entries"] = sorted({r["present"] for _, r in done.values()})
    m["vector_digests"] = sorted({r["h_H"] for _, r in done.values()})
    m["consensus_digests"] = sorted({r["body"] for _, r in done.values()})
    m["finalize_s"] = {str(i): round(t, 6) for i, (t, _) in sorted(done.items())}
    rounds = {"dissemination": 0, "agreement": 0, "aggregation_fetch": 0, "aggregation_sign": 0}
    dropped = divergent = 0
    for i, p in enumerate(programs):
        if not isinstance(p, IcpsNode):
            continue
        dropped += p.diss.dropped_invalid + p.engine.rejected_proposals
        dropped += sum(c.rejected for c in p.collectors.values())
        if i not in correct:
            continue
        divergent += p.consensus.divergent
        d = p.depths
        if "finalize" in d:
            base = d["propose"] - 1
            rounds["dissemination"] = max(rounds["dissemination"], base)
            rounds["agreement"] = max(rounds["agreement"], d["decide"] - base)
            rounds["aggregation_fetch"] = max(rounds["aggregation_fetch"], d["fetched"] - d["decide"])
            rounds["aggregation_sign"] = max(rounds["aggregation_sign"], d["finalize"] - d["fetched"])
    m["rounds"] = rounds
    m["dropped_invalid"] = dropped
    m["divergent_signatures"] = divergent
    m.update(_common(trace))
    return m


def _legacy_metrics(scenario: Scenario, trace: Trace, programs) -> dict[str, Any]:
    from ..legacy import LegacyNode

    results = {i: r for i, (_, r) in trace.finished.items()}
    winners = [i for i, r in results.items() if r.get("success")]
    bodies = {results[i]["body"] for i in winners}
    decided = len(winners) >= scenario.legacy_quorum and len(bodies) == 1
    R = scenario.legacy_round_s
    busy = [0.0] * 4
    for p in programs:
        if isinstance(p, LegacyNode):
            busy = [max(a, b) for a, b in zip(busy, p.round_busy)]
    attack_end = max((w.end_s for w in scenario.attack_windows), default=0.0)
    m: dict[str, Any] = {"protocol": "legacy", "decided": decided}
    m["latency_s"] = 4 * R if decided else None
    m["network_time_s"] = sum(busy) if decided else None
    m["votes_per_node"] = [results.get(i, {}).get("votes", 0) for i in range(scenario.n)]
    m["successful_nodes"] = len(winners)
    fallback = scenario.legacy_rerun_delay_s + 4 * R
    m["fallback_latency_s"] = None if decided else fallback
    m["fallback_after_attack_s"] = None if decided else fallback - attack_end
    m.update(_common(trace))
    return m


__all__ = [
    "AttackWindow",
    "Scenario",
    "ScenarioError",
    "SendRecord",
    "Simulator",
    "Trace",
    "attack_scenario",
    "build_programs",
    "make_keys",
    "run",
    "transmission_time",
]
