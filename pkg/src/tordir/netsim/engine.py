"""Deterministic discrete-event network simulator.

Time is kept in milliseconds. Each node has one egress and one ingress pipe
whose capacity follows the node's bandwidth, including any attack window.
A message leaves through the sender's egress FIFO, crosses the link
(latency plus any pre-GST adversarial delay), and is paced by the
receiver's ingress FIFO. With idle pipes of equal rate this reduces to
``latency + bytes * 8 / bandwidth``.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .. import wire
from ..program import NodeProgram
from .scenario import Scenario


def transmission_time(nbytes: int, bandwidth_mbps: float, latency_ms: float) -> float:
    """Seconds to push ``nbytes`` over an idle link. Infinite at zero bandwidth."""
    if bandwidth_mbps <= 0:
        return math.inf if nbytes else latency_ms / 1000.0
    return latency_ms / 1000.0 + nbytes * 8 / (bandwidth_mbps * 1e6)


class _Pipe:
    """Piecewise-constant bandwidth schedule for one node."""

    def __init__(self, base_mbps: float, windows: Sequence[tuple[float, float, float]]) -> None:
        cuts = sorted({0.0} | {w[0] for w in windows} | {w[1] for w in windows})
        self.starts = cuts
        self.rates = []
        for i, t in enumerate(cuts):
            end = cuts[i + 1] if i + 1 < len(cuts) else math.inf
            mid = t + (end - t) / 2 if end != math.inf else t + 1
            covering = [bw for s, e, bw in windows if s <= mid < e]
            rate = min(covering) if covering else base_mbps
            self.rates.append(rate * 1000.0)  # bits per ms

    def finish(self, start_ms: float, bits: float) -> float:
        if bits <= 0:
            return start_ms
        i = max(0, bisect_right(self.starts, start_ms) - 1)
        t, remaining = start_ms, bits
        while True:
            end = self.starts[i + 1] if i + 1 < len(self.starts) else math.inf
            rate = self.rates[i]
            if rate > 0:
                need = remaining / rate
                if t + need <= end:
                    return t + need
                remaining -= rate * (end - t)
            if end == math.inf:
                return math.inf
            t, i = end, i + 1


@dataclass
class SendRecord:
    t_send: float
    src: int
    dst: int
    cls: str
    size: int
    tx_done: float
    deliver: float
    depth: int


@dataclass
class Trace:
    """Output of one run: event log, per-send records and per-node results."""

    scenario: Scenario
    events: list[tuple[float, str, int, dict]] = field(default_factory=list)
    sends: list[SendRecord] = field(default_factory=list)
    finished: dict[int, tuple[float, dict]] = field(default_factory=dict)
    end_ms: float = 0.0
    metrics: dict[str, Any] = field(default_factory=dict)
    programs: list = field(default_factory=list, repr=False)

    @property
    def bytes_sent_total(self) -> int:
        return sum(s.size for s in self.sends)

    def bytes_per_class(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.sends:
            out[s.cls] = out.get(s.cls, 0) + s.size
        return dict(sorted(out.items()))

    def lines(self) -> list[str]:
        out = []
        for t, kind, node, info in self.events:
            extra = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(info.items()))
            out.append(f"{t:.6f} {kind} node={node} {extra}".rstrip())
        return out

    def to_text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def summary_json(self) -> str:
        return json.dumps(self.metrics, sort_keys=True, indent=2)


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    if isinstance(v, bytes):
        return v.hex()
    return str(v)


class _Ctx:
    def __init__(self, sim: "Simulator", node: int) -> None:
        self.sim = sim
        self.node = node
        self.n = sim.n
        self.depth = 0

    @property
    def now(self) -> float:
        return self.sim.now_ms / 1000.0

    def send(self, dest: int, msg: Any) -> None:
        self.sim._send(self.node, dest, msg, self.depth + 1)

    def broadcast(self, msg: Any) -> None:
        # rotate the fan-out order so no destination is always served first
        for k in range(1, self.n):
            self.sim._send(self.node, (self.node + k) % self.n, msg, self.depth + 1)

    def set_timer(self, delay_s: float, key: Any) -> None:
        self.sim._push(self.sim.now_ms + delay_s * 1000.0, "timer", (self.node, key))

    def log(self, kind: str, **fields: Any) -> None:
        self.sim.trace.events.append((self.sim.now_ms / 1000.0, kind, self.node, fields))

    def finish(self, **result: Any) -> None:
        if self.node not in self.sim.trace.finished:
            result.setdefault("depth", self.depth)
            self.sim.trace.finished[self.node] = (self.sim.now_ms / 1000.0, result)
            self.log("finish", **{k: v for k, v in result.items() if isinstance(v, (int, float, str, bool))})


class Simulator:
    def __init__(
        self,
        scenario: Scenario,
        programs: Sequence[NodeProgram],
        stop_when: Optional[set[int]] = None,
    ) -> None:
        self.scenario = scenario
        self.n = scenario.n
        self.programs = list(programs)
        self.rng = random.Random(f"netsim:{scenario.seed}")
        self.now_ms = 0.0
        self._queue: list = []
        self._seq = 0
        self.trace = Trace(scenario)
        self.stop_when = set(range(self.n)) if stop_when is None else set(stop_when)
        self.ctx = [_Ctx(self, i) for i in range(self.n)]
        self.depth_seen = [0] * self.n
        windows: dict[int, list] = {}
        for w in scenario.attack_windows:
            windows.setdefault(w.node, []).append((w.start_s * 1000, w.end_s * 1000, w.throttled_bandwidth_mbps))
        self.pipes = [_Pipe(scenario.bandwidth_mbps(i), windows.get(i, [])) for i in range(self.n)]
        self.egress_free = [0.0] * self.n
        self.ingress_free = [0.0] * self.n
        self.gst_ms = scenario.gst_s * 1000
        self.delta_ms = scenario.delta_s * 1000
        self.holds = set(scenario.holds)

    def _push(self, t_ms: float, kind: str, data: Any) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (t_ms, self._seq, kind, data))

    def _adversary_delay(self, src: int, dst: int, latency: float) -> float:
        t = self.now_ms
        if t >= self.gst_ms:
            return 0.0
        budget = max(0.0, self.gst_ms + self.delta_ms - t - latency)
        if (src, dst) in self.holds:
            return min(self.gst_ms - t, budget)
        cap = self.scenario.pre_gst_delay_cap_s
        hi = budget if cap < 0 else min(budget, cap * 1000)
        return self.rng.uniform(0.0, hi)

    def _send(self, src: int, dst: int, msg: Any, depth: int) -> None:
        if dst == src:
            raise ValueError("nodes handle their own messages locally")
        size = wire.frame_size(msg)
        start = max(self.now_ms, self.egress_free[src])
        egress_done = self.pipes[src].finish(start, size * 8)
        self.egress_free[src] = egress_done
        latency = self.scenario.latency_ms(src, dst)
        prop = latency + self._adversary_delay(src, dst, latency)
        rec = SendRecord(self.now_ms, src, dst, wire.class_name(msg), size, egress_done, math.inf, depth)
        self.trace.sends.append(rec)
        if egress_done != math.inf:
            # joins the receiver's ingress queue when its first bit arrives
            self._push(start + prop, "arrive", (rec, msg, egress_done + prop))

    def _arrive(self, rec: SendRecord, msg: Any, tail_ms: float) -> None:
        dst = rec.dst
        in_start = max(self.now_ms, self.ingress_free[dst])
        ingress_done = self.pipes[dst].finish(in_start, rec.size * 8)
        self.ingress_free[dst] = ingress_done
        rec.tx_done = max(rec.tx_done, ingress_done)
        rec.deliver = max(tail_ms, ingress_done)
        if rec.deliver != math.inf:
            self._push(rec.deliver, "deliver", (rec.src, dst, msg, rec.depth))

    def run(self) -> Trace:
        horizon = self.scenario.horizon_s * 1000
        for i in range(self.n):
            self._push(0.0, "start", i)
        while self._queue:
            t, _, kind, data = heapq.heappop(self._queue)
            if t > horizon:
                self.now_ms = horizon
                break
            self.now_ms = t
            if kind == "arrive":
                self._arrive(*data)
                continue
            if kind == "start":
                ctx = self.ctx[data]
                ctx.depth = 0
                self.programs[data].start(ctx)
            elif kind == "timer":
                node, key = data
                ctx = self.ctx[node]
                ctx.depth = self.depth_seen[node]
                self.programs[node].on_timer(ctx, key)
            else:
                src, dst, msg, depth = data
                ctx = self.ctx[dst]
                ctx.depth = depth
                self.depth_seen[dst] = max(self.depth_seen[dst], depth)
                self.programs[dst].on_message(ctx, src, msg)
            if self.stop_when <= self.trace.finished.keys():
                break
        self.trace.end_ms = self.now_ms
        return self.trace
