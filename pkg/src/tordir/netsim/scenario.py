"""Scenario definition and the TOML scenario-file schema.

Every key is optional; missing keys take the defaults below.

    n = 9                         # authorities
    f = 2                         # tolerated faults (icps needs f < n/3)
    relays = 50                   # synthetic relays per document
    per_relay_bytes = 500         # padded size of one relay entry
    link_latency_ms = 50.0        # number, or n x n list of lists
    node_bandwidth_mbps = 250.0   # number, or list of n numbers
    gst_s = 0.0                   # global stabilization time
    delta_s = 30.0                # document wait / post-GST delivery bound
    view_timeout_s = 10.0         # first view timer, doubles per view
    fetch_timeout_s = 5.0         # per-request fetch retry timer
    pre_gst_delay_cap_s = -1      # max extra pre-GST delay; <0 means up to GST + delta
    holds = []                    # [[sender, receiver], ...] held until GST
    seed = 0
    protocol = "icps"             # or "legacy"
    scheme = "ed25519"            # or "mac" (fast keyed-MAC stand-in)
    horizon_s = 3600.0
    epoch = 1
    legacy_round_s = 150.0
    legacy_quorum = 5
    legacy_rerun_delay_s = 1800.0

    [byzantine]                   # node index -> behaviour
    3 = "silent"                  # silent | equivocate | bogus_propose | wrong_fetch

    [[attack_windows]]
    node = 0
    start_s = 0.0
    end_s = 300.0
    throttled_bandwidth_mbps = 0.5
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import tomli

BEHAVIOURS = ("silent", "equivocate", "bogus_propose", "wrong_fetch")
PROTOCOLS = ("icps", "legacy")


class ScenarioError(ValueError):
    def __init__(self, field_name: str, problem: str) -> None:
        super().__init__(f"scenario field '{field_name}': {problem}")
        self.field = field_name


@dataclass(frozen=True)
class AttackWindow:
    node: int
    start_s: float
    end_s: float
    throttled_bandwidth_mbps: float


@dataclass(frozen=True)
class Scenario:
    n: int = 9
    f: int = 2
    relays: int = 50
    per_relay_bytes: int = 500
    link_latency_ms: Union[float, tuple[tuple[float, ...], ...]] = 50.0
    node_bandwidth_mbps: Union[float, tuple[float, ...]] = 250.0
    attack_windows: tuple[AttackWindow, ...] = ()
    gst_s: float = 0.0
    delta_s: float = 30.0
    view_timeout_s: float = 10.0
    fetch_timeout_s: float = 5.0
    pre_gst_delay_cap_s: float = -1.0
    holds: tuple[tuple[int, int], ...] = ()
    byzantine: tuple[tuple[int, str], ...] = ()
    seed: int = 0
    protocol: str = "icps"
    scheme: str = "ed25519"
    horizon_s: float = 3600.0
    epoch: int = 1
    legacy_round_s: float = 150.0
    legacy_quorum: int = 5
    legacy_rerun_delay_s: float = 1800.0

    def __post_init__(self) -> None:
        if isinstance(self.byzantine, dict):
            object.__setattr__(self, "byzantine", tuple(sorted(self.byzantine.items())))
        for name in ("attack_windows", "holds", "byzantine"):
            value = getattr(self, name)
            if isinstance(value, list):
                object.__setattr__(self, name, tuple(tuple(v) if isinstance(v, list) else v for v in value))
        if isinstance(self.link_latency_ms, list):
            object.__setattr__(self, "link_latency_ms", tuple(tuple(r) for r in self.link_latency_ms))
        if isinstance(self.node_bandwidth_mbps, list):
            object.__setattr__(self, "node_bandwidth_mbps", tuple(self.node_bandwidth_mbps))
        self.validate()

    # -- accessors ------------------------------------------------------

    @property
    def byzantine_map(self) -> dict[int, str]:
        return dict(self.byzantine)

    @property
    def correct(self) -> list[int]:
        bad = self.byzantine_map
        return [i for i in range(self.n) if i not in bad]

    def latency_ms(self, src: int, dst: int) -> float:
        if isinstance(self.link_latency_ms, tuple):
            return float(self.link_latency_ms[src][dst])
        return float(self.link_latency_ms)

    def bandwidth_mbps(self, node: int) -> float:
        if isinstance(self.node_bandwidth_mbps, tuple):
            return float(self.node_bandwidth_mbps[node])
        return float(self.node_bandwidth_mbps)

    def replace(self, **changes: Any) -> "Scenario":
        return dataclasses.replace(self, **changes)

    # -- validation -----------------------------------------------------

    def validate(self) -> None:
        n = self.n
        if not isinstance(n, int) or n < 1:
            raise ScenarioError("n", "must be a positive integer")
        if not isinstance(self.f, int) or self.f < 0:
            raise ScenarioError("f", "must be a non-negative integer")
        if self.protocol not in PROTOCOLS:
            raise ScenarioError("protocol", f"must be one of {PROTOCOLS}")
        if self.protocol == "icps" and 3 * self.f >= n:
            raise ScenarioError("f", f"icps needs f < n/3 (n={n}, f={self.f})")
        if self.relays < 0:
            raise ScenarioError("relays", "must be non-negative")
        if self.per_relay_bytes < 1:
            raise ScenarioError("per_relay_bytes", "must be positive")
        if isinstance(self.link_latency_ms, tuple):
            if len(self.link_latency_ms) != n or any(len(row) != n for row in self.link_latency_ms):
                raise ScenarioError("link_latency_ms", f"matrix must be {n}x{n}")
            if any(v < 0 for row in self.link_latency_ms for v in row):
                raise ScenarioError("link_latency_ms", "latencies must be non-negative")
        elif self.link_latency_ms < 0:
            raise ScenarioError("link_latency_ms", "must be non-negative")
        if isinstance(self.node_bandwidth_mbps, tuple):
            if len(self.node_bandwidth_mbps) != n or any(b < 0 for b in self.node_bandwidth_mbps):
                raise ScenarioError("node_bandwidth_mbps", f"need {n} non-negative values")
        elif self.node_bandwidth_mbps < 0:
            raise ScenarioError("node_bandwidth_mbps", "must be non-negative")
        for w in self.attack_windows:
            if not 0 <= w.node < n:
                raise ScenarioError("attack_windows", f"node {w.node} out of range")
            if w.start_s < 0 or w.end_s < w.start_s or w.throttled_bandwidth_mbps < 0:
                raise ScenarioError("attack_windows", f"invalid window {w}")
        for node, behaviour in self.byzantine:
            if not 0 <= node < n:
                raise ScenarioError("byzantine", f"node {node} out of range")
            if behaviour not in BEHAVIOURS:
                raise ScenarioError("byzantine", f"unknown behaviour {behaviour!r}")
        for s, r in self.holds:
            if not (0 <= s < n and 0 <= r < n):
                raise ScenarioError("holds", f"pair ({s}, {r}) out of range")
        for name in ("gst_s", "delta_s", "view_timeout_s", "fetch_timeout_s", "horizon_s", "legacy_round_s"):
            if getattr(self, name) < 0:
                raise ScenarioError(name, "must be non-negative")
        if self.view_timeout_s <= 0:
            raise ScenarioError("view_timeout_s", "must be positive")
        if self.legacy_round_s <= 0:
            raise ScenarioError("legacy_round_s", "must be positive")
        if self.scheme not in ("ed25519", "mac"):
            raise ScenarioError("scheme", "must be 'ed25519' or 'mac'")

    # -- (de)serialization ---------------------------------------------

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Scenario":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ScenarioError(key, "unknown field")
        kw: dict[str, Any] = {}
        for key, value in data.items():
            try:
                kw[key] = _coerce(key, value)
            except ScenarioError:
                raise
            except (TypeError, ValueError, KeyError) as exc:
                raise ScenarioError(key, f"bad value {value!r} ({exc})") from None
        return cls(**kw)

    @classmethod
    def from_toml(cls, text: str) -> "Scenario":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ScenarioError("<file>", f"not valid TOML: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Scenario":
        return cls.from_toml(Path(path).read_text())

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["attack_windows"] = [dataclasses.asdict(w) for w in self.attack_windows]
        out["byzantine"] = {str(k): v for k, v in self.byzantine}
        out["holds"] = [list(p) for p in self.holds]
        if isinstance(self.link_latency_ms, tuple):
            out["link_latency_ms"] = [list(r) for r in self.link_latency_ms]
        if isinstance(self.node_bandwidth_mbps, tuple):
            out["node_bandwidth_mbps"] = list(self.node_bandwidth_mbps)
        return out


_INTS = {"n", "f", "relays", "per_relay_bytes", "seed", "epoch", "legacy_quorum"}
_FLOATS = {
    "gst_s", "delta_s", "view_timeout_s", "fetch_timeout_s", "pre_gst_delay_cap_s",
    "horizon_s", "legacy_round_s", "legacy_rerun_delay_s",
}


def _coerce(key: str, value: Any) -> Any:
    if key in _INTS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(key, f"expected integer, got {value!r}")
        return value
    if key in _FLOATS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(key, f"expected number, got {value!r}")
        return float(value)
    if key == "link_latency_ms":
        if isinstance(value, list):
            return tuple(tuple(float(v) for v in row) for row in value)
        return float(value)
    if key == "node_bandwidth_mbps":
        if isinstance(value, list):
            return tuple(float(v) for v in value)
        return float(value)
    if key == "attack_windows":
        return tuple(
            AttackWindow(int(w["node"]), float(w["start_s"]), float(w["end_s"]), float(w["throttled_bandwidth_mbps"]))
            for w in value
        )
    if key == "byzantine":
        return tuple(sorted((int(k), str(v)) for k, v in dict(value).items()))
    if key == "holds":
        return tuple((int(a), int(b)) for a, b in value)
    if key in ("protocol", "scheme"):
        return str(value)
    raise ScenarioError(key, "unknown field")


def attack_scenario(
    protocol: str = "icps",
    relays: int = 8000,
    targets: int = 5,
    start_s: float = 0.0,
    end_s: float = 300.0,
    throttled_mbps: float = 0.5,
    **overrides: Any,
) -> Scenario:
    """Nine authorities with the first ``targets`` throttled for a window."""
    windows = tuple(AttackWindow(i, start_s, end_s, throttled_mbps) for i in range(targets))
    base = dict(protocol=protocol, relays=relays, attack_windows=windows)
    base.update(overrides)
    return Scenario(**base)
