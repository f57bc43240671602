"""Lock-step model of the current four-round directory protocol.

Rounds (each ``round_s`` long, boundaries are hard deadlines):

1. every authority posts its vote to every other authority;
2. an authority missing votes asks every other authority for them;
   at the end of the round an authority with fewer than ``quorum`` votes
   gives up, the others aggregate what they hold;
3. authorities broadcast a signature over their aggregate;
4. authorities missing signatures fetch them from everyone.

The run succeeds when at least ``quorum`` authorities hold ``quorum``
signatures over the same document at the end of round 4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from .aggregation import aggregate
from .core import Context, Keyring, Signature, StatusDocument
from .core.crypto import hash_bytes
from .legacy_messages import LegacySig, LegacyVote, SigRequest, VoteRequest
from .program import NodeContext, NodeProgram


@dataclass(frozen=True)
class LegacyConfig:
    round_s: float = 150.0
    rounds: int = 4
    quorum: int = 5
    rerun_delay_s: float = 1800.0

    def __post_init__(self) -> None:
        if self.round_s <= 0:
            raise ValueError("round_s must be positive")


class LegacyNode(NodeProgram):
    def __init__(
        self,
        node: int,
        n: int,
        epoch: int,
        doc: StatusDocument,
        secret: bytes,
        keyring: Keyring,
        config: LegacyConfig = LegacyConfig(),
        aggregate_cache: Optional[dict] = None,
    ) -> None:
        self.node, self.n, self.epoch = node, n, epoch
        self.doc = doc
        self.secret = secret
        self.keyring = keyring
        self.cfg = config
        self.votes: dict[int, StatusDocument] = {node: doc}
        self.sigs: dict[int, Signature] = {}
        self.early_sigs: list[LegacySig] = []
        self.body_digest: Optional[bytes] = None
        self.failed_reason: Optional[str] = None
        # latest useful arrival per round, seconds after the round opened
        self.round_busy = [0.0] * 4
        self._aggregate_cache = {} if aggregate_cache is None else aggregate_cache

    def _round(self, now: float) -> int:
        return min(3, int(now // self.cfg.round_s))

    def _mark(self, now: float) -> None:
        r = self._round(now)
        self.round_busy[r] = max(self.round_busy[r], now - r * self.cfg.round_s)

    def start(self, ctx: NodeContext) -> None:
        R = self.cfg.round_s
        ctx.broadcast(LegacyVote(self.doc))
        for k, key in enumerate(("fetch_votes", "sign", "fetch_sigs", "end"), start=1):
            ctx.set_timer(k * R, key)

    def on_timer(self, ctx: NodeContext, key: Any) -> None:
        if key == "fetch_votes":
            missing = tuple(a for a in range(self.n) if a not in self.votes)
            if missing:
                ctx.broadcast(VoteRequest(missing))
        elif key == "sign":
            self._sign(ctx)
        elif key == "fetch_sigs":
            if self.body_digest is not None and len(self.sigs) < self.n:
                ctx.broadcast(SigRequest(self.body_digest))
        elif key == "end":
            ok = self.body_digest is not None and len(self.sigs) >= self.cfg.quorum
            ctx.finish(
                success=ok,
                votes=len(self.votes),
                sigs=len(self.sigs),
                body=self.body_digest.hex() if self.body_digest else "",
                reason=self.failed_reason or ("" if ok else "not enough signatures"),
            )

    def _sign(self, ctx: NodeContext) -> None:
        if len(self.votes) < self.cfg.quorum:
            self.failed_reason = "not enough votes"
            ctx.log("legacy_fail", votes=len(self.votes))
            return
        key = tuple(sorted((a, d.digest) for a, d in self.votes.items()))
        if key not in self._aggregate_cache:
            slots = [self.votes.get(a) for a in range(self.n)]
            self._aggregate_cache[key] = aggregate(slots, self.n)
        self.body_digest = hash_bytes(self._aggregate_cache[key].body)
        sig = self.keyring.scheme.sign(self.secret, self.node, Context.CONSENSUS, self.epoch, self.body_digest)
        self.sigs[self.node] = sig
        ctx.broadcast(LegacySig(self.body_digest, sig))
        early, self.early_sigs = self.early_sigs, []
        for m in early:
            self._on_sig(ctx, m)

    def _on_sig(self, ctx: NodeContext, m: LegacySig) -> None:
        if self.body_digest is None:
            if self.failed_reason is None:
                self.early_sigs.append(m)
            return
        if m.body_digest != self.body_digest or m.sig.signer in self.sigs:
            return
        if self.keyring.verify(m.sig, Context.CONSENSUS, self.epoch, m.body_digest):
            self.sigs[m.sig.signer] = m.sig
            self._mark(ctx.now)

    def on_message(self, ctx: NodeContext, src: int, msg: Any) -> None:
        deadline_votes = 2 * self.cfg.round_s
        deadline_sigs = 4 * self.cfg.round_s
        if isinstance(msg, LegacyVote):
            a = msg.doc.author
            if ctx.now < deadline_votes and 0 <= a < self.n and a not in self.votes and msg.doc.epoch == self.epoch:
                self.votes[a] = msg.doc
                self._mark(ctx.now)
        elif isinstance(msg, VoteRequest):
            for a in msg.authors:
                if a in self.votes and a != src:
                    ctx.send(src, LegacyVote(self.votes[a]))
        elif isinstance(msg, LegacySig):
            if ctx.now < deadline_sigs:
                self._on_sig(ctx, msg)
        elif isinstance(msg, SigRequest):
            if msg.body_digest == self.body_digest:
                for s in self.sigs.values():
                    ctx.send(src, LegacySig(self.body_digest, s))


def run_legacy(scenario) -> dict[str, Any]:
    """Run the legacy protocol for ``scenario`` and return its metrics."""
    from .netsim import run

    if scenario.protocol != "legacy":
        scenario = scenario.replace(protocol="legacy")
    return run(scenario).metrics
