"""Interface between the simulator and the protocol running on each node."""

from __future__ import annotations

from typing import Any, Protocol


class NodeContext(Protocol):
    node: int
    n: int

    @property
    def now(self) -> float:
        """Simulated seconds since the start of the run."""

    def send(self, dest: int, msg: Any) -> None: ...

    def broadcast(self, msg: Any) -> None: ...

    def set_timer(self, delay_s: float, key: Any) -> None: ...

    def log(self, kind: str, **fields: Any) -> None: ...

    def finish(self, **result: Any) -> None:
        """Mark this node's run as complete, recording its output."""


class NodeProgram:
    """Base class for per-node protocol logic. Handlers run one at a time."""

    def start(self, ctx: NodeContext) -> None:
        pass

    def on_message(self, ctx: NodeContext, src: int, msg: Any) -> None:
        pass

    def on_timer(self, ctx: NodeContext, key: Any) -> None:
        pass
