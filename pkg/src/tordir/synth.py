"""Synthetic status documents with realistic per-authority disagreement."""

from __future__ import annotations

import hashlib
import random
from functools import lru_cache

from .core import RelayDescriptor, StatusDocument
from .core.types import DEFAULT_ENTRY_SIZE

FLAGS = ("Exit", "Fast", "Guard", "HSDir", "Running", "Stable", "V2Dir", "Valid")
POLICIES = ("reject 1-65535", "accept 80,443", "accept 1-65535", "reject 25,119,135-139")


def _fingerprint(seed: int, k: int) -> bytes:
    return hashlib.sha1(f"relay:{seed}:{k}".encode()).digest()


@lru_cache(maxsize=8)
def synthesize_documents(
    n: int, relays: int, epoch: int = 1, seed: int = 0, entry_size: int = DEFAULT_ENTRY_SIZE
) -> tuple[StatusDocument, ...]:
    """One document per authority over a shared pool of ``relays`` relays.

    Authorities each miss about 3% of relays, disagree on a few flags, and
    every third authority measures bandwidth. Deterministic in its arguments.
    """
    rng = random.Random(f"synth:{seed}:{n}:{relays}")
    pool = []
    for k in range(relays):
        pool.append(
            dict(
                fingerprint=_fingerprint(seed, k),
                nickname=f"relay{k}",
                flags=frozenset(fl for fl in FLAGS if rng.random() < 0.6),
                version=(0, 4, 8, rng.randint(0, 12)),
                protocols=rng.randint(1, 5),
                exit_policy_summary=rng.choice(POLICIES),
                bandwidth=rng.randint(100, 100_000),
            )
        )
    docs = []
    for a in range(n):
        measures = a % 3 == 0
        listed = []
        for base in pool:
            if rng.random() < 0.03:
                continue
            flags = set(base["flags"])
            for fl in FLAGS:
                if rng.random() < 0.05:
                    flags ^= {fl}
            version = base["version"]
            if rng.random() < 0.1:
                version = version[:3] + (max(0, version[3] - 1),)
            listed.append(
                RelayDescriptor(
                    fingerprint=base["fingerprint"],
                    nickname=base["nickname"] if rng.random() > 0.02 else f"{base['nickname']}x{a}",
                    flags=frozenset(flags),
                    version=version,
                    protocols=base["protocols"],
                    exit_policy_summary=base["exit_policy_summary"],
                    bandwidth=int(base["bandwidth"] * rng.uniform(0.8, 1.2)) if measures else base["bandwidth"],
                    measured=measures,
                )
            )
        docs.append(StatusDocument.build(a, listed, epoch, entry_size))
    return tuple(docs)


def equivocation_twin(doc: StatusDocument) -> StatusDocument:
    """A second, different document from the same author and epoch."""
    if doc.relays:
        first = doc.relays[0]
        changed = RelayDescriptor(
            fingerprint=first.fingerprint,
            nickname=first.nickname + "-twin",
            flags=first.flags,
            version=first.version,
            protocols=first.protocols,
            exit_policy_summary=first.exit_policy_summary,
            bandwidth=first.bandwidth,
            measured=first.measured,
        )
        relays = (changed,) + doc.relays[1:]
    else:
        relays = (RelayDescriptor(fingerprint=b"\x00" * 20, nickname="twin"),)
    return StatusDocument(doc.author, relays, doc.epoch, doc.entry_size)
