"""Independent reference implementations used by the tests."""

from __future__ import annotations

import random

from tordir.core import RelayDescriptor, StatusDocument

FLAGS = ["Exit", "Fast", "Guard", "HSDir", "Running", "Stable", "V2Dir"]


def _winner(values):
    # scan candidates from the largest down; keep the first with top count
    best, best_count = None, -1
    for cand in sorted(set(values), reverse=True):
        count = sum(1 for v in values if v == cand)
        if count > best_count:
            best, best_count = cand, count
    return best


def brute_merge(slots, n, t=None):
    """Relay list a consensus should contain, computed the slow way."""
    if t is None:
        t = n // 2 + 1
    every = set()
    for doc in slots:
        if doc is not None:
            every |= {r.fingerprint for r in doc.relays}
    merged = []
    for fp in sorted(every):
        votes = []
        for author in range(len(slots)):
            doc = slots[author]
            if doc is None:
                continue
            for r in doc.relays:
                if r.fingerprint == fp:
                    votes.append((author, r))
        if len(votes) < t:
            continue
        rs = [r for _, r in votes]
        nickname = max(votes, key=lambda av: av[0])[1].nickname
        flags = set()
        for flag in FLAGS + sorted({x for r in rs for x in r.flags} - set(FLAGS)):
            yes = sum(1 for r in rs if flag in r.flags)
            if yes > len(rs) - yes:
                flags.add(flag)
        bws = sorted(r.bandwidth for r in rs if r.measured and r.bandwidth is not None)
        merged.append(
            RelayDescriptor(
                fingerprint=fp,
                nickname=nickname,
                flags=frozenset(flags),
                version=_winner([r.version for r in rs]),
                protocols=_winner([r.protocols for r in rs]),
                exit_policy_summary=_winner([r.exit_policy_summary for r in rs]),
                bandwidth=bws[(len(bws) - 1) // 2] if bws else None,
                measured=bool(bws),
            )
        )
    return merged


def random_slots(rng: random.Random, n: int, max_relays: int, epoch: int = 1):
    """Random documents drawn from a shared relay pool, some slots bottom."""
    pool = [bytes([i]) * 4 for i in range(max_relays)]
    bottoms = set(rng.sample(range(n), rng.randint(0, n // 3)))
    slots = []
    for author in range(n):
        if author in bottoms:
            slots.append(None)
            continue
        relays = []
        for fp in rng.sample(pool, rng.randint(0, max_relays)):
            measured = rng.random() < 0.7
            relays.append(
                RelayDescriptor(
                    fingerprint=fp,
                    nickname=rng.choice(["alpha", "beta", "gamma", "delta"]),
                    flags=frozenset(f for f in FLAGS if rng.random() < 0.5),
                    version=(0, 4, rng.randint(0, 2), rng.randint(0, 3)),
                    protocols=rng.randint(0, 3),
                    exit_policy_summary=rng.choice(["reject 1-65535", "accept 80,443", "accept 443"]),
                    bandwidth=rng.choice([None, rng.randint(0, 500)]) if not measured else rng.randint(0, 500),
                    measured=measured,
                )
            )
        slots.append(StatusDocument.build(author, relays, epoch, 64))
    return slots
