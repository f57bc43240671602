from __future__ import annotations

import pytest

from tordir.core import MacScheme, RelayDescriptor, StatusDocument, generate_keys
from tordir.dissemination import Disseminator, leader_assemble


class Cluster:
    """n nodes with MAC keys and one small document each."""

    def __init__(self, n: int = 4, f: int = 1, epoch: int = 1, scheme=None):
        self.n, self.f, self.epoch = n, f, epoch
        self.scheme = scheme or MacScheme()
        self.secrets, self.keyring = generate_keys(n, self.scheme, seed=3)
        self.docs = [
            StatusDocument.build(i, [RelayDescriptor(bytes([i + 1]) * 8, f"relay{i}")], epoch, 64) for i in range(n)
        ]

    def node(self, i: int) -> Disseminator:
        return Disseminator(i, self.n, self.f, self.epoch, self.keyring, self.secrets[i])

    def doc_msg(self, j: int, doc=None):
        return self.node(j).make_document(doc or self.docs[j])

    def proposal(self, i: int, held, view: int = 0):
        d = self.node(i)
        for j in held:
            d.on_document(self.doc_msg(j))
        return d.build_proposal(view)

    def vector(self, holders: dict, view: int = 0):
        props = [self.proposal(i, held, view) for i, held in holders.items()]
        return leader_assemble(props, [], self.n, self.f, view)


@pytest.fixture
def cluster():
    return Cluster()


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
