from __future__ import annotations

import hashlib
import os
import sys

import pytest

from arranger_arena.core import KeyRegistry, TransactionRequest, replica, stf, user

sys.path.insert(0, os.path.dirname(__file__))


def sha(b: bytes) -> bytes:
    return hashlib.sha256(b).digest()


# independent Merkle oracle: no package helpers
def oracle_leaf(e: bytes) -> bytes:
    return sha(b"\x00" + e)


def oracle_node(l: bytes, r: bytes) -> bytes:
    return sha(b"\x01" + l + r)


ORACLE_PAD = sha(b"\x02")


def oracle_root(elements: list[bytes]) -> bytes:
    layer = [oracle_leaf(e) for e in elements]
    while len(layer) > 1:
        if len(layer) % 2:
            layer.append(ORACLE_PAD)
        layer = [oracle_node(layer[k], layer[k + 1]) for k in range(0, len(layer), 2)]
    return layer[0]


def make_registry(n_replicas: int = 4, users: int = 2, seed: int = 0) -> KeyRegistry:
    reg = KeyRegistry(seed)
    for i in range(n_replicas):
        reg.register(replica(i))
    reg.register(stf(0))
    for u in range(users):
        reg.register(user(u))
    return reg


def valid_requests(reg: KeyRegistry, count: int, tag: bytes = b"tx") -> list[bytes]:
    return [TransactionRequest.create(tag + b"-%d" % j, user(0), reg).encode() for j in range(count)]


def invalid_request(tag: bytes = b"bad") -> bytes:
    return TransactionRequest(tag, user(0), b"\x00" * 32).encode()


@pytest.fixture
def registry() -> KeyRegistry:
    return make_registry()


class Setup:
    """A chain with one signed, posted and staked tag."""

    def __init__(self, elements: list[bytes], S: int = 2, n: int = 4, stakers=(0,), signers=None,
                 tag_id: int = 1, registry: KeyRegistry | None = None, params=None, chain=None):
        from arranger_arena.chain import Chain
        from arranger_arena.core import TAG_DOMAIN, BatchTag, SignedBatchTag, sign_aggregate
        from arranger_arena.economics import UNIT
        from arranger_arena.merkle import MerkleTree

        self.registry = registry or make_registry(n)
        if chain is None:
            chain = Chain(self.registry, params, S=S)
            for r in self.registry.replicas:
                chain.mint(r, 1000 * UNIT)
            chain.mint(stf(0), 1000 * UNIT)
        self.chain = chain
        self.client = stf(0)
        self.elements = list(elements)
        self.tree = MerkleTree(self.elements)
        self.signers = list(range(S)) if signers is None else list(signers)
        tag = BatchTag(tag_id, self.tree.root, self.tree.height)
        self.sbt = SignedBatchTag(tag, sign_aggregate(self.registry, self.signers, TAG_DOMAIN, tag.encode()))
        self.stakers = [replica(s) for s in stakers]
        self.handle = chain.post_signed_batch_tag(self.stakers[0] if self.stakers else replica(0), self.sbt)
        for s in self.stakers:
            chain.place_stake(s, self.handle)

    def compressed(self, elements: list[bytes] | None = None):
        from arranger_arena.core import DATA_DOMAIN, sign_aggregate
        from arranger_arena.trace import compress

        data = compress(self.elements if elements is None else elements)
        return data, sign_aggregate(self.registry, self.signers, DATA_DOMAIN, data)

    def knowledge(self, learn: bool = True, compressed_elements: list[bytes] | None = None):
        from arranger_arena.strategies import PlayerKnowledge

        k = PlayerKnowledge(self.registry, self.chain.S)
        if learn:
            k.learn(self.handle, self.elements)
        k.compressed[self.handle] = self.compressed(compressed_elements)
        return k


def scripted(moves):
    """Strategy replaying a fixed list of moves; silent once exhausted."""
    it = iter(moves)

    def act(g, me):
        return next(it, None)

    return act
