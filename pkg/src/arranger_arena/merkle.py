"""Domain-separated SHA-256 Merkle trees with per-layer padding.

Leaves are ``H(0x00 | element)``, internal nodes ``H(0x01 | left | right)``
and every odd-sized layer (other than the root layer) is padded with the
distinguished node ``H(0x02)``.  Elements are never duplicated to fill a
layer, so a padded tree never looks like it contains a repeated element.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

from .core import Batch, sha256
from .errors import EmptyBatch, IndexOutOfRange

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
PADDING = sha256(b"\x02")


def leaf_hash(element: bytes) -> bytes:
    return sha256(LEAF_PREFIX + element)


def node_hash(left: bytes, right: bytes) -> bytes:
    return sha256(NODE_PREFIX + left + right)


def bit_at_level(i: int, level: int) -> int:
    """Bit ``level`` of ``i``; 1 means the path node at that level is a right child."""
    return (i >> level) & 1


def _as_leaves(batch: Batch | Sequence[bytes]) -> list[bytes]:
    if isinstance(batch, Batch):
        return batch.leaves()
    return [bytes(e) for e in batch]


class MerkleTree:
    def __init__(self, elements: Batch | Sequence[bytes]):
        self.elements = _as_leaves(elements)
        if not self.elements:
            raise EmptyBatch("cannot build a Merkle tree without leaves")
        layer = [leaf_hash(e) for e in self.elements]
        self.levels: list[list[bytes]] = []
        while len(layer) > 1:
            if len(layer) % 2:
                layer = layer + [PADDING]
            self.levels.append(layer)
            layer = [node_hash(layer[k], layer[k + 1]) for k in range(0, len(layer), 2)]
        self.levels.append(layer)

    @property
    def leaf_count(self) -> int:
        return len(self.elements)

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    def node_hash_at(self, level: int, index_at_level: int) -> bytes:
        if not 0 <= level <= self.height:
            raise IndexOutOfRange(f"level {level} outside 0..{self.height}")
        layer = self.levels[level]
        if not 0 <= index_at_level < len(layer):
            raise IndexOutOfRange(f"index {index_at_level} outside layer {level} of width {len(layer)}")
        return layer[index_at_level]

    def path_node(self, i: int, level: int) -> bytes:
        """Hash of the node at ``level`` on the path from leaf ``i`` to the root."""
        return self.node_hash_at(level, i >> level)

    def sibling(self, i: int, level: int) -> bytes:
        return self.node_hash_at(level, (i >> level) ^ 1)

    def membership_proof(self, i: int) -> "MembershipProof":
        if not 0 <= i < self.leaf_count:
            raise IndexOutOfRange(f"leaf {i} outside 0..{self.leaf_count - 1}")
        return MembershipProof(i, tuple(self.sibling(i, lvl) for lvl in range(self.height)))


@dataclass(frozen=True)
class MembershipProof:
    index: int
    sibling_hashes: tuple[bytes, ...]

    def encode(self) -> bytes:
        return struct.pack(">IB", self.index, len(self.sibling_hashes)) + b"".join(self.sibling_hashes)

    @classmethod
    def decode(cls, data: bytes) -> "MembershipProof":
        if len(data) < 5:
            raise ValueError("truncated proof")
        index, count = struct.unpack(">IB", data[:5])
        if len(data) != 5 + 32 * count:
            raise ValueError("proof length does not match its count")
        return cls(index, tuple(data[5 + 32 * k: 37 + 32 * k] for k in range(count)))


def mroot(batch: Batch | Sequence[bytes]) -> bytes:
    return MerkleTree(batch).root


def membership_proof(tree: MerkleTree, i: int) -> MembershipProof:
    return tree.membership_proof(i)


def node_hash_at(tree: MerkleTree, level: int, index_at_level: int) -> bytes:
    return tree.node_hash_at(level, index_at_level)


def fold_proof(h: bytes, i: int, siblings: Sequence[bytes]) -> bytes:
    for level, s in enumerate(siblings):
        h = node_hash(s, h) if bit_at_level(i, level) else node_hash(h, s)
    return h


def verify_membership(root: bytes, height: int, e: bytes, i: int, proof: MembershipProof) -> bool:
    if len(proof.sibling_hashes) != height or i < 0 or i >> height:
        return False
    return fold_proof(leaf_hash(e), i, proof.sibling_hashes) == root
