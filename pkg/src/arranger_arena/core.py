"""Domain types: agents, transaction requests, batches, batch tags and the
simulated signature scheme.

Canonical byte encodings (big-endian throughout):

* transaction request: ``kind:u8 | index:u32 | len:u16 | payload | siglen:u8 | sig``
* batch tag: ``id:u64 | root:32B | levels:u8``

A signature is ``SHA-256(secret | domain | message)``.  Verification re-derives
it from the key registry, so the scheme is verifiable and attributable but
carries no cryptographic hardness assumptions beyond the hash.
"""
from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

MAX_PAYLOAD = 1024
DEFAULT_SZ = 4096
HASH_LEN = 32

TR_DOMAIN = b"arena/tr"
TAG_DOMAIN = b"arena/tag"
DATA_DOMAIN = b"arena/data"


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class AgentKind(enum.IntEnum):
    REPLICA = 0
    STF = 1
    USER = 2


@dataclass(frozen=True, order=True)
class AgentId:
    kind: AgentKind
    index: int

    def __str__(self) -> str:
        return f"{self.kind.name.lower()}:{self.index}"

    def encode(self) -> bytes:
        return struct.pack(">BI", int(self.kind), self.index)

    @classmethod
    def parse(cls, text: str) -> "AgentId":
        kind, _, index = text.partition(":")
        return cls(AgentKind[kind.upper()], int(index))


def replica(i: int) -> AgentId:
    return AgentId(AgentKind.REPLICA, i)


def stf(i: int) -> AgentId:
    return AgentId(AgentKind.STF, i)


def user(i: int) -> AgentId:
    return AgentId(AgentKind.USER, i)


class KeyRegistry:
    """Secrets of every agent in a scenario, derived deterministically from a seed."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._secrets: dict[AgentId, bytes] = {}

    def register(self, agent: AgentId, secret: bytes | None = None) -> AgentId:
        if secret is None:
            secret = sha256(b"arena/secret" + struct.pack(">Q", self.seed) + agent.encode())
        self._secrets[agent] = secret
        return agent

    def register_all(self, agents: Iterable[AgentId]) -> None:
        for a in agents:
            self.register(a)

    def __contains__(self, agent: AgentId) -> bool:
        return agent in self._secrets

    @property
    def replicas(self) -> list[AgentId]:
        return sorted(a for a in self._secrets if a.kind == AgentKind.REPLICA)

    @property
    def n_replicas(self) -> int:
        return len(self.replicas)

    def sign(self, agent: AgentId, domain: bytes, message: bytes) -> bytes:
        return sha256(self._secrets[agent] + domain + message)

    def verify(self, agent: AgentId, domain: bytes, message: bytes, signature: bytes) -> bool:
        secret = self._secrets.get(agent)
        if secret is None:
            return False
        return sha256(secret + domain + message) == signature


@dataclass(frozen=True)
class TransactionRequest:
    payload: bytes
    author: AgentId
    author_signature: bytes

    @classmethod
    def create(cls, payload: bytes, author: AgentId, registry: KeyRegistry) -> "TransactionRequest":
        msg = author.encode() + payload
        return cls(payload, author, registry.sign(author, TR_DOMAIN, msg))

    def encode(self) -> bytes:
        return (
            self.author.encode()
            + struct.pack(">H", len(self.payload))
            + self.payload
            + struct.pack(">B", len(self.author_signature))
            + self.author_signature
        )

    @classmethod
    def decode(cls, data: bytes) -> "TransactionRequest":
        """Inverse of :meth:`encode`; raises ``ValueError`` on malformed input."""
        if len(data) < 7:
            raise ValueError("truncated transaction request")
        kind, index, plen = struct.unpack(">BIH", data[:7])
        try:
            akind = AgentKind(kind)
        except ValueError:
            raise ValueError(f"unknown agent kind {kind}") from None
        end = 7 + plen
        if len(data) < end + 1:
            raise ValueError("truncated payload")
        slen = data[end]
        if len(data) != end + 1 + slen:
            raise ValueError("bad signature length")
        return cls(bytes(data[7:end]), AgentId(akind, index), bytes(data[end + 1:]))


def validate_transaction_request(tr: TransactionRequest, registry: KeyRegistry) -> bool:
    if not 1 <= len(tr.payload) <= MAX_PAYLOAD:
        return False
    return registry.verify(tr.author, TR_DOMAIN, tr.author.encode() + tr.payload, tr.author_signature)


def element_is_valid(element: bytes, registry: KeyRegistry) -> bool:
    """Validity of a raw Merkle leaf: it must decode to a correctly signed request."""
    try:
        tr = TransactionRequest.decode(element)
    except ValueError:
        return False
    return validate_transaction_request(tr, registry)


@dataclass(frozen=True)
class Batch:
    elements: tuple[TransactionRequest, ...]
    sz: int = DEFAULT_SZ

    def __post_init__(self):
        from .errors import EmptyBatch

        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise EmptyBatch("a batch needs at least one element")
        if len(self.elements) > self.sz:
            raise ValueError(f"batch holds {len(self.elements)} > SZ={self.sz} elements")

    def __len__(self) -> int:
        return len(self.elements)

    def leaves(self) -> list[bytes]:
        return [tr.encode() for tr in self.elements]


@dataclass(frozen=True)
class BatchTag:
    id: int
    root: bytes
    levels: int

    def encode(self) -> bytes:
        return struct.pack(">Q", self.id) + self.root + struct.pack(">B", self.levels)

    @classmethod
    def decode(cls, data: bytes) -> "BatchTag":
        if len(data) != 8 + HASH_LEN + 1:
            raise ValueError("batch tag must be 41 bytes")
        (ident,) = struct.unpack(">Q", data[:8])
        return cls(ident, bytes(data[8:40]), data[40])


class Certification(enum.Enum):
    CERTIFIED = "certified"
    TOO_FEW = "too_few"
    BAD_SIGNATURE = "bad_signature"


@dataclass(frozen=True)
class AggregateSignature:
    signers_mask: int
    per_signer: tuple[bytes, ...] = field(default=())

    @property
    def signers(self) -> list[int]:
        return [i for i in range(self.signers_mask.bit_length()) if self.signers_mask >> i & 1]

    @property
    def popcount(self) -> int:
        return bin(self.signers_mask).count("1")


@dataclass(frozen=True)
class SignedBatchTag:
    tag: BatchTag
    sig: AggregateSignature


def sign_tag(registry: KeyRegistry, who: AgentId, tag: BatchTag) -> bytes:
    return registry.sign(who, TAG_DOMAIN, tag.encode())


def sign_data(registry: KeyRegistry, who: AgentId, data: bytes) -> bytes:
    return registry.sign(who, DATA_DOMAIN, data)


def aggregate(signatures: dict[int, bytes]) -> AggregateSignature:
    """Combine per-replica signatures keyed by replica index."""
    mask = 0
    for i in signatures:
        mask |= 1 << i
    return AggregateSignature(mask, tuple(signatures[i] for i in sorted(signatures)))


def sign_aggregate(registry: KeyRegistry, signers: Sequence[int], domain: bytes, message: bytes) -> AggregateSignature:
    return aggregate({i: registry.sign(replica(i), domain, message) for i in signers})


def verify_aggregate_message(
    sig: AggregateSignature, domain: bytes, message: bytes, registry: KeyRegistry, S: int
) -> Certification:
    signers = sig.signers
    if len(signers) != len(sig.per_signer):
        return Certification.BAD_SIGNATURE
    if signers and signers[-1] >= registry.n_replicas:
        return Certification.BAD_SIGNATURE
    if len(signers) < S:
        return Certification.TOO_FEW
    for i, s in zip(signers, sig.per_signer):
        if not registry.verify(replica(i), domain, message, s):
            return Certification.BAD_SIGNATURE
    return Certification.CERTIFIED


def verify_aggregate(sig: AggregateSignature, tag: BatchTag, registry: KeyRegistry, S: int) -> Certification:
    return verify_aggregate_message(sig, TAG_DOMAIN, tag.encode(), registry, S)


def is_certified(sbt: SignedBatchTag, registry: KeyRegistry, S: int) -> bool:
    return verify_aggregate(sbt.sig, sbt.tag, registry, S) is Certification.CERTIFIED
