"""Off-chain translation of a batch tag into its batch, paid through a
hash-locked contingent payment.

The replica encrypts the batch under a fresh key ``k`` and commits to
``y = H(k)``.  A simulated proof binds ``(w, y, tag)``: it is only produced
when ``w`` really decrypts to the batch under a key hashing to ``y``, and
verification recomputes it from the offer's current fields.  The client locks
payment on ``y``; the replica can only be paid by publishing ``k``.
"""
from __future__ import annotations

import enum
import hashlib
import os
import random
import struct
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

from .core import AgentId, BatchTag, KeyRegistry, sha256
from .merkle import MerkleTree
from .errors import BadPreimage, PreconditionFailed, Underfunded

if TYPE_CHECKING:
    from .chain import Chain

DEFAULT_DELTA = 50
KEY_DOMAIN = b"arena/offer-y"


def keystream(k: bytes, n: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < n:
        out.extend(sha256(k + struct.pack(">Q", counter)))
        counter += 1
    return bytes(out[:n])


def encode_batch(elements: Sequence[bytes]) -> bytes:
    return struct.pack(">I", len(elements)) + b"".join(struct.pack(">I", len(e)) + e for e in elements)


def decode_batch(raw: bytes) -> list[bytes]:
    (count,) = struct.unpack(">I", raw[:4])
    pos, out = 4, []
    for _ in range(count):
        (n,) = struct.unpack(">I", raw[pos:pos + 4])
        out.append(raw[pos + 4:pos + 4 + n])
        pos += 4 + n
    if pos != len(raw):
        raise ValueError("trailing bytes in batch encoding")
    return out


def encrypt(k: bytes, plaintext: bytes) -> bytes:
    return bytes(a ^ b for a, b in zip(plaintext, keystream(k, len(plaintext))))


decrypt = encrypt


def _proof(w: bytes, y: bytes, tag: BatchTag) -> bytes:
    return sha256(b"zkproof" + sha256(w) + y + tag.encode())


@dataclass(frozen=True)
class TranslationOffer:
    w: bytes
    y: bytes
    proof: bytes | None
    replica_sig_over_y: bytes
    tag: BatchTag
    replica: AgentId

    @property
    def proof_ok(self) -> bool:
        return self.proof is not None and self.proof == _proof(self.w, self.y, self.tag)


def replica_offer(elements: Sequence[bytes], tag: BatchTag, replica: AgentId, registry: KeyRegistry,
                  rng: random.Random | None = None) -> tuple[TranslationOffer, bytes]:
    """Returns the offer and the secret key the replica keeps until it claims."""
    k = rng.randbytes(32) if rng is not None else os.urandom(32)
    plain = encode_batch(elements)
    w = encrypt(k, plain)
    y = sha256(k)
    # the simulated proof also attests that the batch hashes to the tag's root
    tree = MerkleTree(list(elements))
    sound = decrypt(k, w) == plain and tree.root == tag.root and tree.height == tag.levels
    proof = _proof(w, y, tag) if sound else None
    sig = registry.sign(replica, KEY_DOMAIN, y + tag.encode())
    return TranslationOffer(w, y, proof, sig, tag, replica), k


def verify_offer(offer: TranslationOffer, registry: KeyRegistry) -> bool:
    return offer.proof_ok and registry.verify(offer.replica, KEY_DOMAIN, offer.y + offer.tag.encode(),
                                              offer.replica_sig_over_y)


def tamper(offer: TranslationOffer, **fields) -> TranslationOffer:
    return replace(offer, **fields)


class PaymentState(str, enum.Enum):
    OPEN = "open"
    CLAIMED = "claimed"
    WITHDRAWN = "withdrawn"


@dataclass
class PaymentContract:
    cid: int
    owner: AgentId
    beneficiary: AgentId
    secret: bytes
    deadline: int
    balance: int
    offer: TranslationOffer
    tag_handle: int | None = None
    state: PaymentState = PaymentState.OPEN
    revealed_key: bytes | None = None
    accused: bool = False


def client_accept(chain: "Chain", client: AgentId, offer: TranslationOffer, amount: int,
                  tag_handle: int | None = None, delta: int = DEFAULT_DELTA) -> PaymentContract:
    if not verify_offer(offer, chain.registry):
        raise PreconditionFailed("offer proof or signature does not verify")
    need = amount + chain.params.cost("deploy_payment")
    if chain.balance(client) < need:
        raise Underfunded(client, need, chain.balance(client))
    chain.pay_cost(client, "deploy_payment")
    chain._debit(client, amount)
    pc = PaymentContract(len(chain.contracts), client, offer.replica, offer.y, chain.now + delta, amount,
                         offer, tag_handle)
    chain.contracts[pc.cid] = pc
    chain.emit("paymentDeployed", cid=pc.cid, owner=client, beneficiary=offer.replica, secret=offer.y,
               deadline=pc.deadline, amount=amount)
    return pc


def claim(chain: "Chain", pc: PaymentContract, caller: AgentId, k: bytes) -> None:
    """Beneficiary reveals ``k``; allowed after the deadline as long as the owner has not withdrawn."""
    if caller != pc.beneficiary:
        raise PreconditionFailed("only the beneficiary may claim")
    if pc.state is not PaymentState.OPEN:
        raise PreconditionFailed(f"contract is {pc.state.value}")
    if hashlib.sha256(k).digest() != pc.secret:
        raise BadPreimage("H(k) does not match the locked secret")
    chain._credit(caller, pc.balance)
    chain.pay_cost(caller, "claim_payment")
    pc.balance = 0
    pc.state = PaymentState.CLAIMED
    pc.revealed_key = k
    chain.emit("paymentClaimed", cid=pc.cid, key=k)


def withdraw(chain: "Chain", pc: PaymentContract, caller: AgentId) -> None:
    if caller != pc.owner:
        raise PreconditionFailed("only the owner may withdraw")
    if pc.state is not PaymentState.OPEN:
        raise PreconditionFailed(f"contract is {pc.state.value}")
    if not chain.now > pc.deadline:
        raise PreconditionFailed("deadline not reached")
    chain._credit(caller, pc.balance)
    pc.balance = 0
    pc.state = PaymentState.WITHDRAWN
    chain.emit("paymentWithdrawn", cid=pc.cid)


def accuse_silent(chain: "Chain", client: AgentId, replica_sig_over_y: bytes, pc: PaymentContract) -> int:
    """Remove the silent replica's stake on the tag; the client receives ``rho`` of it."""
    if pc.owner != client:
        raise PreconditionFailed("only the contract owner may accuse")
    if pc.state is not PaymentState.WITHDRAWN:
        raise PreconditionFailed("the replica claimed in time or the contract is still open")
    if pc.accused:
        raise PreconditionFailed("already accused")
    offer = pc.offer
    if not chain.registry.verify(offer.replica, KEY_DOMAIN, pc.secret + offer.tag.encode(), replica_sig_over_y):
        raise PreconditionFailed("signature over y does not verify")
    chain.pay_cost(client, "accuse_silent")
    pc.accused = True
    handle = pc.tag_handle
    amount = chain.stakes.get(handle, {}).pop(offer.replica, 0) if handle is not None else 0
    compensation = int(amount * chain.params.rho)
    chain._credit(client, compensation)
    chain.burned += amount - compensation
    chain.emit("silentReplica", cid=pc.cid, replica=offer.replica, tag=handle, removed=amount,
               compensation=compensation)
    if handle is not None and not chain.stakes[handle] and chain.tag(handle).status.value == "pending":
        chain._discard(handle, "silent", evidence=True)
    return compensation


def recover_batch(pc: PaymentContract) -> list[bytes] | None:
    """What the client can reconstruct from on-chain data."""
    if pc.revealed_key is None:
        return None
    return decode_batch(decrypt(pc.revealed_key, pc.offer.w))
