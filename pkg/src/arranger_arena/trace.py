"""Reference compression codec and the step machine that decompresses a
posted batch, rebuilds its Merkle tree and compares the root.

Wire format of a compressed batch::

    count:u32 | frame * count          frame = len:u16 | rle bytes

``rle`` is a PackBits-style stream of chunks.  A control byte ``c < 128`` is
followed by ``c + 1`` literal bytes; ``c >= 128`` is followed by one byte that
is repeated ``c - 125`` times (3..130).

Every call to :func:`step` does O(1) work: read the header, decode one frame
and hash its leaf, hash one node pair (a merge or a padding fold) or compare
the final root.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace
from typing import Sequence

from .core import Batch, TransactionRequest, sha256
from .merkle import PADDING, leaf_hash, node_hash

MAX_ELEMENT = 4096
MAX_STACK = 64
_NO_COUNT = 0xFFFFFFFF


# -- codec -------------------------------------------------------------------

def rle_encode(raw: bytes) -> bytes:
    out = bytearray()
    literal = bytearray()
    i, n = 0, len(raw)

    def flush():
        while literal:
            chunk = literal[:128]
            out.append(len(chunk) - 1)
            out.extend(chunk)
            del literal[:128]

    while i < n:
        run = 1
        while i + run < n and raw[i + run] == raw[i] and run < 130:
            run += 1
        if run >= 3:
            flush()
            out.append(run + 125)
            out.append(raw[i])
            i += run
        else:
            literal.append(raw[i])
            i += 1
    flush()
    return bytes(out)


def rle_decode(stream: bytes, limit: int = MAX_ELEMENT) -> bytes:
    out = bytearray()
    i = 0
    while i < len(stream):
        c = stream[i]
        if c < 128:
            end = i + 1 + c + 1
            if end > len(stream):
                raise ValueError("truncated literal chunk")
            out.extend(stream[i + 1:end])
            i = end
        else:
            if i + 1 >= len(stream):
                raise ValueError("truncated repeat chunk")
            out.extend(stream[i + 1:i + 2] * (c - 125))
            i += 2
        if len(out) > limit:
            raise ValueError("decoded element exceeds size bound")
    return bytes(out)


def compress_elements(elements: Sequence[bytes]) -> bytes:
    parts = [struct.pack(">I", len(elements))]
    for e in elements:
        body = rle_encode(e)
        parts.append(struct.pack(">H", len(body)) + body)
    return b"".join(parts)


def compress(batch: Batch | Sequence[bytes]) -> bytes:
    elements = batch.leaves() if isinstance(batch, Batch) else list(batch)
    return compress_elements(elements)


def _read_frame(data: bytes, cursor: int) -> tuple[bytes, int]:
    if cursor + 2 > len(data):
        raise ValueError("truncated frame header")
    (flen,) = struct.unpack(">H", data[cursor:cursor + 2])
    end = cursor + 2 + flen
    if end > len(data):
        raise ValueError("truncated frame body")
    return rle_decode(data[cursor + 2:end]), end


def decompress(data: bytes) -> list[bytes]:
    """Decode a compressed batch into raw elements; raises ``ValueError``."""
    if len(data) < 4:
        raise ValueError("missing element count")
    (count,) = struct.unpack(">I", data[:4])
    if count == 0:
        raise ValueError("empty batch")
    cursor, out = 4, []
    for _ in range(count):
        element, cursor = _read_frame(data, cursor)
        out.append(element)
    if cursor != len(data):
        raise ValueError("trailing bytes after last frame")
    return out


def decompress_batch(data: bytes, sz: int = 4096) -> Batch:
    return Batch(tuple(TransactionRequest.decode(e) for e in decompress(data)), sz=sz)


# -- step machine ----------------------------------------------------------------

class Phase(enum.IntEnum):
    DECOMP = 0
    BUILD = 1
    COMPARE = 2
    DONE_OK = 3
    DONE_FAIL = 4


ABSORBING = (Phase.DONE_OK, Phase.DONE_FAIL)


@dataclass(frozen=True)
class TraceState:
    phase: Phase
    cursor: int
    emitted: int
    count: int | None
    stack: tuple[tuple[bytes, int], ...]
    target_root: bytes
    verdict: bool | None = None

    @property
    def absorbing(self) -> bool:
        return self.phase in ABSORBING

    def encode(self) -> bytes:
        count = _NO_COUNT if self.count is None else self.count
        verdict = {None: 0, True: 1, False: 2}[self.verdict]
        head = struct.pack(">BIIIB", int(self.phase), self.cursor, self.emitted, count, len(self.stack))
        body = b"".join(h + struct.pack(">B", lvl) for h, lvl in self.stack)
        return head + body + self.target_root + struct.pack(">B", verdict)

    @classmethod
    def decode(cls, data: bytes) -> "TraceState":
        phase, cursor, emitted, count, depth = struct.unpack(">BIIIB", data[:14])
        pos = 14
        stack = []
        for _ in range(depth):
            stack.append((bytes(data[pos:pos + 32]), data[pos + 32]))
            pos += 33
        root = bytes(data[pos:pos + 32])
        verdict = {0: None, 1: True, 2: False}[data[pos + 32]]
        if len(data) != pos + 33:
            raise ValueError("trailing bytes in trace state")
        return cls(Phase(phase), cursor, emitted, None if count == _NO_COUNT else count, tuple(stack), root, verdict)


def commitment(state: TraceState) -> bytes:
    return sha256(b"arena/trace" + state.encode())


def initial_state(target_root: bytes) -> TraceState:
    return TraceState(Phase.DECOMP, 0, 0, None, (), target_root)


def _fail(s: TraceState) -> TraceState:
    return replace(s, phase=Phase.DONE_FAIL, verdict=False)


def _next_phase(s: TraceState) -> TraceState:
    stack = s.stack
    if len(stack) >= 2 and stack[-1][1] == stack[-2][1]:
        phase = Phase.BUILD
    elif s.count is None or s.emitted < s.count:
        phase = Phase.DECOMP
    elif len(stack) > 1:
        phase = Phase.BUILD
    else:
        phase = Phase.COMPARE
    return replace(s, phase=phase)


def step(s: TraceState, data: bytes) -> TraceState:
    if s.absorbing:
        return s
    if s.phase is Phase.COMPARE:
        ok = len(s.stack) == 1 and s.stack[0][0] == s.target_root
        return replace(s, phase=Phase.DONE_OK if ok else Phase.DONE_FAIL, verdict=ok)
    if s.phase is Phase.DECOMP:
        if s.count is None:
            if len(data) < 4:
                return _fail(s)
            (count,) = struct.unpack(">I", data[:4])
            if count == 0:
                return _fail(s)
            return _next_phase(replace(s, cursor=4, count=count))
        try:
            element, cursor = _read_frame(data, s.cursor)
        except ValueError:
            return _fail(s)
        emitted = s.emitted + 1
        if emitted == s.count and cursor != len(data):
            return _fail(s)
        stack = s.stack + ((leaf_hash(element), 0),)
        if len(stack) > MAX_STACK:
            return _fail(s)
        return _next_phase(replace(s, cursor=cursor, emitted=emitted, stack=stack))
    # BUILD: merge two equal-level entries, or fold the top with a padding node
    stack = list(s.stack)
    if len(stack) >= 2 and stack[-1][1] == stack[-2][1]:
        right, lvl = stack.pop()
        left, _ = stack.pop()
        stack.append((node_hash(left, right), lvl + 1))
    else:
        top, lvl = stack.pop()
        stack.append((node_hash(top, PADDING), lvl + 1))
    return _next_phase(replace(s, stack=tuple(stack)))


@dataclass(frozen=True)
class TraceResult:
    ok: bool
    length: int
    states: tuple[TraceState, ...]
    commitments: tuple[bytes, ...]

    def state_at(self, index: int) -> TraceState:
        """State at ``index``; indices past the end repeat the absorbing state."""
        return self.states[min(index, self.length)]

    def commitment_at(self, index: int) -> bytes:
        return self.commitments[min(index, self.length)]


def run_trace(data: bytes, target_root: bytes) -> TraceResult:
    s = initial_state(target_root)
    states = [s]
    while not s.absorbing:
        s = step(s, data)
        states.append(s)
    return TraceResult(s.phase is Phase.DONE_OK, len(states) - 1, tuple(states), tuple(commitment(x) for x in states))


def execute_P(data: bytes, target_root: bytes) -> tuple[bool, int, tuple[bytes, ...]]:
    r = run_trace(data, target_root)
    return r.ok, r.length, r.commitments


def one_step_verify(pre_state: TraceState, claimed_post: bytes, data: bytes) -> bool:
    return commitment(step(pre_state, data)) == claimed_post
