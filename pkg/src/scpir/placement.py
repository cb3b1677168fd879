"""Split messages into labeled sub-messages and store them on the databases.

Database ``n`` keeps every chunk ``W_{k,S}`` with ``n in S``.  The layout is
public and deterministic: chunk ``(k, S)`` is the contiguous slice of ``W_k``
at the lexicographic rank of ``S``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from os import PathLike

import numpy as np

from .core import Label, Parameters, ParameterError, StructureError, SubmessageTable, make_params


class SizeError(ValueError):
    pass


@dataclass(frozen=True)
class StorageContent:
    db_index: int
    chunks: dict[tuple[int, Label], np.ndarray]

    def bits(self) -> int:
        return sum(len(b) for b in self.chunks.values())


@dataclass(frozen=True)
class Placement:
    params: Parameters
    contents: list[StorageContent]

    def storage(self, db: int) -> StorageContent:
        return self.contents[db - 1]


def split_messages(messages, params: Parameters) -> SubmessageTable:
    messages = [np.asarray(m, dtype=np.uint8) for m in messages]
    if len(messages) != params.K:
        raise SizeError(f"expected K={params.K} messages, got {len(messages)}")
    c = params.chunk_size
    chunks = {}
    for k, msg in enumerate(messages, 1):
        if msg.ndim != 1 or len(msg) != params.L:
            raise SizeError(f"message {k} has {msg.size} bits, expected L={params.L}")
        if np.any(msg > 1):
            raise SizeError(f"message {k} contains values other than 0/1")
        for r, s in enumerate(params.labels):
            chunk = msg[r * c:(r + 1) * c].copy()
            chunk.flags.writeable = False
            chunks[(k, s)] = chunk
    return SubmessageTable(params.N, params.K, params.L, chunks)


def place(table: SubmessageTable, params: Parameters) -> Placement:
    expected = {(k, s) for k in range(1, params.K + 1) for s in params.labels}
    if set(table.chunks) != expected:
        raise StructureError("sub-message table does not hold exactly the scheme's K*C(N,t) chunks")
    contents = []
    for n in range(1, params.N + 1):
        held = {(k, s): table.chunks[(k, s)] for k in range(1, params.K + 1) for s in params.labels if n in s}
        contents.append(StorageContent(n, held))
    return Placement(params, contents)


def storage_usage(p: Placement) -> int:
    """Bits stored per database; raises if the databases are unbalanced."""
    usage = {c.bits() for c in p.contents}
    if len(usage) != 1:
        raise StructureError(f"databases store different amounts: {sorted(usage)}")
    return usage.pop()


def reassemble(table: SubmessageTable, params: Parameters) -> list[np.ndarray]:
    return [np.concatenate([table.chunks[(k, s)] for s in params.labels]) for k in range(1, params.K + 1)]


# -- placement file ---------------------------------------------------------
# header: N, K, t as big-endian u32; then every chunk in (k, label rank) order,
# each packed MSB-first to ceil(t**K / 8) bytes.

_HEADER = struct.Struct(">III")


def placement_to_bytes(table: SubmessageTable, params: Parameters) -> bytes:
    out = [_HEADER.pack(params.N, params.K, params.t)]
    for k in range(1, params.K + 1):
        for s in params.labels:
            out.append(np.packbits(table.chunks[(k, s)]).tobytes())
    return b"".join(out)


def placement_from_bytes(data: bytes) -> tuple[Parameters, SubmessageTable]:
    if len(data) < _HEADER.size:
        raise StructureError("placement file shorter than its header")
    try:
        params = make_params(*_HEADER.unpack_from(data))
    except ParameterError as exc:
        raise StructureError(f"placement header invalid: {exc}") from exc
    c = params.chunk_size
    width = (c + 7) // 8
    expected = _HEADER.size + params.K * len(params.labels) * width
    if len(data) != expected:
        raise StructureError(f"placement file has {len(data)} bytes, expected {expected}")
    chunks = {}
    off = _HEADER.size
    for k in range(1, params.K + 1):
        for s in params.labels:
            raw = np.frombuffer(data, dtype=np.uint8, count=width, offset=off)
            chunks[(k, s)] = np.unpackbits(raw)[:c]
            off += width
    return params, SubmessageTable(params.N, params.K, params.L, chunks)


def save_placement(path: str | PathLike, table: SubmessageTable, params: Parameters) -> None:
    with open(path, "wb") as fh:
        fh.write(placement_to_bytes(table, params))


def load_placement(path: str | PathLike) -> Placement:
    with open(path, "rb") as fh:
        params, table = placement_from_bytes(fh.read())
    return place(table, params)
