"""Binary and text encodings of queries and answers.

Binary query: ``u32 db_index, u32 request_count`` then per request
``u8 stage, u8 term_count`` and per term ``u16 message, u16 label_rank,
u32 position`` (all big-endian).  Binary answer: ``u32 db_index,
u32 bit_count`` then the bits packed MSB-first, 8 per byte, in request order.

The encodings never carry the desired index or the decoding map.
"""

from __future__ import annotations

import re
import struct

import numpy as np

from .core import Parameters
from .protocol import Answer, CodedBitRequest, Query


class WireError(ValueError):
    pass


_HEAD = struct.Struct(">II")
_REQ = struct.Struct(">BB")
_TERM = struct.Struct(">HHI")


def encode_query(q: Query, params: Parameters) -> bytes:
    out = [_HEAD.pack(q.db_index, len(q.requests))]
    for r in q.requests:
        rank = params.label_rank[r.label]
        out.append(_REQ.pack(r.stage, len(r.terms)))
        out.extend(_TERM.pack(k, rank, pos) for k, pos in r.terms)
    return b"".join(out)


def decode_query(data: bytes, params: Parameters) -> Query:
    try:
        db, count = _HEAD.unpack_from(data, 0)
        off = _HEAD.size
        reqs = []
        for _ in range(count):
            stage, nterms = _REQ.unpack_from(data, off)
            off += _REQ.size
            terms = []
            label = None
            for _ in range(nterms):
                k, rank, pos = _TERM.unpack_from(data, off)
                off += _TERM.size
                if rank >= len(params.labels):
                    raise WireError(f"label rank {rank} out of range")
                if label is not None and params.labels[rank] != label:
                    raise WireError("request mixes chunks of different labels")
                label = params.labels[rank]
                terms.append((k, pos))
            if label is None:
                raise WireError("request with no terms")
            reqs.append(CodedBitRequest(label, stage, tuple(terms)))
    except struct.error as exc:
        raise WireError(f"truncated query: {exc}") from exc
    if off != len(data):
        raise WireError(f"{len(data) - off} trailing bytes after query")
    return Query(db, tuple(reqs))


def encode_answer(a: Answer) -> bytes:
    return _HEAD.pack(a.db_index, len(a.bits)) + np.packbits(a.bits).tobytes()


def decode_answer(data: bytes) -> Answer:
    if len(data) < _HEAD.size:
        raise WireError("truncated answer header")
    db, nbits = _HEAD.unpack_from(data, 0)
    body = data[_HEAD.size:]
    if len(body) != (nbits + 7) // 8:
        raise WireError(f"answer body has {len(body)} bytes for {nbits} bits")
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8))[:nbits]
    return Answer(db, bits)


# -- transcript text --------------------------------------------------------

_LINE = re.compile(r"^db=(\d+) block=([\d,]+) stage=(\d+) terms=((?:\d+:\d+)(?:,\d+:\d+)*)$")


def query_to_text(q: Query) -> str:
    """One request per line: ``db=1 block=1,2 stage=2 terms=1:5,2:3``."""
    lines = []
    for r in q.requests:
        block = ",".join(map(str, r.label))
        terms = ",".join(f"{k}:{pos}" for k, pos in r.terms)
        lines.append(f"db={q.db_index} block={block} stage={r.stage} terms={terms}")
    return "\n".join(lines) + ("\n" if lines else "")


def query_from_text(text: str) -> Query:
    db = None
    reqs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        m = _LINE.match(line.strip())
        if m is None:
            raise WireError(f"line {lineno}: cannot parse {line!r}")
        n = int(m.group(1))
        if db is not None and n != db:
            raise WireError(f"line {lineno}: transcript mixes DB{db} and DB{n}")
        db = n
        label = tuple(int(v) for v in m.group(2).split(","))
        terms = tuple(tuple(int(v) for v in pair.split(":")) for pair in m.group(4).split(","))
        reqs.append(CodedBitRequest(label, int(m.group(3)), terms))
    if db is None:
        raise WireError("empty transcript")
    return Query(db, tuple(reqs))
