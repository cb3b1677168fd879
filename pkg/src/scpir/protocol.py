"""Query generation, answering and decoding for the ``mu = t/N`` scheme.

Every query to ``DB_n`` has the same fixed shape whatever message is wanted:
one block per label ``S`` containing ``n``, ``K`` stages per block, and at
stage ``k`` all ``C(K,k)`` message subsets ("types") with ``(t-1)**(k-1)``
coded bits each.  Types that contain the desired index carry one fresh
desired bit XOR-ed with a side-information sum that another database of the
block returned at stage ``k-1``; the remaining types are sums of fresh bits
and become side information for the next stage.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .core import Label, Parameters, ParameterError
from .placement import StorageContent


class ProtocolViolation(ValueError):
    """A request addresses a chunk the database does not store."""


class AlignmentError(ValueError):
    pass


class DecodingError(RuntimeError):
    pass


@dataclass(frozen=True)
class PermutationSet:
    params: Parameters
    delta: dict[tuple[int, Label], np.ndarray]

    def __getitem__(self, key: tuple[int, Label]) -> np.ndarray:
        return self.delta[key]


def sample_permutations(params: Parameters, seed: int) -> PermutationSet:
    """One uniform permutation of ``range(t**K)`` per chunk ``(k, S)``.

    Draw order is fixed: chunks in (k, label rank) order, each permutation
    produced by ``numpy.random.Generator.permutation`` (Fisher-Yates) on a
    PCG64 generator seeded with ``seed``.
    """
    rng = np.random.default_rng(seed)
    c = params.chunk_size
    delta = {}
    for k in range(1, params.K + 1):
        for s in params.labels:
            delta[(k, s)] = rng.permutation(c)
    return PermutationSet(params, delta)


def identity_permutations(params: Parameters) -> PermutationSet:
    c = params.chunk_size
    return PermutationSet(params, {(k, s): np.arange(c) for k in range(1, params.K + 1) for s in params.labels})


@dataclass(frozen=True)
class CodedBitRequest:
    """XOR of one bit from each message in ``types``, all from chunk label ``label``.

    ``terms`` holds ``(message index, bit offset inside W_{k,label})`` sorted
    by message index.
    """

    label: Label
    stage: int
    terms: tuple[tuple[int, int], ...]

    @property
    def messages(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.terms)


@dataclass(frozen=True)
class Query:
    db_index: int
    requests: tuple[CodedBitRequest, ...]

    def __len__(self) -> int:
        return len(self.requests)

    @property
    def blocks(self) -> dict[Label, list[list[CodedBitRequest]]]:
        """Requests grouped as ``{label: [stage-1 list, stage-2 list, ...]}``."""
        out: dict[Label, list[list[CodedBitRequest]]] = {}
        for r in self.requests:
            stages = out.setdefault(r.label, [])
            while len(stages) < r.stage:
                stages.append([])
            stages[r.stage - 1].append(r)
        return out

    def shape(self) -> Counter:
        """Request counts per (block, stage, type); positions stripped."""
        return Counter((r.label, r.stage, r.messages) for r in self.requests)


@dataclass(frozen=True)
class Carrier:
    """A request that delivers one desired bit.

    ``side`` is ``(db, request index)`` of the side-information sum that must
    be XOR-ed off, or ``None`` for a plain stage-1 bit.
    """

    db: int
    request: int
    label: Label
    position: int
    side: tuple[int, int] | None


@dataclass(frozen=True)
class Mutation:
    """Deliberate defects used as negative controls for the privacy audit."""

    skip_symmetrization_stage: int | None = None
    unpermuted_desired: bool = False


@dataclass(frozen=True)
class QueryPlan:
    params: Parameters
    desired_index: int = field(repr=False)
    queries: tuple[Query, ...]
    carriers: tuple[Carrier, ...] = field(repr=False)
    mutation: Mutation | None = None

    def query(self, db: int) -> Query:
        return self.queries[db - 1]

    def total_requests(self) -> int:
        return sum(len(q) for q in self.queries)


@dataclass(frozen=True)
class Answer:
    db_index: int
    bits: np.ndarray

    def __len__(self) -> int:
        return len(self.bits)


@dataclass
class _Pending:
    label: Label
    stage: int
    terms: tuple[tuple[int, int], ...]
    sort_key: tuple
    desired_pos: int | None = None
    side_ref: object = None  # _Pending of the side-information sum
    index: int = -1


def build_query_plan(params: Parameters, desired_index: int, perms: PermutationSet,
                     mutation: Mutation | None = None) -> QueryPlan:
    K, t = params.K, params.t
    if not 1 <= desired_index <= K:
        raise ParameterError(f"desired index must be in 1..{K}, got {desired_index}")
    i = desired_index
    skip_stage = mutation.skip_symmetrization_stage if mutation else None
    raw_desired = bool(mutation and mutation.unpermuted_desired)

    per_db: dict[int, list[_Pending]] = {n: [] for n in range(1, params.N + 1)}
    carriers: list[tuple[int, _Pending]] = []

    for s in params.labels:
        nxt = {j: 0 for j in range(1, K + 1)}

        def fresh(j: int) -> int:
            p = nxt[j]
            nxt[j] += 1
            if j == i and raw_desired:
                return p
            return int(perms[(j, s)][p])

        # side information produced at the previous stage, per producer
        produced: dict[int, list[_Pending]] = {}
        for k in range(1, K + 1):
            made: dict[int, list[_Pending]] = {n: [] for n in s}
            types = list(combinations(range(1, K + 1), k))
            type_rank = {ty: r for r, ty in enumerate(types)}
            for n in s:
                stage_reqs: list[_Pending] = []
                # desired carriers: fresh desired bits are spent producer by
                # producer, in the producer's own request order
                if k == 1:
                    pos = fresh(i)
                    req = _Pending(s, 1, ((i, pos),), (type_rank[(i,)], 0, 0), desired_pos=pos)
                    stage_reqs.append(req)
                else:
                    for m_rank, m in enumerate(s):
                        if m == n:
                            continue
                        for inst, side in enumerate(produced.get(m, [])):
                            pos = fresh(i)
                            terms = tuple(sorted(side.terms + ((i, pos),)))
                            ty = tuple(j for j, _ in terms)
                            req = _Pending(s, k, terms, (type_rank[ty], m_rank, inst), desired_pos=pos, side_ref=side)
                            stage_reqs.append(req)
                if k != skip_stage:
                    for ty in types:
                        if i in ty:
                            continue
                        for inst in range((t - 1) ** (k - 1)):
                            terms = tuple((j, fresh(j)) for j in ty)
                            req = _Pending(s, k, terms, (type_rank[ty], 0, inst))
                            stage_reqs.append(req)
                            made[n].append(req)
                stage_reqs.sort(key=lambda r: r.sort_key)
                for req in stage_reqs:
                    req.index = len(per_db[n])
                    per_db[n].append(req)
                    if req.desired_pos is not None:
                        carriers.append((n, req))
            produced = made

    queries = tuple(
        Query(n, tuple(CodedBitRequest(r.label, r.stage, r.terms) for r in per_db[n]))
        for n in range(1, params.N + 1)
    )
    owner = {id(r): n for n, reqs in per_db.items() for r in reqs}
    plan_carriers = tuple(
        Carrier(n, r.index, r.label, r.desired_pos,
                None if r.side_ref is None else (owner[id(r.side_ref)], r.side_ref.index))
        for n, r in carriers
    )
    return QueryPlan(params, i, queries, plan_carriers, mutation)


def answer(q: Query, z: StorageContent) -> Answer:
    if q.db_index != z.db_index:
        raise ProtocolViolation(f"query for DB{q.db_index} sent to DB{z.db_index}")
    bits = np.zeros(len(q.requests), dtype=np.uint8)
    for r_idx, r in enumerate(q.requests):
        acc = 0
        for k, pos in r.terms:
            chunk = z.chunks.get((k, r.label))
            if chunk is None:
                raise ProtocolViolation(f"DB{z.db_index} does not store W_{k},{set(r.label)}")
            if not 0 <= pos < len(chunk):
                raise ProtocolViolation(f"position {pos} outside chunk of {len(chunk)} bits")
            acc ^= int(chunk[pos])
        bits[r_idx] = acc
    return Answer(z.db_index, bits)


def decode(plan: QueryPlan, answers: list[Answer]) -> np.ndarray:
    params = plan.params
    if len(answers) != params.N:
        raise AlignmentError(f"expected {params.N} answers, got {len(answers)}")
    by_db = {}
    for a in answers:
        q = plan.query(a.db_index)
        if len(a.bits) != len(q):
            raise AlignmentError(f"DB{a.db_index} answered {len(a.bits)} bits for {len(q)} requests")
        by_db[a.db_index] = a.bits
    if len(by_db) != params.N:
        raise AlignmentError("answers do not cover every database exactly once")

    c = params.chunk_size
    out = {s: np.zeros(c, dtype=np.uint8) for s in params.labels}
    seen = {s: np.zeros(c, dtype=bool) for s in params.labels}
    for car in plan.carriers:
        bit = int(by_db[car.db][car.request])
        if car.side is not None:
            m, j = car.side
            side_req = plan.query(m).requests[j]
            own_req = plan.query(car.db).requests[car.request]
            if m == car.db or side_req.label != car.label or side_req.stage != own_req.stage - 1:
                raise DecodingError(f"carrier {car} cancels against an unusable side-information sum")
            bit ^= int(by_db[m][j])
        if seen[car.label][car.position]:
            raise DecodingError(f"bit {car.position} of W_{plan.desired_index},{set(car.label)} delivered twice")
        seen[car.label][car.position] = True
        out[car.label][car.position] = bit
    for s in params.labels:
        if not seen[s].all():
            missing = int((~seen[s]).sum())
            raise DecodingError(f"{missing} bits of W_{plan.desired_index},{set(s)} never delivered")
    return np.concatenate([out[s] for s in params.labels])


def download_cost(plan: QueryPlan) -> Fraction:
    return Fraction(plan.total_requests(), plan.params.L)
