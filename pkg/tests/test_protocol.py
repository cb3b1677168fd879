from collections import Counter
from fractions import Fraction
from math import comb
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from scpir.core import ParameterError, make_params
from scpir.placement import place, split_messages
from scpir.protocol import (AlignmentError, DecodingError, ProtocolViolation, Query, answer, build_query_plan,
                            decode, download_cost, identity_permutations, sample_permutations)


def _setup(N, K, t, seed=0):
    p = make_params(N, K, t)
    msgs = np.random.default_rng(seed).integers(0, 2, (K, p.L), dtype=np.uint8)
    return p, msgs, place(split_messages(msgs, p), p)


def _cells(rows: str) -> Counter:
    """``"1:3+2:2, 2:3+3:3"`` -> multiset of requests, ``k:u`` meaning bit ``u`` (1-based) of W_k."""
    out = Counter()
    for req in rows.split(","):
        out[frozenset((int(k), int(u) - 1) for k, u in (term.split(":") for term in req.strip().split("+")))] += 1
    return out


def _observed(plan, db, label, stage) -> Counter:
    return Counter(frozenset(r.terms) for r in plan.query(db).requests if r.label == label and r.stage == stage)


# expected requests in block {1,2} for N=K=3, t=2, W_1 wanted, identity permutations
QUERIES_N3_T2_BLOCK12 = {
    (1, 1): "1:1, 2:1, 3:1",
    (1, 2): "1:3+2:2, 1:4+3:2, 2:3+3:3",
    (1, 3): "1:7+2:4+3:4",
    (2, 1): "1:2, 2:2, 3:2",
    (2, 2): "1:5+2:1, 1:6+3:1, 2:4+3:4",
    (2, 3): "1:8+2:3+3:3",
}

# expected requests for N=K=3, t=3, W_1 wanted, identity permutations
QUERIES_N3_T3 = {
    (1, 1): "1:1, 2:1, 3:1",
    (1, 2): "1:4+2:2, 1:5+3:2, 2:4+3:4, 1:6+2:3, 1:7+3:3, 2:5+3:5",
    (1, 3): "1:16+2:6+3:6, 1:17+2:7+3:7, 1:18+2:8+3:8, 1:19+2:9+3:9",
    (2, 1): "1:2, 2:2, 3:2",
    (2, 2): "1:8+2:1, 1:9+3:1, 2:6+3:6, 1:10+2:3, 1:11+3:3, 2:7+3:7",
    (2, 3): "1:20+2:4+3:4, 1:21+2:5+3:5, 1:22+2:8+3:8, 1:23+2:9+3:9",
    (3, 1): "1:3, 2:3, 3:3",
    (3, 2): "1:12+2:1, 1:13+3:1, 2:8+3:8, 1:14+2:2, 1:15+3:2, 2:9+3:9",
    (3, 3): "1:24+2:4+3:4, 1:25+2:5+3:5, 1:26+2:6+3:6, 1:27+2:7+3:7",
}


def test_queries_n3_t2_per_block():
    p = make_params(3, 3, 2)
    plan = build_query_plan(p, 1, identity_permutations(p))
    for (db, stage), cells in QUERIES_N3_T2_BLOCK12.items():
        assert _observed(plan, db, (1, 2), stage) == _cells(cells), (db, stage)
    assert not any(r.label == (1, 2) for r in plan.query(3).requests)
    # the other blocks repeat the pattern with their own databases
    for label in [(1, 3), (2, 3)]:
        for (db_rank, stage), cells in QUERIES_N3_T2_BLOCK12.items():
            assert _observed(plan, label[db_rank - 1], label, stage) == _cells(cells)


def test_queries_n3_t3_replicated():
    p = make_params(3, 3, 3)
    plan = build_query_plan(p, 1, identity_permutations(p))
    for (db, stage), cells in QUERIES_N3_T3.items():
        assert _observed(plan, db, (1, 2, 3), stage) == _cells(cells), (db, stage)
    assert [len(q) for q in plan.queries] == [13, 13, 13]


def test_t1_downloads_everything_at_stage_one():
    p = make_params(3, 3, 1)
    plan = build_query_plan(p, 2, identity_permutations(p))
    for n in (1, 2, 3):
        q = plan.query(n)
        assert {r.stage for r in q.requests} == {1}
        assert Counter(r.messages for r in q.requests) == {(1,): 1, (2,): 1, (3,): 1}
    assert download_cost(plan) == 3


def test_counting_identities_exhaustive():
    for N in range(1, 6):
        for K in range(1, 5):
            for t in range(1, N + 1):
                p = make_params(N, K, t)
                for i in {1, K}:
                    plan = build_query_plan(p, i, identity_permutations(p))
                    desired = Counter(c.db for c in plan.carriers)
                    for n in range(1, N + 1):
                        q = plan.query(n)
                        blocks = comb(N - 1, t - 1)
                        assert len(q) == blocks * sum(t**k for k in range(K))
                        assert desired[n] == blocks * t ** (K - 1)
                        per_stage = Counter(r.stage for r in q.requests)
                        per_stage_desired = Counter(q.requests[c.request].stage for c in plan.carriers if c.db == n)
                        for k in range(1, K + 1):
                            assert per_stage[k] == blocks * comb(K, k) * (t - 1) ** (k - 1)
                            assert per_stage_desired[k] == blocks * comb(K - 1, k - 1) * (t - 1) ** (k - 1)
                        assert len(q.blocks) == (blocks if len(q) else 0)
                        for r in q.requests:
                            assert len(r.terms) == r.stage == len(set(r.messages))
                            assert n in r.label
                    assert N * desired[1] == p.L
                    assert sum(len(q) for q in plan.queries) == p.L * sum(Fraction(1, t**k) for k in range(K))


@pytest.mark.parametrize("N,K,t", [(3, 3, 2), (3, 3, 3), (4, 3, 2), (5, 2, 3), (4, 4, 2)])
def test_no_bit_requested_twice_per_database(N, K, t):
    p = make_params(N, K, t)
    for seed in range(3):
        for i in range(1, K + 1):
            plan = build_query_plan(p, i, sample_permutations(p, seed))
            for q in plan.queries:
                seen = [(k, r.label, pos) for r in q.requests for k, pos in r.terms]
                assert len(seen) == len(set(seen))


@pytest.mark.parametrize("N,K,t", [(3, 3, 2), (3, 3, 3), (4, 3, 2), (4, 4, 3), (2, 2, 1)])
def test_shape_invariance(N, K, t):
    p = make_params(N, K, t)
    perms = identity_permutations(p)
    shapes = [[build_query_plan(p, i, perms).query(n).shape() for n in range(1, N + 1)] for i in range(1, K + 1)]
    assert all(s == shapes[0] for s in shapes)


@pytest.mark.parametrize("N,K,t", [(3, 3, 2), (3, 3, 3), (4, 3, 3), (4, 4, 2)])
def test_side_information_comes_from_another_database(N, K, t):
    p = make_params(N, K, t)
    plan = build_query_plan(p, 2, sample_permutations(p, 4))
    for c in plan.carriers:
        own = plan.query(c.db).requests[c.request]
        if own.stage == 1:
            assert c.side is None
            continue
        m, j = c.side
        side = plan.query(m).requests[j]
        assert m != c.db and m in own.label
        assert side.label == own.label and side.stage == own.stage - 1
        assert 2 not in side.messages
        assert set(own.terms) == set(side.terms) | {(2, c.position)}
    # each side-information sum is spent once by every other database of its block
    uses = Counter(c.side for c in plan.carriers if c.side is not None)
    assert set(uses.values()) == {t - 1}
    pairs = [(c.db, c.side) for c in plan.carriers if c.side is not None]
    assert len(pairs) == len(set(pairs))


def test_identity_for_singleton_chunks():
    p = make_params(3, 4, 1)
    perms = sample_permutations(p, 99)
    assert all(list(v) == [0] for v in perms.delta.values())


def test_permutations_deterministic_and_bijective():
    p = make_params(3, 3, 2)
    a, b = sample_permutations(p, 7), sample_permutations(p, 7)
    assert a.delta.keys() == b.delta.keys()
    assert len(a.delta) == 3 * 3
    for key in a.delta:
        assert np.array_equal(a[key], b[key])
        assert sorted(a[key]) == list(range(8))
    assert any(not np.array_equal(a[k], sample_permutations(p, 8)[k]) for k in a.delta)


def test_permutation_uniformity():
    p = make_params(2, 2, 2)  # chunks of 4 bits, 24 permutations
    index = {perm: r for r, perm in enumerate(permutations(range(4)))}
    counts = np.zeros(24, dtype=int)
    trials = 100_000
    for seed in range(trials):
        counts[index[tuple(sample_permutations(p, seed)[(1, (1, 2))])]] += 1
    expected = trials / 24
    sigma = np.sqrt(trials * (1 / 24) * (23 / 24))
    assert np.all(np.abs(counts - expected) <= 3 * sigma)
    assert chisquare(counts).pvalue > 1e-3


def test_answer_examples():
    p = make_params(2, 2, 2)
    msgs = np.array([[1, 1, 1, 1], [0, 0, 0, 0]], dtype=np.uint8)
    pl = place(split_messages(msgs, p), p)
    for i in (1, 2):
        plan = build_query_plan(p, i, sample_permutations(p, 3))
        for q in plan.queries:
            a = answer(q, pl.storage(q.db_index))
            for r, bit in zip(q.requests, a.bits):
                assert bit == (1 if 1 in r.messages else 0)


def test_all_zero_messages_give_zero_answers():
    p, _, _ = _setup(3, 3, 2)
    pl = place(split_messages(np.zeros((3, p.L), np.uint8), p), p)
    plan = build_query_plan(p, 1, sample_permutations(p, 0))
    assert all(not answer(q, pl.storage(q.db_index)).bits.any() for q in plan.queries)


def test_single_term_request_returns_stored_bit():
    p, msgs, pl = _setup(3, 3, 2, seed=9)
    plan = build_query_plan(p, 3, sample_permutations(p, 1))
    q = plan.query(2)
    a = answer(q, pl.storage(2))
    for r, bit in zip(q.requests, a.bits):
        if r.stage == 1:
            (k, pos), = r.terms
            assert bit == pl.storage(2).chunks[(k, r.label)][pos]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.data(), st.integers(0, 2**32))
def test_roundtrip(N, K, data, seed):
    t = data.draw(st.integers(1, N))
    i = data.draw(st.integers(1, K))
    p, msgs, pl = _setup(N, K, t, seed)
    plan = build_query_plan(p, i, sample_permutations(p, seed))
    answers = [answer(q, pl.storage(q.db_index)) for q in plan.queries]
    assert np.array_equal(decode(plan, answers), msgs[i - 1])
    assert download_cost(plan) == sum(Fraction(1, t**k) for k in range(K))


def test_t1_decode_is_concatenation_of_downloads():
    p, msgs, pl = _setup(3, 2, 1, seed=2)
    plan = build_query_plan(p, 2, sample_permutations(p, 0))
    answers = [answer(q, pl.storage(q.db_index)) for q in plan.queries]
    direct = [a.bits[[r.messages == (2,) for r in q.requests].index(True)] for q, a in zip(plan.queries, answers)]
    assert np.array_equal(decode(plan, answers), np.array(direct))


@pytest.mark.parametrize("N,K,t,cost,bits", [(3, 3, 2, Fraction(7, 4), 42), (3, 3, 3, Fraction(13, 9), 39),
                                             (3, 3, 1, Fraction(3), 9)])
def test_download_cost_examples(N, K, t, cost, bits):
    p, msgs, pl = _setup(N, K, t)
    plan = build_query_plan(p, 1, sample_permutations(p, 0))
    assert plan.total_requests() == bits
    assert download_cost(plan) == cost
    answers = [answer(q, pl.storage(q.db_index)) for q in plan.queries]
    assert np.array_equal(decode(plan, answers), msgs[0])


def test_desired_index_range():
    p = make_params(3, 3, 2)
    for bad in (0, 4):
        with pytest.raises(ParameterError):
            build_query_plan(p, bad, identity_permutations(p))


def test_answer_rejects_foreign_chunks():
    p, _, pl = _setup(3, 3, 2)
    plan = build_query_plan(p, 1, identity_permutations(p))
    with pytest.raises(ProtocolViolation):
        answer(plan.query(1), pl.storage(2))
    wrong = Query(3, plan.query(1).requests)  # DB3 does not hold block {1,2}
    with pytest.raises(ProtocolViolation, match="does not store"):
        answer(wrong, pl.storage(3))
    r = plan.query(1).requests[0]
    bad = Query(1, (type(r)(r.label, r.stage, ((r.terms[0][0], 8),)),))
    with pytest.raises(ProtocolViolation, match="outside chunk"):
        answer(bad, pl.storage(1))


def test_decode_alignment_errors():
    p, _, pl = _setup(3, 3, 2)
    plan = build_query_plan(p, 1, sample_permutations(p, 0))
    answers = [answer(q, pl.storage(q.db_index)) for q in plan.queries]
    with pytest.raises(AlignmentError):
        decode(plan, answers[:2])
    short = type(answers[0])(1, answers[0].bits[:-1])
    with pytest.raises(AlignmentError):
        decode(plan, [short] + answers[1:])
    with pytest.raises(AlignmentError):
        decode(plan, [answers[0], answers[0], answers[2]])


def test_decode_detects_broken_bookkeeping():
    p, _, pl = _setup(3, 3, 2)
    plan = build_query_plan(p, 1, sample_permutations(p, 0))
    answers = [answer(q, pl.storage(q.db_index)) for q in plan.queries]
    dropped = type(plan)(plan.params, plan.desired_index, plan.queries, plan.carriers[1:])
    with pytest.raises(DecodingError, match="never delivered"):
        decode(dropped, answers)
    doubled = type(plan)(plan.params, plan.desired_index, plan.queries, plan.carriers + plan.carriers[:1])
    with pytest.raises(DecodingError, match="twice"):
        decode(doubled, answers)
    staged = [c for c in plan.carriers if c.side is not None]
    c0 = staged[0]
    self_side = type(c0)(c0.db, c0.request, c0.label, c0.position, (c0.db, c0.side[1]))
    broken = type(plan)(plan.params, plan.desired_index, plan.queries,
                        tuple(self_side if c is c0 else c for c in plan.carriers))
    with pytest.raises(DecodingError, match="unusable"):
        decode(broken, answers)


def test_blocks_grouping():
    p = make_params(3, 3, 2)
    q = build_query_plan(p, 1, identity_permutations(p)).query(1)
    blocks = q.blocks
    assert list(blocks) == [(1, 2), (1, 3)]
    assert [len(s) for s in blocks[(1, 2)]] == [3, 3, 1]
