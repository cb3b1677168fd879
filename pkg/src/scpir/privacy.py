"""Privacy audit: is the query seen by one database independent of the wanted index?

Two modes.  ``exact`` enumerates every realization of the random bit
permutations that the audited database can observe and compares the
resulting query distributions as exact rationals.  ``sampled`` draws many
plans per desired index and runs a chi-square homogeneity test on a coarse
fingerprint of the query.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations, product
from math import comb, perm, prod

import numpy as np
from scipy.stats import chi2_contingency

from .core import Parameters
from .protocol import Mutation, Query, build_query_plan, identity_permutations, sample_permutations

DEFAULT_LIMIT = 10**7

CanonicalQuery = tuple
QueryDistribution = dict


class ScaleError(RuntimeError):
    """The exact enumeration would exceed its guard; use the sampled audit."""


def _term_key(params: Parameters, label, k: int, pos: int) -> tuple[int, int, int]:
    return (k, params.label_rank[label], pos)


def canonicalize(q: Query, params: Parameters) -> CanonicalQuery:
    """Order-insensitive form: requests sorted inside each (block, stage) group."""
    groups = defaultdict(list)
    for r in q.requests:
        rank = params.label_rank[r.label]
        groups[(rank, r.stage)].append(tuple(sorted(_term_key(params, r.label, k, p) for k, p in r.terms)))
    return tuple((key, tuple(sorted(groups[key]))) for key in sorted(groups))


def ordered_key(q: Query, params: Parameters) -> tuple:
    return tuple((r.stage, tuple(_term_key(params, r.label, k, p) for k, p in r.terms)) for r in q.requests)


def query_shape(q: Query, params: Parameters) -> tuple:
    return tuple(sorted(((params.label_rank[s], st, ty), c) for (s, st, ty), c in q.shape().items()))


def realization_probability(params: Parameters) -> Fraction:
    """Probability of one ordered realization of a database's query.

    Each of the ``K * C(N-1, t-1)`` visible chunks contributes
    ``1/(c (c-1) ... (c-u+1))`` with ``c = t**K`` and ``u = t**(K-1)``.
    """
    c, u = params.chunk_size, params.chunk_size // params.t
    blocks = comb(params.N - 1, params.t - 1)
    return Fraction(1, perm(c, u)) ** (params.K * blocks)


def _enumeration_size(slots: dict, c: int) -> int:
    return prod(perm(c, len(u)) for u in slots.values())


def exact_query_distribution(params: Parameters, db_index: int, desired_index: int, *,
                             ordered: bool = False, mutation: Mutation | None = None,
                             limit: int = DEFAULT_LIMIT) -> QueryDistribution:
    """Exact law of ``DB_n``'s query when ``W_{desired_index}`` is retrieved.

    The query only depends on each permutation through its values at the
    slots the database sees, so the enumeration runs over injections of
    those slots, each weighted by ``(c-u)!/c!``.
    """
    template = build_query_plan(params, desired_index, identity_permutations(params), mutation).query(db_index)
    c = params.chunk_size
    fixed = {desired_index} if mutation and mutation.unpermuted_desired else set()

    by_block: dict = defaultdict(list)
    for r in template.requests:
        by_block[r.label].append(r)
    slots_all = {}
    for r in template.requests:
        for k, p in r.terms:
            if k not in fixed:
                slots_all.setdefault((k, r.label), set()).add(p)
    size = _enumeration_size(slots_all, c)
    if size > limit:
        raise ScaleError(f"exact audit needs {size} realizations (> {limit}); use verify_privacy_sampled")

    block_dists = []
    for s in params.blocks_of(db_index):
        reqs = by_block.get(s, [])
        rank = params.label_rank[s]
        chunks = sorted(key for key in slots_all if key[1] == s)
        slot_lists = [sorted(slots_all[key]) for key in chunks]
        flat_index = {}
        for key, u in zip(chunks, slot_lists):
            for p in u:
                flat_index[(key[0], p)] = len(flat_index)
        # per request: (stage, [(message, index into the flattened images or -1, raw offset)])
        compiled = [(r.stage, [(k, flat_index.get((k, p), -1), p) for k, p in r.terms]) for r in reqs]
        stages = sorted({st for st, _ in compiled})
        weight = Fraction(1, prod(perm(c, len(u)) for u in slot_lists))
        counts: dict = defaultdict(int)
        for images in product(*(permutations(range(c), len(u)) for u in slot_lists)):
            flat = [v for img in images for v in img]
            realized = [(st, tuple((k, rank, flat[ix] if ix >= 0 else p) for k, ix, p in terms))
                        for st, terms in compiled]
            if ordered:
                key = tuple(realized)
            else:
                key = tuple(((rank, st), tuple(sorted(tuple(sorted(tm)) for g, tm in realized if g == st)))
                            for st in stages)
            counts[key] += 1
        block_dists.append({key: n * weight for key, n in counts.items()})

    out: dict = {(): Fraction(1)}
    for dist in block_dists:
        nxt = {}
        for k1, p1 in out.items():
            for k2, p2 in dist.items():
                nxt[k1 + k2] = p1 * p2
        out = nxt
    return out


@dataclass
class DbVerdict:
    db: int
    passed: bool
    detail: str
    witness: object = None
    probabilities: dict = field(default_factory=dict)
    statistic: float | None = None
    dof: int | None = None
    pvalue: float | None = None
    vacuous: bool = False
    witness_kind: str = "probability"


@dataclass
class PrivacyReport:
    params: Parameters
    mode: str
    verdicts: list[DbVerdict]
    mutation: Mutation | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_text(self) -> str:
        p = self.params
        lines = [
            "privacy-audit",
            f"parameters: N={p.N} K={p.K} t={p.t} mu={p.mu} L={p.L}",
            f"mode: {self.mode}",
        ]
        if self.mutation is not None:
            lines.append(f"mutation: {self.mutation}")
        for v in self.verdicts:
            line = f"DB{v.db}: {'PASS' if v.passed else 'FAIL'} ({v.detail})"
            if v.pvalue is not None:
                line += f" chi2={v.statistic:.4g} dof={v.dof} p={v.pvalue:.4g}"
            if v.vacuous:
                line += " [vacuous]"
            lines.append(line)
            if v.witness is not None:
                lines.append(f"  witness: {v.witness!r}")
                for i, pr in v.probabilities.items():
                    lines.append(f"  {v.witness_kind}[witness | k*={i}] = {pr}")
        lines.append(f"verdict: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _shape_check(params: Parameters, n: int, mutation: Mutation | None) -> DbVerdict | None:
    shapes = {}
    for i in range(1, params.K + 1):
        q = build_query_plan(params, i, identity_permutations(params), mutation).query(n)
        shapes[i] = query_shape(q, params)
    ref = dict(shapes[1])
    for i in range(2, params.K + 1):
        other = dict(shapes[i])
        if other != ref:
            w = next(key for key in sorted(set(ref) | set(other)) if ref.get(key, 0) != other.get(key, 0))
            return DbVerdict(n, False, f"query shape differs between k*=1 and k*={i}",
                             witness=w, probabilities={j: dict(shapes[j]).get(w, 0) for j in shapes},
                             witness_kind="request count")
    return None


def _dbs(params: Parameters, db_index: int | None) -> list[int]:
    return list(range(1, params.N + 1)) if db_index is None else [db_index]


def verify_privacy_exact(params: Parameters, db_index: int | None = None, *,
                         mutation: Mutation | None = None, limit: int = DEFAULT_LIMIT) -> PrivacyReport:
    verdicts = []
    for n in _dbs(params, db_index):
        bad = _shape_check(params, n, mutation)
        if bad is not None:
            verdicts.append(bad)
            continue
        dists = {i: exact_query_distribution(params, n, i, mutation=mutation, limit=limit)
                 for i in range(1, params.K + 1)}
        ref = dists[1]
        verdict = DbVerdict(n, True, f"{len(ref)} realizations, identical for all {params.K} indices")
        for i in range(2, params.K + 1):
            if dists[i] != ref:
                keys = sorted(set(ref) | set(dists[i]), key=repr)
                w = next(k for k in keys if ref.get(k, 0) != dists[i].get(k, 0))
                verdict = DbVerdict(n, False, f"distribution differs between k*=1 and k*={i}", witness=w,
                                    probabilities={j: dists[j].get(w, Fraction(0)) for j in dists})
                break
        verdicts.append(verdict)
    return PrivacyReport(params, "exact", verdicts, mutation)


def fingerprint(q: Query, params: Parameters, buckets: int = 4) -> tuple:
    """Shape plus the coarse offsets of the stage-1 bits of the first block."""
    c = params.chunk_size
    b = min(c, buckets)
    first = q.requests[0].label
    pos = tuple(p * b // c for r in q.requests if r.label == first and r.stage == 1 for _, p in r.terms)
    return (query_shape(q, params), pos)


def verify_privacy_sampled(params: Parameters, db_index: int | None = None, trials: int = 10_000,
                           seed: int = 0, *, mutation: Mutation | None = None,
                           alpha: float = 0.01) -> PrivacyReport:
    if trials < 1000:
        raise ValueError(f"sampled audit needs at least 1000 trials, got {trials}")
    dbs = _dbs(params, db_index)
    verdicts: dict[int, DbVerdict] = {}
    for n in dbs:
        bad = _shape_check(params, n, mutation)
        if bad is not None:
            verdicts[n] = bad
    live = [n for n in dbs if n not in verdicts]
    counts = {n: defaultdict(lambda: np.zeros(params.K, dtype=np.int64)) for n in live}
    if live:
        seeds = np.random.default_rng(seed).integers(0, 2**63, size=(params.K, trials))
        for i in range(1, params.K + 1):
            for s in seeds[i - 1]:
                plan = build_query_plan(params, i, sample_permutations(params, int(s)), mutation)
                for n in live:
                    counts[n][fingerprint(plan.query(n), params)][i - 1] += 1
    for n in live:
        table = np.array(list(counts[n].values())).T  # desired index x bin
        if table.shape[1] < 2:
            verdicts[n] = DbVerdict(n, True, "single fingerprint bin; test is vacuous", vacuous=True)
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = chi2_contingency(table, correction=False)
        ok = bool(res.pvalue >= alpha)
        verdicts[n] = DbVerdict(n, ok, f"{trials} trials per index, {table.shape[1]} bins, alpha={alpha}",
                                statistic=float(res.statistic), dof=int(res.dof), pvalue=float(res.pvalue))
    return PrivacyReport(params, "sampled", [verdicts[n] for n in dbs], mutation)
