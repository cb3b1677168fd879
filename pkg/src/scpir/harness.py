"""End-to-end trials, memory sharing between corner points, and cost sweeps.

A trial places K messages, builds the query plan for one (or every) wanted
index, collects the N answers either in process or over sockets, decodes,
and reports the download cost next to the optimal value.
"""

from __future__ import annotations

import csv
import hashlib
import time
from contextlib import ExitStack, contextmanager
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import gcd, lcm
from pathlib import Path

import numpy as np

from . import bounds
from .core import ParameterError, Parameters, make_params
from .placement import Placement, place, split_messages, storage_usage
from .privacy import query_shape
from .protocol import (answer, build_query_plan, decode, identity_permutations,
                       sample_permutations)
from .wire import encode_answer

SCALE_CAP = 10**6


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage} failed: {exc}")
        self.stage = stage
        self.__cause__ = exc


class ScaleError(ValueError):
    pass


@dataclass
class TrialConfig:
    N: int
    K: int
    t: int | None = None
    mu: Fraction | None = None
    seed: int = 0
    desired: int | str = 1
    source: str = "random"
    source_path: str | None = None
    mode: str = "inproc"
    endpoints: list[str] | None = None

    def __post_init__(self):
        if (self.t is None) == (self.mu is None):
            raise ParameterError("give exactly one of t and mu")
        if self.mu is not None:
            self.mu = Fraction(self.mu)
        if self.source not in ("random", "zero", "file"):
            raise ParameterError(f"unknown message source {self.source!r}")
        if self.source == "file" and not self.source_path:
            raise ParameterError("source 'file' needs source_path")
        if self.mode not in ("inproc", "net"):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.desired != "all" and not isinstance(self.desired, int):
            raise ParameterError(f"desired must be an index or 'all', got {self.desired!r}")

    def desired_indices(self) -> list[int]:
        if self.desired == "all":
            return list(range(1, self.K + 1))
        if not 1 <= self.desired <= self.K:
            raise ParameterError(f"desired index must be in 1..{self.K}, got {self.desired}")
        return [self.desired]


@dataclass
class TrialReport:
    N: int
    K: int
    mu: Fraction
    t: int | None
    L: int
    desired: list[int]
    downloaded_per_db: list[int]
    downloaded_total: int
    desired_bits: int
    cost: Fraction
    expected_cost: Fraction
    decode_exact: bool
    privacy_shape: bool
    storage_per_db: int
    storage_limit: Fraction
    answers_digest: str
    decoded_digest: str
    mode: str
    scale: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return (self.decode_exact and self.privacy_shape and self.cost == self.expected_cost
                and self.storage_per_db <= self.storage_limit)

    def comparable(self) -> dict:
        """Everything except timing and transport, for differential checks."""
        d = asdict(self)
        d.pop("wall_time")
        d.pop("mode")
        return d

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("mu", "cost", "expected_cost", "storage_limit"):
            d[key] = str(d[key])
        d["passed"] = self.passed
        return d


def make_messages(cfg: TrialConfig, K: int, L: int) -> np.ndarray:
    if cfg.source == "zero":
        return np.zeros((K, L), dtype=np.uint8)
    if cfg.source == "random":
        return np.random.default_rng(cfg.seed).integers(0, 2, size=(K, L), dtype=np.uint8)
    data = Path(cfg.source_path).read_bytes()
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if len(bits) < K * L:
        raise ParameterError(f"{cfg.source_path} holds {len(bits)} bits, need K*L={K * L}")
    return bits[:K * L].reshape(K, L).copy()


def _perm_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1, np.uint64)[0])


def _shape_invariant(params: Parameters) -> bool:
    ident = identity_permutations(params)
    for n in range(1, params.N + 1):
        shapes = {query_shape(build_query_plan(params, i, ident).query(n), params) for i in range(1, params.K + 1)}
        if len(shapes) != 1:
            return False
    return True


@contextmanager
def _answerer(cfg: TrialConfig, placement: Placement, table):
    from .net import LocalCluster, remote_answerer

    if cfg.mode == "inproc":
        yield lambda q: answer(q, placement.storage(q.db_index))
        return
    with ExitStack() as stack:
        endpoints = cfg.endpoints
        if not endpoints:
            endpoints = stack.enter_context(LocalCluster(placement, table)).endpoints
        yield stack.enter_context(remote_answerer(endpoints, placement.params))


@dataclass
class _Instance:
    """One run of the pure scheme on one slice of every message."""

    downloaded: list[int]
    decoded_ok: bool
    answer_bytes: list[bytes]
    decoded: dict[int, np.ndarray]


def _run_instance(cfg: TrialConfig, params: Parameters, messages: np.ndarray, instance: int) -> _Instance:
    try:
        table = split_messages(list(messages), params)
        placement = place(table, params)
    except Exception as exc:
        raise StageError("placement", exc) from exc
    downloaded = [0] * params.N
    ok = True
    blobs: list[bytes] = []
    decoded = {}
    with _answerer(cfg, placement, table) as ask:
        for i in cfg.desired_indices():
            try:
                plan = build_query_plan(params, i, sample_permutations(params, _perm_seed(cfg.seed, instance, i)))
            except Exception as exc:
                raise StageError("query", exc) from exc
            try:
                answers = [ask(plan.query(n)) for n in range(1, params.N + 1)]
            except Exception as exc:
                raise StageError("answer", exc) from exc
            try:
                got = decode(plan, answers)
            except Exception as exc:
                raise StageError("decode", exc) from exc
            if i == cfg.desired_indices()[0]:
                downloaded = [len(a) for a in answers]
            elif downloaded != [len(a) for a in answers]:
                ok = False
            blobs.extend(encode_answer(a) for a in answers)
            decoded[i] = got
            ok = ok and bool(np.array_equal(got, messages[i - 1]))
    return _Instance(downloaded, ok, blobs, decoded)


def _digest(chunks) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.hexdigest()


def run_trial(cfg: TrialConfig) -> TrialReport:
    """Pure scheme at ``mu = t/N`` (or the corner point equal to ``cfg.mu``)."""
    if cfg.t is None:
        t = cfg.mu * cfg.N
        if t.denominator != 1:
            return run_memory_sharing(cfg)
        cfg = TrialConfig(**{**asdict(cfg), "t": int(t), "mu": None})
    start = time.perf_counter()
    params = make_params(cfg.N, cfg.K, cfg.t)
    messages = make_messages(cfg, params.K, params.L)
    inst = _run_instance(cfg, params, messages, 0)
    total = sum(inst.downloaded)
    storage = storage_usage(place(split_messages(list(messages), params), params))
    return TrialReport(
        N=params.N, K=params.K, mu=params.mu, t=params.t, L=params.L,
        desired=cfg.desired_indices(),
        downloaded_per_db=inst.downloaded,
        downloaded_total=total,
        desired_bits=params.L,
        cost=Fraction(total, params.L),
        expected_cost=bounds.dtilde(params.t, params.K),
        decode_exact=inst.decoded_ok,
        privacy_shape=_shape_invariant(params),
        storage_per_db=storage,
        storage_limit=params.mu * params.K * params.L,
        answers_digest=_digest(inst.answer_bytes),
        decoded_digest=_digest(np.packbits(inst.decoded[i]).tobytes() for i in sorted(inst.decoded)),
        mode=cfg.mode,
        scale={"L_total": params.L},
        wall_time=time.perf_counter() - start,
    )


@dataclass(frozen=True)
class SharingPlan:
    """``a`` copies of scheme ``t`` and ``b`` copies of scheme ``t+1``."""

    t: int
    alpha: Fraction
    L_low: int
    L_high: int
    a: int
    b: int

    @property
    def L_total(self) -> int:
        return self.a * self.L_low + self.b * self.L_high


def sharing_plan(N: int, K: int, mu) -> SharingPlan:
    """Smallest message length that splits into whole copies of both schemes.

    With ``mu = alpha t/N + (1-alpha)(t+1)/N`` the first part has
    ``alpha L_total`` bits and must be a multiple of ``L_t``; the second has
    ``(1-alpha) L_total`` bits and must be a multiple of ``L_{t+1}``.
    """
    mu = Fraction(mu)
    if not Fraction(1, N) <= mu <= 1:
        raise ParameterError(f"mu={mu} outside [1/{N}, 1]")
    t = int(mu * N)
    if mu * N == t:
        raise ParameterError(f"mu={mu} is the corner point t={t}; run the pure scheme")
    alpha = (t + 1) - mu * N
    p, q = alpha.numerator, alpha.denominator
    L_low = make_params(N, K, t).L
    L_high = make_params(N, K, t + 1).L
    m1 = q * L_low // gcd(p, q * L_low)
    m2 = q * L_high // gcd(q - p, q * L_high)
    L_total = lcm(m1, m2)
    if L_total > SCALE_CAP * max(L_low, L_high):
        raise ScaleError(f"memory sharing at mu={mu} needs messages of {L_total} bits "
                         f"(cap {SCALE_CAP} x {max(L_low, L_high)})")
    a = alpha * L_total / L_low
    b = (1 - alpha) * L_total / L_high
    return SharingPlan(t, alpha, L_low, L_high, int(a), int(b))


def run_memory_sharing(cfg: TrialConfig) -> TrialReport:
    if cfg.mu is None:
        raise ParameterError("memory sharing needs mu")
    if cfg.endpoints:
        raise ParameterError("memory sharing runs many placements; use mode 'net' without fixed endpoints")
    start = time.perf_counter()
    sp = sharing_plan(cfg.N, cfg.K, cfg.mu)
    low, high = make_params(cfg.N, cfg.K, sp.t), make_params(cfg.N, cfg.K, sp.t + 1)
    messages = make_messages(cfg, cfg.K, sp.L_total)
    per_db = [0] * cfg.N
    storage = 0
    ok = True
    blobs: list[bytes] = []
    pieces: dict[int, list[np.ndarray]] = {}
    off = 0
    for idx, params in enumerate([low] * sp.a + [high] * sp.b):
        part = messages[:, off:off + params.L]
        off += params.L
        inst = _run_instance(cfg, params, part, idx)
        per_db = [x + y for x, y in zip(per_db, inst.downloaded)]
        storage += storage_usage(place(split_messages(list(part), params), params))
        ok = ok and inst.decoded_ok
        blobs.extend(inst.answer_bytes)
        for i, bits in inst.decoded.items():
            pieces.setdefault(i, []).append(bits)
    decoded = {i: np.concatenate(v) for i, v in pieces.items()}
    ok = ok and all(np.array_equal(decoded[i], messages[i - 1]) for i in decoded)
    total = sum(per_db)
    cost_low, cost_high = bounds.dtilde(sp.t, cfg.K), bounds.dtilde(sp.t + 1, cfg.K)
    return TrialReport(
        N=cfg.N, K=cfg.K, mu=cfg.mu, t=None, L=sp.L_total,
        desired=cfg.desired_indices(),
        downloaded_per_db=per_db,
        downloaded_total=total,
        desired_bits=sp.L_total,
        cost=Fraction(total, sp.L_total),
        expected_cost=sp.alpha * cost_low + (1 - sp.alpha) * cost_high,
        decode_exact=ok,
        privacy_shape=_shape_invariant(low) and _shape_invariant(high),
        storage_per_db=storage,
        storage_limit=cfg.mu * cfg.K * sp.L_total,
        answers_digest=_digest(blobs),
        decoded_digest=_digest(np.packbits(decoded[i]).tobytes() for i in sorted(decoded)),
        mode=cfg.mode,
        scale={"L_total": sp.L_total, "t": sp.t, "alpha": str(sp.alpha), "copies_t": sp.a,
               "copies_t_plus_1": sp.b},
        wall_time=time.perf_counter() - start,
    )


# -- sweeps -----------------------------------------------------------------

SWEEP_HEADER = bounds.CURVE_HEADER + [
    "lower_num", "lower_den", "lp_num", "lp_den", "measured_num", "measured_den",
    "answers_digest", "decoded_digest", "violation",
]


@dataclass
class SweepRow:
    mu: Fraction
    achievable: Fraction
    lower: Fraction
    lp: Fraction
    measured: Fraction | None
    report: TrialReport | None

    @property
    def violation(self) -> bool:
        if self.achievable < self.lower or self.lp != self.lower or self.achievable != self.lower:
            return True
        if self.report is not None:
            return not self.report.passed or self.measured != self.achievable
        return False

    def csv_row(self) -> list:
        mu, d = self.mu, self.achievable
        m = self.measured
        return [mu.numerator, mu.denominator, d.numerator, d.denominator, f"{float(d):.12g}",
                self.lower.numerator, self.lower.denominator, self.lp.numerator, self.lp.denominator,
                "" if m is None else m.numerator, "" if m is None else m.denominator,
                self.report.answers_digest if self.report else "",
                self.report.decoded_digest if self.report else "",
                int(self.violation)]


def sweep(N: int, K: int, grid, *, seed: int = 0, mode: str = "inproc", desired="all",
          measure: bool = True) -> list[SweepRow]:
    """Achievable hull, measured cost, closed-form bound and LP bound per grid point.

    Points whose memory-sharing split would exceed the scale cap are reported
    without a measurement.
    """
    rows = []
    for mu in grid:
        mu = Fraction(mu)
        hull = bounds.hull_achievable(mu, N, K)
        lower = bounds.lower_bound(mu, N, K)
        lp, _ = bounds.lp_lower_bound(mu, N, K)
        report = None
        if measure:
            cfg = TrialConfig(N, K, mu=mu, seed=seed, desired=desired, mode=mode)
            try:
                report = run_trial(cfg)
            except ScaleError:
                report = None
        rows.append(SweepRow(mu, hull, lower, lp, report.cost if report else None, report))
    return rows


def write_sweep_csv(fh, rows: list[SweepRow]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow(r.csv_row())
