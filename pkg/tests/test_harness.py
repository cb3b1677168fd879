import io
from fractions import Fraction as F

import pytest

from scpir import harness
from scpir.bounds import dtilde, hull_achievable
from scpir.core import ParameterError
from scpir.harness import (ScaleError, StageError, TrialConfig, run_memory_sharing, run_trial, sharing_plan, sweep,
                           write_sweep_csv)


def test_trial_examples():
    r = run_trial(TrialConfig(3, 3, t=2, seed=1, desired=1))
    assert (r.cost, r.downloaded_total, r.L, r.decode_exact, r.privacy_shape) == (F(7, 4), 42, 24, True, True)
    assert r.downloaded_per_db == [14, 14, 14] and r.passed
    assert run_trial(TrialConfig(3, 3, t=1)).cost == 3
    r = run_trial(TrialConfig(4, 2, t=2, desired="all"))
    assert r.cost == F(3, 2) and r.downloaded_per_db == [9, 9, 9, 9]
    assert r.storage_per_db == r.storage_limit == 24


@pytest.mark.parametrize("N,K,t", [(2, 2, 1), (3, 3, 3), (4, 3, 2), (5, 2, 4)])
def test_cost_is_dtilde(N, K, t):
    r = run_trial(TrialConfig(N, K, t=t, seed=N + K + t, desired="all"))
    assert r.cost == dtilde(t, K) == r.expected_cost and r.decode_exact


def test_reports_are_deterministic():
    a = run_trial(TrialConfig(3, 3, t=2, seed=5, desired="all"))
    b = run_trial(TrialConfig(3, 3, t=2, seed=5, desired="all"))
    c = run_trial(TrialConfig(3, 3, t=2, seed=6, desired="all"))
    assert a.comparable() == b.comparable()
    assert a.answers_digest != c.answers_digest


def test_zero_and_file_sources(tmp_path):
    r = run_trial(TrialConfig(3, 2, t=2, source="zero"))
    assert r.decode_exact
    path = tmp_path / "m.bin"
    path.write_bytes(bytes(range(256)))
    r = run_trial(TrialConfig(3, 2, t=2, source="file", source_path=str(path), desired="all"))
    assert r.decode_exact and r.passed
    path.write_bytes(b"\x01")
    with pytest.raises(ParameterError, match="need K\\*L"):
        run_trial(TrialConfig(3, 2, t=2, source="file", source_path=str(path)))


def test_config_validation():
    with pytest.raises(ParameterError):
        TrialConfig(3, 3)
    with pytest.raises(ParameterError):
        TrialConfig(3, 3, t=2, mu=F(2, 3))
    with pytest.raises(ParameterError):
        TrialConfig(3, 3, t=2, source="tape")
    with pytest.raises(ParameterError):
        TrialConfig(3, 3, t=2, mode="carrier-pigeon")
    with pytest.raises(ParameterError):
        TrialConfig(3, 3, t=2, source="file")
    with pytest.raises(ParameterError):
        run_trial(TrialConfig(3, 3, t=2, desired=4))
    with pytest.raises(ParameterError):
        run_trial(TrialConfig(3, 3, t=4))


def test_stage_errors_name_the_stage(monkeypatch):
    def broken(plan, answers):
        raise RuntimeError("boom")

    monkeypatch.setattr(harness, "decode", broken)
    with pytest.raises(StageError) as info:
        run_trial(TrialConfig(3, 3, t=2))
    assert info.value.stage == "decode" and "boom" in str(info.value)


def test_sharing_plan_half():
    sp = sharing_plan(3, 3, F(1, 2))
    assert (sp.t, sp.alpha, sp.a, sp.b, sp.L_total) == (1, F(1, 2), 8, 1, 48)
    assert sp.a * sp.L_low == sp.alpha * sp.L_total
    assert sp.b * sp.L_high == (1 - sp.alpha) * sp.L_total


@pytest.mark.parametrize("mu", [F(1, 2), F(5, 9), F(7, 9), F(4, 5)])
def test_sharing_plan_is_minimal(mu):
    sp = sharing_plan(3, 3, mu)
    for smaller in range(1, sp.L_total):
        a, b = sp.alpha * smaller / sp.L_low, (1 - sp.alpha) * smaller / sp.L_high
        assert not (a.denominator == 1 and b.denominator == 1)


def test_memory_sharing_half():
    r = run_memory_sharing(TrialConfig(3, 3, mu=F(1, 2), desired="all"))
    assert r.cost == F(19, 8) == r.expected_cost
    assert r.decode_exact and r.privacy_shape
    assert r.storage_per_db <= r.storage_limit == F(1, 2) * 3 * r.L
    assert r.scale["L_total"] == 48 and r.scale["copies_t"] == 8 and r.scale["copies_t_plus_1"] == 1


@pytest.mark.parametrize("N,K,mu", [(3, 3, F(5, 9)), (4, 2, F(3, 8)), (4, 3, F(5, 8)), (2, 3, F(3, 4))])
def test_memory_sharing_matches_hull(N, K, mu):
    r = run_trial(TrialConfig(N, K, mu=mu, desired="all", seed=2))
    assert r.cost == hull_achievable(mu, N, K) and r.passed


def test_memory_sharing_near_corner_and_at_corner():
    mu = F(1, 3) + F(1, 300)
    r = run_trial(TrialConfig(3, 2, mu=mu))
    assert r.cost == hull_achievable(mu, 3, 2)
    assert r.scale["copies_t"] > 50 * r.scale["copies_t_plus_1"]
    pure = run_trial(TrialConfig(3, 3, mu=F(1, 3)))
    assert pure.t == 1 and pure.cost == 3
    with pytest.raises(ParameterError, match="corner"):
        sharing_plan(3, 3, F(2, 3))


def test_memory_sharing_scale_cap():
    with pytest.raises(ScaleError):
        sharing_plan(3, 3, F(1, 3) + F(1, 10**12))
    with pytest.raises(ParameterError):
        sharing_plan(3, 3, F(1, 4))


def test_sweep_examples():
    rows = sweep(3, 3, [F(1, 3), F(1, 2), F(2, 3), F(1)])
    for r in rows:
        assert r.measured == r.achievable == r.lp == r.lower
        assert not r.violation
    rows = sweep(2, 2, [F(1, 2), F(1)])
    assert [(r.mu, r.measured) for r in rows] == [(F(1, 2), 2), (F(1), F(3, 2))]


def test_sweep_csv():
    buf = io.StringIO()
    write_sweep_csv(buf, sweep(3, 3, [F(1, 2)], measure=False))
    head, row = buf.getvalue().splitlines()
    assert head.startswith("mu_num,mu_den,D_num,D_den,D_float,")
    assert row.startswith("1,2,19,8,2.375,19,8,19,8,,,")
    assert row.endswith(",0")


def test_sweep_flags_violations():
    row = sweep(3, 3, [F(1, 2)], measure=False)[0]
    bad = harness.SweepRow(row.mu, row.achievable, row.lower + 1, row.lp, None, None)
    assert bad.violation
