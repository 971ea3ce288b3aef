import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridcollab import powerflow as pf
from gridcollab.coordination import ControlMethod
from gridcollab.feeder import to_per_unit
from gridcollab.scenario import load_scenario
from gridcollab.simulation import (
    Profiles,
    ProfileError,
    ScenarioResults,
    SimConfig,
    StepRecord,
    curtailment_report,
    format_time,
    load_profiles,
    objective_terms,
    parse_time,
    run_scenario,
)

from helpers import profiles_text, write_scenario


def run(path, method, **overrides):
    scn = load_scenario(path, [method])
    cfg = scn.config(method)
    if overrides:
        cfg = SimConfig(**{**cfg.__dict__, **overrides})
    return run_scenario(scn.feeder, scn.agents, scn.topology, scn.profiles, cfg)


def test_parse_time():
    assert parse_time("06:30") == 23400
    assert parse_time("17:30:05") == 63005
    assert parse_time("60") == 60
    for bad in ("6:61", "ab", "1.5", "1:2:3:4"):
        with pytest.raises(ProfileError):
            parse_time(bad)
    assert format_time(23400) == "06:30:00"


@given(st.integers(0, 86399))
def test_time_round_trip(t):
    assert parse_time(format_time(t)) == t


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty"),
        ("t,ghi,load_mult\n", "header"),
        ("time,ghi,load_mult\n10:00,1,1\n09:00,1,1\n", "order"),
        ("time,ghi,load_mult\n10:00,-1,1\n", "non-negative"),
        ("time,ghi,load_mult\n10:00,1\n", "3 fields"),
        ("time,ghi,load_mult\n10:00,x,1\n", "record 2"),
    ],
)
def test_profile_errors(text, match):
    with pytest.raises(ProfileError, match=match):
        load_profiles(text)


def test_profile_coverage():
    text = profiles_text("06:00", "12:00")
    with pytest.raises(ProfileError, match="window needs"):
        load_profiles(text, window=(parse_time("06:30"), parse_time("17:30")))
    assert load_profiles(text).covers(parse_time("06:30"), parse_time("11:00"))


def test_zero_order_hold():
    p = load_profiles("# c\ntime,ghi,load_mult\n10:00,100,0.5\n10:01,200,0.6\n")
    assert p.at(parse_time("10:00")) == (100.0, 0.5)
    assert p.at(parse_time("10:00:59")) == (100.0, 0.5)
    assert p.at(parse_time("10:01")) == (200.0, 0.6)
    assert p.at(parse_time("11:00")) == (200.0, 0.6)
    with pytest.raises(ProfileError):
        p.at(parse_time("09:59"))


def test_objective_examples():
    f, total = objective_terms([1.0])
    assert total == 0.0
    f, total = objective_terms([0.98])
    assert total == pytest.approx(2e-4, abs=1e-15)
    f, total = objective_terms([1.03, 1.05])
    assert total == pytest.approx(1.7e-3, abs=1e-15)
    with pytest.raises(ValueError):
        objective_terms([0.0])


@given(st.lists(st.floats(0.5, 1.5), min_size=1, max_size=10))
def test_objective_nonnegative(v):
    f, total = objective_terms(v)
    assert np.all(f >= 0)
    assert total == pytest.approx(f.sum())


def test_sim_config_defaults():
    cfg = SimConfig(ControlMethod.NO_CTL)
    assert len(cfg.times()) == 3960
    with pytest.raises(ValueError):
        SimConfig(ControlMethod.NO_CTL, sim_step=10, control_period=25)
    with pytest.raises(ValueError):
        SimConfig(ControlMethod.NO_CTL, window_start=100, window_end=100)


def test_noctl_without_sun_is_static(tmp_path):
    path = write_scenario(tmp_path, profiles=profiles_text(ghi=0.0))
    res = run(path, ControlMethod.NO_CTL)
    assert res.complete and len(res.steps) == 60
    v = res.series("v")
    assert np.all(v == v[0])
    assert np.all(res.series("p_out") == 0) and np.all(res.series("alpha") == 0)


def test_noctl_never_absorbs(tmp_path):
    res = run(write_scenario(tmp_path), ControlMethod.NO_CTL)
    assert np.all(res.series("q_out") == 0)
    p = res.series("p_out")
    assert np.all(p == np.minimum(res.series("p_available"), [400, 100]))


@pytest.mark.parametrize("method", [m for m in ControlMethod if m is not ControlMethod.NO_CTL])
def test_commands_held_between_control_instants(tmp_path, method):
    res = run(write_scenario(tmp_path), method)
    a = res.series("alpha")
    assert np.all(a[0] == 0)  # no telemetry before the first solve
    for k in range(1, len(a)):
        if k % 2:  # 20 s control period over 10 s steps
            assert np.array_equal(a[k], a[k - 1])
    assert np.any(a != 0)


def test_step_records_are_self_consistent(tmp_path):
    path = write_scenario(tmp_path)
    scn = load_scenario(path, [ControlMethod.ADAPTIVE_DYNAMIC_WEIGHTS])
    res = run(path, ControlMethod.ADAPTIVE_DYNAMIC_WEIGHTS)
    norm = to_per_unit(scn.feeder)
    sb = scn.feeder.s_base
    idx = [norm.index(a.bus) for a in scn.agents]
    for r in res.steps[::7]:
        _, mult = scn.profiles.at(r.time)
        inj = pf.InjectionSet.loads_only(norm, mult)
        p, q = inj.p.copy(), inj.q.copy()
        p[idx] += np.array(r.p_out) / sb
        q[idx] += np.array(r.q_out) / sb
        sol = pf.solve(norm, pf.InjectionSet(p, q))
        assert np.array_equal(sol.vm[idx], np.array(r.v))
        assert pf.losses(norm, sol).total_active_loss * sb == r.active_loss
        for j, a in enumerate(scn.agents):
            assert r.p_out[j] ** 2 + r.q_out[j] ** 2 <= a.rating_s**2 * (1 + 1e-12)
            assert r.alpha[j] == r.q_out[j] / a.rating_s


def test_deterministic(tmp_path):
    path = write_scenario(tmp_path)
    a = run(path, ControlMethod.ADAPTIVE_FIXED_WEIGHTS)
    b = run(path, ControlMethod.ADAPTIVE_FIXED_WEIGHTS)
    assert a.steps == b.steps


def test_abort_on_nonconvergence(tmp_path):
    res = run(write_scenario(tmp_path), ControlMethod.FIXED_CURVE, max_iterations=1)
    assert not res.complete
    assert res.abort_step == 0 and res.steps == []
    assert "did not converge" in res.abort_reason


def test_profile_gap_rejected(tmp_path):
    path = write_scenario(tmp_path)
    scn = load_scenario(path, [ControlMethod.NO_CTL])
    cfg = SimConfig(ControlMethod.NO_CTL, parse_time("10:00"), parse_time("12:00"))
    with pytest.raises(ProfileError):
        run_scenario(scn.feeder, scn.agents, None, scn.profiles, cfg)


def _fake(p_rows, method=ControlMethod.NO_CTL):
    steps = [StepRecord(t, (1.0,) * len(p), tuple(p), (0.0,) * len(p), tuple(p), (0.0,) * len(p),
                        (0.0,) * len(p), 0.0, 0.0) for t, p in enumerate(p_rows)]
    n = len(p_rows[0])
    return ScenarioResults(method, tuple(f"A{i}" for i in range(n)), ("x",) * n, 10, steps)


def test_curtailment_report_examples():
    base = _fake([[10.0, 0.0], [10.0, 0.0]])
    half = _fake([[5.0, 0.0], [5.0, 0.0]], ControlMethod.ADAPTIVE_NO_COMM)
    assert curtailment_report(half, base) == {"A0": 50.0, "A1": None}
    assert curtailment_report(base, base) == {"A0": 0.0, "A1": None}
    with pytest.raises(ValueError):
        curtailment_report(_fake([[1.0, 1.0]]), base)


def test_summary_fields(tmp_path):
    res = run(write_scenario(tmp_path), ControlMethod.ADAPTIVE_NO_COMM)
    s = res.summary
    per_step = res.series("f_v").sum(axis=1)
    assert s["fv_sum_then_square"] == pytest.approx(per_step.sum() ** 2, rel=1e-15)
    assert s["fv_square_per_step_sum"] == pytest.approx(np.sum(per_step**2), rel=1e-15)
    assert s["agents"]["A"]["energy_kwh"] == pytest.approx(res.series("p_out")[:, 0].sum() * 10 / 3600)
    assert s["steps"] == 60


def test_bundled_runs_complete(bundled_runs):
    runs, _ = bundled_runs
    for m, res in runs.items():
        assert res.complete, res.abort_reason
        assert len(res.steps) == 3960
        assert res.agent_ids == ("PV_1", "PV_2")
        v = res.series("v")
        assert np.all(np.isfinite(v))
        q, p = res.series("q_out"), res.series("p_out")
        s = np.array([1500.0, 75.0])
        assert np.all(p**2 + q**2 <= s**2 * (1 + 1e-12))
        assert np.all(np.abs(res.series("alpha")) <= 1.0)
    assert np.all(runs[ControlMethod.NO_CTL].series("alpha") == 0)
