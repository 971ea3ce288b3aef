import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gridcollab import powerflow as pf
from gridcollab.feeder import Bus, FeederModel, Line, Load, ShuntCapacitor, load_feeder, to_per_unit
from gridcollab.scenario import read_scenario

from oracles import newton_polar, two_bus_voltage


def unit_feeder(parents, z, loads=(), caps=(), v0=1.0):
    """Feeder whose impedance base is 1 ohm and power base 3000 kVA, so
    ``z`` is given directly in per-unit."""
    n = len(parents)
    ids = [str(i) for i in range(n)]
    lines = tuple(Line(ids[parents[k]], ids[k], z[k - 1].real, z[k - 1].imag) for k in range(1, n))
    return FeederModel(
        tuple(Bus(i, 1.0) for i in ids),
        lines,
        tuple(Load(ids[b], p * 3000.0, q * 3000.0) for b, p, q in loads),
        tuple(ShuntCapacitor(ids[b], q * 3000.0) for b, q in caps),
        "0",
        s_base=3000.0,
        slack_voltage=v0,
    )


def two_bus(p=0.5, q=0.2):
    return to_per_unit(unit_feeder([-1, 0], [0.01 + 0.05j], loads=[(1, p, q)]))


def test_zero_injection_flat():
    f = to_per_unit(unit_feeder([-1, 0, 1, 1], [0.01 + 0.02j] * 3, v0=1.02))
    sol = pf.solve(f, pf.InjectionSet.zeros(f))
    assert sol.converged
    assert np.all(sol.v == 1.02)
    assert np.all(sol.branch_flow == 0)
    assert pf.losses(f, sol) == pf.LossReport(0.0, 0.0)


def test_two_bus_closed_form():
    f = two_bus()
    sol = pf.solve(f, pf.InjectionSet.loads_only(f))
    assert sol.converged and sol.max_mismatch <= 1e-8
    assert sol.vm[1] == pytest.approx(two_bus_voltage(1.0, 0.01, 0.05, 0.5, 0.2), abs=1e-8)
    assert sol.vm[0] == 1.0


def test_reactive_injection_raises_voltage():
    f = two_bus()
    base = pf.solve(f, pf.InjectionSet.loads_only(f))
    inj = pf.InjectionSet.loads_only(f)
    boosted = pf.solve(f, pf.InjectionSet(inj.p, inj.q + np.array([0.0, 0.2])))
    assert boosted.vm[1] > base.vm[1]
    # independent re-solve: net load 0.5 + j0.0
    assert boosted.vm[1] == pytest.approx(two_bus_voltage(1.0, 0.01, 0.05, 0.5, 0.0), abs=1e-8)


def test_two_bus_losses_hand_formula():
    f = two_bus()
    sol = pf.solve(f, pf.InjectionSet.loads_only(f))
    v2 = two_bus_voltage(1.0, 0.01, 0.05, 0.5, 0.2)
    i2 = abs(complex(0.5, 0.2)) ** 2 / v2**2
    rep = pf.losses(f, sol)
    assert rep.total_active_loss == pytest.approx(i2 * 0.01, abs=1e-8)
    assert rep.total_reactive_loss == pytest.approx(i2 * 0.05, abs=1e-8)
    slack = pf.slack_power(f, sol)
    assert slack.real - 0.5 == pytest.approx(rep.total_active_loss, abs=1e-8)


def test_energy_balance_bundled(bundled_path):
    feeder = load_feeder(read_scenario(bundled_path).feeder_path)
    f = to_per_unit(feeder)
    inj = pf.InjectionSet.loads_only(f, 0.8)
    p = inj.p.copy()
    p[f.index("250")] += 1200 / feeder.s_base
    sol = pf.solve(f, pf.InjectionSet(p, inj.q))
    assert sol.converged
    rep = pf.losses(f, sol)
    assert rep.total_active_loss >= 0
    balance = pf.slack_power(f, sol).real + p[1:].sum() - rep.total_active_loss
    assert abs(balance) < 1e-8


def _random_instance(rng, n):
    parents = [-1] + [int(rng.integers(0, k)) for k in range(1, n)]
    z = rng.uniform(0.002, 0.03, n - 1) + 1j * rng.uniform(0.005, 0.06, n - 1)
    p = np.zeros(n)
    q = np.zeros(n)
    p[1:] = rng.uniform(-0.6, 0.3, n - 1)
    q[1:] = rng.uniform(-0.3, 0.3, n - 1)
    caps = np.zeros(n)
    caps[1:] = rng.uniform(0, 0.2, n - 1) * (rng.random(n - 1) < 0.5)
    return parents, z, p, q, caps, rng.uniform(0.97, 1.05)


def test_matches_newton_oracle_small_instances():
    rng = np.random.default_rng(7)
    for trial in range(20):
        parents, z, p, q, caps, v0 = _random_instance(rng, 2 + trial % 2)
        f = to_per_unit(unit_feeder(parents, z, caps=[(k, c) for k, c in enumerate(caps) if c], v0=v0))
        sol = pf.solve(f, pf.InjectionSet(p, q))
        ref = newton_polar(parents, z, p, q, caps, v0)
        assert sol.converged
        assert np.max(np.abs(sol.v - ref)) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 10), st.integers(0, 2**32 - 1), st.floats(0.01, 0.2))
def test_reactive_monotonicity(n, seed, dq):
    rng = np.random.default_rng(seed)
    parents, z, p, q, caps, v0 = _random_instance(rng, n)
    f = to_per_unit(unit_feeder(parents, z, caps=[(k, c) for k, c in enumerate(caps) if c], v0=v0))
    base = pf.solve(f, pf.InjectionSet(p, q))
    assume(base.converged and np.all((base.vm > 0.9) & (base.vm < 1.1)))
    k = int(rng.integers(1, n))
    up = q.copy()
    up[k] += dq
    down = q.copy()
    down[k] -= dq
    assert pf.solve(f, pf.InjectionSet(p, up)).vm[k] >= base.vm[k]
    assert pf.solve(f, pf.InjectionSet(p, down)).vm[k] <= base.vm[k]


def test_deterministic():
    rng = np.random.default_rng(3)
    parents, z, p, q, caps, v0 = _random_instance(rng, 8)
    f = to_per_unit(unit_feeder(parents, z, v0=v0))
    a = pf.solve(f, pf.InjectionSet(p, q))
    b = pf.solve(f, pf.InjectionSet(p, q))
    assert a.v.tobytes() == b.v.tobytes()
    assert a.iterations == b.iterations


def test_nonconvergence_reported_not_raised():
    f = two_bus()
    sol = pf.solve(f, pf.InjectionSet.loads_only(f), max_iterations=1)
    assert not sol.converged
    assert sol.iterations == 1
    assert sol.max_mismatch > 1e-8
    with pytest.raises(pf.PowerFlowError):
        pf.losses(f, sol)


def test_voltage_collapse_flagged():
    f = two_bus(p=8.0, q=6.0)
    sol = pf.solve(f, pf.InjectionSet.loads_only(f))
    assert not sol.converged
    assert sol.collapsed
    assert sol.vm.min() < pf.COLLAPSE_VOLTAGE


def test_injection_from_mapping():
    f = two_bus()
    inj = pf.InjectionSet.from_mapping(f, {"1": 0.3 - 0.1j})
    assert inj.p[1] == 0.3 and inj.q[1] == -0.1
    with pytest.raises(KeyError):
        pf.InjectionSet.from_mapping(f, {"x": 1})


def test_rejects_bad_tolerance():
    f = two_bus()
    with pytest.raises(ValueError):
        pf.solve(f, pf.InjectionSet.zeros(f), tolerance=0)
