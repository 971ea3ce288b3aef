"""Quasi-static time-series loop: profiles in, per-step agent records and
summary metrics out."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import powerflow
from .coordination import (
    CommTopology,
    ControlMethod,
    dynamic_weights,
    fixed_weights,
    isolated_topology,
    normalize,
    update_estimates,
)
from .feeder import FeederModel, self_susceptance, to_per_unit
from .inverter import (
    InverterAgent,
    SingularGradient,
    VoltVarParams,
    alpha_bounds,
    available_reactive,
    dispatch,
    gradient,
    volt_var,
)

log = logging.getLogger(__name__)


class ProfileError(ValueError):
    pass


def parse_time(raw: str) -> int:
    """Seconds of day from an integer or ``HH:MM[:SS]``."""
    raw = raw.strip()
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) not in (2, 3) or not all(p.isdigit() for p in parts):
            raise ProfileError(f"bad time {raw!r}")
        h, m, *s = (int(p) for p in parts)
        if m >= 60 or (s and s[0] >= 60):
            raise ProfileError(f"bad time {raw!r}")
        return h * 3600 + m * 60 + (s[0] if s else 0)
    try:
        value = float(raw)
    except ValueError:
        raise ProfileError(f"bad time {raw!r}") from None
    if value != int(value):
        raise ProfileError(f"time must be whole seconds: {raw!r}")
    return int(value)


def format_time(seconds: int) -> str:
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}:{seconds % 60:02d}"


@dataclass(frozen=True, eq=False)
class Profiles:
    timestamps: np.ndarray  # int seconds of day
    ghi: np.ndarray  # W/m^2
    load_multiplier: np.ndarray

    def __post_init__(self):
        if len(self.timestamps) == 0:
            raise ProfileError("empty profile")
        if not (len(self.timestamps) == len(self.ghi) == len(self.load_multiplier)):
            raise ProfileError("profile columns differ in length")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ProfileError("timestamps must be strictly increasing")
        if np.any(self.ghi < 0) or np.any(self.load_multiplier < 0):
            raise ProfileError("negative irradiance or load multiplier")

    def covers(self, start: int, end: int) -> bool:
        return bool(self.timestamps[0] <= start and self.timestamps[-1] >= end)

    def at(self, t: float) -> tuple[float, float]:
        """Zero-order hold lookup."""
        i = int(np.searchsorted(self.timestamps, t, side="right")) - 1
        if i < 0:
            raise ProfileError(f"time {t} precedes the profile")
        return float(self.ghi[i]), float(self.load_multiplier[i])


def load_profiles(text: str, window: tuple[int, int] | None = None) -> Profiles:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ProfileError("empty profile file")
    header = [h.strip().lower() for h in rows[0]]
    if header != ["time", "ghi", "load_mult"]:
        raise ProfileError(f"expected header time,ghi,load_mult, got {','.join(header)}")
    ts, ghi, lm = [], [], []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ProfileError(f"record {n}: expected 3 fields, got {len(row)}")
        try:
            ts.append(parse_time(row[0]))
            ghi.append(float(row[1]))
            lm.append(float(row[2]))
        except ValueError as exc:
            raise ProfileError(f"record {n}: {exc}") from None
        if len(ts) > 1 and ts[-1] <= ts[-2]:
            raise ProfileError(f"record {n}: timestamps out of order")
        if ghi[-1] < 0 or lm[-1] < 0 or not (math.isfinite(ghi[-1]) and math.isfinite(lm[-1])):
            raise ProfileError(f"record {n}: values must be finite and non-negative")
    prof = Profiles(np.array(ts, dtype=np.int64), np.array(ghi), np.array(lm))
    if window is not None and not prof.covers(*window):
        raise ProfileError(
            f"profile spans {format_time(ts[0])}-{format_time(ts[-1])}, "
            f"window needs {format_time(window[0])}-{format_time(window[1])}"
        )
    return prof


@dataclass(frozen=True)
class SimConfig:
    method: ControlMethod
    window_start: int = 6 * 3600 + 30 * 60
    window_end: int = 17 * 3600 + 30 * 60
    sim_step: int = 10
    control_period: int = 20
    tolerance: float = powerflow.DEFAULT_TOLERANCE
    max_iterations: int = powerflow.DEFAULT_MAX_ITER
    volt_var: VoltVarParams = field(default_factory=VoltVarParams)
    curtailment: bool = True

    def __post_init__(self):
        if self.window_end <= self.window_start:
            raise ValueError("window_end must follow window_start")
        if self.sim_step <= 0 or self.control_period <= 0:
            raise ValueError("steps must be positive")
        if self.control_period % self.sim_step:
            raise ValueError("control_period must be an integer multiple of sim_step")

    def times(self) -> range:
        return range(self.window_start, self.window_end, self.sim_step)


@dataclass(frozen=True)
class StepRecord:
    time: int
    v: tuple[float, ...]
    p_out: tuple[float, ...]  # kW
    q_out: tuple[float, ...]  # kVar
    p_available: tuple[float, ...]  # kW, DC side
    alpha: tuple[float, ...]
    f_v: tuple[float, ...]
    active_loss: float  # kW
    reactive_loss: float  # kVar


def objective_terms(voltages: Sequence[float]) -> tuple[np.ndarray, float]:
    v = np.asarray(voltages, dtype=float)
    if np.any(v <= 0):
        raise ValueError("voltages must be positive")
    f = 0.5 * (1.0 - v) ** 2
    return f, float(f.sum())


@dataclass
class ScenarioResults:
    method: ControlMethod
    agent_ids: tuple[str, ...]
    agent_buses: tuple[str, ...]
    sim_step: int
    steps: list[StepRecord]
    complete: bool = True
    abort_step: int | None = None
    abort_reason: str | None = None
    skipped_gradients: int = 0

    @property
    def summary(self) -> dict:
        return summarize(self)

    def series(self, name: str) -> np.ndarray:
        """``(steps, agents)`` array of a per-agent field, or ``(steps,)`` for losses."""
        return np.array([getattr(r, name) for r in self.steps], dtype=float)


def summarize(res: ScenarioResults) -> dict:
    hours = res.sim_step / 3600.0
    fv = res.series("f_v")
    per_step = fv.sum(axis=1) if fv.size else np.zeros(0)
    out = {
        "method": res.method.value,
        "complete": res.complete,
        "steps": len(res.steps),
        "fv_sum_then_square": float(per_step.sum() ** 2),
        "fv_square_per_step_sum": float(np.sum(per_step**2)),
        "fv_total": float(per_step.sum()),
        "mean_active_loss_kw": float(np.mean(res.series("active_loss"))) if res.steps else math.nan,
        "mean_reactive_loss_kvar": float(np.mean(res.series("reactive_loss"))) if res.steps else math.nan,
        "agents": {},
    }
    if res.steps:
        v = res.series("v")
        p = res.series("p_out")
        q = res.series("q_out")
        a = res.series("alpha")
        for j, aid in enumerate(res.agent_ids):
            out["agents"][aid] = {
                "bus": res.agent_buses[j],
                "energy_kwh": float(p[:, j].sum() * hours),
                "abs_q_kvarh": float(np.abs(q[:, j]).sum() * hours),
                "mean_abs_alpha": float(np.abs(a[:, j]).mean()),
                "mean_abs_deviation": float(np.abs(1.0 - v[:, j]).mean()),
                "v_max": float(v[:, j].max()),
                "v_min": float(v[:, j].min()),
            }
    return out


def curtailment_report(results: ScenarioResults, baseline: ScenarioResults) -> dict[str, float | None]:
    """Percent of the baseline's delivered AC energy lost under ``results``.

    ``None`` marks agents whose baseline energy is zero.
    """
    if results.agent_ids != baseline.agent_ids or len(results.steps) != len(baseline.steps):
        raise ValueError("runs do not share agents and window")
    if results.steps and results.steps[0].time != baseline.steps[0].time:
        raise ValueError("runs do not share the simulation window")
    e_m = results.series("p_out").sum(axis=0) if results.steps else np.zeros(len(results.agent_ids))
    e_b = baseline.series("p_out").sum(axis=0) if baseline.steps else np.zeros(len(results.agent_ids))
    out: dict[str, float | None] = {}
    for j, aid in enumerate(results.agent_ids):
        out[aid] = None if e_b[j] <= 0 else float(100.0 * (e_b[j] - e_m[j]) / e_b[j])
    return out


def run_scenario(
    feeder: FeederModel,
    agents: Sequence[InverterAgent],
    topology: CommTopology | None,
    profiles: Profiles,
    config: SimConfig,
) -> ScenarioResults:
    """Run one control method over the configured window.

    Control updates happen at the start of every ``control_period`` using the
    voltages solved in the previous step; commands are then held until the
    next update. Each step solves the power flow from a flat start.
    """
    method = config.method
    m = len(agents)
    norm = to_per_unit(feeder)
    sb = feeder.s_base
    bus_idx = np.array([norm.index(a.bus) for a in agents])
    b_mm = np.array([self_susceptance(feeder, a.bus) for a in agents])
    rating = np.array([a.rating_s for a in agents])
    betas = np.array([a.beta for a in agents])
    if not profiles.covers(config.window_start, config.window_end):
        raise ProfileError("profiles do not cover the simulation window")

    if method.communicates:
        if topology is None or topology.size != m:
            raise ValueError("communicating methods need a topology over all agents")
        topo = topology
    else:
        topo = isolated_topology(m)
    d_fixed = normalize(fixed_weights(topo), topo) if method is ControlMethod.ADAPTIVE_FIXED_WEIGHTS else None

    alpha = np.array([a.alpha for a in agents], dtype=float)
    if method is ControlMethod.NO_CTL:
        alpha[:] = 0.0
    last_v: np.ndarray | None = None
    last_q = np.zeros(m)
    last_p: np.ndarray | None = None

    res = ScenarioResults(method, tuple(a.id for a in agents), tuple(a.bus for a in agents),
                          config.sim_step, [])
    for k, t in enumerate(config.times()):
        ghi, mult = profiles.at(t)
        p_av = np.array([a.p_available(ghi) for a in agents])
        if last_p is None:
            last_p = np.minimum(p_av, rating)

        if (t - config.window_start) % config.control_period == 0 and last_v is not None:
            q_head = np.array([available_reactive(rating[j], last_p[j]) for j in range(m)])
            grads = np.zeros(m)
            if method.adaptive:
                for j in range(m):
                    try:
                        grads[j] = gradient(q_head[j] / sb, last_v[j], last_q[j] / sb, b_mm[j])
                    except SingularGradient as exc:
                        res.skipped_gradients += 1
                        log.warning("t=%s agent %s: gradient step skipped (%s)", t, agents[j].id, exc)
            vv = np.zeros(m)
            if method is ControlMethod.FIXED_CURVE:
                vv = np.array([volt_var(last_v[j], config.volt_var, q_head[j]) for j in range(m)])
            d = d_fixed
            if method is ControlMethod.ADAPTIVE_DYNAMIC_WEIGHTS:
                d = normalize(dynamic_weights(topo, q_head / sb), topo)
            alpha = update_estimates(method, alpha, d, betas, grads, vv, rating)
            for j in range(m):
                lo, hi = alpha_bounds(rating[j], available_reactive(rating[j], p_av[j]), config.curtailment)
                alpha[j] = min(max(alpha[j], lo), hi)

        disp = [dispatch(agents[j], alpha[j] * rating[j], p_av[j]) for j in range(m)]
        p_out = np.array([x.p_out for x in disp])
        q_out = np.array([x.q_out for x in disp])

        inj = powerflow.InjectionSet.loads_only(norm, mult)
        p_inj = inj.p.copy()
        q_inj = inj.q.copy()
        np.add.at(p_inj, bus_idx, p_out / sb)
        np.add.at(q_inj, bus_idx, q_out / sb)
        sol = powerflow.solve(norm, powerflow.InjectionSet(p_inj, q_inj), tolerance=config.tolerance,
                              max_iterations=config.max_iterations)
        if not sol.converged:
            res.complete = False
            res.abort_step = k
            res.abort_reason = (
                f"power flow {'collapsed' if sol.collapsed else 'did not converge'} at "
                f"{format_time(t)} (step {k}, mismatch {sol.max_mismatch:.3e})"
            )
            log.error(res.abort_reason)
            break
        loss = powerflow.losses(norm, sol)
        v = sol.vm[bus_idx]
        f_v, _ = objective_terms(v)
        res.steps.append(StepRecord(
            time=t,
            v=tuple(float(x) for x in v),
            p_out=tuple(float(x) for x in p_out),
            q_out=tuple(float(x) for x in q_out),
            p_available=tuple(float(x) for x in p_av),
            alpha=tuple(float(x) for x in q_out / rating),
            f_v=tuple(float(x) for x in f_v),
            active_loss=loss.total_active_loss * sb,
            reactive_loss=loss.total_reactive_loss * sb,
        ))
        last_v, last_q, last_p = v, q_out, p_out
    return res
