"""Smart-inverter agent: reactive headroom, utilization ratio, Volt-Var curve,
local voltage-deviation gradient and Var-priority dispatch.

Sign convention: positive reactive power is injection (voltage raising),
negative is absorption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

EPS_SINGULAR = 1e-9


@dataclass(frozen=True)
class VoltVarParams:
    v_ref: float = 1.0
    deadband_low: float = 0.98
    deadband_high: float = 1.02
    v_min: float = 0.92
    v_max: float = 1.08

    def __post_init__(self):
        if not (self.v_min < self.deadband_low <= self.v_ref <= self.deadband_high < self.v_max):
            raise ValueError(
                "Volt-Var breakpoints must satisfy v_min < deadband_low <= v_ref <= deadband_high < v_max"
            )


@dataclass(frozen=True)
class InverterAgent:
    id: str
    bus: str
    rating_s: float  # kVA
    dc_capacity: float  # kW
    beta: float = 0.1
    alpha: float = 0.0

    def __post_init__(self):
        if not self.rating_s > 0:
            raise ValueError(f"agent {self.id}: rating must be positive")
        if not self.beta > 0:
            raise ValueError(f"agent {self.id}: step gain must be positive")
        if not self.dc_capacity >= 0:
            raise ValueError(f"agent {self.id}: negative DC capacity")

    def with_alpha(self, alpha: float) -> "InverterAgent":
        return replace(self, alpha=alpha)

    def p_available(self, ghi: float) -> float:
        """DC-side power for a plane irradiance of ``ghi`` W/m^2."""
        return self.dc_capacity * ghi / 1000.0


@dataclass(frozen=True)
class DispatchResult:
    p_out: float
    q_out: float
    curtailed_p: float
    saturated: bool


def available_reactive(rating_s: float, p_active: float) -> float:
    """Reactive headroom ``sqrt(S^2 - P^2)`` with ``P`` clamped to the rating."""
    if rating_s < 0 or p_active < 0:
        raise ValueError("rating and active power must be non-negative")
    p = min(p_active, rating_s)
    return math.sqrt(max(rating_s * rating_s - p * p, 0.0))


def fair_ratio(q_out: float, rating_s: float) -> float:
    if not rating_s > 0:
        raise ValueError("rating must be positive")
    return q_out / rating_s


def volt_var(v: float, params: VoltVarParams, q_available: float) -> float:
    """Fixed piecewise-linear Volt-Var characteristic saturating at ``q_available``."""
    if not v > 0:
        raise ValueError("voltage must be positive")
    if q_available < 0:
        raise ValueError("available reactive power must be non-negative")
    if v <= params.v_min:
        return q_available
    if v < params.deadband_low:
        return q_available * (params.deadband_low - v) / (params.deadband_low - params.v_min)
    if v <= params.deadband_high:
        return 0.0
    if v < params.v_max:
        return -q_available * (v - params.deadband_high) / (params.v_max - params.deadband_high)
    return -q_available


class SingularGradient(ArithmeticError):
    """The gradient denominator ``Q - V^2 B`` vanished; skip this agent's step."""


def gradient(q_avail: float, v: float, q_out: float, b_mm: float, eps: float = EPS_SINGULAR) -> float:
    """Gradient of the local deviation cost ``0.5 (1 - V)^2`` with respect to the
    utilization ratio, all arguments in system per-unit."""
    num = q_avail * (1.0 - v) * v
    if num == 0.0:
        return 0.0
    denom = q_out - v * v * b_mm
    if abs(denom) < eps:
        raise SingularGradient(f"|Q - V^2 B| = {abs(denom):.3e} below {eps:g}")
    return -num / denom


def dispatch(agent: InverterAgent, q_command: float, p_available: float) -> DispatchResult:
    """Var-priority dispatch: reactive command first, active power fills what remains."""
    if p_available < 0:
        raise ValueError("available active power must be non-negative")
    s = agent.rating_s
    q = min(max(q_command, -s), s)
    p_cap = math.sqrt(max(s * s - q * q, 0.0))
    p = min(p_available, p_cap)
    return DispatchResult(
        p_out=p,
        q_out=q,
        curtailed_p=max(p_available - p, 0.0),
        saturated=abs(q_command) >= s or p_available >= p_cap,
    )


def alpha_bounds(rating_s: float, q_avail: float, curtailment: bool = True) -> tuple[float, float]:
    if curtailment:
        return (-1.0, 1.0)
    lim = min(q_avail / rating_s, 1.0)
    return (-lim, lim)
