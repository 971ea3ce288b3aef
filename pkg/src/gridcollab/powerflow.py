"""Backward/forward sweep power flow for radial feeders."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .feeder import NormalizedFeeder

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITER = 100
COLLAPSE_VOLTAGE = 0.5


@dataclass(frozen=True)
class InjectionSet:
    """Net per-bus injection in p.u., generation positive, bus order of the feeder."""

    p: np.ndarray
    q: np.ndarray

    @classmethod
    def zeros(cls, feeder: NormalizedFeeder) -> "InjectionSet":
        return cls(np.zeros(feeder.n), np.zeros(feeder.n))

    @classmethod
    def from_mapping(cls, feeder: NormalizedFeeder, injections: Mapping[str, complex]) -> "InjectionSet":
        p = np.zeros(feeder.n)
        q = np.zeros(feeder.n)
        for bus, s in injections.items():
            try:
                i = feeder.index(bus)
            except ValueError:
                raise KeyError(f"injection at unknown bus {bus!r}") from None
            p[i] += complex(s).real
            q[i] += complex(s).imag
        return cls(p, q)

    @classmethod
    def loads_only(cls, feeder: NormalizedFeeder, multiplier: float = 1.0) -> "InjectionSet":
        return cls(-multiplier * feeder.p_load, -multiplier * feeder.q_load)


@dataclass(frozen=True)
class VoltageSolution:
    v: np.ndarray  # complex bus voltages, p.u.
    branch_current: np.ndarray  # complex, flowing away from the slack, indexed by receiving bus - 1
    branch_flow: np.ndarray  # complex power at the sending end of each branch
    converged: bool
    iterations: int
    max_mismatch: float
    collapsed: bool = False

    @property
    def vm(self) -> np.ndarray:
        return np.abs(self.v)

    @property
    def va(self) -> np.ndarray:
        return np.angle(self.v)


@dataclass(frozen=True)
class LossReport:
    total_active_loss: float
    total_reactive_loss: float


class PowerFlowError(RuntimeError):
    pass


@lru_cache(maxsize=32)
def _sweep_matrices(feeder: NormalizedFeeder):
    T = feeder.downstream()
    dlf = T.T @ (feeder.z[:, None] * T)
    return T, dlf, feeder.ybus()


def _injected_power(feeder: NormalizedFeeder, inj: InjectionSet, v: np.ndarray) -> np.ndarray:
    return inj.p + 1j * (inj.q + feeder.q_cap * np.abs(v) ** 2)


def solve(
    feeder: NormalizedFeeder,
    injections: InjectionSet,
    slack_setpoint: float | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITER,
) -> VoltageSolution:
    """Solve the feeder from a flat start.

    Iterates until the largest nodal complex-power mismatch (excluding the
    slack) is within ``tolerance``. Non-convergence and voltage collapse are
    reported through the returned flags rather than raised.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    v0 = feeder.slack_voltage if slack_setpoint is None else float(slack_setpoint)
    n = feeder.n
    T, dlf, Y = _sweep_matrices(feeder)
    v = np.full(n, v0, dtype=complex)

    def mismatch(v):
        s = _injected_power(feeder, injections, v)
        return float(np.max(np.abs(s[1:] - v[1:] * np.conj(Y[1:] @ v)), initial=0.0))

    err = mismatch(v)
    it = 0
    collapsed = False
    while err > tolerance and it < max_iterations:
        it += 1
        s = _injected_power(feeder, injections, v)
        draw = np.conj(-s[1:] / v[1:])
        v = v.copy()
        v[1:] = v0 - dlf @ draw
        if not np.all(np.isfinite(v)):
            err = float("inf")
            break
        if np.min(np.abs(v)) < COLLAPSE_VOLTAGE:
            collapsed = True
            err = mismatch(v)
            break
        err = mismatch(v)

    s = _injected_power(feeder, injections, v)
    with np.errstate(all="ignore"):
        current = T @ np.conj(-s[1:] / v[1:]) if n > 1 else np.zeros(0, dtype=complex)
        flow = v[feeder.parent[1:]] * np.conj(current) if n > 1 else np.zeros(0, dtype=complex)
    return VoltageSolution(
        v=v,
        branch_current=current,
        branch_flow=flow,
        converged=bool(err <= tolerance and not collapsed),
        iterations=it,
        max_mismatch=err,
        collapsed=collapsed,
    )


def losses(feeder: NormalizedFeeder, solution: VoltageSolution) -> LossReport:
    if not solution.converged:
        raise PowerFlowError("losses requested for an unconverged solution")
    sl = np.sum(np.abs(solution.branch_current) ** 2 * feeder.z)
    return LossReport(float(sl.real), float(sl.imag))


def slack_power(feeder: NormalizedFeeder, solution: VoltageSolution) -> complex:
    """Complex power delivered by the slack bus into the network."""
    _, _, Y = _sweep_matrices(feeder)
    v = solution.v
    return complex(v[0] * np.conj(Y[0] @ v))
