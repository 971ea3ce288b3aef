"""Communication topology, weight matrices and the agent-estimate update rules
for the five reactive-power control methods."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

EPS_Q = 1e-6  # p.u.; floor applied to headroom inside weight ratios only


class ControlMethod(enum.Enum):
    NO_CTL = "noctl"
    FIXED_CURVE = "fc"
    ADAPTIVE_NO_COMM = "ac-nocm"
    ADAPTIVE_FIXED_WEIGHTS = "ac-fw"
    ADAPTIVE_DYNAMIC_WEIGHTS = "ac-dw"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def adaptive(self) -> bool:
        return self in (ControlMethod.ADAPTIVE_NO_COMM, ControlMethod.ADAPTIVE_FIXED_WEIGHTS,
                        ControlMethod.ADAPTIVE_DYNAMIC_WEIGHTS)

    @property
    def communicates(self) -> bool:
        return self in (ControlMethod.ADAPTIVE_FIXED_WEIGHTS, ControlMethod.ADAPTIVE_DYNAMIC_WEIGHTS)


_LABELS = {
    ControlMethod.NO_CTL: "No Ctl",
    ControlMethod.FIXED_CURVE: "F.C.",
    ControlMethod.ADAPTIVE_NO_COMM: "A.C.NoCm",
    ControlMethod.ADAPTIVE_FIXED_WEIGHTS: "A.C.F.W.",
    ControlMethod.ADAPTIVE_DYNAMIC_WEIGHTS: "A.C.D.W.",
}


class ReachabilityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CommTopology:
    s: np.ndarray  # M x M, 0/1, unit diagonal, symmetric

    @property
    def size(self) -> int:
        return self.s.shape[0]


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    w: np.ndarray
    scheme: str  # "fixed" | "dynamic"
    fallback: bool = False  # dynamic weights reverted to uniform somewhere


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    d: np.ndarray
    scheme: str


def globally_reachable(s: np.ndarray) -> list[int]:
    """Nodes from which every node is reachable along edges ``i -> j`` with ``s[i, j] != 0``."""
    m = s.shape[0]
    out = []
    for root in range(m):
        seen = {root}
        stack = [root]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(s[i]):
                if j not in seen:
                    seen.add(int(j))
                    stack.append(int(j))
        if len(seen) == m:
            out.append(root)
    return out


def build_topology(links: Iterable[tuple[int, int]], m: int) -> CommTopology:
    """Symmetric topology over agents ``1..m`` from 1-based undirected links."""
    if m < 1:
        raise ValueError("need at least one agent")
    s = np.eye(m)
    for a, b in links:
        if not (1 <= a <= m and 1 <= b <= m):
            raise ValueError(f"link ({a}, {b}) outside agent range 1..{m}")
        s[a - 1, b - 1] = s[b - 1, a - 1] = 1.0
    if not globally_reachable(s):
        raise ReachabilityError("communication topology has no globally reachable agent")
    return CommTopology(s)


def isolated_topology(m: int) -> CommTopology:
    """Self-links only; used by the no-communication method, exempt from reachability."""
    return CommTopology(np.eye(m))


def fixed_weights(topology: CommTopology) -> WeightMatrix:
    return WeightMatrix(topology.s.copy(), "fixed")


def dynamic_weights(topology: CommTopology, q_avail: Sequence[float], eps: float = EPS_Q) -> WeightMatrix:
    """Headroom-ratio weights: ``w_ij = s_ij Q_i / Q_j`` off the diagonal and
    ``w_ii = (sum of neighbours' Q) / Q_i`` on it.

    Headroom is floored at ``eps`` so fully loaded inverters keep finite
    weights. An agent whose neighbourhood has no headroom at all gets uniform
    weights and the matrix is flagged.
    """
    q = np.asarray(q_avail, dtype=float)
    if q.shape != (topology.size,):
        raise ValueError("one headroom value per agent required")
    if np.any(q < 0):
        raise ValueError("reactive headroom must be non-negative")
    s = topology.s
    qf = np.maximum(q, eps)
    off = s * np.outer(qf, 1.0 / qf)
    np.fill_diagonal(off, 0.0)
    pool = (s - np.eye(topology.size)) @ qf
    w = off + np.diag(pool / qf)
    fallback = False
    for i in range(topology.size):
        group = s[i] > 0
        if np.all(q[group] < eps):
            w[i] = s[i]
            fallback = True
        elif w[i, i] == 0.0:
            # isolated agent: pool is empty, the self-link still needs weight
            w[i, i] = 1.0
    return WeightMatrix(w, "dynamic", fallback)


def normalize(weights: WeightMatrix, topology: CommTopology) -> CoefficientMatrix:
    masked = np.where(topology.s > 0, weights.w, 0.0)
    rows = masked.sum(axis=1, keepdims=True)
    if np.any(rows <= 0):
        raise ValueError("weight row with no positive entry inside the topology")
    return CoefficientMatrix(masked / rows, weights.scheme)


def update_estimates(
    method: ControlMethod,
    alphas: np.ndarray,
    d: CoefficientMatrix | None,
    betas: np.ndarray,
    grads: np.ndarray,
    volt_var_outputs: np.ndarray,
    ratings: np.ndarray,
) -> np.ndarray:
    """One synchronous round of estimate updates (before clamping).

    All agents read the same snapshot ``alphas``; gradients that had to be
    skipped should be passed as zero.
    """
    alphas = np.asarray(alphas, dtype=float)
    m = alphas.shape[0]
    for name, arr in (("betas", betas), ("grads", grads), ("volt_var_outputs", volt_var_outputs),
                      ("ratings", ratings)):
        if np.shape(arr) != (m,):
            raise ValueError(f"{name} has shape {np.shape(arr)}, expected ({m},)")
    if method is ControlMethod.NO_CTL:
        return np.zeros(m)
    if method is ControlMethod.FIXED_CURVE:
        return np.asarray(volt_var_outputs, dtype=float) / np.asarray(ratings, dtype=float)
    step = np.asarray(betas, dtype=float) * np.asarray(grads, dtype=float)
    if method is ControlMethod.ADAPTIVE_NO_COMM:
        return alphas - step
    if d is None or d.d.shape != (m, m):
        raise ValueError("coefficient matrix of matching size required")
    expected = "fixed" if method is ControlMethod.ADAPTIVE_FIXED_WEIGHTS else "dynamic"
    if d.scheme != expected:
        raise ValueError(f"{method.value} needs a {expected}-weight coefficient matrix, got {d.scheme}")
    return d.d @ alphas - step
