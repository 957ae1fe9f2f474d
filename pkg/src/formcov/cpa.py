"""Connectivity-preserving coverage ascent, one follower at a time.

A move is committed only after the full graph is re-checked by BFS, so a
connected input stays connected no matter how the line search behaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .connectivity import build_graph, is_connected, moved_graph
from .errors import NoFeasibleProjection, NotConnectedInput
from .formation_opt import FormationProblem
from .geometry import project_to_connection_union, snap

# gradients below this fraction of peak * delta are rounding noise
GRAD_EPS = 1e-9


@dataclass(frozen=True)
class CpaConfig:
    step_init: float
    step_min: float
    max_sweeps: int = 200
    tol: float = 1e-4

    def __post_init__(self):
        if not 0 < self.step_min <= self.step_init:
            raise ValueError("need 0 < step_min <= step_init")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @classmethod
    def defaults(cls, delta: float, area: float) -> "CpaConfig":
        return cls(step_init=0.5 * delta, step_min=1e-3 * delta, max_sweeps=200, tol=1e-4 * area)


def cpa_step(positions, i: int, config: CpaConfig, problem: FormationProblem, graph=None, H=None):
    """Try to move follower ``i`` uphill; returns ``(positions, accepted)``.

    The step length is ``alpha`` along the unit gradient direction, halved from
    ``step_init`` down to ``step_min``.  A raw step that leaves the admissible
    set or disconnects the team is replaced by its projection onto the
    connection regions of the other agents, so followers pinned against a
    constraint can still slide along it.
    """
    if i == 0:
        raise ValueError("the leader is never moved by the CPA")
    pos = np.asarray(positions, dtype=float)
    if graph is None:
        graph = build_graph(pos, problem.C, problem.scene)
        if not is_connected(graph):
            raise NotConnectedInput("cpa_step needs a connected formation")
    model = problem.coverage
    if H is None:
        H = model.objective(pos)
    g = model.gradient(pos, i)
    gn = math.hypot(g[0], g[1])
    if not np.isfinite(gn) or gn <= GRAD_EPS * problem.sensing.peak * problem.sensing.delta:
        return pos, False
    u = g / gn
    others = [pos[j] for j in range(len(pos)) if j != i]
    hp = problem.halfplane(pos[0])
    alpha = config.step_init
    while alpha >= config.step_min:
        cand = snap(pos[i] + alpha * u)
        alpha *= 0.5
        linked = None
        if problem.admissible(cand, pos[0]):
            linked = moved_graph(graph, i, cand)
            if not is_connected(linked):
                linked = None
        if linked is None:
            # projected-gradient fallback: slide along the active constraints
            try:
                cand = project_to_connection_union(cand, others, problem.C, problem.scene, halfplane=hp)
            except NoFeasibleProjection:
                continue
            if np.array_equal(cand, pos[i]):
                continue
        trial = pos.copy()
        trial[i] = cand
        if not model.objective(trial) > H:
            continue
        if linked is not None or is_connected(moved_graph(graph, i, cand)):
            return trial, True
    return pos, False


def cpa_run(positions, config: CpaConfig, problem: FormationProblem, max_sweeps: Optional[int] = None):
    """Sweep followers in index order until a sweep gains less than ``tol``.

    Returns ``(positions, H_trace)``; the trace starts with the input value
    and gets one entry per sweep that moved anything.
    """
    pos = np.array(positions, dtype=float)
    graph = build_graph(pos, problem.C, problem.scene)
    if not is_connected(graph):
        raise NotConnectedInput("cpa_run needs a connected formation")
    model = problem.coverage
    H = model.objective(pos)
    trace = [H]
    for _ in range(max_sweeps or config.max_sweeps):
        moved = False
        for i in range(1, len(pos)):
            new, accepted = cpa_step(pos, i, config, problem, graph=graph, H=H)
            if accepted:
                graph = moved_graph(graph, i, new[i])
                pos = new
                H = model.objective(pos)
                moved = True
        if not moved:
            break
        gain = H - trace[-1]
        trace.append(H)
        if gain < config.tol:
            break
    return pos, trace
