"""Initial optimal formation around a fixed leader.

The mixed-integer program (positions plus integer link flows) is replaced by
a multistart local search over positions with a spanning-tree backbone: any
connected graph admits a feasible flow, so the tree is certified at the end
with ``flow_from_tree`` and checked with ``verify_solution``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .connectivity import FlowVector, FormationGraph, build_graph, flow_from_tree, verify_flow
from .coverage import CoverageModel, EventDensity, SensingModel
from .errors import NoFeasibleStart
from .geometry import (
    HalfPlane,
    Scene,
    connected_pair,
    point_in_feasible,
    project_to_connection_union,
    snap,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SideConstraint:
    """Half-plane attached to the leader: ``normal . (p - leader) >= offset``.

    The default normal (-1, 0) keeps followers on the left of a leader
    heading along +x.
    """

    normal: tuple = (-1.0, 0.0)
    offset: float = 0.0

    def __post_init__(self):
        n = math.hypot(*self.normal)
        if n == 0:
            raise ValueError("side constraint normal must be nonzero")
        object.__setattr__(self, "normal", (self.normal[0] / n, self.normal[1] / n))

    def at(self, leader) -> HalfPlane:
        return HalfPlane(self.normal, float(np.dot(self.normal, leader)) + self.offset)


@dataclass
class FormationProblem:
    scene: Scene
    leader_pos: np.ndarray
    n_followers: int
    C: float
    sensing: SensingModel
    density: EventDensity = field(default_factory=EventDensity)
    side_constraint: Optional[SideConstraint] = None
    cell_size: Optional[float] = None
    occlusion: bool = False

    def __post_init__(self):
        self.leader_pos = np.asarray(self.leader_pos, dtype=float)
        if self.n_followers < 1:
            raise ValueError("need at least one follower")
        if not self.C > 0:
            raise ValueError("connection range must be positive")
        if not point_in_feasible(self.leader_pos, self.scene):
            raise ValueError("leader position is not feasible")

    @cached_property
    def coverage(self) -> CoverageModel:
        return CoverageModel(self.scene, self.sensing, self.density, self.cell_size, self.occlusion)

    def halfplane(self, leader=None) -> Optional[HalfPlane]:
        if self.side_constraint is None:
            return None
        return self.side_constraint.at(self.leader_pos if leader is None else leader)

    def admissible(self, p, leader=None) -> bool:
        hp = self.halfplane(leader)
        return point_in_feasible(p, self.scene) and (hp is None or hp.contains(p))


@dataclass
class FormationSolution:
    positions: np.ndarray
    flow: FlowVector
    objective: float
    restarts_used: int
    parent: tuple = ()


def verify_solution(positions, flow: FlowVector, problem: FormationProblem) -> bool:
    pos = np.asarray(positions, dtype=float)
    if pos.shape != (problem.n_followers + 1, 2) or np.asarray(flow.rho).shape != (len(pos), len(pos)):
        return False
    if any(not problem.admissible(p, pos[0]) for p in pos[1:]):
        return False
    if not point_in_feasible(pos[0], problem.scene):
        return False
    # flow is only allowed on links that satisfy range and line of sight
    graph = build_graph(pos, problem.C, problem.scene)
    return verify_flow(flow, graph)


def spanning_tree(positions, C: float, scene: Scene, connected_only: bool = True) -> list:
    """Prim's tree rooted at the leader with Euclidean edge costs.

    With ``connected_only`` only links passing ``connected_pair`` are used and
    the result may leave nodes unattached (``None``); otherwise blocked or
    long links are allowed at a large penalty.
    """
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    cost = np.full((n, n), np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.hypot(*(pos[i] - pos[j])))
            if connected_pair(pos[i], pos[j], C, scene):
                cost[i, j] = cost[j, i] = d
            elif not connected_only:
                cost[i, j] = cost[j, i] = d + 1e6
    parent = [None] * n
    parent[0] = -1
    best = cost[0].copy()
    link = [0] * n
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        v = int(np.argmin(cand))
        if not np.isfinite(cand[v]):
            break
        in_tree[v] = True
        parent[v] = link[v]
        closer = cost[v] < best
        best = np.where(closer, cost[v], best)
        for u in np.flatnonzero(closer):
            link[u] = v
    return parent


def _tree_order(parent) -> list:
    children = {i: [] for i in range(len(parent))}
    for j, p in enumerate(parent):
        if j and p is not None:
            children[p].append(j)
    order, stack = [], [0]
    while stack:
        u = stack.pop(0)
        order.append(u)
        stack.extend(children[u])
    return order


def repair(positions, parent, problem: FormationProblem, resolution: int = 128) -> np.ndarray:
    """Pull every follower back into its tree parent's connection region."""
    pos = np.array(positions, dtype=float)
    hp = problem.halfplane(pos[0])
    for j in _tree_order(parent)[1:]:
        p = parent[j]
        ok = problem.admissible(pos[j], pos[0]) and connected_pair(pos[j], pos[p], problem.C, problem.scene)
        if not ok:
            pos[j] = project_to_connection_union(pos[j], [pos[p]], problem.C, problem.scene, resolution, hp)
    return pos


def _sample_start(problem: FormationProblem, rng: np.random.Generator, tries: int = 2000):
    N = problem.n_followers
    radius = N * problem.C
    pos = [problem.leader_pos.copy()]
    for _ in range(N):
        for _ in range(tries):
            r = radius * math.sqrt(rng.random())
            th = 2 * math.pi * rng.random()
            p = snap(problem.leader_pos + r * np.array([math.cos(th), math.sin(th)]))
            if problem.admissible(p):
                pos.append(p)
                break
        else:
            return None
    return np.array(pos)


def _local_search(pos, problem: FormationProblem, max_sweeps: int, tree_every: int):
    model = problem.coverage
    delta = problem.sensing.delta
    parent = spanning_tree(pos, problem.C, problem.scene, connected_only=False)
    pos = repair(pos, parent, problem)
    parent = spanning_tree(pos, problem.C, problem.scene)
    H = model.objective(pos)
    for sweep in range(1, max_sweeps + 1):
        g = np.array([model.gradient(pos, i) for i in range(1, len(pos))])
        gmax = float(np.max(np.hypot(g[:, 0], g[:, 1])))
        if gmax == 0.0:
            break
        alpha = 0.1 * delta
        moved = None
        while alpha >= 1e-3 * delta:
            cand = pos.copy()
            cand[1:] = snap(pos[1:] + alpha * g / gmax)
            cand = repair(cand, parent, problem)
            H1 = model.objective(cand)
            if H1 > H:
                moved = cand
                break
            alpha *= 0.5
        if moved is None:
            break
        change = float(np.max(np.abs(moved - pos)))
        pos, H = moved, H1
        if change < 1e-3 * delta:
            break
        if sweep % tree_every == 0:
            parent = spanning_tree(pos, problem.C, problem.scene)
    parent = spanning_tree(pos, problem.C, problem.scene)
    return pos, H, parent


def solve_initial_formation(
    problem: FormationProblem,
    restarts: int = 16,
    seed: int = 0,
    max_sweeps: int = 500,
    tree_every: int = 10,
) -> FormationSolution:
    """Best of ``restarts`` independent local searches.

    Restart ``r`` draws from its own stream seeded by ``(seed, r)``, so the
    first k restarts are identical whatever the total count.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        start = _sample_start(problem, rng)
        if start is None:
            log.debug("restart %d: no feasible start", r)
            continue
        pos, H, parent = _local_search(start, problem, max_sweeps, tree_every)
        log.debug("restart %d: H=%.4f", r, H)
        if best is None or H > best[1]:
            best = (pos, H, parent)
    if best is None:
        raise NoFeasibleStart("could not sample a feasible start in any restart")
    pos, H, parent = best
    flow = flow_from_tree(parent)
    sol = FormationSolution(pos, flow, H, restarts, tuple(parent))
    if not verify_solution(pos, flow, problem):
        raise AssertionError("solver produced an invalid formation")
    return sol


def star_formation(problem: FormationProblem, radius_frac: float = 0.9) -> np.ndarray:
    """Followers on an arc around the leader, each linked directly to it."""
    N = problem.n_followers
    r = radius_frac * problem.C
    if problem.side_constraint is None:
        angles = 2 * math.pi * np.arange(N) / N
    else:
        nx, ny = problem.side_constraint.normal
        mid = math.atan2(ny, nx)
        angles = mid + math.pi * ((np.arange(N) + 0.5) / N - 0.5)
    pos = [problem.leader_pos.copy()]
    hp = problem.halfplane()
    for a in angles:
        p = snap(problem.leader_pos + r * np.array([math.cos(a), math.sin(a)]))
        if not (problem.admissible(p) and connected_pair(p, pos[0], problem.C, problem.scene)):
            p = project_to_connection_union(p, [pos[0]], problem.C, problem.scene, halfplane=hp)
        pos.append(p)
    return np.array(pos)


def formation_graph(positions, problem: FormationProblem) -> FormationGraph:
    return build_graph(positions, problem.C, problem.scene)
