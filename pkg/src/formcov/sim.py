"""Mission engine: free/constrained state machine along the leader trajectory.

Free steps translate the whole team by the leader's displacement.  Any step
that starts or ends in a constrained state rebuilds a connected formation and
then polishes it with the CPA.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .connectivity import build_graph, is_connected, shortest_paths
from .coverage import EventDensity, SensingModel
from .cpa import CpaConfig, cpa_run
from .errors import ConnectivityLost
from .formation_opt import FormationProblem, SideConstraint, solve_initial_formation
from .geometry import Scene, disk_hits_obstacle, feasible_mask, snap
from .reconfigure import ReconfigInput, construct_connected_graph

log = logging.getLogger(__name__)

FREE = "free"
CONSTRAINED = "constrained"
LOG_SCHEMA = 1


@dataclass
class MissionConfig:
    scene: Scene
    trajectory: np.ndarray
    n_followers: int
    C: float
    sensing: SensingModel
    density: EventDensity = field(default_factory=EventDensity)
    side_constraint: Optional[SideConstraint] = None
    cpa: Optional[CpaConfig] = None
    grid_cell: Optional[float] = None
    seed: int = 0
    occlusion: bool = False
    restarts: int = 16
    project_candidate: bool = False

    def __post_init__(self):
        self.trajectory = snap(np.asarray(self.trajectory, dtype=float).reshape(-1, 2))
        if self.cpa is None:
            self.cpa = CpaConfig.defaults(self.sensing.delta, self.scene.area)
        if self.grid_cell is None:
            self.grid_cell = self.sensing.delta / 20.0

    @property
    def T(self) -> int:
        return len(self.trajectory) - 1

    def problem(self) -> FormationProblem:
        return FormationProblem(
            scene=self.scene,
            leader_pos=self.trajectory[0],
            n_followers=self.n_followers,
            C=self.C,
            sensing=self.sensing,
            density=self.density,
            side_constraint=self.side_constraint,
            cell_size=self.grid_cell,
            occlusion=self.occlusion,
        )


def detect_state(positions, scene: Scene, delta: float) -> str:
    """Constrained iff some sensing disk meets an obstacle interior."""
    for s in np.atleast_2d(positions):
        if disk_hits_obstacle(s, delta, scene):
            return CONSTRAINED
    return FREE


def tree_parents(positions, C: float, scene: Scene) -> list:
    return list(shortest_paths(build_graph(positions, C, scene)).parent)


@dataclass
class MissionLog:
    records: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def append(self, record: dict) -> None:
        if not self.transitions or self.transitions[-1]["state"] != record["state"]:
            self.transitions.append({"t": record["t"], "state": record["state"]})
        self.records.append(record)

    def positions_at(self, t: int) -> np.ndarray:
        return np.array(self.records[t]["positions"])

    def to_dict(self) -> dict:
        return {
            "schema": LOG_SCHEMA,
            "config": self.config,
            "summary": self.summary,
            "transitions": self.transitions,
            "records": self.records,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MissionLog":
        return cls(d["records"], d["transitions"], d["summary"], d.get("config", {}))


class Mission:
    def __init__(self, config: MissionConfig):
        self.config = config
        self.problem = config.problem()
        self.model = self.problem.coverage
        self.positions: Optional[np.ndarray] = None
        self.t = 0
        self.log = MissionLog()
        self.reconfigurations = 0
        self.projections = 0

    def _halfplane(self, leader):
        return self.problem.halfplane(leader)

    def initialize(self, positions=None) -> None:
        """Start from ``positions`` or from the solver seed polished by the CPA."""
        cfg = self.config
        if positions is None:
            sol = solve_initial_formation(self.problem, restarts=cfg.restarts, seed=cfg.seed)
            self.log.summary["solver_H"] = sol.objective
            positions, trace = cpa_run(sol.positions, cfg.cpa, self.problem)
            self.log.summary["initial_cpa_sweeps"] = len(trace) - 1
        positions = np.array(positions, dtype=float)
        if not np.array_equal(positions[0], cfg.trajectory[0]):
            raise ValueError("initial leader position must match the first waypoint")
        if not is_connected(build_graph(positions, cfg.C, cfg.scene)):
            raise ConnectivityLost("initial formation is not connected")
        self.positions = positions
        self.t = 0
        H = self.model.objective(positions)
        self.log.summary["nominal_H"] = H
        self._record(H, [])

    def _record(self, H: float, events: list) -> None:
        cfg = self.config
        self.log.append(
            {
                "t": self.t,
                "state": detect_state(self.positions, cfg.scene, cfg.sensing.delta),
                "H": H,
                "positions": self.positions.tolist(),
                "parents": tree_parents(self.positions, cfg.C, cfg.scene),
                "events": events,
            }
        )

    def step(self) -> dict:
        cfg = self.config
        k = self.t
        leader_next = cfg.trajectory[k + 1]
        dL = leader_next - cfg.trajectory[k]
        translated = self.positions + dL
        delta = cfg.sensing.delta
        now = detect_state(self.positions, cfg.scene, delta)
        nxt = detect_state(translated, cfg.scene, delta)
        events = []
        if now == FREE and nxt == FREE and np.all(feasible_mask(translated, cfg.scene)):
            new = translated
            events.append({"kind": "translate"})
        else:
            graph = build_graph(self.positions, cfg.C, cfg.scene)
            new, rec = construct_connected_graph(
                ReconfigInput(graph, leader_next),
                cfg.scene,
                cfg.C,
                project_candidate=cfg.project_candidate,
                halfplane=self._halfplane(leader_next),
            )
            self.reconfigurations += 1
            projections = [e for e in rec if e["kind"] == "projection"]
            self.projections += len(projections)
            events.append({"kind": "reconfiguration", "projected": [e["agent"] for e in projections]})
            events.extend(projections)
            if not is_connected(build_graph(new, cfg.C, cfg.scene)):
                raise ConnectivityLost(f"reconfiguration at t={k + 1} left the team disconnected")
            H0 = self.model.objective(new)
            new, trace = cpa_run(new, cfg.cpa, self.problem)
            events.append({"kind": "cpa", "sweeps": len(trace) - 1, "H_before": H0, "H_after": trace[-1]})
        if not is_connected(build_graph(new, cfg.C, cfg.scene)):
            raise ConnectivityLost(f"formation disconnected at t={k + 1}")
        self.positions = new
        self.t = k + 1
        H = self.model.objective(new)
        self._record(H, events)
        return self.log.records[-1]

    def run(self) -> MissionLog:
        if self.positions is None:
            self.initialize()
        while self.t < self.config.T:
            self.step()
        self.log.summary.update(
            {
                "final_H": self.log.records[-1]["H"],
                "projection_count": self.projections,
                "reconfiguration_count": self.reconfigurations,
                "steps": self.config.T,
            }
        )
        return self.log


def run(config: MissionConfig, initial_positions=None, config_dict: Optional[dict] = None) -> MissionLog:
    mission = Mission(config)
    if config_dict is not None:
        mission.log.config = config_dict
    if initial_positions is not None:
        mission.initialize(initial_positions)
    return mission.run()
