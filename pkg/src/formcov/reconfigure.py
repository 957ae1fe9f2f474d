"""Connected-graph construction when the leader's next move breaks the formation.

Followers are committed in Q order.  Each one first tries the pure
translation by the leader's displacement; if that candidate cannot reach any
already-committed upstream agent, its current position is projected onto the
union of those agents' connection regions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .connectivity import FormationGraph, shortest_paths
from .errors import NoFeasibleProjection, ProjectionFailed
from .geometry import HalfPlane, Scene, connected_pair, project_to_connection_union


@dataclass(frozen=True)
class ReconfigInput:
    graph_t: FormationGraph
    leader_next: np.ndarray

    @property
    def delta_L(self) -> np.ndarray:
        return np.asarray(self.leader_next, dtype=float) - self.graph_t.positions[0]


def construct_connected_graph(
    inp: ReconfigInput,
    scene: Scene,
    C: float,
    project_candidate: bool = False,
    halfplane: Optional[HalfPlane] = None,
    resolution: int = 128,
):
    """Return ``(positions, events)`` for time t + epsilon.

    ``events`` holds one ``commit`` record per follower in processing order
    and a ``projection`` record for every follower that left pure translation.
    With ``project_candidate`` the translated candidate is projected instead
    of the current position.  ``halfplane`` is honoured when it can be; if no
    connectable point lies inside it, the projection falls back to the
    unconstrained region and the record says so.
    """
    old = inp.graph_t.positions
    new = old.copy()
    new[0] = np.asarray(inp.leader_next, dtype=float)
    dL = new[0] - old[0]
    paths = shortest_paths(inp.graph_t)
    committed = {0}
    events = []
    for i in paths.q_order[1:]:
        cand = old[i] + dL
        anchors = sorted(paths.upstream[i] & committed)
        if not anchors:
            raise AssertionError(f"agent {i} has no committed upstream agent")
        reach = any(connected_pair(cand, new[v], C, scene) for v in anchors)
        projected = False
        if not reach:
            src = cand if project_candidate else old[i]
            anchor_pts = [new[v] for v in anchors]
            relaxed = False
            try:
                try:
                    target = project_to_connection_union(src, anchor_pts, C, scene, resolution, halfplane)
                except NoFeasibleProjection:
                    if halfplane is None:
                        raise
                    target = project_to_connection_union(src, anchor_pts, C, scene, resolution, None)
                    relaxed = True
            except NoFeasibleProjection as exc:
                raise ProjectionFailed(i, f"agent {i}: {exc}") from exc
            events.append(
                {
                    "kind": "projection",
                    "agent": int(i),
                    "anchors": [int(v) for v in anchors],
                    "candidate": cand.tolist(),
                    "target": target.tolist(),
                    "extra_displacement": float(np.hypot(*(target - cand))),
                    "halfplane_relaxed": relaxed,
                }
            )
            cand = target
            projected = True
        new[i] = cand
        committed.add(i)
        events.append({"kind": "commit", "agent": int(i), "projected": projected})
    return new, events
