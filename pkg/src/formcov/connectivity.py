"""Formation graph, flow certificates, shortest paths and the Q ordering.

Agent 0 is always the leader.  Adjacency comes from ``connected_pair`` (range
plus line of sight).  Breadth-first reachability from the leader is the
ground truth for connectivity everywhere else in the package.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, Disconnected, NotATree
from .geometry import Scene, connected_pair

TIE_TOL = 1e-12


@dataclass(frozen=True)
class FormationGraph:
    positions: np.ndarray
    C: float
    adjacency: np.ndarray
    scene: Optional[Scene] = None

    @property
    def n_agents(self) -> int:
        return len(self.adjacency)

    def neighbors(self, i: int):
        return np.flatnonzero(self.adjacency[i])

    def edge_length(self, i: int, j: int) -> float:
        d = self.positions[i] - self.positions[j]
        return math.hypot(d[0], d[1])

    @classmethod
    def from_adjacency(cls, adjacency, positions=None, C: float = math.inf):
        adj = np.array(adjacency, dtype=bool)
        if adj.shape[0] != adj.shape[1]:
            raise DimensionMismatch("adjacency must be square")
        adj = adj | adj.T
        np.fill_diagonal(adj, False)
        if positions is None:
            positions = np.zeros((len(adj), 2))
        return cls(np.asarray(positions, dtype=float), C, adj)


def build_graph(positions, C: float, scene: Scene) -> FormationGraph:
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    n = len(pos)
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            if connected_pair(pos[i], pos[j], C, scene):
                adj[i, j] = adj[j, i] = True
    return FormationGraph(pos, C, adj, scene)


def moved_graph(graph: FormationGraph, i: int, new_pos) -> FormationGraph:
    """Graph with agent ``i`` relocated; only its row and column are recomputed."""
    pos = graph.positions.copy()
    pos[i] = new_pos
    adj = graph.adjacency.copy()
    for j in range(len(pos)):
        if j != i:
            adj[i, j] = adj[j, i] = connected_pair(pos[i], pos[j], graph.C, graph.scene)
    return FormationGraph(pos, graph.C, adj, graph.scene)


def bfs_tree(graph: FormationGraph, root: int = 0) -> list:
    """Parent list of a breadth-first tree; unreachable nodes keep ``None``."""
    parent = [None] * graph.n_agents
    parent[root] = -1
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if parent[v] is None:
                parent[v] = u
                queue.append(v)
    return parent


def is_connected(graph: FormationGraph) -> bool:
    return all(p is not None for p in bfs_tree(graph))


@dataclass(frozen=True)
class FlowVector:
    """Integer link flows; ``rho[i, j]`` is the flow from agent i to follower j.

    Column 0 must stay zero: the leader never receives flow.
    """

    rho: np.ndarray

    @property
    def n_followers(self) -> int:
        return len(self.rho) - 1

    def to_list(self):
        return self.rho.astype(int).tolist()


def net_flows(rho: np.ndarray) -> np.ndarray:
    """Net inflow at every follower: inflow from anyone minus outflow to followers."""
    return rho[:, 1:].sum(axis=0) - rho[1:, 1:].sum(axis=1)


def verify_flow(flow: FlowVector, graph: FormationGraph) -> bool:
    rho = np.asarray(flow.rho)
    n = graph.n_agents
    if rho.shape != (n, n):
        raise DimensionMismatch(f"flow has shape {rho.shape}, graph has {n} agents")
    N = n - 1
    if not np.all(rho == np.round(rho)) or np.any(rho < 0):
        return False
    if np.any(rho[:, 0] != 0):
        return False
    if np.any(np.diag(rho) != 0):
        return False
    if np.any(rho > N):
        return False
    if np.any((rho > 0) & ~graph.adjacency):
        return False
    if np.any(net_flows(rho) != 1):
        return False
    # implied by the conservation constraints; kept as a sanity check
    return int(rho[0, 1:].sum()) == N


def _tree_children(parent: Sequence) -> list:
    n = len(parent)
    if n == 0 or parent[0] not in (-1, None):
        raise NotATree("node 0 must be the root")
    children = [[] for _ in range(n)]
    for j in range(1, n):
        p = parent[j]
        if p is None or not 0 <= p < n or p == j:
            raise NotATree(f"node {j} has invalid parent {p}")
        children[p].append(j)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in children[u]:
            seen.add(v)
            queue.append(v)
    if len(seen) != n:
        raise NotATree("parent map contains a cycle")
    return children


def flow_from_tree(parent: Sequence) -> FlowVector:
    """Flow certificate for a spanning tree rooted at the leader.

    Each follower receives one unit for itself plus one per descendant.
    """
    children = _tree_children(parent)
    n = len(parent)
    size = [1] * n

    def post(u):
        for v in children[u]:
            post(v)
            size[u] += size[v]

    post(0)
    rho = np.zeros((n, n), dtype=int)
    for j in range(1, n):
        rho[parent[j], j] = size[j]
    return FlowVector(rho)


@dataclass(frozen=True)
class PathStructure:
    parent: tuple
    shortest_path: dict
    dist_to_leader: dict
    downstream: dict
    upstream: dict
    q_order: tuple


def _dijkstra(graph: FormationGraph):
    n = graph.n_agents
    dist = [math.inf] * n
    pred = [None] * n
    done = [False] * n
    dist[0] = 0.0
    pred[0] = -1
    for _ in range(n):
        u = -1
        for v in range(n):
            if not done[v] and dist[v] < math.inf and (u < 0 or dist[v] < dist[u]):
                u = v
        if u < 0:
            break
        done[u] = True
        for v in graph.neighbors(u):
            v = int(v)
            if done[v]:
                continue
            nd = dist[u] + graph.edge_length(u, v)
            if nd < dist[v] - TIE_TOL or (abs(nd - dist[v]) <= TIE_TOL and u < pred[v]):
                dist[v] = nd
                pred[v] = u
    return dist, pred


def shortest_paths(graph: FormationGraph) -> PathStructure:
    """Euclidean shortest paths to the leader, ties broken by smaller predecessor."""
    dist, pred = _dijkstra(graph)
    n = graph.n_agents
    if any(p is None for p in pred):
        raise Disconnected("formation graph is not connected")
    paths = {}
    for i in range(1, n):
        path = [i]
        while path[-1] != 0:
            path.append(pred[path[-1]])
        paths[i] = tuple(reversed(path))
    # path lengths are summed along the path so they match the definition exactly
    psi = {i: sum(graph.edge_length(a, b) for a, b in zip(p, p[1:])) for i, p in paths.items()}
    down, up = _up_down(paths, n)
    return PathStructure(tuple(pred), paths, psi, down, up, tuple(_q_order(paths, n)))


def _up_down(paths: dict, n: int):
    down = {i: set() for i in range(n)}
    for j, path in paths.items():
        for a, b in zip(path, path[1:]):
            down[a].add(b)
    up = {i: {j for j in range(n) if i in down[j]} for i in range(n)}
    return (
        {i: frozenset(s) for i, s in down.items()},
        {i: frozenset(s) for i, s in up.items()},
    )


def up_down_sets(paths: PathStructure):
    return paths.downstream, paths.upstream


def _q_order(paths: dict, n: int) -> list:
    q = []
    present = set()
    for j in range(1, n):
        for a in paths[j]:
            if a not in present:
                present.add(a)
                q.append(a)
    if not q:
        q = [0]
    return q


def q_ordering(paths: PathStructure) -> list:
    return list(paths.q_order)


def satisfies_upstream_order(paths: PathStructure) -> bool:
    """Every follower in Q has an upstream agent placed earlier in Q."""
    q = paths.q_order
    if not q or q[0] != 0:
        return False
    rank = {a: k for k, a in enumerate(q)}
    return all(any(rank[u] < rank[a] for u in paths.upstream[a]) for a in q[1:])
