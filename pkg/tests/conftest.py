import math

import numpy as np
import pytest

from formcov.geometry import Polygon, Rect, Scene, connected_pair, point_in_feasible, snap


def square(x0, y0, x1, y1):
    return Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def random_scene(rng, n_obstacles=None, width=60.0, height=50.0, size=(3.0, 12.0)):
    """Rectangle with 1-3 pairwise disjoint axis-aligned rectangular obstacles."""
    rect = Rect(0.0, 0.0, width, height)
    n = rng.integers(1, 4) if n_obstacles is None else n_obstacles
    obstacles = []
    for _ in range(200):
        if len(obstacles) == n:
            break
        w, h = rng.uniform(*size, size=2)
        x0 = rng.uniform(1.0, width - w - 1.0)
        y0 = rng.uniform(1.0, height - h - 1.0)
        cand = square(x0, y0, x0 + w, y0 + h)
        if all(
            cand.hi[0] < o.lo[0] - 0.5 or o.hi[0] < cand.lo[0] - 0.5 or cand.hi[1] < o.lo[1] - 0.5 or o.hi[1] < cand.lo[1] - 0.5
            for o in obstacles
        ):
            obstacles.append(cand)
    scene = Scene(rect, obstacles)
    scene.validate()
    return scene


def random_feasible_point(rng, scene, center=None, radius=None, tries=10000):
    r = scene.rect
    for _ in range(tries):
        if center is None:
            p = np.array([rng.uniform(r.xmin, r.xmax), rng.uniform(r.ymin, r.ymax)])
        else:
            rho = radius * math.sqrt(rng.random())
            th = 2 * math.pi * rng.random()
            p = np.asarray(center) + rho * np.array([math.cos(th), math.sin(th)])
        p = snap(p)
        if point_in_feasible(p, scene):
            return p
    raise RuntimeError("no feasible point found")


def random_connected_formation(rng, scene, n_agents, C, leader=None):
    """Grow a connected formation by attaching each agent to a random earlier one."""
    pos = [random_feasible_point(rng, scene) if leader is None else snap(leader)]
    while len(pos) < n_agents:
        a = pos[rng.integers(len(pos))]
        for _ in range(500):
            p = random_feasible_point(rng, scene, a, C)
            if connected_pair(p, a, C, scene):
                pos.append(p)
                break
    return np.array(pos)


def random_connected_adjacency(rng, n, p_extra=0.3):
    adj = np.zeros((n, n), dtype=bool)
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = order[k], order[rng.integers(k)]
        adj[a, b] = adj[b, a] = True
    extra = np.triu(rng.random((n, n)) < p_extra, 1)
    adj |= extra | extra.T
    np.fill_diagonal(adj, False)
    return adj


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
