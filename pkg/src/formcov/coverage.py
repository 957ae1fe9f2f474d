"""Sensing model, joint detection probability and the coverage objective.

The objective is integrated with the midpoint rule on a uniform lattice over
the mission rectangle; cells whose sample point falls strictly inside an
obstacle carry zero weight.  Each agent only touches the window of cells
within its sensing radius, which keeps evaluation cheap enough to be called
inside line searches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import Scene, feasible_mask, segment_blocked, visibility_mask

LINEAR_DECAY = "linear_decay"
SMOOTH_POLY = "smooth_poly"


@dataclass(frozen=True)
class SensingModel:
    delta: float
    form: str = LINEAR_DECAY
    peak: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("sensing radius must be positive")
        if self.form not in (LINEAR_DECAY, SMOOTH_POLY):
            raise ValueError(f"unknown sensing form {self.form!r}")
        if not 0.0 < self.peak <= 1.0:
            raise ValueError("peak must lie in (0, 1]")

    def prob(self, d):
        """Detection probability as a function of distance; zero for ``d >= delta``."""
        d = np.asarray(d, dtype=float)
        if self.form == LINEAR_DECAY:
            p = self.peak * (1.0 - d / self.delta)
        else:
            p = self.peak * (1.0 - (d / self.delta) ** 2) ** 2
        return np.where(d < self.delta, p, 0.0)


@dataclass(frozen=True)
class EventDensity:
    kind: str = "uniform"
    value: float = 1.0

    def __post_init__(self):
        if self.kind != "uniform":
            raise ValueError("only uniform event densities are supported")
        if self.value < 0:
            raise ValueError("event density must be nonnegative")

    def __call__(self, pts):
        return np.full(np.shape(pts)[:-1], self.value)


class IntegrationGrid:
    """Midpoint lattice over the mission rectangle with a feasibility mask.

    The last row and column are clipped to the rectangle; their sample points
    sit at the centre of the clipped cell and carry the clipped area.
    """

    def __init__(self, scene: Scene, cell_size: float):
        if not cell_size > 0:
            raise ValueError("cell_size must be positive")
        r = scene.rect
        self.cell_size = float(cell_size)
        self.x_edges = _edges(r.xmin, r.xmax, cell_size)
        self.y_edges = _edges(r.ymin, r.ymax, cell_size)
        self.xs = 0.5 * (self.x_edges[:-1] + self.x_edges[1:])
        self.ys = 0.5 * (self.y_edges[:-1] + self.y_edges[1:])
        wx = np.diff(self.x_edges)
        wy = np.diff(self.y_edges)
        self.area = np.outer(wy, wx)
        gx, gy = np.meshgrid(self.xs, self.ys)
        self.points = np.stack([gx, gy], axis=-1)
        self.mask = feasible_mask(self.points.reshape(-1, 2), scene).reshape(self.area.shape)

    @property
    def shape(self):
        return self.area.shape

    def window(self, center, radius: float):
        """Index slices of cells whose sample point may lie within ``radius``."""
        cx, cy = float(center[0]), float(center[1])
        i0 = int(np.searchsorted(self.xs, cx - radius, side="left"))
        i1 = int(np.searchsorted(self.xs, cx + radius, side="right"))
        j0 = int(np.searchsorted(self.ys, cy - radius, side="left"))
        j1 = int(np.searchsorted(self.ys, cy + radius, side="right"))
        return slice(j0, j1), slice(i0, i1)


def _edges(lo: float, hi: float, h: float) -> np.ndarray:
    n = int(math.ceil((hi - lo) / h - 1e-12))
    e = lo + h * np.arange(n + 1)
    e[-1] = hi
    return e


def _disjoint(wa, wb) -> bool:
    return wa[0].stop <= wb[0].start or wb[0].stop <= wa[0].start or wa[1].stop <= wb[1].start or wb[1].stop <= wa[1].start


def _overlap(wa, wb):
    """Slices of ``wb``'s window expressed inside ``wa`` and inside ``wb``."""
    r0, r1 = max(wa[0].start, wb[0].start), min(wa[0].stop, wb[0].stop)
    c0, c1 = max(wa[1].start, wb[1].start), min(wa[1].stop, wb[1].stop)
    in_a = (slice(r0 - wa[0].start, r1 - wa[0].start), slice(c0 - wa[1].start, c1 - wa[1].start))
    in_b = (slice(r0 - wb[0].start, r1 - wb[0].start), slice(c0 - wb[1].start, c1 - wb[1].start))
    return in_a, in_b


class CoverageModel:
    """Bundles scene, sensing model, density and quadrature grid.

    ``objective`` and ``gradient`` are the workhorses used by the optimizers;
    the module-level functions wrap them with the plain call signatures.
    """

    def __init__(
        self,
        scene: Scene,
        sensing: SensingModel,
        density: Optional[EventDensity] = None,
        cell_size: Optional[float] = None,
        occlusion: bool = False,
        grid: Optional[IntegrationGrid] = None,
        fd_step: Optional[float] = None,
    ):
        self.scene = scene
        self.sensing = sensing
        self.density = density or EventDensity()
        self.occlusion = occlusion
        self.grid = grid or IntegrationGrid(scene, cell_size or sensing.delta / 20.0)
        self.weight = self.grid.area * self.density(self.grid.points) * self.grid.mask
        self.fd_step = fd_step or 1e-3 * sensing.delta

    def _agent_window(self, s):
        """Window slices and per-cell detection probability for one agent."""
        win = self.grid.window(s, self.sensing.delta)
        pts = self.grid.points[win]
        d = np.sqrt((pts[..., 0] - s[0]) ** 2 + (pts[..., 1] - s[1]) ** 2)
        p = self.sensing.prob(d)
        if self.occlusion and self.scene.obstacles and p.size:
            vis = visibility_mask(s, pts.reshape(-1, 2), self.scene).reshape(p.shape)
            p = p * vis
        return win, p

    def miss_field(self, positions) -> np.ndarray:
        """Product of per-agent miss probabilities over the whole grid."""
        m = np.ones(self.grid.shape)
        for s in np.atleast_2d(positions):
            win, p = self._agent_window(np.asarray(s, dtype=float))
            m[win] *= 1.0 - p
        return m

    def joint_field(self, positions) -> np.ndarray:
        if len(positions) == 0:
            return np.zeros(self.grid.shape)
        return 1.0 - self.miss_field(positions)

    def objective(self, positions) -> float:
        if len(positions) == 0:
            return 0.0
        return float(np.sum(self.weight * (1.0 - self.miss_field(positions))))

    def _others_miss(self, positions, i, win):
        """Miss product of all agents except ``i`` restricted to ``win``."""
        shape = (win[0].stop - win[0].start, win[1].stop - win[1].start)
        m = np.ones(shape)
        for j, s in enumerate(positions):
            if j == i:
                continue
            wj, pj = self._agent_window(np.asarray(s, dtype=float))
            if _disjoint(win, wj):
                continue
            in_i, in_j = _overlap(win, wj)
            m[in_i] *= 1.0 - pj[in_j]
        return m

    def gradient(self, positions, i: int) -> np.ndarray:
        positions = np.asarray(positions, dtype=float)
        if self.sensing.form == SMOOTH_POLY:
            return self._analytic_gradient(positions, i)
        return self.fd_gradient(positions, i, self.fd_step)

    def _analytic_gradient(self, positions, i):
        s = positions[i]
        delta = self.sensing.delta
        win = self.grid.window(s, delta)
        pts = self.grid.points[win]
        diff = s - pts
        d2 = np.sum(diff**2, axis=-1)
        u = d2 / delta**2
        # d/ds of peak*(1 - u)^2 with u = |s - x|^2 / delta^2
        coef = np.where(u < 1.0, -4.0 * self.sensing.peak * (1.0 - u) / delta**2, 0.0)
        if self.occlusion and self.scene.obstacles and coef.size:
            coef = coef * visibility_mask(s, pts.reshape(-1, 2), self.scene).reshape(coef.shape)
        w = self.weight[win] * self._others_miss(positions, i, win) * coef
        return np.array([np.sum(w * diff[..., 0]), np.sum(w * diff[..., 1])])

    def fd_gradient(self, positions, i: int, h: float) -> np.ndarray:
        """Central finite-difference gradient with respect to agent ``i``."""
        positions = np.array(positions, dtype=float)
        g = np.zeros(2)
        for k in range(2):
            plus = positions.copy()
            minus = positions.copy()
            plus[i, k] += h
            minus[i, k] -= h
            g[k] = (self.objective(plus) - self.objective(minus)) / (2 * h)
        return g


def detection_prob(x, s_i, model: SensingModel, scene: Optional[Scene] = None, occlusion: bool = False) -> float:
    x = np.asarray(x, dtype=float)
    s_i = np.asarray(s_i, dtype=float)
    p = float(model.prob(math.hypot(*(x - s_i))))
    if p > 0.0 and occlusion and scene is not None and segment_blocked(s_i, x, scene):
        return 0.0
    return p


def joint_detection(x, s: Sequence, model: SensingModel, scene: Optional[Scene] = None, occlusion: bool = False) -> float:
    miss = 1.0
    for si in s:
        miss *= 1.0 - detection_prob(x, si, model, scene, occlusion)
    return 1.0 - miss


def coverage_objective(s, grid: IntegrationGrid, density: EventDensity, model: SensingModel, scene: Scene, occlusion: bool = False) -> float:
    return CoverageModel(scene, model, density, occlusion=occlusion, grid=grid).objective(np.asarray(s, dtype=float).reshape(-1, 2))


def coverage_gradient(s, i: int, grid: IntegrationGrid, density: EventDensity, model: SensingModel, scene: Scene, occlusion: bool = False) -> np.ndarray:
    return CoverageModel(scene, model, density, occlusion=occlusion, grid=grid).gradient(s, i)
