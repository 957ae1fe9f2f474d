"""JSON mission configuration: parsing, validation and serialization.

Schema (version 1)::

    {
      "schema": 1,
      "mission_rect": [xmin, ymin, xmax, ymax],
      "obstacles": [[[x, y], ...], ...],
      "trajectory": [[x, y], ...]  or  {"start": [x, y], "step": [dx, dy], "steps": K},
      "n_followers": 8,
      "C": 10.0,
      "delta": 8.0,
      "sensing": {"form": "linear_decay" | "smooth_poly", "peak": 1.0},
      "density": {"kind": "uniform", "value": 1.0},
      "side_constraint": null | {"normal": [-1, 0], "offset": 0.0},
      "cpa": null | {"step_init": ..., "step_min": ..., "max_sweeps": ..., "tol": ...},
      "grid_cell": null | h,
      "seed": 0,
      "occlusion": false,
      "restarts": 16
    }
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .coverage import EventDensity, SensingModel
from .cpa import CpaConfig
from .errors import ParseError, ValidationError
from .formation_opt import SideConstraint
from .geometry import Polygon, Rect, Scene, point_in_feasible
from .sim import MissionConfig

SCHEMA_VERSION = 1
REQUIRED = ("mission_rect", "obstacles", "trajectory", "n_followers", "C", "delta", "sensing", "density", "seed")


def _number(d, key, positive=False):
    v = d.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValidationError(key, "must be a finite number")
    if positive and not v > 0:
        raise ValidationError(key, "must be positive")
    return float(v)


def _point(v, name):
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)):
        raise ValidationError(name, "expected [x, y]")
    if not all(math.isfinite(c) for c in v):
        raise ValidationError(name, "coordinates must be finite")
    return [float(v[0]), float(v[1])]


def _trajectory(v):
    if isinstance(v, dict):
        try:
            start = np.array(_point(v["start"], "trajectory.start"))
            step = np.array(_point(v["step"], "trajectory.step"))
            steps = v["steps"]
        except KeyError as exc:
            raise ValidationError("trajectory", f"missing {exc.args[0]}") from None
        if not isinstance(steps, int) or isinstance(steps, bool) or steps < 1:
            raise ValidationError("trajectory.steps", "must be a positive integer")
        return start + np.arange(steps + 1)[:, None] * step
    if not isinstance(v, list):
        raise ValidationError("trajectory", "expected a list of waypoints")
    return np.array([_point(p, f"trajectory[{k}]") for k, p in enumerate(v)])


def config_from_dict(d: dict) -> MissionConfig:
    if not isinstance(d, dict):
        raise ValidationError("<root>", "expected a JSON object")
    if d.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValidationError("schema", f"unsupported schema {d.get('schema')!r}")
    for key in REQUIRED:
        if key not in d:
            raise ValidationError(key, "missing")

    r = d["mission_rect"]
    if not (isinstance(r, list) and len(r) == 4 and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in r)):
        raise ValidationError("mission_rect", "expected [xmin, ymin, xmax, ymax]")
    try:
        rect = Rect(*map(float, r))
    except ValueError as exc:
        raise ValidationError("mission_rect", str(exc)) from None

    if not isinstance(d["obstacles"], list):
        raise ValidationError("obstacles", "expected a list of polygons")
    obstacles = []
    for k, poly in enumerate(d["obstacles"]):
        name = f"obstacles[{k}]"
        if not isinstance(poly, list):
            raise ValidationError(name, "expected a vertex list")
        verts = [_point(p, name) for p in poly]
        try:
            obstacles.append(Polygon(verts))
        except ValueError as exc:
            raise ValidationError(name, str(exc)) from None
    scene = Scene(rect, obstacles)
    scene.validate()

    n = d["n_followers"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValidationError("n_followers", "must be an integer >= 1")
    C = _number(d, "C", positive=True)
    delta = _number(d, "delta", positive=True)

    s = d["sensing"]
    if not isinstance(s, dict):
        raise ValidationError("sensing", "expected an object")
    try:
        sensing = SensingModel(delta, s.get("form", "linear_decay"), float(s.get("peak", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ValidationError("sensing", str(exc)) from None

    dens = d["density"]
    if not isinstance(dens, dict):
        raise ValidationError("density", "expected an object")
    try:
        density = EventDensity(dens.get("kind", "uniform"), float(dens.get("value", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ValidationError("density", str(exc)) from None

    side = d.get("side_constraint")
    if side is not None:
        if not isinstance(side, dict):
            raise ValidationError("side_constraint", "expected an object or null")
        try:
            side = SideConstraint(tuple(_point(side.get("normal", [-1.0, 0.0]), "side_constraint.normal")), float(side.get("offset", 0.0)))
        except ValueError as exc:
            raise ValidationError("side_constraint", str(exc)) from None

    cpa = d.get("cpa")
    if cpa is not None:
        if not isinstance(cpa, dict):
            raise ValidationError("cpa", "expected an object or null")
        base = CpaConfig.defaults(delta, rect.area)
        try:
            cpa = CpaConfig(
                float(cpa.get("step_init", base.step_init)),
                float(cpa.get("step_min", base.step_min)),
                int(cpa.get("max_sweeps", base.max_sweeps)),
                float(cpa.get("tol", base.tol)),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError("cpa", str(exc)) from None

    grid_cell = d.get("grid_cell")
    if grid_cell is not None:
        grid_cell = _number(d, "grid_cell", positive=True)

    seed = d["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError("seed", "must be a nonnegative integer")
    occlusion = d.get("occlusion", False)
    if not isinstance(occlusion, bool):
        raise ValidationError("occlusion", "must be true or false")
    restarts = d.get("restarts", 16)
    if not isinstance(restarts, int) or isinstance(restarts, bool) or restarts < 1:
        raise ValidationError("restarts", "must be an integer >= 1")

    traj = _trajectory(d["trajectory"])
    if len(traj) < 2:
        raise ValidationError("trajectory", "needs at least two waypoints")
    for k, p in enumerate(traj):
        if not point_in_feasible(p, scene):
            raise ValidationError(f"trajectory[{k}]", "waypoint is not feasible")
    steps = np.hypot(*np.diff(traj, axis=0).T)
    if np.any(steps > C):
        k = int(np.argmax(steps > C))
        raise ValidationError(f"trajectory[{k + 1}]", "leader step exceeds the connection range")

    return MissionConfig(
        scene=scene,
        trajectory=traj,
        n_followers=n,
        C=C,
        sensing=sensing,
        density=density,
        side_constraint=side,
        cpa=cpa,
        grid_cell=grid_cell,
        seed=seed,
        occlusion=occlusion,
        restarts=restarts,
    )


def parse_config_text(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None


def load_config(path) -> MissionConfig:
    return config_from_dict(load_config_dict(path))


def load_config_dict(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config_text(text)


def config_to_dict(cfg: MissionConfig) -> dict:
    r = cfg.scene.rect
    side = cfg.side_constraint
    return {
        "schema": SCHEMA_VERSION,
        "mission_rect": [r.xmin, r.ymin, r.xmax, r.ymax],
        "obstacles": [p.to_list() for p in cfg.scene.obstacles],
        "trajectory": cfg.trajectory.tolist(),
        "n_followers": cfg.n_followers,
        "C": cfg.C,
        "delta": cfg.sensing.delta,
        "sensing": {"form": cfg.sensing.form, "peak": cfg.sensing.peak},
        "density": {"kind": cfg.density.kind, "value": cfg.density.value},
        "side_constraint": None if side is None else {"normal": list(side.normal), "offset": side.offset},
        "cpa": {
            "step_init": cfg.cpa.step_init,
            "step_min": cfg.cpa.step_min,
            "max_sweeps": cfg.cpa.max_sweeps,
            "tol": cfg.cpa.tol,
        },
        "grid_cell": cfg.grid_cell,
        "seed": cfg.seed,
        "occlusion": cfg.occlusion,
        "restarts": cfg.restarts,
    }
