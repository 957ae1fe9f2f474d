"""SVG snapshots and on-disk mission outputs."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .connectivity import build_graph
from .coverage import CoverageModel
from .errors import IoError, ValidationError
from .sim import MissionConfig, MissionLog

FORMATS = ("json_log", "svg", "csv_trace")

# joint detection probability thresholds and their colours
COLOR_STOPS = (
    (0.0, (255, 255, 255)),
    (0.25, (204, 235, 197)),
    (0.5, (116, 196, 118)),
    (1.0, (0, 109, 44)),
)


@dataclass
class RunManifest:
    config_path: str = ""
    out_dir: str = "out"
    snapshot_times: list = field(default_factory=list)
    formats: tuple = ("json_log", "csv_trace")


def coverage_color(p: float) -> str:
    p = min(1.0, max(0.0, float(p)))
    for (p0, c0), (p1, c1) in zip(COLOR_STOPS, COLOR_STOPS[1:]):
        if p <= p1:
            w = (p - p0) / (p1 - p0)
            rgb = [round(a + w * (b - a)) for a, b in zip(c0, c1)]
            return "#%02x%02x%02x" % tuple(rgb)
    return "#%02x%02x%02x" % COLOR_STOPS[-1][1]


def _f(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def render_svg(positions, config: MissionConfig, model: CoverageModel = None, t=None) -> str:
    """One snapshot: heat layer, obstacles, trajectory, links, sensing disks, agents."""
    pos = np.asarray(positions, dtype=float)
    r = config.scene.rect
    flip = r.ymin + r.ymax

    def xy(p):
        return _f(p[0]), _f(flip - p[1])

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="{_f(r.xmin)} {_f(r.ymin)} {_f(r.width)} {_f(r.height)}" '
        f'width="{_f(r.width * 12)}" height="{_f(r.height * 12)}">',
    ]
    if t is not None:
        out.append(f"<title>t={t}</title>")
    out.append(f'<rect x="{_f(r.xmin)}" y="{_f(r.ymin)}" width="{_f(r.width)}" height="{_f(r.height)}" fill="white" stroke="black" stroke-width="0.2"/>')

    if model is not None:
        field_ = model.joint_field(pos)
        g = model.grid
        k = max(1, round(1.0 / g.cell_size))
        out.append('<g class="coverage" stroke="none">')
        ny, nx = field_.shape
        for j in range(0, ny, k):
            for i in range(0, nx, k):
                p = float(field_[j : j + k, i : i + k].mean())
                if p < 0.01:
                    continue
                x0, x1 = g.x_edges[i], g.x_edges[min(i + k, nx)]
                y0, y1 = g.y_edges[j], g.y_edges[min(j + k, ny)]
                out.append(
                    f'<rect x="{_f(x0)}" y="{_f(flip - y1)}" width="{_f(x1 - x0)}" height="{_f(y1 - y0)}" fill="{coverage_color(p)}"/>'
                )
        out.append("</g>")

    out.append('<g class="obstacles" fill="#555555" stroke="black" stroke-width="0.15">')
    for poly in config.scene.obstacles:
        pts = " ".join(",".join(xy(v)) for v in poly.vertices)
        out.append(f'<polygon class="obstacle" points="{pts}"/>')
    out.append("</g>")

    traj = " ".join(",".join(xy(p)) for p in config.trajectory)
    out.append(f'<polyline class="trajectory" points="{traj}" fill="none" stroke="purple" stroke-width="0.2" stroke-dasharray="0.8,0.6"/>')

    graph = build_graph(pos, config.C, config.scene)
    out.append('<g class="edges" stroke="#1f4e9c" stroke-width="0.2">')
    n = len(pos)
    for a in range(n):
        for b in range(a + 1, n):
            if graph.adjacency[a, b]:
                (x1, y1), (x2, y2) = xy(pos[a]), xy(pos[b])
                out.append(f'<line class="edge" x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>')
    out.append("</g>")

    delta = config.sensing.delta
    out.append('<g class="sensing" fill="none" stroke="#2c7bb6" stroke-width="0.08" stroke-dasharray="0.4,0.4">')
    for p in pos:
        cx, cy = xy(p)
        out.append(f'<circle cx="{cx}" cy="{cy}" r="{_f(delta)}"/>')
    out.append("</g>")

    out.append('<g class="agents" font-family="sans-serif" font-size="1.4" text-anchor="middle">')
    lx, ly = float(pos[0][0]), flip - float(pos[0][1])
    tri = [(lx, ly - 1.1), (lx - 1.0, ly + 0.7), (lx + 1.0, ly + 0.7)]
    out.append(
        f'<polygon class="agent leader" points="{" ".join(_f(a) + "," + _f(b) for a, b in tri)}" fill="#d7301f" stroke="black" stroke-width="0.1"/>'
    )
    out.append(f'<text x="{_f(lx)}" y="{_f(ly + 2.3)}">L</text>')
    for i in range(1, n):
        cx, cy = xy(pos[i])
        out.append(f'<circle class="agent follower" cx="{cx}" cy="{cy}" r="0.9" fill="#1f4e9c" stroke="black" stroke-width="0.1"/>')
        out.append(f'<text x="{cx}" y="{_f(float(cy) + 0.5)}" fill="white">{escape(str(i))}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def csv_trace(log: MissionLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "state", "H"])
    for rec in log.records:
        w.writerow([rec["t"], rec["state"], repr(float(rec["H"]))])
    return buf.getvalue()


def emit_outputs(log: MissionLog, manifest: RunManifest, config: MissionConfig) -> list:
    """Write the requested outputs and return the list of created paths."""
    out = Path(manifest.out_dir)
    written = []
    for t in manifest.snapshot_times:
        if not 0 <= t < len(log.records):
            raise ValidationError("snapshots", f"time {t} outside [0, {len(log.records) - 1}]")
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "json_log" in manifest.formats:
            p = out / "mission_log.json"
            p.write_text(log.to_json(), encoding="utf-8")
            written.append(p)
        if "csv_trace" in manifest.formats:
            p = out / "trace.csv"
            p.write_text(csv_trace(log), encoding="utf-8")
            written.append(p)
        if "svg" in manifest.formats and manifest.snapshot_times:
            model = CoverageModel(config.scene, config.sensing, config.density, config.grid_cell, config.occlusion)
            for t in manifest.snapshot_times:
                p = out / f"snap_t{t}.svg"
                p.write_text(render_svg(log.positions_at(t), config, model, t), encoding="utf-8")
                written.append(p)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return written
