"""Command-line front end: ``formcov run|solve|verify|render``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import config_from_dict, config_to_dict, load_config_dict
from .connectivity import FlowVector
from .errors import IoError, ParseError, ProjectionFailed, ValidationError
from .formation_opt import solve_initial_formation, verify_solution
from .render import FORMATS, RunManifest, emit_outputs
from .sim import MissionLog, run

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_VALIDATION = 2
EXIT_PROJECTION = 3
EXIT_IO = 4

log = logging.getLogger("formcov")


def _int_list(text: str) -> list:
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _formats(text: str) -> tuple:
    fs = tuple(v.strip() for v in text.split(",") if v.strip())
    bad = [f for f in fs if f not in FORMATS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return fs


def _load(path, seed=None):
    try:
        d = load_config_dict(path)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if seed is not None and isinstance(d, dict):
        d["seed"] = seed
    cfg = config_from_dict(d)
    return cfg, config_to_dict(cfg)


def cmd_run(args) -> int:
    cfg, cfg_dict = _load(args.config, args.seed)
    mission_log = run(cfg, config_dict=cfg_dict)
    manifest = RunManifest(args.config, args.out, args.snapshots, args.formats)
    for p in emit_outputs(mission_log, manifest, cfg):
        print(p)
    s = mission_log.summary
    print(f"final H={s['final_H']:.4f} projections={s['projection_count']} reconfigurations={s['reconfiguration_count']}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg, _ = _load(args.config, args.seed)
    sol = solve_initial_formation(cfg.problem(), restarts=args.restarts or cfg.restarts, seed=cfg.seed)
    doc = {
        "positions": sol.positions.tolist(),
        "flow": sol.flow.to_list(),
        "objective": sol.objective,
        "parents": list(sol.parent),
        "restarts": sol.restarts_used,
    }
    text = json.dumps(doc, indent=1) + "\n"
    if args.out:
        try:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(str(exc)) from exc
        print(args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg, _ = _load(args.config)
    try:
        doc = json.loads(Path(args.solution).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    try:
        positions = np.asarray(doc["positions"], dtype=float)
        flow = FlowVector(np.asarray(doc["flow"], dtype=int))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError("solution", f"malformed solution document: {exc}") from None
    problem = cfg.problem()
    problem.leader_pos = positions[0]
    ok = verify_solution(positions, flow, problem)
    print("valid" if ok else "invalid")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_render(args) -> int:
    try:
        doc = json.loads(Path(args.log).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    mission_log = MissionLog.from_dict(doc)
    cfg = config_from_dict(mission_log.config)
    times = args.snapshots or list(range(len(mission_log.records)))
    for p in emit_outputs(mission_log, RunManifest(args.log, args.out, times, ("svg",)), cfg):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="formcov", description="Leader-follower coverage formations with obstacles.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a full mission")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--snapshots", type=_int_list, default=[])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--formats", type=_formats, default=FORMATS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("solve", help="compute the initial formation only")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check a positions+flow file against the formation constraints")
    p.add_argument("--config", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("render", help="re-render SVG snapshots from a mission log")
    p.add_argument("--log", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--snapshots", type=_int_list, default=[])
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ProjectionFailed as exc:
        print(f"halted: {exc}", file=sys.stderr)
        return EXIT_PROJECTION
    except IoError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
