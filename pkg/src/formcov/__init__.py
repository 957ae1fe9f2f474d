"""Optimal leader-follower formations for coverage in mission spaces with obstacles."""

from .config import config_from_dict, config_to_dict, load_config
from .connectivity import (
    FlowVector,
    FormationGraph,
    PathStructure,
    build_graph,
    flow_from_tree,
    is_connected,
    q_ordering,
    shortest_paths,
    up_down_sets,
    verify_flow,
)
from .coverage import CoverageModel, EventDensity, IntegrationGrid, SensingModel
from .cpa import CpaConfig, cpa_run, cpa_step
from .formation_opt import (
    FormationProblem,
    FormationSolution,
    SideConstraint,
    solve_initial_formation,
    star_formation,
    verify_solution,
)
from .geometry import HalfPlane, Polygon, Rect, Scene
from .reconfigure import ReconfigInput, construct_connected_graph
from .sim import MissionConfig, MissionLog, detect_state, run

__version__ = "0.1.0"
