import numpy as np
import pytest

from conftest import random_scene, square
from formcov.connectivity import build_graph, flow_from_tree, is_connected
from formcov.coverage import SensingModel
from formcov.errors import NoFeasibleStart
from formcov.formation_opt import (
    FormationProblem,
    SideConstraint,
    solve_initial_formation,
    spanning_tree,
    star_formation,
    verify_solution,
)
from formcov.geometry import Rect, Scene

DELTA = 4.0
EMPTY = Scene(Rect(0, 0, 60, 60), [])
LIN = SensingModel(DELTA, "linear_decay", 1.0)


def chain_problem(n=2, C=10.0, scene=EMPTY, side=None):
    return FormationProblem(scene, np.array([20.0, 30.0]), n, C, LIN, side_constraint=side)


def chain_positions(n, C):
    return np.array([[20.0 + C * k, 30.0] for k in range(n + 1)])


def sweep_oracle(C, n=400):
    """H(d) for one follower at separation d along +x, d in [0, C]."""
    prob = chain_problem(1, C)
    ds = np.linspace(0.0, C, n + 1)
    Hs = np.array([prob.coverage.objective(np.array([[20.0, 30.0], [20.0 + d, 30.0]])) for d in ds])
    return ds, Hs


class TestVerifySolution:
    def test_chain_at_spacing_c(self):
        prob = chain_problem(2, 10.0)
        assert verify_solution(chain_positions(2, 10.0), flow_from_tree([-1, 0, 1]), prob)

    def test_follower_beyond_range(self):
        prob = chain_problem(2, 10.0)
        pos = chain_positions(2, 10.0)
        pos[2, 0] += 1.0
        assert not verify_solution(pos, flow_from_tree([-1, 0, 1]), prob)

    def test_follower_inside_obstacle(self):
        scene = Scene(Rect(0, 0, 60, 60), [square(27, 28, 33, 32)])
        prob = chain_problem(2, 10.0, scene)
        pos = np.array([[20.0, 30.0], [26.0, 36.0], [30.0, 30.0]])
        assert not verify_solution(pos, flow_from_tree([-1, 0, 1]), prob)

    def test_follower_outside_halfplane(self):
        prob = chain_problem(1, 10.0, side=SideConstraint())
        assert not verify_solution(np.array([[20.0, 30.0], [25.0, 30.0]]), flow_from_tree([-1, 0]), prob)
        assert verify_solution(np.array([[20.0, 30.0], [15.0, 30.0]]), flow_from_tree([-1, 0]), prob)

    def test_wrong_dimensions(self):
        prob = chain_problem(2, 10.0)
        assert not verify_solution(chain_positions(1, 10.0), flow_from_tree([-1, 0]), prob)


class TestProblem:
    def test_invalid(self):
        with pytest.raises(ValueError):
            chain_problem(0)
        with pytest.raises(ValueError):
            FormationProblem(EMPTY, np.array([-1.0, 0.0]), 1, 10.0, LIN)

    def test_side_constraint_normalized(self):
        sc = SideConstraint((-2.0, 0.0), 0.0)
        assert sc.normal == (-1.0, 0.0)
        hp = sc.at(np.array([5.0, 0.0]))
        assert hp.contains(np.array([4.0, 3.0])) and not hp.contains(np.array([6.0, 0.0]))

    def test_no_feasible_start(self):
        # half-plane facing the wall: nothing admissible
        scene = Scene(Rect(0, 0, 60, 60), [])
        prob = FormationProblem(scene, np.array([0.0, 30.0]), 2, 10.0, LIN, side_constraint=SideConstraint((-1.0, 0.0), 0.5))
        with pytest.raises(NoFeasibleStart):
            solve_initial_formation(prob, restarts=2)


def test_spanning_tree_uses_only_links():
    scene = Scene(Rect(0, 0, 60, 60), [square(24, 25, 26, 35)])
    pos = np.array([[20.0, 30.0], [30.0, 30.0], [25.0, 38.0]])
    parent = spanning_tree(pos, 10.0, scene)
    assert parent == [-1, 2, 0]
    assert spanning_tree(np.array([[0.0, 0.0], [50.0, 0.0]]), 10.0, scene) == [-1, None]


@pytest.mark.parametrize("factor", [0.5, 1.0, 1.25])
def test_single_follower_matches_sweep(factor):
    C = factor * 2 * DELTA
    ds, Hs = sweep_oracle(C)
    Hmax = Hs.max()
    near = ds[Hs >= Hmax - 1e-3 * Hmax]
    sol = solve_initial_formation(chain_problem(1, C), restarts=8, seed=3)
    sep = float(np.hypot(*(sol.positions[1] - sol.positions[0])))
    assert np.min(np.abs(near - sep)) <= 0.05 * C
    assert abs(sol.objective - Hmax) <= 0.02 * Hmax


def test_deterministic():
    prob = chain_problem(4, 8.0, side=SideConstraint())
    a = solve_initial_formation(prob, restarts=3, seed=7)
    b = solve_initial_formation(prob, restarts=3, seed=7)
    np.testing.assert_array_equal(a.positions, b.positions)
    assert a.objective == b.objective
    np.testing.assert_array_equal(a.flow.rho, b.flow.rho)


def test_nested_restarts_monotone():
    prob = chain_problem(4, 8.0, side=SideConstraint())
    for k in (1, 2, 3):
        assert solve_initial_formation(prob, restarts=2 * k, seed=1).objective >= solve_initial_formation(prob, restarts=k, seed=1).objective


@pytest.mark.slow
def test_random_problems_always_verify():
    rng = np.random.default_rng(99)
    for trial in range(50):
        scene = random_scene(rng, width=50.0, height=40.0)
        for _ in range(1000):
            leader = rng.uniform([5, 5], [45, 35])
            if all(not o.contains_strict(leader) and o.boundary_distance(leader) > 1.0 for o in scene.obstacles):
                break
        n = int(rng.integers(1, 5))
        side = SideConstraint() if trial % 2 else None
        prob = FormationProblem(scene, leader, n, 8.0, LIN, side_constraint=side)
        sol = solve_initial_formation(prob, restarts=2, seed=trial, max_sweeps=60)
        assert verify_solution(sol.positions, sol.flow, prob)
        assert is_connected(build_graph(sol.positions, prob.C, scene))


def test_star_formation_is_connected_and_admissible():
    scene = Scene(Rect(0, 0, 60, 60), [square(10, 20, 14, 40)])
    prob = FormationProblem(scene, np.array([20.0, 30.0]), 6, 10.0, LIN, side_constraint=SideConstraint())
    pos = star_formation(prob)
    g = build_graph(pos, prob.C, scene)
    assert all(g.adjacency[0, 1:])
    assert all(prob.admissible(p) for p in pos[1:])
