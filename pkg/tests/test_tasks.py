import math

import numpy as np
import pytest

from qdselect.maze import MazeSpec, classify_exits, descriptor_cell, first_collision
from qdselect.tasks import (ElmanTopology, controller_task, decode_planner, evaluate,
                            evaluate_batch, path_table, planner_task, sense,
                            simulate_controller)

MAZE = MazeSpec()
PLANNER = planner_task()
CONTROLLER = controller_task()


class TestTopology:
    def test_default_weight_count(self):
        assert ElmanTopology().weight_count == 95

    def test_bias_terms_extend_the_count(self):
        assert ElmanTopology(biases=True).weight_count == 95 + 5 + 2

    def test_rejects_empty_layers(self):
        with pytest.raises(ValueError):
            ElmanTopology(n_hidden=0)

    def test_controller_task_derives_gene_count(self):
        topo = ElmanTopology(n_hidden=4, n_context=4)
        task = controller_task(topo)
        assert task.gene_count == topo.weight_count
        assert task.gene_range == (-3.0, 3.0)


class TestDecodePlanner:
    def test_wrong_length_is_domain_error(self):
        with pytest.raises(ValueError):
            decode_planner(np.zeros(13), MAZE)

    def test_zero_genome_is_degenerate_path(self):
        sol = evaluate(np.zeros(14), PLANNER, MAZE)
        assert sol.fitness == 0.0
        assert sol.cell == (15, 15)
        assert sol.exits.inner_exit is None

    def test_untruncated_path_through_gate(self):
        g = np.array([0, 50, 0, 100, 0, 100, 0, 100, 0, 100, 0, 100, 0, 100], float)
        path = decode_planner(g, MAZE)
        assert path.shape == (8, 2)
        sol = evaluate(g, PLANNER, MAZE)
        np.testing.assert_allclose(sol.fitness, 100.0, atol=1e-12)
        assert sol.exits.inner_exit == 1

    def test_truncation_matches_first_collision_oracle(self):
        g = np.array([150, 0, 150, 50, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0], float)
        nodes = decode_planner(g)  # untruncated
        hit = first_collision(nodes, MAZE)
        assert hit is not None
        path = decode_planner(g, MAZE)
        np.testing.assert_allclose(path[-1], hit.point, atol=1e-12)
        sol = evaluate(g, PLANNER, MAZE)
        np.testing.assert_allclose(
            sol.fitness, np.hypot(*np.diff(path, axis=0).T).sum(), atol=1e-12)

    def test_genotype_locality(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            g = rng.uniform(-200, 200, 14)
            eps = rng.uniform(0, 5)
            g2 = g.copy()
            node = rng.integers(0, 7)
            delta = rng.normal(size=2)
            delta = delta / np.linalg.norm(delta) * eps
            g2[2 * node:2 * node + 2] += delta
            a = decode_planner(np.clip(g, -200, 200))
            b = decode_planner(np.clip(g2, -200, 200))
            assert np.linalg.norm(a - b, axis=1).max() <= eps + 1e-9


class TestControllerSimulation:
    def test_zero_weights_never_move(self):
        sol = evaluate(np.zeros(95), CONTROLLER, MAZE, initial_heading=30.0)
        assert sol.fitness == 0.0
        assert sol.cell == (15, 15)
        assert sol.exits.inner_exit is None
        assert np.all(sol.path == 0.0)

    def test_constant_forward_drive_matches_hand_computation(self):
        # beacon one-hot always sums to one: wiring only the 4 beacon inputs
        # into hidden unit 0 gives a constant activation regardless of pose
        topo = ElmanTopology()
        w = np.zeros(95)
        w_in = w[:35].reshape(7, 5)
        w_out = w[85:95].reshape(5, 2)
        w_in[3:7, 0] = 2.0          # any quadrant -> hidden pre-activation 2.0
        w_out[0, 0] = 2.0           # forward; rotation output stays 0
        speed = math.tanh(math.tanh(2.0) * 2.0) * 3.0
        path, headings = simulate_controller(w, topo, MAZE, steps=50,
                                             initial_heading=90.0)
        assert np.allclose(headings, math.radians(90.0))
        assert np.abs(path[:, 0]).max() < 1e-9
        np.testing.assert_allclose(np.diff(path[:11, 1]), speed, atol=1e-12)
        # straight up through the inner gate, stopped at the middle ring face
        long_path, _ = simulate_controller(w, topo, MAZE, steps=1000,
                                           initial_heading=90.0)
        assert long_path[-1, 1] == pytest.approx(127.5, abs=1e-6)

    def test_determinism(self):
        rng = np.random.default_rng(7)
        w = rng.uniform(-3, 3, 95)
        a, ha = simulate_controller(w, ElmanTopology(), MAZE, 300, 30.0)
        b, hb = simulate_controller(w, ElmanTopology(), MAZE, 300, 30.0)
        assert np.array_equal(a, b) and np.array_equal(ha, hb)

    def test_wrong_weight_count_is_domain_error(self):
        with pytest.raises(ValueError):
            simulate_controller(np.zeros(94), ElmanTopology(), MAZE, 10)

    def test_heading_changes_trajectory(self):
        rng = np.random.default_rng(8)
        w = rng.uniform(-3, 3, 95)
        a, _ = simulate_controller(w, ElmanTopology(), MAZE, 200, 30.0)
        b, _ = simulate_controller(w, ElmanTopology(), MAZE, 200, 90.0)
        assert not np.allclose(a, b)


class TestSense:
    def test_readings_at_origin_heading_90(self):
        u = sense((0.0, 0.0), 90.0, MAZE)
        # center ray passes the 90-degree inner gate and outranges the next
        # ring; side rays hit the inner annulus face at 62.5 of range 100
        np.testing.assert_allclose(u[:3], [0.625, 1.0, 0.625], atol=1e-12)
        assert u[3:].sum() == 1.0

    def test_beacon_quadrant_rotates_with_heading(self):
        # robot north of home, facing east: the home vector points south,
        # i.e. to the robot's right (fourth quadrant -> one-hot index 3)
        u = sense((0.0, 50.0), 0.0, MAZE)
        assert u[3 + 3] == 1.0
        # same spot facing west: home is now to the robot's left (quadrant 2)
        u = sense((0.0, 50.0), 180.0, MAZE)
        assert u[3 + 1] == 1.0


class TestBatchEvaluation:
    def test_planner_batch_matches_reference(self):
        rng = np.random.default_rng(42)
        G = rng.uniform(-200, 200, (64, 14))
        batch = evaluate_batch(G, PLANNER, MAZE)
        for i in range(len(batch)):
            sol = evaluate(G[i], PLANNER, MAZE)
            assert batch.fitness[i] == pytest.approx(sol.fitness, abs=1e-9)
            assert (batch.rows[i], batch.cols[i]) == sol.cell
            assert batch.inner_exit[i] == (sol.exits.inner_exit or 0)
            assert batch.flag[i] == sol.exits.reentered_and_left_elsewhere
            np.testing.assert_allclose(batch.paths[i], sol.path, atol=1e-9)

    def test_controller_batch_matches_single(self):
        rng = np.random.default_rng(43)
        W = rng.uniform(-3, 3, (8, 95))
        batch = evaluate_batch(W, CONTROLLER, MAZE, initial_heading=30.0)
        for i in range(len(batch)):
            sol = evaluate(W[i], CONTROLLER, MAZE, initial_heading=30.0)
            # same trajectory; fitness differs only by summation order
            assert batch.fitness[i] == pytest.approx(sol.fitness, abs=1e-8)
            np.testing.assert_array_equal(batch.paths[i], sol.path)
            assert (batch.rows[i], batch.cols[i]) == sol.cell
            assert batch.inner_exit[i] == (sol.exits.inner_exit or 0)

    def test_batch_exit_classification_matches_reference_on_paths(self):
        rng = np.random.default_rng(44)
        W = rng.uniform(-3, 3, (16, 95))
        batch = evaluate_batch(W, CONTROLLER, MAZE, initial_heading=30.0)
        for i in range(len(batch)):
            trace = classify_exits(batch.paths[i], MAZE)
            assert batch.inner_exit[i] == (trace.inner_exit or 0)
            assert batch.flag[i] == trace.reentered_and_left_elsewhere

    def test_cells_consistent_with_descriptor(self):
        rng = np.random.default_rng(45)
        G = rng.uniform(-200, 200, (32, 14))
        batch = evaluate_batch(G, PLANNER, MAZE)
        for i in range(len(batch)):
            assert (batch.rows[i], batch.cols[i]) == descriptor_cell(batch.end[i], MAZE)

    def test_fitness_additivity_under_concatenation(self):
        g1 = np.array([0, 30, 0, 60, 0, 60, 0, 60, 0, 60, 0, 60, 0, 60], float)
        part1 = evaluate(g1, PLANNER, MAZE).fitness
        g2 = np.array([0, 30, 0, 60, 10, 60, 10, 60, 10, 60, 10, 60, 10, 60], float)
        full = evaluate(g2, PLANNER, MAZE).fitness
        assert full == pytest.approx(part1 + 10.0, abs=1e-9)


class TestEvaluateValidation:
    def test_out_of_range_genome_rejected(self):
        g = np.zeros(14)
        g[0] = 300.0
        with pytest.raises(ValueError):
            evaluate(g, PLANNER, MAZE)

    def test_controller_zero_genome_any_heading(self):
        sol = evaluate(np.zeros(95), CONTROLLER, MAZE, initial_heading=30.0)
        assert sol.fitness == 0.0 and sol.cell == (15, 15)


def test_path_table_format():
    sol = evaluate(np.zeros(95), CONTROLLER, MAZE, initial_heading=30.0)
    text = path_table(sol.path[:5], sol.headings[:5])
    lines = text.strip().splitlines()
    assert lines[0] == "step,x,y,heading"
    assert len(lines) == 6
    assert lines[1].startswith("0,")
    planner_text = path_table(np.array([[0.0, 0.0], [0.0, 10.0]]))
    assert planner_text.splitlines()[1].endswith(",90.0")
