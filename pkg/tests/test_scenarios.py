"""Unit tests for the experiment data generators."""

import math

import numpy as np
import pytest

from stvo.core import elastic_net_problem
from stvo.metrics import path_length
from stvo.scenarios import (
    PathLoss,
    RssConfig,
    TvarxConfig,
    block_starts,
    cell_centers,
    drifting_quadratic_stream,
    experiment_params,
    feasible_moves,
    node_partition,
    random_problem,
    regressor_matrix,
    rss_dictionary,
    rss_measure,
    rss_model_value,
    rss_stream,
    sensor_positions,
    synthetic_stream,
    target_walk,
    tvarx_simulate,
    tvarx_stream,
)
from stvo.solvers import oracle_minimizer


# ---------------------------------------------------------------------------
# TVARX identification
# ---------------------------------------------------------------------------

def test_config_defaults():
    cfg = TvarxConfig()
    assert cfg.n == 20
    assert cfg.n_samples == 1000
    assert cfg.n_blocks == 83


def test_config_validation():
    with pytest.raises(ValueError):
        TvarxConfig(m=25)
    with pytest.raises(ValueError):
        TvarxConfig(experiment="exp3")
    with pytest.raises(ValueError):
        TvarxConfig(P_true=2)


def test_experiment1_piecewise_values():
    assert experiment_params("exp1", 0.3) == (-0.9, -0.8)
    assert experiment_params("exp1", 0.75) == (0.9, -0.7)
    assert experiment_params("exp1", 0.1) == (-0.9, 0.7)
    assert experiment_params("exp1", 0.45) == (-0.9, 0.8)
    with pytest.raises(ValueError):
        experiment_params("exp1", -0.1)


def test_experiment2_smooth_values():
    a1, b1 = experiment_params("exp2", 1)
    assert a1 == pytest.approx(1.6)
    assert b1 == pytest.approx(0.9)
    a1, b1 = experiment_params("exp2", 4)
    assert a1 == pytest.approx(0.8 * 1.5)
    assert b1 == pytest.approx(0.9 + 0.1 * math.sin(2 * math.log(4)))
    with pytest.raises(ValueError):
        experiment_params("exp2", 0)
    with pytest.raises(ValueError):
        experiment_params("nope", 0.5)


def test_experiment2_parameter_path_lengths():
    # a1's motion is summable; b1's grows slower than any linear rate.
    def paths(T):
        pts = np.array([experiment_params("exp2", t) for t in range(1, T + 1)])
        return path_length(pts[:, 0]), path_length(pts[:, 1])

    pa_1k, pb_1k = paths(1000)
    pa_2k, pb_2k = paths(2000)
    assert pa_2k - pa_1k < 0.01
    assert pb_2k / pb_1k < 2.0


def test_simulate_zero_input_tap_keeps_output_at_zero():
    cfg = TvarxConfig(seed=3)
    sim = tvarx_simulate(cfg, noise=False, params_fn=lambda tt: (0.5, 0.0))
    np.testing.assert_array_equal(sim.y, np.zeros(cfg.n_samples))


def test_simulate_impulse_response_single_tap():
    cfg = TvarxConfig(experiment="exp1", seed=3)
    impulse = np.zeros(cfg.n_samples)
    impulse[0] = 1.0
    sim = tvarx_simulate(cfg, noise=False, input_u=impulse,
                         params_fn=lambda tt: (0.0, experiment_params("exp1", tt)[1]))
    expect = np.zeros(cfg.n_samples)
    expect[1] = 0.7  # b1 at t = 1 ms
    np.testing.assert_allclose(sim.y, expect)


def test_simulate_places_truth_at_the_two_taps():
    cfg = TvarxConfig(experiment="exp1", seed=5)
    sim = tvarx_simulate(cfg, noise=False)
    t = 300
    x = sim.x_true[t]
    assert x[0] == -0.9 and x[cfg.P_hat] == -0.8
    assert np.count_nonzero(x) == 2


def test_simulate_is_deterministic():
    cfg = TvarxConfig(experiment="exp2", seed=11)
    s1 = tvarx_simulate(cfg)
    s2 = tvarx_simulate(cfg)
    np.testing.assert_array_equal(s1.u, s2.u)
    np.testing.assert_array_equal(s1.y, s2.y)
    np.testing.assert_array_equal(s1.x_true, s2.x_true)


def test_simulate_input_is_m_periodic():
    cfg = TvarxConfig(seed=2)
    sim = tvarx_simulate(cfg, noise=False)
    np.testing.assert_array_equal(sim.u[:cfg.m], sim.u[cfg.m:2 * cfg.m])
    with pytest.raises(ValueError):
        tvarx_simulate(cfg, input_u=np.zeros(7))


def test_regressor_matrix_smallest_case():
    y = np.array([0.0, 1.0, 2.0, 3.0])
    u = np.array([0.0, 10.0, 20.0, 30.0])
    A = regressor_matrix(y, u, t=2, m=1, P_hat=1, Q_hat=1)
    np.testing.assert_array_equal(A, [[1.0, 10.0]])


def test_regressor_matrix_shape_and_lag_order():
    cfg = TvarxConfig(seed=7)
    sim = tvarx_simulate(cfg, noise=False)
    A = regressor_matrix(sim.y, sim.u, t=50, m=cfg.m, P_hat=10, Q_hat=10)
    assert A.shape == (12, 20)
    np.testing.assert_array_equal(A[0, :10], sim.y[40:50][::-1])
    np.testing.assert_array_equal(A[0, 10:], sim.u[40:50][::-1])


def test_regressor_matrix_validation():
    y = np.zeros(30)
    with pytest.raises(ValueError):
        regressor_matrix(y, y, t=5, m=2, P_hat=10, Q_hat=10)
    with pytest.raises(ValueError):
        regressor_matrix(y, y, t=25, m=12, P_hat=10, Q_hat=10)


def test_noiseless_blocks_satisfy_the_linear_model():
    cfg = TvarxConfig(experiment="exp1", seed=9)
    sim = tvarx_simulate(cfg, noise=False)
    # anchor inside a constant-parameter segment
    t = 300
    A = regressor_matrix(sim.y, sim.u, t, cfg.m, cfg.P_hat, cfg.Q_hat)
    resid = A @ sim.x_true[t] - sim.y[t:t + cfg.m]
    assert np.max(np.abs(resid)) < 1e-12


def test_stream_has_one_block_per_m_samples():
    cfg = TvarxConfig(seed=1)
    blocks = tvarx_stream(cfg)
    assert len(blocks) == 83
    for blk in blocks:
        assert blk.A.shape == (12, 20)
        assert blk.y.shape == (12,)
        assert blk.lam == cfg.lam and blk.mu == cfg.mu
    np.testing.assert_array_equal(block_starts(cfg), np.arange(83) * 12)


def test_first_block_reads_the_zero_warmup():
    cfg = TvarxConfig(seed=1)
    blocks = tvarx_stream(cfg)
    np.testing.assert_array_equal(blocks[0].A[0], np.zeros(20))


def test_block_oracle_recovers_truth_on_clean_data():
    cfg = TvarxConfig(experiment="exp1", seed=13)
    sim = tvarx_simulate(cfg, noise=False)
    blocks = tvarx_stream(cfg, sim=sim)
    s = 25  # anchor 300, inside a constant segment
    x_star, _ = oracle_minimizer(elastic_net_problem(blocks[s]))
    assert np.max(np.abs(x_star - sim.x_true[s * cfg.m])) < 0.1


def test_node_partition_sums_back_to_the_block():
    cfg = TvarxConfig(seed=4)
    blk = tvarx_stream(cfg)[10]
    nodes = node_partition(blk, 4)
    assert len(nodes) == 4
    Q_sum = sum(nd.Q for nd in nodes)
    prob = elastic_net_problem(blk)
    np.testing.assert_allclose(Q_sum, prob.Q, atol=1e-12)
    np.testing.assert_allclose(sum(nd.phi for nd in nodes), prob.phi,
                               atol=1e-12)
    A_norm = np.linalg.norm(blk.A, 2)
    for v, nd in enumerate(nodes):
        rows = blk.A[3 * v:3 * (v + 1)]
        assert np.linalg.norm(rows, 2) <= A_norm + 1e-12
    with pytest.raises(ValueError):
        node_partition(blk, 20)


# ---------------------------------------------------------------------------
# RSS tracking
# ---------------------------------------------------------------------------

def test_pathloss_clamps_at_reference_distance():
    pl = PathLoss()
    assert rss_model_value(0.2, pl) == pytest.approx(-40.0)
    assert rss_model_value(1.0, pl) == pytest.approx(-40.0)


def test_pathloss_doubling_distance():
    pl = PathLoss(p0_dbm=-40.0, d0_m=1.0, exponent=2.0)
    drop = rss_model_value(1.0, pl) - rss_model_value(2.0, pl)
    assert drop == pytest.approx(6.02, abs=0.01)


def test_rss_config_geometry():
    cfg = RssConfig()
    assert cfg.n_cells == 625
    assert cfg.n_meas == 144
    assert sensor_positions(cfg).shape == (36, 2)
    assert cell_centers(cfg).shape == (625, 2)
    with pytest.raises(ValueError):
        RssConfig(sensors=35)


def test_dictionary_shape_and_distinct_columns():
    cfg = RssConfig(seed=21)
    A = rss_dictionary(cfg)
    assert A.shape == (144, 625)
    assert np.unique(A, axis=1).shape[1] == 625
    np.testing.assert_array_equal(A, rss_dictionary(cfg))


def test_feasible_moves_geometry():
    side = 25
    assert sorted(feasible_moves(0, side)) == [0, 1, 25, 26]
    assert len(feasible_moves(12 * side + 12, side)) == 9
    edge = 12 * side  # left edge, mid row
    assert len(feasible_moves(edge, side)) == 6


def test_walk_stays_on_grid_with_single_cell_steps():
    cfg = RssConfig(seed=8)
    walk = target_walk(cfg, steps=200)
    assert walk.shape == (201,)
    assert np.all((walk >= 0) & (walk < 625))
    rows, cols = np.divmod(walk, 25)
    cheb = np.maximum(np.abs(np.diff(rows)), np.abs(np.diff(cols)))
    assert np.all(cheb <= 1)
    np.testing.assert_array_equal(walk, target_walk(cfg, steps=200))


def test_measurement_noise_matches_the_snr():
    cfg = RssConfig(seed=30)
    A = rss_dictionary(cfg)
    x = np.zeros(625)
    x[300] = 1.0
    y0 = A @ x
    clean = rss_measure(A, x, 1e9, cfg.seed, 0)
    np.testing.assert_allclose(clean, y0, atol=1e-30)
    power = np.mean([np.sum((rss_measure(A, x, 25.0, cfg.seed, t) - y0) ** 2)
                     for t in range(1000)])
    assert power / np.sum(y0 ** 2) == pytest.approx(10 ** -2.5, rel=0.05)
    np.testing.assert_array_equal(rss_measure(A, x, 25.0, cfg.seed, 5),
                                  rss_measure(A, x, 25.0, cfg.seed, 5))


def test_stream_aligns_blocks_with_the_walk():
    cfg = RssConfig(seed=12, path_length_steps=10)
    blocks, walk, A_used = rss_stream(cfg)
    assert len(blocks) == walk.size == 11
    assert A_used.shape == (144, 625)
    for blk in blocks:
        assert blk.A is blocks[0].A  # constant dictionary, shared slice
        assert blk.lam == cfg.lam and blk.mu == cfg.mu


def test_stream_centering_is_exact_for_one_hot_targets():
    # The offset subtraction must leave the linear model intact: with the
    # noise off, the preprocessed measurement equals the preprocessed
    # dictionary column of the occupied cell.
    cfg = RssConfig(seed=12, path_length_steps=5, snr_db=500.0)
    blocks, walk, A_used = rss_stream(cfg)
    for blk, cell in zip(blocks, walk):
        np.testing.assert_allclose(blk.y, A_used[:, cell], atol=1e-9)


def test_stream_normalizes_the_dictionary():
    cfg = RssConfig(seed=12, path_length_steps=3)
    _, _, A_used = rss_stream(cfg)
    assert np.linalg.norm(A_used, 2) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Synthetic streams
# ---------------------------------------------------------------------------

def test_random_problem_attains_the_extreme_eigenvalues():
    p = random_problem(8, 0.5, 3.0, seed=17)
    eigs = np.linalg.eigvalsh(p.Q)
    assert eigs[0] == pytest.approx(0.5)
    assert eigs[-1] == pytest.approx(3.0)
    p1 = random_problem(1, 2.0, 2.0, seed=17)
    np.testing.assert_array_equal(p1.Q, [[2.0]])
    with pytest.raises(ValueError):
        random_problem(4, 0.0, 1.0, seed=17)


def test_drifting_stream_shares_q_and_moves_linearly():
    probs = drifting_quadratic_stream(n=6, rounds=10, sigma=0.5, beta=3.0,
                                      drift=1e-3, seed=2)
    assert len(probs) == 10
    assert all(p.Q is probs[0].Q for p in probs)
    steps = [float(np.linalg.norm(probs[t].phi - probs[t - 1].phi))
             for t in range(1, 10)]
    np.testing.assert_allclose(steps, 1e-3, rtol=1e-9)


def test_synthetic_stream_shapes_and_support():
    blocks, truth = synthetic_stream(n=10, m=6, blocks=20, seed=3)
    assert len(blocks) == 20 and truth.shape == (20, 10)
    assert all(b.A is blocks[0].A for b in blocks)
    nz = np.nonzero(truth[0])[0]
    np.testing.assert_array_equal(nz, [0, 5])
    assert np.all(np.count_nonzero(truth, axis=1) == 2)
