"""Online play loops shared by the command line tool and the tests.

A play function receives the revealed stream one slice at a time and records
the action committed before each reveal, so row t of the result is what the
algorithm was judged on at round t.  Row 0 is always the cold start.
"""

import time
from dataclasses import dataclass

import numpy as np

from .core import elastic_net_problem, objective_value
from .distributed import NetworkState
from .metrics import RunTrace
from .solvers import (DRState, OnlineConfig, consistent_state, dr_step,
                      initial_state, odr_round, oist_round, oracle_minimizer)

ALGORITHMS = ("oist", "odr", "odista")


@dataclass
class PlayResult:
    """Actions of one online run, row t played before slice t was revealed."""

    actions: np.ndarray
    z: np.ndarray | None = None
    state: object | None = None


def problems_from_blocks(blocks):
    """Quadratic forms of a stream of elastic-net slices.

    Consecutive slices holding the same sensing matrix object share one
    problem's cached factorization instead of refactoring per round.
    """
    out = []
    base = None
    base_key = None
    for b in blocks:
        key = (id(b.A), b.lam, b.mu)
        if base is not None and key == base_key:
            out.append(base.with_phi(-b.A.T @ b.y))
        else:
            base = elastic_net_problem(b)
            base_key = key
            out.append(base)
    return out


def block_taus(blocks):
    """Per-round thresholded-gradient step sizes, 2 / ||A_t||_2^2."""
    taus = []
    norm_sq = None
    prev = None
    for b in blocks:
        if prev is not b.A:
            norm_sq = float(np.linalg.norm(b.A, 2)) ** 2
            prev = b.A
        taus.append(2.0 / norm_sq)
    return taus


def node_norms_squared(block, n_nodes):
    """Squared spectral norms of the row partition handed to each node."""
    rows = np.array_split(np.arange(block.m), n_nodes)
    return np.array([float(np.linalg.norm(block.A[idx], 2)) ** 2
                     for idx in rows])


def odista_taus(blocks, n_nodes, rule="uniform_min"):
    """Per-round arrays of node step sizes.

    "uniform_min" gives every node the smallest inverse squared norm, which
    keeps the damping below one at each node; "per_node" uses each node's
    own 1 / ||A_v||_2^2.
    """
    if rule not in ("uniform_min", "per_node"):
        raise ValueError(f"unknown step-size rule {rule!r}")
    taus = []
    cached = None
    prev = None
    for b in blocks:
        if prev is not b.A:
            norms = node_norms_squared(b, n_nodes)
            if rule == "uniform_min":
                cached = np.full(n_nodes, 1.0 / float(np.max(norms)))
            else:
                cached = 1.0 / norms
            prev = b.A
        taus.append(cached)
    return taus


def partition_stream(blocks, n_nodes):
    """Per-round node data lists, reusing Q when the sensing matrix repeats."""
    from .scenarios import node_partition

    prev = None
    nodes = None
    rows = None
    out = []
    for b in blocks:
        if prev is b.A and nodes is not None:
            nodes = [nd.with_phi(-b.A[idx].T @ b.y[idx])
                     for nd, idx in zip(nodes, rows)]
        else:
            nodes = node_partition(b, n_nodes)
            rows = np.array_split(np.arange(b.m), n_nodes)
            prev = b.A
        out.append(nodes)
    return out


def play_oist(problems, taus, r):
    """Run the online thresholded-gradient solver over a problem stream."""
    x = np.zeros(problems[0].n)
    actions = np.empty((len(problems), problems[0].n))
    for t, (p, tau) in enumerate(zip(problems, taus)):
        actions[t] = x
        x = oist_round(x, p, OnlineConfig(r=r, tau=float(tau)))
    return PlayResult(actions=actions, state=x)


def play_odr(problems, r):
    """Run the online splitting solver over a problem stream."""
    state = initial_state(problems[0].n)
    actions = np.empty((len(problems), problems[0].n))
    zs = np.empty_like(actions)
    for t, p in enumerate(problems):
        actions[t] = state.x
        zs[t] = state.z
        state = odr_round(state, p, OnlineConfig(r=r))
    return PlayResult(actions=actions, z=zs, state=state)


def play_odista(node_stream, graph, lam_node, taus, r, n):
    """Run the distributed solver; the action is the network average."""
    from .distributed import odista_round

    state = NetworkState.zeros(n, graph.n_nodes)
    actions = np.empty((len(node_stream), n))
    for t, (data, tau) in enumerate(zip(node_stream, taus)):
        actions[t] = state.X.mean(axis=1)
        state = odista_round(state, graph, data, lam_node, tau, r)
    return PlayResult(actions=actions, state=state)


def stream_oracles(problems, warm=True, tol=1e-12, max_iter=200000,
                   opt_tol=1e-8):
    """Reference minimizers and fixed points of every slice.

    Warm starting from the previous fixed point makes slowly drifting
    streams cheap without changing the answer beyond the solve tolerance.
    """
    xs = np.empty((len(problems), problems[0].n))
    zs = np.empty_like(xs)
    prev = None
    for t, p in enumerate(problems):
        x_star, z_star = oracle_minimizer(p, tol=tol, max_iter=max_iter,
                                          opt_tol=opt_tol, initial=prev)
        xs[t] = x_star
        zs[t] = z_star
        if warm:
            prev = DRState(x_star, z_star)
    return xs, zs


def action_losses(problems, actions):
    return np.array([objective_value(x, p)
                     for x, p in zip(actions, problems)])


def build_trace(problems, result, oracles=None):
    """Assemble the run record; with oracles it carries regret references."""
    loss = action_losses(problems, result.actions)
    if oracles is None:
        return RunTrace(t=np.arange(len(problems)), x=result.actions,
                        loss=loss, oracle_loss=loss)
    xs, zs = oracles
    oracle_loss = action_losses(problems, xs)
    return RunTrace(t=np.arange(len(problems)), x=result.actions, loss=loss,
                    oracle_loss=oracle_loss, x_star=xs, z_star=zs,
                    z=result.z)


def calibrate_r(single_step, budget_ms, repeats=7):
    """Inner iterations affordable inside a round's time budget.

    Times repeated calls of single_step and divides the budget by the
    median, which rides out scheduler noise better than the mean.  At least
    one iteration is always granted.
    """
    if budget_ms <= 0:
        raise ValueError("time budget must be positive")
    single_step()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        single_step()
        samples.append(time.perf_counter() - t0)
    med = float(np.median(samples))
    if med <= 0.0:
        return 1000
    return max(1, int((budget_ms / 1000.0) / med))


def odr_step_timer(problem):
    """Closure timing one splitting step, for round-budget calibration."""
    state = consistent_state(problem)
    return lambda: dr_step(state, problem)


def oist_step_timer(problem, tau):
    x = np.zeros(problem.n)
    cfg = OnlineConfig(r=1, tau=float(tau))
    return lambda: oist_round(x, problem, cfg)


def odista_step_timer(graph, data, lam_node, tau, n):
    from .distributed import odista_round

    state = NetworkState.zeros(n, graph.n_nodes)
    return lambda: odista_round(state, graph, data, lam_node, tau, 1)
