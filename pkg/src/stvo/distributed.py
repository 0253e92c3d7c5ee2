"""Network model and distributed thresholded-gradient solvers.

Nodes hold private quadratic data (Q_v, phi_v) and a copy x_v of the
decision variable, stacked column-wise in X.  The solver alternates a
communication half-step, which refreshes each node's auxiliary variable
c_v with the neighborhood mean of X, and a descent half-step, which applies
a damped thresholded gradient update using the neighborhood mean of C.
Both half-steps are synchronous: every node reads the pre-step state.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import QuadraticL1Problem, soft_threshold


@dataclass
class Graph:
    """Undirected communication graph with implicit self-loops.

    neighbors[v] is the sorted array of nodes v receives from, v included.
    """

    n_nodes: int
    neighbors: list

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("graph needs at least one node")
        if len(self.neighbors) != self.n_nodes:
            raise ValueError("one neighbor list per node required")
        nbrs = []
        for v, raw in enumerate(self.neighbors):
            arr = np.unique(np.asarray(raw, dtype=int))
            if arr.size and (arr[0] < 0 or arr[-1] >= self.n_nodes):
                raise ValueError(f"node {v} references an unknown node")
            if v not in arr:
                raise ValueError(f"node {v} must appear in its own list")
            nbrs.append(arr)
        for v, arr in enumerate(nbrs):
            for w in arr:
                if v not in nbrs[w]:
                    raise ValueError(f"edge ({v},{w}) is not symmetric")
        self.neighbors = nbrs
        self.degrees = np.array([len(a) for a in nbrs])
        self.regular = bool(np.all(self.degrees == self.degrees[0]))
        self.connected = self._connected()

    @property
    def degree(self):
        """Common degree on regular graphs, None otherwise."""
        return int(self.degrees[0]) if self.regular else None

    def _connected(self):
        seen = {0}
        frontier = [0]
        while frontier:
            v = frontier.pop()
            for w in self.neighbors[v]:
                if w not in seen:
                    seen.add(int(w))
                    frontier.append(int(w))
        return len(seen) == self.n_nodes


@dataclass(frozen=True)
class NodeData:
    """Private quadratic data of one node."""

    Q: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got {Q.shape}")
        if phi.shape != (Q.shape[0],):
            raise ValueError(f"phi must have shape ({Q.shape[0]},)")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-10:
            raise ValueError("Q must be symmetric")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "phi", phi)

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def lambda_max(self):
        return float(np.linalg.eigvalsh(self.Q)[-1])

    def with_phi(self, phi):
        """Same quadratic term with a new linear term, skipping revalidation."""
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.n,):
            raise ValueError(f"phi must have shape ({self.n},)")
        out = object.__new__(NodeData)
        object.__setattr__(out, "Q", self.Q)
        object.__setattr__(out, "phi", phi)
        return out


@dataclass
class NetworkState:
    """Stacked per-node estimates X and auxiliary variables C, both n x |V|."""

    X: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if X.shape != C.shape or X.ndim != 2:
            raise ValueError(
                f"X and C must be 2-d with equal shape, got {X.shape}, {C.shape}")
        self.X = X
        self.C = C

    @classmethod
    def zeros(cls, n, n_nodes):
        return cls(np.zeros((n, n_nodes)), np.zeros((n, n_nodes)))


def ring_graph(n_nodes, d):
    """Symmetric circulant ring: each node links to its d-1 nearest nodes.

    Requires d - 1 even (split evenly on both sides) or d == n_nodes, which
    degenerates to the complete graph.  Self-loops are always present.
    """
    if d < 1 or d > n_nodes:
        raise ValueError(f"degree {d} infeasible on {n_nodes} nodes")
    if d == n_nodes:
        return Graph(n_nodes, [np.arange(n_nodes) for _ in range(n_nodes)])
    if (d - 1) % 2 != 0:
        raise ValueError(f"degree {d} needs d-1 even on a ring of {n_nodes}")
    half = (d - 1) // 2
    if 2 * half + 1 > n_nodes:
        raise ValueError(f"degree {d} infeasible on {n_nodes} nodes")
    nbrs = [np.sort((v + np.arange(-half, half + 1)) % n_nodes)
            for v in range(n_nodes)]
    return Graph(n_nodes, nbrs)


def radius_graph(positions, radius):
    """Geometric graph linking nodes within the given distance.

    A disconnected result is flagged on the Graph and warned about, not
    rejected; such topologies are representable but outside the regular-graph
    theory.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2:
        raise ValueError("positions must be (n_nodes, dim)")
    n = positions.shape[0]
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    nbrs = [np.flatnonzero(dist[v] <= radius) for v in range(n)]
    graph = Graph(n, nbrs)
    if not graph.connected:
        warnings.warn("radius graph is disconnected", RuntimeWarning)
    return graph


def write_edge_list(graph, path):
    """Serialize as one 'u v' pair per line; self-loops stay implicit."""
    lines = []
    for v in range(graph.n_nodes):
        for w in graph.neighbors[v]:
            if w > v:
                lines.append(f"{v} {w}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def read_edge_list(path, n_nodes=None):
    """Load an edge-list file written by :func:`write_edge_list`.

    n_nodes defaults to one past the largest node id seen; pass it explicitly
    when trailing nodes have no edges beyond their self-loop.
    """
    edges = []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            u, w = line.split()
            edges.append((int(u), int(w)))
    if n_nodes is None:
        if not edges:
            raise ValueError("empty edge list needs an explicit n_nodes")
        n_nodes = max(max(u, w) for u, w in edges) + 1
    nbrs = [{v} for v in range(n_nodes)]
    for u, w in edges:
        nbrs[u].add(w)
        nbrs[w].add(u)
    return Graph(n_nodes, [sorted(s) for s in nbrs])


def local_mean(X, graph, v):
    """Average of the columns of X over node v's neighborhood (v included)."""
    nbrs = graph.neighbors[v]
    return np.sum(X[:, nbrs], axis=1) / len(nbrs)


def _local_means(X, graph):
    cols = [np.sum(X[:, graph.neighbors[v]], axis=1) / len(graph.neighbors[v])
            for v in range(graph.n_nodes)]
    return np.stack(cols, axis=1)


def _as_node_tau(tau, n_nodes):
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (n_nodes,))
    if not np.all(tau > 0):
        raise ValueError("all step sizes must be positive")
    return tau


def dista_even_step(state, graph):
    """Communication half-step: C <- neighborhood means of X; X unchanged."""
    return NetworkState(state.X, _local_means(state.X, graph))


def dista_odd_step(state, graph, data, lam, tau):
    """Descent half-step, synchronous over nodes.

    x_v <- S_{lam*tau_v/2}[ (x_v + cbar_v - tau_v (Q_v x_v + phi_v)) / 2 ]
    where cbar_v is the neighborhood mean of C at v.  C is unchanged and all
    reads refer to the pre-step state, so the result does not depend on node
    order.
    """
    n_nodes = graph.n_nodes
    if len(data) != n_nodes:
        raise ValueError("one NodeData per node required")
    tau = _as_node_tau(tau, n_nodes)
    cbar = _local_means(state.C, graph)
    X_new = np.empty_like(state.X)
    for v in range(n_nodes):
        x_v = state.X[:, v]
        arg = (x_v + cbar[:, v]
               - tau[v] * (data[v].Q @ x_v) - tau[v] * data[v].phi) / 2.0
        X_new[:, v] = soft_threshold(arg, lam * tau[v] / 2.0)
    return NetworkState(X_new, state.C)


def odista_round(state, graph, data, lam, tau, r):
    """One online round: r half-steps, even ones communicate, odd ones descend.

    The round always opens with a communication half-step, so C is refreshed
    from the carried X before any descent reads it; r = 2 is exactly one
    communication followed by one descent.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    for h in range(r):
        if h % 2 == 0:
            state = dista_even_step(state, graph)
        else:
            state = dista_odd_step(state, graph, data, lam, tau)
    return state


def batch_dista(graph, data, lam, tau, tol=1e-10, max_pairs=100000,
                initial=None):
    """Iterate communication/descent pairs to a fixed point.

    Stops when the Frobenius increment of X over one pair drops below tol.
    Returns (state, pairs, converged); non-convergence is flagged, not raised.
    """
    n = data[0].n
    state = NetworkState.zeros(n, graph.n_nodes) if initial is None else initial
    converged = False
    pairs = 0
    for _ in range(max_pairs):
        new = dista_odd_step(dista_even_step(state, graph), graph, data, lam, tau)
        inc = float(np.linalg.norm(new.X - state.X))
        state = new
        pairs += 1
        if inc <= tol:
            converged = True
            break
    return state, pairs, converged


def global_objective(X, graph, data, lam, tau):
    """Network objective: local costs plus the disagreement penalty.

    sum_v [ 0.5 x_v'Q_v x_v + phi_v'x_v + lam ||x_v||_1
            + 1/(2 d_v tau_v) sum_{w in N_v} ||xbar_w - x_v||^2 ]
    with xbar_w the neighborhood mean of X at w.  Non-regular graphs use each
    node's own degree.
    """
    tau = _as_node_tau(tau, graph.n_nodes)
    xbar = _local_means(X, graph)
    total = 0.0
    for v in range(graph.n_nodes):
        x_v = X[:, v]
        total += (0.5 * x_v @ (data[v].Q @ x_v) + data[v].phi @ x_v
                  + lam * np.abs(x_v).sum())
        d_v = len(graph.neighbors[v])
        coupling = sum(float(np.sum((xbar[:, w] - x_v) ** 2))
                       for w in graph.neighbors[v])
        total += coupling / (2.0 * d_v * tau[v])
    return float(total)


def surrogate_objective(X, C, B, graph, data, lam, tau):
    """Majorizing surrogate of the network objective.

    Replaces the neighborhood means of X with the stored C and adds the
    damping term 0.5 (x_v - b_v)' ((1/tau_v) I - Q_v) (x_v - b_v).  With
    C equal to the neighborhood means of X and B = X it collapses to
    :func:`global_objective` exactly.
    """
    tau = _as_node_tau(tau, graph.n_nodes)
    total = 0.0
    for v in range(graph.n_nodes):
        x_v = X[:, v]
        total += (0.5 * x_v @ (data[v].Q @ x_v) + data[v].phi @ x_v
                  + lam * np.abs(x_v).sum())
        d_v = len(graph.neighbors[v])
        coupling = sum(float(np.sum((C[:, w] - x_v) ** 2))
                       for w in graph.neighbors[v])
        total += coupling / (2.0 * d_v * tau[v])
        delta = x_v - B[:, v]
        total += 0.5 * (delta @ delta / tau[v] - delta @ (data[v].Q @ delta))
    return float(total)


def theta_tau(data, tau):
    """Contraction driver of the descent half-step: max_v ||I - tau_v Q_v||^2.

    Below 1 whenever every tau_v lambda_max(Q_v) <= 2 holds strictly on one
    side; the per-round Frobenius contraction factor over p pairs is
    ((1 + theta) / 2)^(p/2).
    """
    tau = _as_node_tau(tau, len(data))
    worst = 0.0
    for v, nd in enumerate(data):
        w = np.linalg.eigvalsh(np.eye(nd.n) - tau[v] * nd.Q)
        worst = max(worst, float(np.max(np.abs(w))) ** 2)
    return worst


def consensus_problem(data, lam):
    """Centralized slice whose minimizer is the network's consensus target.

    Restricting the network objective to equal columns zeroes the
    disagreement penalty and sums the local costs, giving Q = sum Q_v,
    phi = sum phi_v and an l1 weight of |V| * lam.
    """
    Q = sum(nd.Q for nd in data)
    phi = sum(nd.phi for nd in data)
    return QuadraticL1Problem(Q, phi, len(data) * lam)
