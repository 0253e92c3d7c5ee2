"""Experiment generators: time-varying ARX identification and RSS tracking.

All randomness flows from a single 64-bit seed through named sub-streams,
so regenerating any piece with the same configuration is bitwise
reproducible and adding a consumer never perturbs the draws of another.
"""

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .core import ElasticNetData, QuadraticL1Problem
from .distributed import NodeData

# Named sub-stream tags; the tuple (seed, tag, *indices) seeds a Generator.
STREAM_INPUT = 0
STREAM_NOISE = 1
STREAM_WALK = 2
STREAM_DICT = 3
STREAM_PROBLEM = 4


def substream(seed, tag, *indices):
    """Deterministic RNG for one named consumer of the run seed."""
    return np.random.default_rng((int(seed), int(tag)) + tuple(int(i) for i in indices))


# ---------------------------------------------------------------------------
# Time-varying ARX identification
# ---------------------------------------------------------------------------

@dataclass
class TvarxConfig:
    """First-order time-varying ARX scenario, overparameterized on purpose.

    The true system has one autoregressive and one input tap; the estimator
    is given P_hat + Q_hat candidate taps and must recover the sparse truth.
    m consecutive samples form one measurement block (m < P_hat + Q_hat, the
    compressed regime).  `lam` and `mu` are the l1 and l2 weights of the
    per-block elastic net.
    """

    experiment: str = "exp1"
    P_true: int = 1
    Q_true: int = 1
    P_hat: int = 10
    Q_hat: int = 10
    m: int = 12
    snr_db: float = 25.0
    horizon_s: float = 1.0
    sample_rate_hz: float = 1000.0
    lam: float = 1e-2
    mu: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.experiment not in ("exp1", "exp2"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.P_true != 1 or self.Q_true != 1:
            raise ValueError("only the first-order true system is supported")
        if self.m >= self.P_hat + self.Q_hat:
            raise ValueError("m must stay below P_hat + Q_hat")
        if self.m < 1 or self.P_hat < 1 or self.Q_hat < 1:
            raise ValueError("dimensions must be positive")

    @property
    def n(self):
        return self.P_hat + self.Q_hat

    @property
    def n_samples(self):
        return int(round(self.horizon_s * self.sample_rate_hz))

    @property
    def n_blocks(self):
        return self.n_samples // self.m


def experiment_params(experiment, t):
    """True parameter pair (a1, b1) at time t.

    exp1 switches both parameters piecewise at fixed instants, with t in
    seconds.  exp2 varies them smoothly as a1 = 0.8 (1 + 1/sqrt(t)) and
    b1 = 0.9 + 0.1 sin(2 ln t), with t the (positive) sample index; on the
    index scale a1 decays toward its limit with convergent path length and
    b1 oscillates with logarithmic path length.  Seconds would put the
    recursion in the unstable |a1| > 1 regime for the whole horizon.
    """
    if experiment == "exp1":
        if t < 0.0:
            raise ValueError(f"t={t} before the start of the run")
        a1 = -0.9 if t < 0.5 else 0.9
        if t < 0.2:
            b1 = 0.7
        elif t < 0.4:
            b1 = -0.8
        elif t < 0.7:
            b1 = 0.8
        else:
            b1 = -0.7
        return a1, b1
    if experiment == "exp2":
        if not t > 0.0:
            raise ValueError(f"t={t} must be a positive sample index")
        return 0.8 * (1.0 + 1.0 / math.sqrt(t)), 0.9 + 0.1 * math.sin(2.0 * math.log(t))
    raise ValueError(f"unknown experiment {experiment!r}")


@dataclass
class TvarxData:
    """Simulated trajectories, aligned at the sample index (t = index / rate)."""

    u: np.ndarray
    y: np.ndarray
    x_true: np.ndarray


def _true_vector(cfg, a1, b1):
    x = np.zeros(cfg.n)
    x[0] = a1
    x[cfg.P_hat] = b1
    return x


def tvarx_simulate(cfg, noise=True, params_fn=None, input_u=None):
    """Simulate y_t = a1_t y_{t-1} + b1_t u_{t-1} + e_t over the horizon.

    The input is a standard Gaussian block of length m repeated periodically;
    pass input_u to drive the recursion with a custom signal instead, and
    params_fn (taking the experiment's time variable) to override the
    coefficient schedules.  The equation noise e_t is white Gaussian, sized
    per measurement block so the measured y-block sits at the configured
    SNR: the recursion amplifies equation noise by roughly 1/(1 - a1_t^2)
    in power, so sigma carries the matching sqrt(1 - a1_t^2) correction.
    Lags reaching before t = 0 read an implicit zero warm-up.
    """
    N = cfg.n_samples
    if input_u is None:
        rng_u = substream(cfg.seed, STREAM_INPUT)
        u = np.tile(rng_u.standard_normal(cfg.m), N // cfg.m + 1)[:N]
    else:
        u = np.asarray(input_u, dtype=float)
        if u.shape != (N,):
            raise ValueError(f"input_u must have shape ({N},)")
    if params_fn is None:
        params_fn = lambda tt: experiment_params(cfg.experiment, tt)
    a = np.empty(N)
    b = np.empty(N)
    for t in range(N):
        # exp1 runs on the wall clock, exp2 on the sample index (undefined
        # at index 0, so the first sample reuses index 1).
        tt = max(t, 1) if cfg.experiment == "exp2" \
            else t / cfg.sample_rate_hz
        a[t], b[t] = params_fn(tt)

    def recurse(noise_seq):
        y = np.zeros(N)
        for t in range(N):
            y_prev = y[t - 1] if t >= 1 else 0.0
            u_prev = u[t - 1] if t >= 1 else 0.0
            y[t] = a[t] * y_prev + b[t] * u_prev + noise_seq[t]
        return y

    y_clean = recurse(np.zeros(N))
    if noise:
        sigma = np.zeros(N)
        scale = 10.0 ** (-cfg.snr_db / 10.0)
        for start in range(0, N, cfg.m):
            block = y_clean[start:start + cfg.m]
            sigma[start:start + cfg.m] = np.sqrt(
                np.sum(block ** 2) * scale / block.size)
        # The AR loop turns white equation noise into output noise with
        # stationary variance sigma^2/(1 - a^2); deflate sigma so the
        # noise power observed in y matches the block target.
        sigma *= np.sqrt(np.maximum(1.0 - a ** 2, 0.0))
        e = substream(cfg.seed, STREAM_NOISE).standard_normal(N) * sigma
        y = recurse(e)
    else:
        y = y_clean
    x_true = np.stack([_true_vector(cfg, a[t], b[t]) for t in range(N)])
    return TvarxData(u=u, y=y, x_true=x_true)


def regressor_matrix(y, u, t, m, P_hat, Q_hat):
    """Stack m lagged-measurement rows anchored at time t.

    Row j holds (y_{t+j-1}, ..., y_{t+j-P_hat}, u_{t+j-1}, ..., u_{t+j-Q_hat})
    and pairs with target y_{t+j}.  Requires t >= max(P_hat, Q_hat) so every
    lag exists in the given arrays.
    """
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    if t < max(P_hat, Q_hat):
        raise ValueError(f"t={t} leaves lags before the start of the data")
    if t + m - 1 > min(y.size, u.size):
        raise ValueError("not enough samples after t for a full block")
    A = np.empty((m, P_hat + Q_hat))
    for j in range(m):
        A[j, :P_hat] = y[t + j - P_hat:t + j][::-1]
        A[j, P_hat:] = u[t + j - Q_hat:t + j][::-1]
    return A


def block_starts(cfg):
    """Sample indices anchoring each full measurement block."""
    return np.arange(cfg.n_blocks) * cfg.m


def tvarx_stream(cfg, sim=None):
    """Elastic-net data blocks of the identification run, one per m-block.

    Early blocks reach into a zero warm-up of max(P_hat, Q_hat) samples so
    that the first anchor sits at t = 0.
    """
    if sim is None:
        sim = tvarx_simulate(cfg)
    W = max(cfg.P_hat, cfg.Q_hat)
    y_ext = np.concatenate([np.zeros(W), sim.y])
    u_ext = np.concatenate([np.zeros(W), sim.u])
    blocks = []
    for start in block_starts(cfg):
        A = regressor_matrix(y_ext, u_ext, start + W, cfg.m, cfg.P_hat, cfg.Q_hat)
        y_block = sim.y[start:start + cfg.m]
        blocks.append(ElasticNetData(A=A, y=y_block, lam=cfg.lam, mu=cfg.mu))
    return blocks


def node_partition(data, n_nodes, mu_total=None):
    """Split a measurement block row-wise across n_nodes nodes.

    Each node receives Q_v = A_v'A_v + (mu/|V|) I and phi_v = -A_v'y_v, so
    the node data sums back to the centralized elastic-net slice.
    """
    if mu_total is None:
        mu_total = data.mu
    rows = np.array_split(np.arange(data.m), n_nodes)
    out = []
    for idx in rows:
        if idx.size == 0:
            raise ValueError(f"block of {data.m} rows cannot feed {n_nodes} nodes")
        A_v = data.A[idx]
        y_v = data.y[idx]
        out.append(NodeData(Q=A_v.T @ A_v + (mu_total / n_nodes) * np.eye(data.n),
                            phi=-A_v.T @ y_v))
    return out


# ---------------------------------------------------------------------------
# RSS target tracking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathLoss:
    """Log-distance attenuation model in dBm.

    Received power at distance d is p0_dbm - 10 * exponent * log10(d / d0_m),
    clamped at the reference distance so cells nearer than d0_m read p0_dbm.
    """

    p0_dbm: float = -40.0
    d0_m: float = 1.0
    exponent: float = 3.0


@dataclass
class RssConfig:
    """Grid tracking scenario: a square area of unit cells ringed by sensors.

    `sensors` must be a perfect square (they deploy on a regular grid); each
    contributes meas_per_sensor dictionary rows drawn from the attenuation
    model with training noise at snr_db.  lam and mu weight the elastic net
    solved against the offset-removed, spectrally normalized dictionary.
    """

    area_m: float = 25.0
    cell_m: float = 1.0
    sensors: int = 36
    meas_per_sensor: int = 4
    snr_db: float = 25.0
    comm_radius_m: float = 4.5
    round_ms: float = 50.0
    path_length_steps: int = 100
    seed: int = 0
    pathloss: PathLoss = field(default_factory=PathLoss)
    lam: float = 2e-3
    mu: float = 1e-2

    def __post_init__(self):
        side = round(math.sqrt(self.sensors))
        if side * side != self.sensors:
            raise ValueError(f"sensors={self.sensors} is not a perfect square")
        if self.area_m <= 0 or self.cell_m <= 0 or self.cell_m > self.area_m:
            raise ValueError("inconsistent area and cell size")

    @property
    def cells_per_side(self):
        return int(round(self.area_m / self.cell_m))

    @property
    def n_cells(self):
        return self.cells_per_side ** 2

    @property
    def n_meas(self):
        return self.sensors * self.meas_per_sensor


def rss_model_value(d, pathloss):
    """Modeled received power in dBm at distance d (meters)."""
    d = np.maximum(np.asarray(d, dtype=float), pathloss.d0_m)
    return pathloss.p0_dbm - 10.0 * pathloss.exponent * np.log10(d / pathloss.d0_m)


def sensor_positions(cfg):
    """Regular sensor grid, centered within the area."""
    side = round(math.sqrt(cfg.sensors))
    step = cfg.area_m / side
    coords = (np.arange(side) + 0.5) * step
    xx, yy = np.meshgrid(coords, coords)
    return np.column_stack([xx.ravel(), yy.ravel()])


def cell_centers(cfg):
    """Centers of the unit cells, row-major over the grid."""
    side = cfg.cells_per_side
    coords = (np.arange(side) + 0.5) * cfg.cell_m
    xx, yy = np.meshgrid(coords, coords)
    return np.column_stack([xx.ravel(), yy.ravel()])


def rss_dictionary(cfg):
    """Fingerprint dictionary, meas_per_sensor rows per sensor.

    Entry (i, j) is the modeled power at sensor i from a source in cell j;
    the rows of one sensor differ by independent training-noise draws at the
    configured SNR, which keeps them informative rather than redundant.
    """
    sensors = sensor_positions(cfg)
    cells = cell_centers(cfg)
    diff = sensors[:, None, :] - cells[None, :, :]
    base = rss_model_value(np.sqrt((diff ** 2).sum(axis=2)), cfg.pathloss)
    rng = substream(cfg.seed, STREAM_DICT)
    scale = 10.0 ** (-cfg.snr_db / 20.0)
    rows = []
    for i in range(cfg.sensors):
        rms = np.sqrt(np.mean(base[i] ** 2))
        for _ in range(cfg.meas_per_sensor):
            rows.append(base[i] + rng.standard_normal(cfg.n_cells) * rms * scale)
    return np.array(rows)


def feasible_moves(cell, side):
    """In-bounds single-cell moves from a grid cell, the cell itself included."""
    row, col = divmod(cell, side)
    moves = []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            rr, cc = row + dr, col + dc
            if 0 <= rr < side and 0 <= cc < side:
                moves.append(rr * side + cc)
    return moves


def target_walk(cfg, steps=None):
    """Random walk over the cell grid, one move per round.

    Each step picks uniformly among the in-bounds moves (staying put
    included), which realizes reflection at the borders; corners offer four
    feasible cells.  Returns the visited cell indices, length steps + 1.
    """
    if steps is None:
        steps = cfg.path_length_steps
    side = cfg.cells_per_side
    rng = substream(cfg.seed, STREAM_WALK)
    cell = int(rng.integers(side * side))
    path = [cell]
    for _ in range(steps):
        moves = feasible_moves(cell, side)
        cell = moves[rng.integers(len(moves))]
        path.append(cell)
    return np.array(path, dtype=int)


def rss_measure(A, x_true, snr_db, seed, t):
    """Noisy linear measurement y = A x + e at round t.

    The noise is white Gaussian with total power ||A x||^2 10^(-snr/10),
    drawn from the sub-stream named by (seed, t) so each round's draw is
    reproducible in isolation.
    """
    y0 = A @ x_true
    m = y0.size
    sigma = math.sqrt(float(y0 @ y0) * 10.0 ** (-snr_db / 10.0) / m)
    e = substream(seed, STREAM_NOISE, t).standard_normal(m) * sigma
    return y0 + e


def rss_stream(cfg, steps=None):
    """Per-round elastic-net slices of a tracking run.

    Measurements are taken against the raw dBm dictionary.  For the solver
    the common offset (the mean column) is subtracted from both sides and
    the result is divided by its spectral norm: the occupancy vector sums
    to one, so y - a_bar = (A - a_bar 1^T) x + noise holds exactly and the
    subtraction removes the near-rank-one component that otherwise dwarfs
    the position-dependent directions.  lam and mu are calibrated against
    the rescaled dictionary.  Returns (blocks, walk, A_used); the quadratic
    term is shared across rounds, so the slices reuse one factorization.
    """
    A = rss_dictionary(cfg)
    offset = A.mean(axis=1)
    A_used = A - offset[:, None]
    scale = np.linalg.norm(A_used, 2)
    A_used /= scale
    walk = target_walk(cfg, steps)
    blocks = []
    for t, cell in enumerate(walk):
        x_true = np.zeros(cfg.n_cells)
        x_true[cell] = 1.0
        y = rss_measure(A, x_true, cfg.snr_db, cfg.seed, t)
        blocks.append(ElasticNetData(A=A_used, y=(y - offset) / scale,
                                     lam=cfg.lam, mu=cfg.mu))
    return blocks, walk, A_used


# ---------------------------------------------------------------------------
# Synthetic streams for property and contraction tests
# ---------------------------------------------------------------------------

def random_problem(n, sigma, beta, seed, lam=0.1, phi_scale=1.0):
    """Random slice with prescribed extreme eigenvalues of Q.

    Q is a random rotation of eigenvalues spread over [sigma, beta] with the
    endpoints attained exactly.
    """
    if not 0 < sigma <= beta:
        raise ValueError("need 0 < sigma <= beta")
    rng = substream(seed, STREAM_PROBLEM)
    if n == 1:
        Q = np.array([[sigma]])
    else:
        eigs = np.linspace(sigma, beta, n)
        M = rng.standard_normal((n, n))
        U, _ = np.linalg.qr(M)
        Q = (U * eigs) @ U.T
        Q = (Q + Q.T) / 2.0
    phi = rng.standard_normal(n) * phi_scale
    return QuadraticL1Problem(Q, phi, lam)


def drifting_quadratic_stream(n, rounds, sigma, beta, drift, seed, lam=0.05,
                              drift_orth_to_flat=True):
    """Slowly varying stream: fixed Q, linear drift of the linear term.

    The drift direction can be kept orthogonal to the eigenvector of the
    smallest eigenvalue, which keeps the reference fixed point from sliding
    along the nearly flat direction when sigma is tiny.
    """
    rng = substream(seed, STREAM_PROBLEM)
    eigs = np.linspace(sigma, beta, n)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Q = (U * eigs) @ U.T
    Q = (Q + Q.T) / 2.0
    phi0 = rng.standard_normal(n)
    direction = rng.standard_normal(n)
    if drift_orth_to_flat:
        flat = U[:, 0]
        direction = direction - (direction @ flat) * flat
    direction = direction / np.linalg.norm(direction)
    base = QuadraticL1Problem(Q, phi0, lam)
    return [base.with_phi(phi0 + drift * t * direction) for t in range(rounds)]


@dataclass
class SyntheticConfig:
    """Knobs of the drifting sparse regression scenario."""

    n: int = 20
    m: int = 12
    blocks: int = 100
    drift: float = 2e-3
    lam: float = 1e-2
    mu: float = 1e-6
    snr_db: float = 25.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.m < 1 or self.blocks < 1:
            raise ValueError("scenario dimensions must be positive")
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError("lam and mu must be positive")


def synthetic_stream(n=20, m=12, blocks=100, drift=2e-3, lam=1e-2, mu=1e-6,
                     snr_db=25.0, seed=0):
    """Slowly drifting sparse regression stream in elastic-net form.

    A fixed Gaussian sensing matrix observes a two-sparse target whose
    nonzero entries move smoothly; measurement noise at snr_db.
    """
    rng = substream(seed, STREAM_PROBLEM)
    A = rng.standard_normal((m, n)) / math.sqrt(m)
    supp = (0, n // 2)
    out = []
    truth = []
    noise_rng = substream(seed, STREAM_NOISE)
    scale = 10.0 ** (-snr_db / 20.0)
    for t in range(blocks):
        x = np.zeros(n)
        x[supp[0]] = 1.0 + 0.3 * math.sin(2.0 * math.pi * drift * t)
        x[supp[1]] = -0.8 + 0.3 * math.cos(2.0 * math.pi * drift * t)
        y0 = A @ x
        y = y0 + noise_rng.standard_normal(m) * np.linalg.norm(y0) * scale / math.sqrt(m)
        out.append(ElasticNetData(A=A, y=y, lam=lam, mu=mu))
        truth.append(x)
    return out, np.array(truth)
