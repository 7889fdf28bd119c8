"""Dataset synthesis and trajectory file ingestion.

Two generators: a stochastic Lorenz system (RK4 transitions, two-component
Gaussian process noise, additive observation noise) and a 2-d four-heading
toy.  Real trajectory files enter through a generic CSV reader with rows
``seq_id,t,x0..x{d_x-1}``.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .util import atomic_write_text

log = logging.getLogger(__name__)

__all__ = [
    "Trajectory",
    "Dataset",
    "LorenzConfig",
    "LorenzData",
    "rk4_step",
    "simulate_lorenz_paths",
    "simulate_lorenz",
    "generate_four_mode",
    "load_csv",
    "save_csv",
    "dataset_csv_text",
    "group_by_prefix",
]


@dataclass
class Trajectory:
    """One T x d_x observation sequence with a declared conditioning prefix."""

    observations: np.ndarray
    prefix_len: int

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=np.float64)
        if self.observations.ndim != 2:
            raise ValueError(f"Trajectory: expected (T, d_x), got {self.observations.shape}")
        if not np.all(np.isfinite(self.observations)):
            raise ValueError("Trajectory: non-finite observations")
        if not 1 <= self.prefix_len <= self.observations.shape[0]:
            raise ValueError(
                f"Trajectory: prefix_len {self.prefix_len} out of range for T={self.observations.shape[0]}"
            )

    @property
    def horizon(self):
        return self.observations.shape[0] - self.prefix_len

    @property
    def prefix(self):
        return self.observations[: self.prefix_len]

    @property
    def continuation(self):
        return self.observations[self.prefix_len :]


@dataclass
class Dataset:
    """Uniform-length trajectories stored as one (N, T, d_x) array."""

    data: np.ndarray
    prefix_len: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"Dataset: expected (N, T, d_x), got {self.data.shape}")
        if self.data.shape[0] and not np.all(np.isfinite(self.data)):
            raise ValueError("Dataset: non-finite observations")
        if self.data.shape[0] and not 1 <= self.prefix_len <= self.data.shape[1]:
            raise ValueError("Dataset: prefix_len out of range")

    def __len__(self):
        return self.data.shape[0]

    @property
    def d_x(self):
        return self.data.shape[2]

    @property
    def seq_len(self):
        return self.data.shape[1]

    @property
    def trajectories(self):
        return [Trajectory(self.data[i], self.prefix_len) for i in range(len(self))]

    def subset(self, indices):
        return Dataset(self.data[np.asarray(indices)], self.prefix_len)


@dataclass
class LorenzConfig:
    """System, integration and noise parameters of the stochastic Lorenz source."""

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    dt: float = 0.01
    seq_len: int = 100
    prefix_len: int = 10
    noise_mean_a: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    noise_mean_b: np.ndarray = field(default_factory=lambda: np.array([0.0, -1.0, 0.0]))
    noise_cov: np.ndarray = field(
        default_factory=lambda: np.array(
            [[0.06, 0.03, 0.01], [0.03, 0.03, 0.03], [0.01, 0.03, 0.05]]
        )
    )
    obs_noise_std: np.ndarray = field(default_factory=lambda: np.array([0.6, 0.4, 0.8]))
    init_low: np.ndarray = field(default_factory=lambda: np.array([-10.0, -10.0, 10.0]))
    init_high: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 30.0]))

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("LorenzConfig: dt must be positive")
        cov = np.asarray(self.noise_cov, dtype=np.float64)
        if not np.allclose(cov, cov.T):
            raise ValueError("LorenzConfig: noise covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) < -1e-12):
            raise ValueError("LorenzConfig: noise covariance must be positive semi-definite")


def _lorenz_field(state, cfg):
    x, y, z = state[..., 0], state[..., 1], state[..., 2]
    return np.stack(
        [cfg.sigma * (y - x), x * (cfg.rho - z) - y, x * y - cfg.beta * z], axis=-1
    )


def rk4_step(state, cfg):
    """One classical 4th-order Runge-Kutta step of the Lorenz field."""
    state = np.asarray(state, dtype=np.float64)
    h = cfg.dt
    k1 = _lorenz_field(state, cfg)
    k2 = _lorenz_field(state + 0.5 * h * k1, cfg)
    k3 = _lorenz_field(state + 0.5 * h * k2, cfg)
    k4 = _lorenz_field(state + h * k3, cfg)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate_lorenz_paths(n, cfg, rng, init_states=None, process_noise=True, obs_noise=True):
    """Simulate n sequences; returns (observations, latent_paths), each (n, T, 3).

    Per step: RK4 advance, then process noise drawn from the two-component
    Gaussian mixture, then emission with additive observation noise.
    """
    t_len = cfg.seq_len
    if init_states is None:
        init_states = rng.uniform(cfg.init_low, cfg.init_high, size=(n, 3))
    else:
        init_states = np.broadcast_to(np.asarray(init_states, dtype=np.float64), (n, 3)).copy()
    chol = np.linalg.cholesky(cfg.noise_cov + 1e-12 * np.eye(3))
    latents = np.empty((n, t_len, 3))
    latents[:, 0] = init_states
    for t in range(1, t_len):
        nxt = rk4_step(latents[:, t - 1], cfg)
        if process_noise:
            pick = rng.random((n, 1)) < 0.5
            means = np.where(pick, cfg.noise_mean_a, cfg.noise_mean_b)
            nxt = nxt + means + rng.standard_normal((n, 3)) @ chol.T
        latents[:, t] = nxt
    obs = latents.copy()
    if obs_noise:
        obs += rng.standard_normal((n, t_len, 3)) * cfg.obs_noise_std
    return obs, latents


@dataclass
class LorenzData:
    train: Dataset
    val: Dataset
    test: Dataset
    groups: list


def simulate_lorenz(cfg, rng, counts=(5000, 200, 800), n_groups=10, group_size=100):
    """Train/val/test splits plus W-distance groups.

    Each group shares a single initial condition; its sequences differ only
    through the noise realizations.
    """
    n_train, n_val, n_test = counts
    if min(counts) < 0 or n_train < 1:
        raise ValueError("simulate_lorenz: counts must be positive")
    splits = []
    for n in counts:
        obs, _ = simulate_lorenz_paths(n, cfg, rng)
        splits.append(Dataset(obs, cfg.prefix_len))
    groups = []
    for _ in range(n_groups):
        init = rng.uniform(cfg.init_low, cfg.init_high, size=3)
        obs, _ = simulate_lorenz_paths(group_size, cfg, rng, init_states=init)
        groups.append(Dataset(obs, cfg.prefix_len))
    return LorenzData(train=splits[0], val=splits[1], test=splits[2], groups=groups)


FOUR_MODE_HEADINGS = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]) / np.sqrt(2.0)
FOUR_MODE_STEP = 0.5
FOUR_MODE_NOISE = 0.05
FOUR_MODE_LEN = 4


def _four_mode_split(n, rng, prefix_len, noise_std):
    starts = rng.standard_normal((n, 2)) * noise_std
    modes = rng.integers(0, 4, size=n)
    steps = FOUR_MODE_HEADINGS[modes] * FOUR_MODE_STEP
    data = np.empty((n, FOUR_MODE_LEN, 2))
    data[:, 0] = starts
    for t in range(1, FOUR_MODE_LEN):
        data[:, t] = data[:, t - 1] + steps + rng.standard_normal((n, 2)) * noise_std
    return Dataset(data, prefix_len), modes


def generate_four_mode(counts, rng, prefix_len=1, noise_std=FOUR_MODE_NOISE, return_modes=False):
    """Length-4 planar trajectories marching along one of four diagonal headings.

    Start points are N(0, noise_std^2 I); each step adds heading * 0.5 plus
    isotropic noise.  ``counts`` gives (train, val, test) sizes.
    """
    if min(counts) < 0 or counts[0] < 1:
        raise ValueError("generate_four_mode: counts must be positive")
    splits, modes = [], []
    for n in counts:
        ds, m = _four_mode_split(n, rng, prefix_len, noise_std)
        splits.append(ds)
        modes.append(m)
    if return_modes:
        return tuple(splits), tuple(modes)
    return tuple(splits)


# ---------------------------------------------------------------------------
# CSV ingestion / export
# ---------------------------------------------------------------------------

def _csv_header(d_x):
    return ["seq_id", "t"] + [f"x{i}" for i in range(d_x)]


def load_csv(path, d_x, seq_len, prefix_len):
    """Assemble a Dataset from rows ``seq_id,t,x0..x{d_x-1}``.

    Sequences shorter than seq_len are skipped (count logged); longer ones
    are truncated.  Malformed or non-finite rows and out-of-order step
    indices raise with the offending row or sequence named.
    """
    sequences = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return Dataset(np.zeros((0, seq_len, d_x)), prefix_len)
        if header != _csv_header(d_x):
            raise ValueError(f"{path}: unexpected header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2 + d_x:
                raise ValueError(f"{path}: malformed row {lineno}: expected {2 + d_x} fields")
            seq_id = row[0]
            try:
                t = int(row[1])
                values = [float(v) for v in row[2:]]
            except ValueError:
                raise ValueError(f"{path}: malformed row {lineno}: non-numeric field") from None
            if not all(np.isfinite(values)):
                raise ValueError(f"{path}: non-finite value at row {lineno}")
            steps = sequences.setdefault(seq_id, [])
            if steps and t <= steps[-1][0]:
                raise ValueError(f"{path}: sequence {seq_id!r}: step index not ascending at row {lineno}")
            steps.append((t, values))

    kept, skipped = [], 0
    for seq_id, steps in sequences.items():
        if len(steps) < seq_len:
            skipped += 1
            continue
        kept.append([v for _, v in steps[:seq_len]])
    if skipped:
        log.warning("load_csv: skipped %d sequence(s) shorter than %d", skipped, seq_len)
    data = np.asarray(kept, dtype=np.float64).reshape(len(kept), seq_len, d_x)
    return Dataset(data, prefix_len)


def dataset_csv_text(dataset, seq_ids=None):
    """Render a Dataset in the trajectory CSV format with reproducible float text."""
    n, t_len, d_x = dataset.data.shape
    if seq_ids is None:
        seq_ids = [str(i) for i in range(n)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_csv_header(d_x))
    for i in range(n):
        for t in range(t_len):
            writer.writerow([seq_ids[i], t] + [repr(float(v)) for v in dataset.data[i, t]])
    return buf.getvalue()


def save_csv(dataset, path, seq_ids=None):
    """Write a Dataset atomically in the trajectory CSV format."""
    atomic_write_text(path, dataset_csv_text(dataset, seq_ids))


def group_by_prefix(dataset, n_groups, group_size, radius):
    """Greedy disjoint clustering by flattened-prefix Euclidean distance.

    Each group collects the (nearest-first) trajectories within ``radius`` of
    an anchor, capped at ``group_size``.  Returns fewer groups when the pool
    runs out; undersized groups are counted in a warning.
    """
    if len(dataset) < group_size:
        raise ValueError("group_by_prefix: dataset smaller than group_size")
    prefixes = dataset.data[:, : dataset.prefix_len].reshape(len(dataset), -1)
    unused = np.ones(len(dataset), dtype=bool)
    groups = []
    undersized = 0
    while len(groups) < n_groups and unused.any():
        anchor = int(np.argmax(unused))
        dists = np.linalg.norm(prefixes - prefixes[anchor], axis=1)
        dists[~unused] = np.inf
        candidates = np.flatnonzero(dists <= radius)
        candidates = candidates[np.argsort(dists[candidates], kind="stable")][:group_size]
        if candidates.size < group_size:
            undersized += 1
        unused[candidates] = False
        groups.append(dataset.subset(candidates))
    if len(groups) < n_groups or undersized:
        log.warning(
            "group_by_prefix: %d group(s) formed (%d undersized) of %d requested",
            len(groups),
            undersized,
            n_groups,
        )
    return groups
