"""Behavioral and statistical assays over recorded trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .landscape import Landscape, SalienceVector
from .trajectory import Trajectory


class AssayError(ValueError):
    """Assay preconditions not met (too little data, degenerate input)."""


@dataclass(frozen=True)
class AssayReport:
    name: str
    statistics: dict[str, float]
    passed: bool
    n_samples: int
    seed: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")
        for k, v in self.statistics.items():
            if not math.isfinite(v):
                raise ValueError(f"non-finite statistic {k}={v}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistics": self.statistics,
            "passed": self.passed,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "notes": list(self.notes),
        }


def chemotaxis_index(
    trajectories: list[Trajectory],
    target_center,
    radius: float,
    threshold: float = 0.5,
    seed: int = 0,
) -> AssayReport:
    """CI = (time inside target disk - time outside) / total time, in [-1, 1]."""
    if radius <= 0:
        raise AssayError(f"radius must be positive, got {radius}")
    if not trajectories:
        raise AssayError("no trajectories")
    cx, cy = float(target_center[0]), float(target_center[1])
    t_in = 0.0
    t_total = 0.0
    for traj in trajectories:
        if len(traj) == 0:
            raise AssayError("zero-duration trajectory")
        pos = traj.positions
        d2 = (pos[:, 0] - cx) ** 2 + (pos[:, 1] - cy) ** 2
        t_in += float(np.count_nonzero(d2 <= radius * radius))
        t_total += len(traj)
    ci = (2.0 * t_in - t_total) / t_total
    return AssayReport(
        name="chemotaxis_index",
        statistics={"ci": ci, "time_inside_fraction": t_in / t_total},
        passed=ci > threshold,
        n_samples=int(t_total),
        seed=seed,
    )


def target_cell_masses(landscape: Landscape, beta: SalienceVector, grid_shape=(32, 32)) -> np.ndarray:
    """Normalized per-cell target mass by the midpoint rule, shape grid_shape."""
    h, w = grid_shape
    b = landscape.bounds
    xs = b.x_min + (np.arange(w) + 0.5) * (b.x_max - b.x_min) / w
    ys = b.y_min + (np.arange(h) + 0.5) * (b.y_max - b.y_min) / h
    logd = np.array([[landscape.log_density((x, y), beta) for x in xs] for y in ys])
    dens = np.exp(logd - logd.max())
    return dens / dens.sum()


def position_histogram(positions: np.ndarray, landscape: Landscape, grid_shape=(32, 32)) -> np.ndarray:
    h, w = grid_shape
    b = landscape.bounds
    ix = np.clip(((positions[:, 0] - b.x_min) / (b.x_max - b.x_min) * w).astype(int), 0, w - 1)
    iy = np.clip(((positions[:, 1] - b.y_min) / (b.y_max - b.y_min) * h).astype(int), 0, h - 1)
    counts = np.zeros((h, w))
    np.add.at(counts, (iy, ix), 1.0)
    return counts / counts.sum()


def stationary_tv_distance(
    positions: np.ndarray,
    landscape: Landscape,
    beta: SalienceVector,
    grid_shape=(32, 32),
    burn_in: int = 0,
    min_samples: int = 100_000,
    threshold: float = 0.05,
    seed: int = 0,
) -> AssayReport:
    """Total variation distance between the visit histogram and the normalized target."""
    positions = np.asarray(positions, dtype=float)
    kept = positions[burn_in:]
    if kept.shape[0] < min_samples:
        raise AssayError(f"need >= {min_samples} post-burn-in samples, got {kept.shape[0]}")
    empirical = position_histogram(kept, landscape, grid_shape)
    target = target_cell_masses(landscape, beta, grid_shape)
    tv = 0.5 * float(np.abs(empirical - target).sum())
    return AssayReport(
        name="stationary_tv_distance",
        statistics={"tv_distance": tv},
        passed=tv < threshold,
        n_samples=int(kept.shape[0]),
        seed=seed,
    )


def extract_run_lengths(traj: Trajectory, dwell_speed_threshold: float) -> np.ndarray:
    """Path lengths of contiguous above-threshold-speed segments."""
    speed = traj.speed
    dt = traj.dt()
    moving = speed > dwell_speed_threshold
    lengths = []
    acc = 0.0
    for s, m in zip(speed, moving):
        if m:
            acc += s * dt
        elif acc > 0.0:
            lengths.append(acc)
            acc = 0.0
    if acc > 0.0:
        lengths.append(acc)
    return np.array(lengths)


def pareto_mle_alpha(lengths: np.ndarray, l_min: float) -> float:
    """Continuous Pareto tail exponent, alpha_hat = 1 + n / sum ln(l / l_min)."""
    tail = lengths[lengths >= l_min]
    return 1.0 + len(tail) / float(np.sum(np.log(tail / l_min)))


def tail_log_likelihood_ratio(lengths: np.ndarray, l_min: float) -> tuple[float, float]:
    """(LLR, alpha_hat): power-law minus exponential log-likelihood above l_min.

    Both tails are normalized on [l_min, inf): Pareto with MLE exponent vs
    shifted exponential with MLE rate.
    """
    tail = lengths[lengths >= l_min]
    n = len(tail)
    alpha = pareto_mle_alpha(lengths, l_min)
    ll_pl = n * math.log(alpha - 1.0) - n * math.log(l_min) - alpha * float(np.sum(np.log(tail / l_min)))
    rate = 1.0 / float(np.mean(tail - l_min))
    ll_exp = n * math.log(rate) - rate * float(np.sum(tail - l_min))
    return ll_pl - ll_exp, alpha


def step_length_tail(
    traj: Trajectory,
    dwell_speed_threshold: float,
    min_runs: int = 50,
    l_min: float | None = None,
    expect_heavy_tail: bool = True,
    seed: int = 0,
) -> AssayReport:
    """Compare power-law vs exponential fits to the run-length tail.

    l_min defaults to the median run length; pass means the log-likelihood
    ratio points the way the caller expects (heavy-tailed or not).
    """
    lengths = extract_run_lengths(traj, dwell_speed_threshold)
    if len(lengths) < min_runs:
        raise AssayError(f"need >= {min_runs} runs, got {len(lengths)}")
    if l_min is None:
        l_min = float(np.median(lengths))
    tail = lengths[lengths >= l_min]
    if len(tail) < 10 or float(np.std(tail)) < 1e-12 or float(tail.min()) <= 0:
        return AssayReport(
            name="step_length_tail",
            statistics={"llr": 0.0, "alpha_hat": 0.0, "l_min": l_min, "n_runs": float(len(lengths))},
            passed=False,
            n_samples=len(lengths),
            seed=seed,
            notes=("degenerate run-length distribution",),
        )
    llr, alpha = tail_log_likelihood_ratio(lengths, l_min)
    passed = llr > 0 if expect_heavy_tail else llr < 0
    return AssayReport(
        name="step_length_tail",
        statistics={"llr": llr, "alpha_hat": alpha, "l_min": l_min, "n_runs": float(len(lengths))},
        passed=passed,
        n_samples=len(lengths),
        seed=seed,
    )
