"""Numerical verification: finite-difference gradient checks and the identity
between the temporal log-density derivative and the directional-derivative
reward along simulated paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .environment import Action
from .inverse import ParametricEnergy
from .landscape import Bounds, DensityComponent, Landscape, SalienceVector

FD_STEP = 1e-5
GRAD_TOL = 1e-6


def central_fd_gradient(fn, z, h: float = FD_STEP) -> np.ndarray:
    x, y = float(z[0]), float(z[1])
    gx = (fn((x + h, y)) - fn((x - h, y))) / (2.0 * h)
    gy = (fn((x, y + h)) - fn((x, y - h))) / (2.0 * h)
    return np.array([gx, gy])


def relative_gradient_error(analytic: np.ndarray, fd: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(fd)), 1e-8)
    return float(np.linalg.norm(np.asarray(analytic) - fd)) / denom


def random_landscape(rng: np.random.Generator, n_components=3) -> Landscape:
    bounds = Bounds(-3.0, 3.0, -3.0, 3.0)
    comps = []
    for i in range(n_components):
        comps.append(DensityComponent(
            kind=rng.choice(["gaussian", "cone"]),
            center=(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)),
            scale=rng.uniform(0.4, 1.5),
            channel=f"ch{i}",
            polarity=rng.choice(["attractant", "repellent"]),
        ))
    return Landscape(tuple(comps), bounds)


def check_landscape_gradients(
    landscape: Landscape | None = None,
    n_points: int = 100,
    seed: int = 0,
    corrupt: float = 0.0,
) -> float:
    """Max relative error between analytic and central-FD gradients.

    Samples points and saliences; skips points where the FD gradient is tiny
    (relative error is meaningless there) or too close to a cone apex for the
    stencil. `corrupt` offsets the analytic gradient, as a negative control.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    while checked < n_points:
        ls = landscape if landscape is not None else random_landscape(rng)
        b = ls.bounds
        z = (rng.uniform(b.x_min, b.x_max), rng.uniform(b.y_min, b.y_max))
        beta = SalienceVector({ch: rng.uniform(0.2, 2.0) for ch in ls.channels})
        too_close = any(
            c.kind == "cone" and math.hypot(z[0] - c.center[0], z[1] - c.center[1]) < 10 * FD_STEP
            for c in ls.components
        )
        if too_close:
            continue
        fd = central_fd_gradient(lambda p: ls.log_density(p, beta), z)
        if np.linalg.norm(fd) < 1e-3:
            continue
        analytic = ls.gradient(z, beta) + corrupt
        worst = max(worst, relative_gradient_error(analytic, fd))
        checked += 1
    return worst


def check_rbf_gradients(n_points: int = 100, seed: int = 0, corrupt: float = 0.0) -> float:
    """Same check for the parametric RBF field's analytic gradient."""
    rng = np.random.default_rng(seed)
    bounds = Bounds(-3.0, 3.0, -3.0, 3.0)
    model = ParametricEnergy(
        bounds=bounds,
        weights=rng.standard_normal((8, 8)),
        rbf_scale=1.0,
    )
    worst = 0.0
    checked = 0
    while checked < n_points:
        z = (rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0))
        fd = central_fd_gradient(lambda p: float(model.log_density_hat([p])[0]), z)
        if np.linalg.norm(fd) < 1e-3:
            continue
        analytic = model.gradient_hat([z])[0] + corrupt
        worst = max(worst, relative_gradient_error(analytic, fd))
        checked += 1
    return worst


@dataclass(frozen=True)
class FcdCheckResult:
    dt_s: float
    mean_abs_error: float
    max_abs_error: float
    n_steps: int


def fcd_identity_error(config: ExperimentConfig, duration_s: float = 5.0,
                       dt: float | None = None) -> FcdCheckResult:
    """Run a smooth scripted rollout and compare the per-step temporal finite
    difference of log density against the directional-derivative reward.

    The discrepancy is first order in dt, so halving dt should halve it.
    Requires a fixed (time-invariant) salience schedule.
    """
    if config.salience.mode != "fixed":
        raise ValueError("identity check needs a fixed salience schedule")
    env_params = config.env_params if dt is None else replace(config.env_params, dt_s=dt)
    config = replace(config, env_params=env_params)
    env = config.build_environment()
    dt = env_params.dt_s
    state = env.reset(seed=0)
    beta = state.beta
    ls = config.landscape
    action = Action(0.12, 0.8)  # gentle accelerating left-curving arc

    n_steps = int(round(duration_s / dt))
    errors = np.empty(n_steps)
    prev_logd = ls.log_density(state.z, beta)
    for i in range(n_steps):
        state, result = env.step(state, action)
        logd = ls.log_density(state.z, beta)
        fd = (logd - prev_logd) / dt
        errors[i] = abs(fd - result.reward)
        prev_logd = logd
    return FcdCheckResult(dt, float(errors.mean()), float(errors.max()), n_steps)


def fcd_convergence(config: ExperimentConfig, dt0: float = 0.01, halvings: int = 3,
                    duration_s: float = 5.0) -> list[FcdCheckResult]:
    """Identity error at dt0, dt0/2, ... ; consecutive ratios should be near 2."""
    results = []
    dt = dt0
    for _ in range(halvings + 1):
        results.append(fcd_identity_error(config, duration_s=duration_s, dt=dt))
        dt /= 2.0
    return results


def convergence_ratios(results: list[FcdCheckResult]) -> list[float]:
    return [
        results[i].mean_abs_error / results[i + 1].mean_abs_error
        for i in range(len(results) - 1)
    ]
