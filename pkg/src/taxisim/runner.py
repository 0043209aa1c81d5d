"""Episode rollouts, parallel execution, and run artifacts (trajectories,
manifest, summary).

Every episode is a pure function of (config, seed), so per-seed outputs are
byte-identical no matter how many workers execute the batch. Each worker
writes only its own episode files; the manifest is written last by the parent
as the commit marker.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .environment import FCD_PER_CHANNEL, FULL_GRADIENT
from .trajectory import Trajectory, trajectory_columns


class SimulationNaNError(RuntimeError):
    """A non-finite value appeared in an emitted trajectory field."""

    def __init__(self, seed: int, step: int, row: dict):
        super().__init__(f"non-finite value at seed {seed}, step {step}: {row}")
        self.seed = seed
        self.step = step
        self.row = row


def n_obs_values(config: ExperimentConfig) -> int:
    mode = config.env_params.observation_mode
    if mode == FULL_GRADIENT:
        return 2
    if mode == FCD_PER_CHANNEL:
        return len(config.landscape.channels)
    return 1


def run_episode(config: ExperimentConfig, seed: int) -> Trajectory:
    """Simulate one full episode and return its step records."""
    env = config.build_environment()
    policy = config.build_policy()
    state = env.reset(seed)
    policy.reset(state)
    obs = env.observe(state)

    channels = config.landscape.channels
    columns = trajectory_columns(n_obs_values(config), channels)
    dt = config.env_params.dt_s
    n_steps = int(round(config.env_params.episode_s / dt))
    data = np.empty((n_steps, len(columns)))

    for i in range(n_steps):
        action = policy.act(obs, state.rng, physio=state.physio)
        state, result = env.step(state, action)
        obs = result.observation
        row = [state.t, state.x, state.y, state.heading, state.speed, result.reward]
        row.extend(obs.values)
        row.extend(state.beta.get(ch) for ch in channels)
        row.append(state.physio.dopamine)
        row.append(state.physio.serotonin)
        data[i] = row
        if result.done:
            data = data[: i + 1]
            break

    bad = ~np.isfinite(data)
    if bad.any():
        step = int(np.argwhere(bad.any(axis=1))[0][0])
        raise SimulationNaNError(seed, step, dict(zip(columns, data[step].tolist())))
    return Trajectory(columns, data)


def episode_seeds(config: ExperimentConfig) -> list[int]:
    return [config.base_seed + i for i in range(config.n_episodes)]


def _episode_worker(args):
    config, seed, out_dir = args
    traj = run_episode(config, seed)
    csv_path = os.path.join(out_dir, f"episode_{seed:06d}.csv")
    jsonl_path = os.path.join(out_dir, f"episode_{seed:06d}.jsonl")
    traj.write_csv(csv_path)
    traj.write_jsonl(jsonl_path)
    return seed, _episode_summary(traj, config)


def _episode_summary(traj: Trajectory, config: ExperimentConfig) -> dict:
    first = config.landscape.components[0]
    fx = traj.positions[-1, 0] - first.center[0]
    fy = traj.positions[-1, 1] - first.center[1]
    v_max = config.env_params.v_max_units_per_s
    return {
        "steps": len(traj),
        "mean_reward": float(traj.reward.mean()),
        "mean_speed": float(traj.speed.mean()),
        "dwell_fraction": float(np.mean(traj.speed < 0.2 * v_max)),
        "final_distance_to_first_component": math.hypot(fx, fy),
    }


def run_batch(config: ExperimentConfig, out_dir: str, workers: int = 1) -> dict:
    """Run all episodes, write trajectories + summary + manifest; return summary."""
    os.makedirs(out_dir, exist_ok=True)
    seeds = episode_seeds(config)
    jobs = [(config, seed, out_dir) for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_episode_worker, jobs))
    else:
        results = [_episode_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    per_episode = {str(seed): summary for seed, summary in results}
    summary = {
        "n_episodes": len(seeds),
        "mean_reward": float(np.mean([s["mean_reward"] for _, s in results])),
        "mean_speed": float(np.mean([s["mean_speed"] for _, s in results])),
        "mean_dwell_fraction": float(np.mean([s["dwell_fraction"] for _, s in results])),
        "mean_final_distance_to_first_component": float(
            np.mean([s["final_distance_to_first_component"] for _, s in results])
        ),
        "episodes": per_episode,
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)

    manifest = {
        "engine_version": __version__,
        "config": config.resolved,
        "seeds": seeds,
        "trajectory_files": [f"episode_{s:06d}.csv" for s in seeds],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return summary
