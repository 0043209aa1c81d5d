"""End-to-end behavioral acceptance suite.

Each test exercises one stated guarantee of the engine at desk scale and logs
a PASS/FAIL line with the measured statistic and its gate; the lines appear in
the terminal summary after the run.
"""

import math
import time

import numpy as np
import pytest

from conftest import record_criterion
from taxisim import config as config_mod, verify
from taxisim.assays import (
    chemotaxis_index,
    stationary_tv_distance,
    step_length_tail,
)
from taxisim.inverse import TrajectoryDataset, evaluate_recovery, fit_energy
from taxisim.landscape import SalienceVector, uniform_salience
from taxisim.runner import run_batch, run_episode


def two_patch_landscape():
    return {
        "bounds": {"x_min": -3, "x_max": 3, "y_min": -3, "y_max": 3},
        "components": [
            {"kind": "gaussian", "center": [-1.5, 0.0], "scale": 0.7, "channel": "food"},
            {"kind": "gaussian", "center": [1.5, 0.0], "scale": 0.7, "channel": "water"},
        ],
    }


def single_peak_landscape(scale=0.8):
    return {
        "bounds": {"x_min": -3, "x_max": 3, "y_min": -3, "y_max": 3},
        "components": [
            {"kind": "gaussian", "center": [0.0, 0.0], "scale": scale, "channel": "food"}
        ],
    }


def rollout_rewardless(cfg, seed, n_steps):
    """Manual closed loop returning the positions array only (cheap, no records)."""
    env = cfg.build_environment()
    policy = cfg.build_policy()
    state = env.reset(seed)
    policy.reset(state)
    obs = env.observe(state)
    pos = np.empty((n_steps, 2))
    for i in range(n_steps):
        action = policy.act(obs, state.rng, physio=state.physio)
        state, res = env.step(state, action)
        obs = res.observation
        pos[i] = (state.x, state.y)
    return pos


def test_gradient_correctness():
    t0 = time.perf_counter()
    err_land = verify.check_landscape_gradients(n_points=100, seed=0)
    err_rbf = verify.check_rbf_gradients(seed=0)
    elapsed = time.perf_counter() - t0
    worst = max(err_land, err_rbf)
    ok = worst < 1e-6 and elapsed < 1.0
    record_criterion(
        "gradient correctness",
        ok,
        f"max rel err {worst:.2e} (tol 1e-6), runtime {elapsed:.2f}s (limit 1s)",
    )
    assert ok


def test_signal_identity_first_order_convergence():
    t0 = time.perf_counter()
    cfg = config_mod.from_dict({
        "landscape": single_peak_landscape(scale=1.0),
        "policy": {"kind": "scripted", "params": {"actions": [[0.12, 0.8]]}},
        "environment": {"dt_s": 0.01, "episode_s": 5.0, "v_max_units_per_s": 2.0},
    })
    results = verify.fcd_convergence(cfg, dt0=0.01, halvings=3)
    ratios = verify.convergence_ratios(results)
    elapsed = time.perf_counter() - t0
    ok = all(1.8 <= r <= 2.2 for r in ratios) and elapsed < 10.0
    record_criterion(
        "temporal-difference signal identity",
        ok,
        f"halving ratios {[round(r, 3) for r in ratios]} (gate [1.8, 2.2]), "
        f"runtime {elapsed:.1f}s (limit 10s)",
    )
    assert ok


def test_langevin_sampler_matches_target():
    t0 = time.perf_counter()
    cfg = config_mod.from_dict({
        "landscape": {
            "bounds": {"x_min": -3, "x_max": 3, "y_min": -3, "y_max": 3},
            "components": [
                {"kind": "gaussian", "center": [-1.2, 0.0], "scale": 0.7, "channel": "food"},
                {"kind": "gaussian", "center": [1.2, 0.5], "scale": 0.7, "channel": "water"},
            ],
        },
        "salience": {"mode": "fixed", "fixed_value": 1.0},
        "policy": {"kind": "langevin_oracle"},
        "environment": {
            "dt_s": 0.01,
            "episode_s": 11000.0,
            "observation_mode": "full_gradient",
            "v_max_units_per_s": 1000.0,
            "linear_accel_max_units_per_s2": 1e6,
            "angular_accel_max_rad_per_s2": 1e7,
            "start": {"mode": "uniform"},
        },
    })
    burn_in, n_keep = 100_000, 1_000_000
    pos = rollout_rewardless(cfg, seed=0, n_steps=burn_in + n_keep)
    beta = uniform_salience(cfg.landscape)
    report = stationary_tv_distance(pos, cfg.landscape, beta, burn_in=burn_in)
    elapsed = time.perf_counter() - t0
    tv = report.statistics["tv_distance"]
    ok = tv < 0.05 and elapsed < 60.0
    record_criterion(
        "stochastic gradient sampler stationarity",
        ok,
        f"TV distance {tv:.4f} (tol 0.05) over {n_keep} steps, "
        f"runtime {elapsed:.0f}s (limit 60s)",
    )
    assert ok


def _ci_for(policy, salience_value, n_episodes=200):
    cfg = config_mod.from_dict({
        "landscape": single_peak_landscape(scale=0.8),
        "salience": {"mode": "fixed", "fixed_value": salience_value},
        "policy": policy,
        "environment": {"dt_s": 0.05, "episode_s": 120.0, "start": {"mode": "uniform"}},
    })
    trajs = [run_episode(cfg, seed) for seed in range(n_episodes)]
    return chemotaxis_index(trajs, (0.0, 0.0), radius=1.0).statistics["ci"]


def test_chemotaxis_indices():
    t0 = time.perf_counter()
    rt = {"kind": "run_and_tumble", "params": {
        "tumble_rate_per_s": 6.0, "sensitivity": 60.0, "v_run": 0.25,
        "tumble_accel_max": 600.0,
    }}
    klino = {"kind": "klinotaxis", "params": {
        "gain": 60.0, "v_run": 0.3, "turn_noise_std": 5.0,
    }}
    ci_rt = _ci_for(rt, salience_value=8.0)
    ci_kl = _ci_for(klino, salience_value=4.0)
    ci_flat = _ci_for(rt, salience_value=0.0)
    uniform_ci = 2.0 * (math.pi * 1.0**2 / 36.0) - 1.0
    elapsed = time.perf_counter() - t0
    ok = (
        ci_rt > 0.5
        and ci_kl > 0.5
        and abs(ci_flat - uniform_ci) < 0.1
        and elapsed < 120.0
    )
    record_criterion(
        "chemotaxis indices",
        ok,
        f"run-and-tumble CI {ci_rt:.3f}, klinotaxis CI {ci_kl:.3f} (gate > 0.5); "
        f"flat control CI {ci_flat:.3f} vs uniform {uniform_ci:.3f} (tol 0.1); "
        f"runtime {elapsed:.0f}s (limit 120s)",
    )
    assert ok


def test_need_switching():
    cfg = config_mod.from_dict({
        "landscape": two_patch_landscape(),
        "physiology": {"variables": [
            {"channel": "food", "level": 0.9, "setpoint": 1.0,
             "decay_rate": 0.03, "intake_gain": 0.2},
            {"channel": "water", "level": 0.2, "setpoint": 1.0,
             "decay_rate": 0.03, "intake_gain": 0.2},
        ]},
        "salience": {"mode": "physio", "k": 10.0},
        "policy": {"kind": "run_and_tumble", "params": {
            "tumble_rate_per_s": 6.0, "sensitivity": 60.0, "v_run": 0.3,
            "tumble_accel_max": 600.0,
        }},
        "environment": {"dt_s": 0.05, "episode_s": 400.0,
                        "start": {"mode": "fixed", "z": [0.0, 0.0]}},
    })
    centers = np.array([[-1.5, 0.0], [1.5, 0.0]])
    n_steps = int(round(400.0 / 0.05))
    agree_all = True
    min_switches = None
    for seed in range(50):
        env = cfg.build_environment()
        policy = cfg.build_policy()
        state = env.reset(seed)
        policy.reset(state)
        obs = env.observe(state)
        patches = []
        for _ in range(n_steps):
            action = policy.act(obs, state.rng, physio=state.physio)
            state, res = env.step(state, action)
            obs = res.observation
            deficits = [max(0.0, v.setpoint - v.level) for v in state.physio.variables]
            betas = [state.beta.get(v.channel) for v in state.physio.variables]
            if int(np.argmax(betas)) != int(np.argmax(deficits)):
                agree_all = False
            d = np.hypot(state.x - centers[:, 0], state.y - centers[:, 1])
            if d.min() < 0.8:
                patches.append(int(d.argmin()))
        switches = sum(1 for a, b in zip(patches, patches[1:]) if a != b)
        min_switches = switches if min_switches is None else min(min_switches, switches)
    ok = agree_all and min_switches is not None and min_switches >= 1
    record_criterion(
        "need switching",
        ok,
        f"salience argmax tracks deficit argmax on all steps: {agree_all}; "
        f"min patch switches per episode {min_switches} (gate >= 1) over 50 seeds",
    )
    assert ok


def test_modulated_gait():
    v_run = 0.3
    cfg = config_mod.from_dict({
        "landscape": single_peak_landscape(scale=0.8),
        "salience": {"mode": "fixed", "fixed_value": 6.0},
        "neuromodulation": {"dopamine_gain": 3.0, "serotonin_gain": 5.0,
                            "serotonin_threshold": 0.8},
        "policy": {"kind": "modulated", "params": {
            "base_kind": "run_and_tumble",
            "quiescence_threshold": 0.5,
            "base_params": {"tumble_rate_per_s": 6.0, "sensitivity": 60.0,
                            "v_run": v_run, "tumble_accel_max": 600.0},
        }},
        "environment": {"dt_s": 0.05, "episode_s": 120.0, "start": {"mode": "uniform"}},
    })
    in_speeds, out_speeds, quiet_speeds = [], [], []
    for seed in range(50):
        traj = run_episode(cfg, seed)
        r = np.hypot(traj.positions[:, 0], traj.positions[:, 1])
        speed = traj.speed
        in_speeds.append(speed[r < 0.8])
        out_speeds.append(speed[r >= 0.8])
        quiet = traj.column("serotonin") > 0.5
        if quiet.any():
            quiet_speeds.append(speed[quiet])
    mean_in = float(np.concatenate(in_speeds).mean())
    mean_out = float(np.concatenate(out_speeds).mean())
    quiet_q95 = float(np.quantile(np.concatenate(quiet_speeds), 0.95))
    ok = mean_in < 0.5 * mean_out and quiet_q95 < 0.1 * v_run
    record_criterion(
        "modulated gait",
        ok,
        f"in-patch speed {mean_in:.3f} vs out {mean_out:.3f} "
        f"(gate ratio < 0.5, measured {mean_in / mean_out:.3f}); "
        f"quiescent speed q95 {quiet_q95:.4f} (gate < {0.1 * v_run}) over 50 seeds",
    )
    assert ok


def _tail_fractions(salience, seeds=50):
    cfg = config_mod.from_dict({
        "landscape": two_patch_landscape(),
        "salience": salience,
        "policy": {"kind": "run_and_tumble", "params": {
            "tumble_rate_per_s": 6.0, "sensitivity": 60.0, "v_run": 0.3,
            "tumble_accel_max": 600.0,
        }},
        "environment": {"dt_s": 0.05, "episode_s": 600.0, "start": {"mode": "uniform"}},
    })
    signs = []
    for seed in range(seeds):
        traj = run_episode(cfg, seed)
        rep = step_length_tail(traj, dwell_speed_threshold=0.06)
        signs.append(rep.statistics["llr"] > 0)
    return float(np.mean(signs))


def test_run_length_tail_direction():
    frac_heavy = _tail_fractions(
        {"mode": "alternating", "period_s": 30.0, "high": 6.0, "low": 0.0}
    )
    frac_heavy_control = _tail_fractions({"mode": "fixed", "fixed_value": 0.0})
    ok = frac_heavy >= 0.8 and (1.0 - frac_heavy_control) >= 0.8
    record_criterion(
        "run-length tail direction",
        ok,
        f"alternating tempering: positive LLR in {frac_heavy:.0%} of 50 seeds (gate >= 80%); "
        f"fixed-salience control: negative LLR in {1.0 - frac_heavy_control:.0%} (gate >= 80%)",
    )
    assert ok


@pytest.fixture(scope="module")
def supervision_dataset():
    cfg = config_mod.from_dict({
        "landscape": {
            "bounds": {"x_min": -3, "x_max": 3, "y_min": -3, "y_max": 3},
            "components": [
                {"kind": "gaussian", "center": [-1.2, 0.0], "scale": 0.7, "channel": "food"},
                {"kind": "gaussian", "center": [1.2, 0.5], "scale": 0.7, "channel": "water"},
            ],
        },
        "salience": {"mode": "fixed", "fixed_value": 1.0},
        "policy": {"kind": "run_and_tumble", "params": {
            "tumble_rate_per_s": 4.0, "sensitivity": 3.0, "v_run": 0.5,
            "tumble_accel_max": 600.0,
        }},
        "environment": {"dt_s": 0.05, "episode_s": 250.0, "start": {"mode": "uniform"}},
    })
    zs, vs, rs = [], [], []
    for seed in range(20):
        traj = run_episode(cfg, seed)
        zs.append(traj.positions)
        heading = traj.column("heading")
        vs.append(np.stack([traj.speed * np.cos(heading),
                            traj.speed * np.sin(heading)], axis=1))
        rs.append(traj.reward)
    data = TrajectoryDataset(np.concatenate(zs), np.concatenate(vs),
                             np.concatenate(rs), cfg.landscape.bounds)
    beta = SalienceVector({"food": 1.0, "water": 1.0})
    return data, cfg.landscape, beta


def test_energy_recovery(supervision_dataset):
    data, truth, beta = supervision_dataset
    exact_epochs = 400
    t0 = time.perf_counter()
    exact = fit_energy(data, grid_shape=(12, 12), optimizer="exact_gradient",
                       epochs=exact_epochs, seed=0)
    t_exact = time.perf_counter() - t0
    corr_exact = evaluate_recovery(exact, truth, beta).correlation

    forward_epochs = 500  # well inside 5x the exact budget
    t0 = time.perf_counter()
    fwd = fit_energy(data, grid_shape=(12, 12), optimizer="forward_gradient",
                     epochs=forward_epochs, seed=0)
    t_fwd = time.perf_counter() - t0
    corr_fwd = evaluate_recovery(fwd, truth, beta).correlation

    ok = (
        len(data) >= 100_000
        and corr_exact >= 0.9
        and corr_fwd >= 0.85
        and forward_epochs <= 5 * exact_epochs
        and t_exact < 120.0
        and t_fwd < 120.0
    )
    record_criterion(
        "energy field recovery",
        ok,
        f"{len(data)} samples; exact corr {corr_exact:.3f} (gate 0.9, {t_exact:.1f}s), "
        f"forward corr {corr_fwd:.3f} (gate 0.85, {forward_epochs} vs "
        f"{exact_epochs} epochs, {t_fwd:.0f}s; limits 120s each)",
    )
    assert ok


def test_determinism_and_parallel_equivalence(tmp_path):
    configs = {
        "run_and_tumble": {
            "landscape": single_peak_landscape(),
            "policy": {"kind": "run_and_tumble", "params": {"v_run": 0.3}},
            "environment": {"dt_s": 0.05, "episode_s": 5.0, "start": {"mode": "uniform"}},
            "rollout": {"n_episodes": 3, "base_seed": 11},
        },
        "klinotaxis": {
            "landscape": single_peak_landscape(),
            "policy": {"kind": "klinotaxis", "params": {"gain": 30.0}},
            "environment": {"dt_s": 0.05, "episode_s": 5.0, "start": {"mode": "uniform"}},
            "rollout": {"n_episodes": 3, "base_seed": 0},
        },
        "modulated_physio": {
            "landscape": two_patch_landscape(),
            "physiology": {"variables": [
                {"channel": "food", "level": 0.5, "setpoint": 1.0,
                 "decay_rate": 0.05, "intake_gain": 0.3},
                {"channel": "water", "level": 0.8, "setpoint": 1.0,
                 "decay_rate": 0.05, "intake_gain": 0.3},
            ]},
            "salience": {"mode": "physio", "k": 5.0},
            "neuromodulation": {"dopamine_gain": 2.0, "serotonin_gain": 3.0,
                                "serotonin_threshold": 0.5},
            "policy": {"kind": "modulated", "params": {
                "base_kind": "run_and_tumble", "base_params": {"v_run": 0.3},
            }},
            "environment": {"dt_s": 0.05, "episode_s": 5.0, "start": {"mode": "uniform"}},
            "rollout": {"n_episodes": 3, "base_seed": 2},
        },
    }
    identical = True
    for name, raw in configs.items():
        cfg = config_mod.from_dict(raw)
        d1 = tmp_path / f"{name}_serial"
        d2 = tmp_path / f"{name}_parallel"
        run_batch(cfg, str(d1), workers=1)
        run_batch(cfg, str(d2), workers=3)
        for f1 in sorted(d1.glob("episode_*")):
            if f1.read_bytes() != (d2 / f1.name).read_bytes():
                identical = False
    record_criterion(
        "determinism and parallel equivalence",
        identical,
        f"3-config matrix, serial vs 3 workers: episode files byte-identical = {identical}",
    )
    assert identical
