"""Recover the landscape's energy surface from behavioral data alone.

Rolls out run-and-tumble episodes on a known two-peak landscape, collects
(position, velocity, signal) supervision, and fits a grid of Gaussian radial
basis functions so that the modeled directional derivatives match the
observed signals. Fits with the analytic full-batch gradient and with the
forward (random-projection) gradient estimator, then compares both recovered
fields to the ground truth up to the unidentifiable additive constant.

Run:  python3 demos/recover_energy_demo.py
"""

import numpy as np

from taxisim import config as config_mod
from taxisim.inverse import TrajectoryDataset, evaluate_recovery, fit_energy
from taxisim.landscape import uniform_salience
from taxisim.runner import run_episode

N_EPISODES = 10


def make_config():
    return config_mod.from_dict({
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


def collect_dataset(cfg):
    zs, vs, rs = [], [], []
    for seed in range(N_EPISODES):
        traj = run_episode(cfg, seed)
        heading = traj.column("heading")
        zs.append(traj.positions)
        vs.append(np.stack([traj.speed * np.cos(heading),
                            traj.speed * np.sin(heading)], axis=1))
        rs.append(traj.reward)
    return TrajectoryDataset(np.concatenate(zs), np.concatenate(vs),
                             np.concatenate(rs), cfg.landscape.bounds)


def main():
    cfg = make_config()
    data = collect_dataset(cfg)
    beta = uniform_salience(cfg.landscape)
    print(f"collected {len(data)} supervision samples from {N_EPISODES} episodes\n")

    for optimizer, epochs in (("exact_gradient", 400), ("forward_gradient", 500)):
        model = fit_energy(data, grid_shape=(12, 12), optimizer=optimizer,
                           epochs=epochs, seed=0)
        report = evaluate_recovery(model, cfg.landscape, beta)
        print(f"{optimizer:<17} epochs {epochs:<5} "
              f"final loss {model.metadata['final_loss']:.4f}  "
              f"recovery correlation {report.correlation:.4f}")

    print("\nboth optimizers reach the same field; the forward estimator just")
    print("needs smaller steps since its random projection inflates the update.")


if __name__ == "__main__":
    main()
