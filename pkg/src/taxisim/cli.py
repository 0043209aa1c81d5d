"""Experiment command line: simulate, assay, fit, gradcheck, serve.

Exit codes: 0 success (for assays: pass), 1 assay fail / check fail,
2 invalid config or malformed input, 3 runtime divergence or NaN.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import assays, config as config_mod, verify
from .assays import AssayError
from .config import ConfigError
from .environment import FULL_GRADIENT
from .inverse import (
    EXACT_GRADIENT,
    FORWARD_GRADIENT,
    FitError,
    ParametricEnergy,
    TrajectoryDataset,
    evaluate_recovery,
    evaluation_grid,
    fit_energy,
)
from .landscape import uniform_salience
from .runner import SimulationNaNError, run_batch
from .trajectory import TrajectoryReadError, read_trajectory

PROTOCOL_VERSION = 1
OUT_ROOT_ENV = "TAXISIM_OUT_ROOT"


def _default_out(sub: str) -> str:
    return os.path.join(os.environ.get(OUT_ROOT_ENV, "runs"), sub)


def _load_config(path, overrides):
    try:
        return config_mod.load(path, overrides or [])
    except FileNotFoundError:
        print(f"config not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        raise SystemExit(2)


def cmd_simulate(args) -> int:
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"rollout.base_seed={args.seed}")
    cfg = _load_config(args.config, overrides)
    out_dir = args.out or cfg.output_dir or _default_out("simulate")
    try:
        summary = run_batch(cfg, out_dir, workers=args.workers)
    except SimulationNaNError as e:
        print(f"simulation produced non-finite values: {e}", file=sys.stderr)
        return 3
    print(json.dumps({"out_dir": out_dir, "mean_reward": summary["mean_reward"],
                      "n_episodes": summary["n_episodes"]}, indent=2))
    return 0


def _read_trajectories(paths):
    trajs = []
    for p in paths:
        trajs.append(read_trajectory(p))
    return trajs


def _write_report(report, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"{report.name}.json"), "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    width = max(len(k) for k in report.statistics) if report.statistics else 0
    print(f"assay: {report.name}   samples: {report.n_samples}   "
          f"{'PASS' if report.passed else 'FAIL'}")
    for k, v in report.statistics.items():
        print(f"  {k:<{width}}  {v:.6g}")


def cmd_assay(args) -> int:
    try:
        trajs = _read_trajectories(args.traj)
    except (TrajectoryReadError, FileNotFoundError) as e:
        print(f"cannot read trajectory: {e}", file=sys.stderr)
        return 2
    out_dir = args.out or _default_out("assay")
    os.makedirs(out_dir, exist_ok=True)
    try:
        if args.kind == "chemotaxis_index":
            report = assays.chemotaxis_index(
                trajs, (args.center[0], args.center[1]), args.radius, threshold=args.threshold
            )
        elif args.kind == "stationary_tv":
            if args.config is None:
                print("stationary_tv needs --config for the target landscape", file=sys.stderr)
                return 2
            cfg = _load_config(args.config, None)
            positions = np.concatenate([t.positions for t in trajs])
            beta = cfg.salience.evaluate(cfg.landscape, cfg.physio_init, 0.0)
            report = assays.stationary_tv_distance(
                positions, cfg.landscape, beta,
                grid_shape=tuple(args.grid), burn_in=args.burn_in,
                threshold=args.tv_threshold,
            )
            _write_histogram_csv(positions[args.burn_in:], cfg, tuple(args.grid), out_dir)
        elif args.kind == "levy_tail":
            if len(trajs) != 1:
                print("levy_tail analyzes a single trajectory file", file=sys.stderr)
                return 2
            report = assays.step_length_tail(
                trajs[0], args.dwell_speed, expect_heavy_tail=not args.expect_light_tail
            )
            _write_ccdf_csv(trajs[0], args.dwell_speed, out_dir)
        else:
            print(f"unknown assay kind {args.kind!r}", file=sys.stderr)
            return 2
    except AssayError as e:
        print(f"assay error: {e}", file=sys.stderr)
        return 2
    _write_report(report, out_dir)
    return 0 if report.passed else 1


def _write_histogram_csv(positions, cfg, grid_shape, out_dir):
    beta = cfg.salience.evaluate(cfg.landscape, cfg.physio_init, 0.0)
    emp = assays.position_histogram(positions, cfg.landscape, grid_shape)
    tgt = assays.target_cell_masses(cfg.landscape, beta, grid_shape)
    b = cfg.landscape.bounds
    h, w = grid_shape
    with open(os.path.join(out_dir, "occupancy_histogram.csv"), "w") as f:
        f.write("x,y,empirical,target\n")
        for iy in range(h):
            for ix in range(w):
                x = b.x_min + (ix + 0.5) * (b.x_max - b.x_min) / w
                y = b.y_min + (iy + 0.5) * (b.y_max - b.y_min) / h
                f.write(f"{x!r},{y!r},{float(emp[iy, ix])!r},{float(tgt[iy, ix])!r}\n")


def _write_ccdf_csv(traj, dwell_speed, out_dir):
    lengths = np.sort(assays.extract_run_lengths(traj, dwell_speed))
    n = len(lengths)
    with open(os.path.join(out_dir, "run_length_ccdf.csv"), "w") as f:
        f.write("length,ccdf\n")
        for i, l in enumerate(lengths):
            f.write(f"{float(l)!r},{(n - i) / n!r}\n")


def _dataset_from_files(paths, bounds, signal: str) -> TrajectoryDataset:
    zs, vs, rs = [], [], []
    for p in paths:
        traj = read_trajectory(p)
        zs.append(traj.positions)
        heading = traj.column("heading")
        speed = traj.speed
        vs.append(np.stack([speed * np.cos(heading), speed * np.sin(heading)], axis=1))
        if signal == "obs":
            rs.append(traj.column("obs_0"))
        else:
            rs.append(traj.reward)
    return TrajectoryDataset(
        z=np.concatenate(zs), v=np.concatenate(vs), r=np.concatenate(rs), bounds=bounds
    )


def cmd_fit(args) -> int:
    if args.truth is None:
        print("fit needs --truth config for landscape bounds (and recovery report)",
              file=sys.stderr)
        return 2
    cfg = _load_config(args.truth, None)
    try:
        data = _dataset_from_files(args.dataset, cfg.landscape.bounds, args.signal)
    except (TrajectoryReadError, FileNotFoundError, ValueError) as e:
        print(f"cannot build dataset: {e}", file=sys.stderr)
        return 2
    out_dir = args.out or _default_out("fit")
    os.makedirs(out_dir, exist_ok=True)
    try:
        model = fit_energy(
            data,
            grid_shape=tuple(args.grid),
            rbf_scale=args.rbf_scale,
            optimizer=args.optimizer,
            epochs=args.epochs,
            step_size=args.step_size,
            seed=args.seed,
            ridge=args.ridge,
        )
    except FitError as e:
        print(f"fit diverged: {e}", file=sys.stderr)
        return 3
    with open(os.path.join(out_dir, "model.json"), "w") as f:
        json.dump(model.to_dict(), f, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "loss_curve.csv"), "w") as f:
        f.write("epoch,loss\n")
        for i, loss in enumerate(model.metadata["loss_curve"]):
            f.write(f"{i},{float(loss)!r}\n")
    pts = evaluation_grid(model.bounds)
    pred = model.log_density_hat(pts)
    with open(os.path.join(out_dir, "field.csv"), "w") as f:
        f.write("x,y,log_gamma_hat\n")
        for (x, y), v in zip(pts, pred):
            f.write(f"{float(x)!r},{float(y)!r},{float(v)!r}\n")
    beta = cfg.salience.evaluate(cfg.landscape, cfg.physio_init, 0.0)
    report = evaluate_recovery(model, cfg.landscape, beta, pts)
    with open(os.path.join(out_dir, "recovery.json"), "w") as f:
        json.dump({"correlation": report.correlation, "rmse_aligned": report.rmse_aligned,
                   "degenerate": report.degenerate, "n_points": report.n_points,
                   "optimizer": args.optimizer}, f, indent=2, sort_keys=True)
    print(f"final loss {model.metadata['final_loss']:.6g}, "
          f"recovery correlation {report.correlation:.4f}")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _load_config(args.config, None)
    corrupt = 1e-3 if args.corrupt_gradient else 0.0
    err_land = verify.check_landscape_gradients(cfg.landscape, seed=0, corrupt=corrupt)
    err_rbf = verify.check_rbf_gradients(seed=0, corrupt=corrupt)
    ok = err_land < verify.GRAD_TOL and err_rbf < verify.GRAD_TOL
    print(f"landscape gradient max rel err: {err_land:.3e}")
    print(f"rbf field gradient max rel err: {err_rbf:.3e}")
    if cfg.salience.mode == "fixed":
        if args.dt_sweep:
            results = verify.fcd_convergence(cfg, dt0=0.01, halvings=2)
            ratios = verify.convergence_ratios(results)
            for r in results:
                print(f"fcd identity mean err at dt={r.dt_s:g}: {r.mean_abs_error:.3e}")
            print("halving ratios:", ", ".join(f"{r:.2f}" for r in ratios))
            ok = ok and all(1.5 < r < 2.5 for r in ratios)
        else:
            res = verify.fcd_identity_error(cfg, dt=min(0.01, cfg.env_params.dt_s))
            print(f"fcd identity mean err at dt={res.dt_s:g}: {res.mean_abs_error:.3e}")
            ok = ok and res.mean_abs_error < 10.0 * res.dt_s
    return 0 if ok else 1


def _obs_length(cfg) -> int:
    from .runner import n_obs_values

    return n_obs_values(cfg)


def cmd_serve(args) -> int:
    """Line-delimited JSON loop over stdin/stdout; one reply per request."""
    cfg = _load_config(args.config, list(args.override or []))
    env = cfg.build_environment()
    state = None
    done = False

    def reply(payload):
        sys.stdout.write(json.dumps(payload) + "\n")
        sys.stdout.flush()

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            reply({"v": PROTOCOL_VERSION, "error": f"bad json: {e.msg}"})
            continue
        if msg.get("v") != PROTOCOL_VERSION:
            reply({"v": PROTOCOL_VERSION, "error": f"protocol version mismatch: {msg.get('v')!r}"})
            continue
        op = msg.get("op")
        if op == "reset":
            seed = msg.get("seed", 0)
            if not isinstance(seed, int):
                reply({"v": PROTOCOL_VERSION, "op": op, "error": "seed must be an integer"})
                continue
            state = env.reset(seed)
            done = False
            obs = env.observe(state)
            reply({"v": PROTOCOL_VERSION, "op": op, "observation": list(obs.values)})
        elif op == "step":
            if state is None:
                reply({"v": PROTOCOL_VERSION, "op": op, "error": "reset required before step"})
                continue
            if done:
                reply({"v": PROTOCOL_VERSION, "op": op, "error": "episode done; reset required"})
                continue
            action = msg.get("action")
            if not (isinstance(action, list) and len(action) == 2
                    and all(isinstance(a, (int, float)) and math.isfinite(a) for a in action)):
                reply({"v": PROTOCOL_VERSION, "op": op, "error": "action must be [linear_accel, angular_accel], finite"})
                continue
            from .environment import Action

            state, result = env.step(state, Action(float(action[0]), float(action[1])))
            done = result.done
            reply({
                "v": PROTOCOL_VERSION, "op": op,
                "observation": list(result.observation.values),
                "reward": result.reward,
                "done": result.done,
                "info": {"t": state.t},
            })
        elif op == "spec":
            p = cfg.env_params
            k = _obs_length(cfg)
            reply({
                "v": PROTOCOL_VERSION, "op": op,
                "observation_space": {"shape": [k], "low": [-1e9] * k, "high": [1e9] * k},
                "action_space": {
                    "shape": [2],
                    "low": [-p.linear_accel_max_units_per_s2, -p.angular_accel_max_rad_per_s2],
                    "high": [p.linear_accel_max_units_per_s2, p.angular_accel_max_rad_per_s2],
                },
                "dt_s": p.dt_s,
                "observation_mode": p.observation_mode,
            })
        elif op == "close":
            reply({"v": PROTOCOL_VERSION, "op": op, "ok": True})
            return 0
        else:
            reply({"v": PROTOCOL_VERSION, "error": f"unknown op {op!r}"})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taxisim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run rollouts and write trajectory files")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override rollout.base_seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--override", action="append", metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("assay", help="run a behavioral assay on trajectory files")
    p.add_argument("kind", choices=["chemotaxis_index", "stationary_tv", "levy_tail"])
    p.add_argument("--traj", nargs="+", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--center", nargs=2, type=float, default=[0.0, 0.0])
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--grid", nargs=2, type=int, default=[32, 32])
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--tv-threshold", type=float, default=0.05)
    p.add_argument("--dwell-speed", type=float, default=0.1)
    p.add_argument("--expect-light-tail", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_assay)

    p = sub.add_parser("fit", help="fit an energy field to trajectory data")
    p.add_argument("--dataset", nargs="+", required=True)
    p.add_argument("--grid", nargs=2, type=int, default=[16, 16])
    p.add_argument("--rbf-scale", type=float, default=None)
    p.add_argument("--optimizer", choices=[EXACT_GRADIENT, FORWARD_GRADIENT],
                   default=EXACT_GRADIENT)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--step-size", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ridge", type=float, default=1e-4)
    p.add_argument("--signal", choices=["reward", "obs"], default="reward")
    p.add_argument("--truth", default=None, help="config whose landscape is ground truth")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("gradcheck", help="finite-difference and identity checks")
    p.add_argument("--config", required=True)
    p.add_argument("--corrupt-gradient", action="store_true",
                   help="negative control: perturb analytic gradients")
    p.add_argument("--dt-sweep", action="store_true")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("serve", help="speak the line-delimited JSON protocol on stdio")
    p.add_argument("--config", required=True)
    p.add_argument("--override", action="append", metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
