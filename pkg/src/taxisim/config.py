"""Strict experiment configuration: JSON tree -> validated engine objects.

Unknown keys are rejected everywhere, ranges are checked up front, and key
names carry their units (dt_s, v_max_units_per_s, ...) so a config file reads
unambiguously. The resolved tree is what gets echoed into run manifests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .environment import (
    OBS_MODES,
    EnvParams,
    Environment,
    SalienceSchedule,
    StartSpec,
)
from .interoception import NeuromodRule, PhysioState, PhysioVariable
from .landscape import Bounds, DensityComponent, Landscape


class ConfigError(ValueError):
    """Invalid configuration; message names the offending key path."""


def _check_keys(d: dict, allowed: set[str], required: set[str], path: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {sorted(missing)}")


def _number(d: dict, key: str, path: str, default=None, lo=None, hi=None, lo_open=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    v = float(v)
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(f"{path}.{key}: must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(f"{path}.{key}: must be <= {hi}, got {v}")
    return v


def _parse_bounds(d: dict, path: str) -> Bounds:
    _check_keys(d, {"x_min", "x_max", "y_min", "y_max"}, {"x_min", "x_max", "y_min", "y_max"}, path)
    try:
        return Bounds(float(d["x_min"]), float(d["x_max"]), float(d["y_min"]), float(d["y_max"]))
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_landscape(d: dict, path: str) -> Landscape:
    _check_keys(d, {"bounds", "components"}, {"bounds", "components"}, path)
    bounds = _parse_bounds(d["bounds"], f"{path}.bounds")
    comps = []
    if not isinstance(d["components"], list) or not d["components"]:
        raise ConfigError(f"{path}.components: need a non-empty list")
    for i, c in enumerate(d["components"]):
        cpath = f"{path}.components[{i}]"
        _check_keys(c, {"kind", "center", "scale", "channel", "polarity"},
                    {"kind", "center", "scale", "channel"}, cpath)
        center = c["center"]
        if not (isinstance(center, list) and len(center) == 2):
            raise ConfigError(f"{cpath}.center: expected [x, y]")
        try:
            comps.append(DensityComponent(
                kind=c["kind"],
                center=(float(center[0]), float(center[1])),
                scale=float(c["scale"]),
                channel=str(c["channel"]),
                polarity=c.get("polarity", "attractant"),
            ))
        except ValueError as e:
            raise ConfigError(f"{cpath}: {e}") from e
    try:
        return Landscape(components=tuple(comps), bounds=bounds)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_physio(d: dict, landscape: Landscape, path: str) -> PhysioState:
    _check_keys(d, {"variables"}, {"variables"}, path)
    variables = []
    for i, v in enumerate(d["variables"]):
        vpath = f"{path}.variables[{i}]"
        _check_keys(v, {"channel", "level", "setpoint", "decay_rate", "intake_gain"},
                    {"channel", "level", "setpoint"}, vpath)
        if v["channel"] not in landscape.channels:
            raise ConfigError(f"{vpath}.channel: {v['channel']!r} not in landscape channels {landscape.channels}")
        try:
            variables.append(PhysioVariable(
                channel=str(v["channel"]),
                level=_number(v, "level", vpath, lo=0.0, hi=1.0),
                setpoint=_number(v, "setpoint", vpath, lo=0.0, hi=1.0),
                decay_rate=_number(v, "decay_rate", vpath, default=0.0, lo=0.0),
                intake_gain=_number(v, "intake_gain", vpath, default=0.0, lo=0.0),
            ))
        except ValueError as e:
            raise ConfigError(f"{vpath}: {e}") from e
    try:
        return PhysioState(variables=tuple(variables))
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_salience(d: dict, path: str) -> SalienceSchedule:
    _check_keys(d, {"mode", "k", "fixed_value", "period_s", "high", "low"}, {"mode"}, path)
    try:
        return SalienceSchedule(
            mode=d["mode"],
            k=_number(d, "k", path, default=1.0, lo=0.0, lo_open=True),
            fixed_value=_number(d, "fixed_value", path, default=1.0, lo=0.0),
            period_s=_number(d, "period_s", path, default=20.0, lo=0.0, lo_open=True),
            high=_number(d, "high", path, default=1.0, lo=0.0),
            low=_number(d, "low", path, default=0.0, lo=0.0),
        )
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_neuromod(d: dict, path: str) -> NeuromodRule:
    _check_keys(d, {"dopamine_gain", "serotonin_gain", "serotonin_threshold"}, set(), path)
    try:
        return NeuromodRule(
            dopamine_gain=_number(d, "dopamine_gain", path, default=0.0, lo=0.0),
            serotonin_gain=_number(d, "serotonin_gain", path, default=0.0, lo=0.0),
            serotonin_threshold=_number(d, "serotonin_threshold", path, default=0.0, lo=0.0),
        )
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_start(d: dict, path: str) -> StartSpec:
    _check_keys(d, {"mode", "z", "heading"}, set(), path)
    mode = d.get("mode", "fixed")
    z = d.get("z", [0.0, 0.0])
    if not (isinstance(z, list) and len(z) == 2):
        raise ConfigError(f"{path}.z: expected [x, y]")
    try:
        return StartSpec(mode=mode, z=(float(z[0]), float(z[1])),
                         heading=_number(d, "heading", path, default=0.0))
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_env_params(d: dict, path: str) -> EnvParams:
    allowed = {"dt_s", "v_max_units_per_s", "linear_accel_max_units_per_s2",
               "angular_accel_max_rad_per_s2", "angular_damping_per_s",
               "noise_std", "observation_mode", "episode_s", "start"}
    _check_keys(d, allowed, set(), path)
    mode = d.get("observation_mode", "fcd_scalar")
    if mode not in OBS_MODES:
        raise ConfigError(f"{path}.observation_mode: unknown mode {mode!r}")
    try:
        return EnvParams(
            dt_s=_number(d, "dt_s", path, default=0.05, lo=0.0, hi=0.1, lo_open=True),
            v_max_units_per_s=_number(d, "v_max_units_per_s", path, default=1.0, lo=0.0, lo_open=True),
            linear_accel_max_units_per_s2=_number(d, "linear_accel_max_units_per_s2", path, default=10.0, lo=0.0, lo_open=True),
            angular_accel_max_rad_per_s2=_number(d, "angular_accel_max_rad_per_s2", path, default=50.0, lo=0.0, lo_open=True),
            angular_damping_per_s=_number(d, "angular_damping_per_s", path, default=2.0, lo=0.0),
            noise_std=_number(d, "noise_std", path, default=0.0, lo=0.0),
            observation_mode=mode,
            episode_s=_number(d, "episode_s", path, default=300.0, lo=0.0, lo_open=True),
        )
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description."""

    landscape: Landscape
    env_params: EnvParams
    start: StartSpec
    salience: SalienceSchedule
    physio_init: PhysioState
    neuromod_rule: NeuromodRule | None
    policy_kind: str
    policy_params: dict
    n_episodes: int
    base_seed: int
    output_dir: str | None
    resolved: dict  # the validated raw tree, echoed into manifests

    def build_environment(self) -> Environment:
        return Environment(
            landscape=self.landscape,
            params=self.env_params,
            start=self.start,
            salience_schedule=self.salience,
            physio_init=self.physio_init,
            neuromod_rule=self.neuromod_rule,
        )

    def build_policy(self):
        from .controllers import make_policy

        return make_policy(self.policy_kind, self.policy_params, self.env_params)


TOP_KEYS = {"landscape", "physiology", "salience", "neuromodulation",
            "environment", "policy", "rollout", "output_dir"}


def from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")
    _check_keys(raw, TOP_KEYS, {"landscape", "policy"}, "top level")

    landscape = _parse_landscape(raw["landscape"], "landscape")
    env_d = raw.get("environment", {})
    env_params = _parse_env_params(env_d, "environment")
    start = _parse_start(env_d.get("start", {}), "environment.start")
    if start.mode == "fixed" and not landscape.bounds.contains(*start.z):
        raise ConfigError(f"environment.start.z: {list(start.z)} outside landscape bounds")

    physio = PhysioState()
    if "physiology" in raw:
        physio = _parse_physio(raw["physiology"], landscape, "physiology")
    salience = _parse_salience(raw.get("salience", {"mode": "fixed"}), "salience")
    if salience.mode == "physio" and not physio.variables:
        raise ConfigError("salience.mode physio requires physiology.variables")

    neuromod = None
    if "neuromodulation" in raw:
        neuromod = _parse_neuromod(raw["neuromodulation"], "neuromodulation")

    pol = raw["policy"]
    _check_keys(pol, {"kind", "params"}, {"kind"}, "policy")
    policy_kind = pol["kind"]
    policy_params = pol.get("params", {})
    try:
        # Build once to validate kind and params eagerly.
        from .controllers import make_policy, required_observation_mode

        make_policy(policy_kind, policy_params, env_params)
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"policy: {e}") from e
    needed = required_observation_mode(policy_kind)
    if policy_kind == "langevin_oracle" and env_params.observation_mode != needed:
        raise ConfigError(
            f"policy: langevin_oracle requires observation_mode {needed!r}, "
            f"config has {env_params.observation_mode!r}"
        )
    if policy_kind in ("run_and_tumble", "klinotaxis", "modulated") and \
            env_params.observation_mode == "full_gradient":
        raise ConfigError(f"policy: {policy_kind} cannot consume full_gradient observations")

    roll = raw.get("rollout", {})
    _check_keys(roll, {"n_episodes", "base_seed"}, set(), "rollout")
    n_episodes = roll.get("n_episodes", 1)
    if not isinstance(n_episodes, int) or n_episodes < 1:
        raise ConfigError(f"rollout.n_episodes: must be an integer >= 1, got {n_episodes!r}")
    base_seed = roll.get("base_seed", 0)
    if not isinstance(base_seed, int):
        raise ConfigError(f"rollout.base_seed: must be an integer, got {base_seed!r}")

    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("output_dir: must be a string")

    return ExperimentConfig(
        landscape=landscape,
        env_params=env_params,
        start=start,
        salience=salience,
        physio_init=physio,
        neuromod_rule=neuromod,
        policy_kind=policy_kind,
        policy_params=dict(policy_params),
        n_episodes=n_episodes,
        base_seed=base_seed,
        output_dir=output_dir,
        resolved=raw,
    )


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply dotted key=value overrides; values parse as JSON, else strings."""
    import copy

    raw = copy.deepcopy(raw)
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override {ov!r}: expected key=value")
        key, _, value = ov.partition("=")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = raw
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {ov!r}: {p} is not an object")
        node[parts[-1]] = parsed
    return raw


def load(path, overrides: list[str] | None = None) -> ExperimentConfig:
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    if overrides:
        raw = apply_overrides(raw, overrides)
    return from_dict(raw)
