"""Taxis policies: run-and-tumble, weathervane steering, a gradient-following
stochastic oracle, and neuromodulator-driven gait modulation.

Policies see only observations (and, for the modulated gait, physiology), so
each one dead-reckons its own speed and heading by replaying the clamped
kinematics it shares with the environment. Reckoning is exact because the
environment's clamps and damping are deterministic and reflection at the
boundary leaves heading and speed untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import (
    FCD_PER_CHANNEL,
    FCD_SCALAR,
    FULL_GRADIENT,
    Action,
    EnvParams,
    EnvState,
    Observation,
    wrap_angle,
)
from .interoception import PhysioState

POLICY_KINDS = ("run_and_tumble", "klinotaxis", "langevin_oracle", "modulated", "scripted")


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


class WrongObservationMode(ValueError):
    """Raised when a policy is fed an observation mode it cannot consume."""


def _scalar_signal(obs: Observation) -> float:
    """Total relative-change signal from a scalar or per-channel observation."""
    if obs.mode == FCD_SCALAR:
        return obs.values[0]
    if obs.mode == FCD_PER_CHANNEL:
        return sum(obs.values)
    raise WrongObservationMode(f"policy needs a scalar density-change signal, got {obs.mode}")


class _DeadReckoner:
    """Replays the environment's speed/heading update for the policy's own actions."""

    def __init__(self, params: EnvParams):
        self.p = params
        self.speed = 0.0
        self.heading = 0.0
        self.omega = 0.0

    def prime(self, state: EnvState):
        self.speed = state.speed
        self.heading = state.heading
        self.omega = state.omega

    def clamp(self, action: Action) -> Action:
        p = self.p
        lin = min(p.linear_accel_max_units_per_s2, max(-p.linear_accel_max_units_per_s2, action.linear_accel))
        ang = min(p.angular_accel_max_rad_per_s2, max(-p.angular_accel_max_rad_per_s2, action.angular_accel))
        return Action(lin, ang)

    def advance(self, action: Action) -> Action:
        """Clamp the action, apply it to the tracked pose, return the clamped action."""
        action = self.clamp(action)
        p = self.p
        dt = p.dt_s
        self.speed = min(p.v_max_units_per_s, max(0.0, self.speed + action.linear_accel * dt))
        self.omega = (self.omega + action.angular_accel * dt) * max(
            0.0, 1.0 - p.angular_damping_per_s * dt
        )
        self.heading = wrap_angle(self.heading + self.omega * dt)
        return action

    def accel_towards_speed(self, target: float) -> float:
        return (target - self.speed) / self.p.dt_s

    def accel_towards_heading(self, target: float) -> float:
        """Angular acceleration that lands heading on target after one damped step."""
        p = self.p
        dt = p.dt_s
        damp = max(0.0, 1.0 - p.angular_damping_per_s * dt)
        if damp == 0.0:
            return 0.0
        omega_needed = wrap_angle(target - self.heading) / dt
        return (omega_needed / damp - self.omega) / dt


class Policy:
    """Base interface: reset() primes internal memory, act() maps obs to Action."""

    def reset(self, state: EnvState):
        raise NotImplementedError

    def act(self, obs: Observation, rng: np.random.Generator, physio: PhysioState | None = None) -> Action:
        raise NotImplementedError


@dataclass(frozen=True)
class RunTumbleParams:
    tumble_rate_per_s: float = 1.0  # baseline tumble rate p0
    sensitivity: float = 10.0       # steepness k of the logistic in -r
    v_run: float = 0.5
    tumble_accel_max: float = 40.0  # angular kick magnitude bound during a tumble

    def __post_init__(self):
        if self.tumble_rate_per_s <= 0 or self.v_run <= 0:
            raise ValueError("tumble rate and run speed must be positive")
        if self.sensitivity < 0 or self.tumble_accel_max < 0:
            raise ValueError("sensitivity and tumble_accel_max must be >= 0")


class RunAndTumblePolicy(Policy):
    """Run at cruise speed; tumble with probability p0*dt*logistic(-k*r)."""

    def __init__(self, params: RunTumbleParams, env_params: EnvParams):
        self.params = params
        self.reckoner = _DeadReckoner(env_params)
        self.cruise_speed = params.v_run

    def reset(self, state: EnvState):
        self.reckoner.prime(state)
        self.cruise_speed = self.params.v_run

    def tumble_probability(self, r: float) -> float:
        p = self.params
        return min(1.0, p.tumble_rate_per_s * self.reckoner.p.dt_s * logistic(-p.sensitivity * r))

    def act(self, obs, rng, physio=None):
        r = _scalar_signal(obs)
        if rng.random() < self.tumble_probability(r):
            action = Action(
                self.reckoner.accel_towards_speed(0.0),
                rng.uniform(-self.params.tumble_accel_max, self.params.tumble_accel_max),
            )
        else:
            action = Action(self.reckoner.accel_towards_speed(self.cruise_speed), 0.0)
        return self.reckoner.advance(action)


@dataclass(frozen=True)
class KlinotaxisParams:
    gain: float = 30.0
    v_run: float = 0.5
    turn_noise_std: float = 5.0  # angular-accel exploration noise, rad/s^2

    def __post_init__(self):
        if self.gain < 0 or self.turn_noise_std < 0:
            raise ValueError("gain and turn noise must be >= 0")
        if self.v_run <= 0:
            raise ValueError("run speed must be positive")


class KlinotaxisPolicy(Policy):
    """Weathervane steering on the temporal change of the scalar signal.

    A rising signal reinforces the current turn direction, a falling one
    reverses it; cruise speed is held by proportional control.
    """

    def __init__(self, params: KlinotaxisParams, env_params: EnvParams):
        self.params = params
        self.reckoner = _DeadReckoner(env_params)
        self.cruise_speed = params.v_run
        self.prev_r: float | None = None
        self.turn_dir = 1.0

    def reset(self, state: EnvState):
        self.reckoner.prime(state)
        self.cruise_speed = self.params.v_run
        self.prev_r = None
        self.turn_dir = 1.0

    def act(self, obs, rng, physio=None):
        r = _scalar_signal(obs)
        dt = self.reckoner.p.dt_s
        lin = self.reckoner.accel_towards_speed(self.cruise_speed)
        if self.prev_r is None:
            ang = 0.0
        else:
            steer = self.params.gain * (r - self.prev_r) / dt * self.turn_dir
            ang = steer + self.params.turn_noise_std * rng.standard_normal()
        self.prev_r = r
        action = self.reckoner.advance(Action(lin, ang))
        if self.reckoner.omega != 0.0:
            self.turn_dir = math.copysign(1.0, self.reckoner.omega)
        return action


@dataclass(frozen=True)
class LangevinOracleParams:
    noise_enabled: bool = True


class LangevinOraclePolicy(Policy):
    """Steers the realized velocity onto v* = grad log density + sqrt(2/dt) * eta.

    With wide-enough acceleration limits each environment step then reproduces
    one Euler-Maruyama step of overdamped gradient-plus-noise dynamics, whose
    long-run position histogram is proportional to the density. Exists to
    verify that sampling property, not as a sensing model: it needs the full
    gradient observation.
    """

    def __init__(self, params: LangevinOracleParams, env_params: EnvParams):
        self.params = params
        self.reckoner = _DeadReckoner(env_params)

    def reset(self, state: EnvState):
        self.reckoner.prime(state)

    def act(self, obs, rng, physio=None):
        if obs.mode != FULL_GRADIENT:
            raise WrongObservationMode(f"oracle needs {FULL_GRADIENT}, got {obs.mode}")
        dt = self.reckoner.p.dt_s
        vx, vy = obs.values
        if self.params.noise_enabled:
            scale = math.sqrt(2.0 / dt)
            vx += scale * rng.standard_normal()
            vy += scale * rng.standard_normal()
        target_speed = math.hypot(vx, vy)
        lin = self.reckoner.accel_towards_speed(target_speed)
        if target_speed > 0.0:
            ang = self.reckoner.accel_towards_heading(math.atan2(vy, vx))
        else:
            ang = self.reckoner.accel_towards_heading(self.reckoner.heading)
        return self.reckoner.advance(Action(lin, ang))


@dataclass(frozen=True)
class ModulatedParams:
    base_kind: str = "run_and_tumble"
    quiescence_threshold: float = 0.5
    dopamine_slows: bool = True  # False flips the sign to vigor-style speedup

    def __post_init__(self):
        if self.base_kind not in ("run_and_tumble", "klinotaxis"):
            raise ValueError(f"modulated base must be run_and_tumble or klinotaxis, got {self.base_kind!r}")


class ModulatedPolicy(Policy):
    """Wraps a base taxis policy with dopamine crawl and serotonin quiescence.

    Dopamine scales cruise speed by 1/(1 + dopamine) (patch exploitation as a
    slow crawl); serotonin above the quiescence threshold brakes to a dwell.
    """

    def __init__(self, base: Policy, params: ModulatedParams):
        if not hasattr(base, "cruise_speed"):
            raise ValueError("modulated base policy must expose a cruise speed")
        self.base = base
        self.params = params
        self.base_v_run = base.cruise_speed

    @property
    def reckoner(self) -> _DeadReckoner:
        return self.base.reckoner

    def reset(self, state: EnvState):
        self.base.reset(state)
        self.base_v_run = self.base.cruise_speed

    def act(self, obs, rng, physio=None):
        if physio is None:
            physio = PhysioState()
        if physio.serotonin > self.params.quiescence_threshold:
            action = Action(self.reckoner.accel_towards_speed(0.0), 0.0)
            return self.reckoner.advance(action)
        if self.params.dopamine_slows:
            scale = 1.0 / (1.0 + physio.dopamine)
        else:
            scale = 1.0 + physio.dopamine
        self.base.cruise_speed = self.base_v_run * scale
        return self.base.act(obs, rng, physio=physio)


class ScriptedPolicy(Policy):
    """Replays a fixed list of (linear_accel, angular_accel) pairs, cycling."""

    def __init__(self, actions: list[tuple[float, float]], env_params: EnvParams):
        if not actions:
            raise ValueError("scripted policy needs at least one action")
        self.actions = [Action(float(a), float(b)) for a, b in actions]
        self.reckoner = _DeadReckoner(env_params)
        self.index = 0

    def reset(self, state: EnvState):
        self.reckoner.prime(state)
        self.index = 0

    def act(self, obs, rng, physio=None):
        action = self.actions[self.index % len(self.actions)]
        self.index += 1
        return self.reckoner.advance(action)


def make_policy(kind: str, params: dict, env_params: EnvParams) -> Policy:
    """Build a policy from config-style parameters (unknown keys rejected)."""
    params = dict(params)
    if kind == "run_and_tumble":
        return RunAndTumblePolicy(RunTumbleParams(**params), env_params)
    if kind == "klinotaxis":
        return KlinotaxisPolicy(KlinotaxisParams(**params), env_params)
    if kind == "langevin_oracle":
        return LangevinOraclePolicy(LangevinOracleParams(**params), env_params)
    if kind == "scripted":
        return ScriptedPolicy(params.pop("actions"), env_params)
    if kind == "modulated":
        base_kind = params.pop("base_kind", "run_and_tumble")
        base_params = params.pop("base_params", {})
        mod = ModulatedParams(base_kind=base_kind, **params)
        base = make_policy(base_kind, base_params, env_params)
        return ModulatedPolicy(base, mod)
    raise ValueError(f"unknown policy kind {kind!r}")


def required_observation_mode(kind: str, params: dict | None = None) -> str:
    """Observation mode a policy kind declares it needs."""
    if kind == "langevin_oracle":
        return FULL_GRADIENT
    return FCD_SCALAR
