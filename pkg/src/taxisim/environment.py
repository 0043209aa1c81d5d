"""Taxis navigation environment: pose dynamics, observations, rewards.

The hidden state is the agent's pose plus its physiology; actions are linear
and angular accelerations; observations report relative density change (the
time derivative of log density) or the full gradient; the per-step reward is
the directional derivative of the log density along the realized velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .interoception import (
    NeuromodRule,
    PhysioState,
    salience,
    update_neuromodulators,
    update_physio,
)
from .landscape import ATTRACTANT, Landscape, SalienceVector, uniform_salience

FCD_SCALAR = "fcd_scalar"
FCD_PER_CHANNEL = "fcd_per_channel"
FULL_GRADIENT = "full_gradient"
OBS_MODES = (FCD_SCALAR, FCD_PER_CHANNEL, FULL_GRADIENT)

SALIENCE_PHYSIO = "physio"
SALIENCE_FIXED = "fixed"
SALIENCE_ALTERNATING = "alternating"

_TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, _TWO_PI)
    if a <= 0.0:
        a += _TWO_PI
    return a - math.pi


@dataclass(frozen=True)
class EnvParams:
    """Kinematic and sensing parameters; key names carry their units."""

    dt_s: float = 0.05
    v_max_units_per_s: float = 1.0
    linear_accel_max_units_per_s2: float = 10.0
    angular_accel_max_rad_per_s2: float = 50.0
    angular_damping_per_s: float = 2.0
    noise_std: float = 0.0
    observation_mode: str = FCD_SCALAR
    episode_s: float = 300.0

    def __post_init__(self):
        if not (0.0 < self.dt_s <= 0.1):
            raise ValueError(f"dt_s must be in (0, 0.1], got {self.dt_s}")
        if self.observation_mode not in OBS_MODES:
            raise ValueError(f"unknown observation mode {self.observation_mode!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.v_max_units_per_s <= 0 or self.episode_s <= 0:
            raise ValueError("v_max and episode length must be positive")


@dataclass(frozen=True)
class StartSpec:
    """Initial pose: fixed (z, heading) or uniform-random within bounds."""

    mode: str = "fixed"  # "fixed" | "uniform"
    z: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0

    def __post_init__(self):
        if self.mode not in ("fixed", "uniform"):
            raise ValueError(f"unknown start mode {self.mode!r}")


@dataclass(frozen=True)
class SalienceSchedule:
    """How the per-channel weights are produced each step.

    physio: deficit-driven weights, k * max(0, setpoint - level).
    fixed: the same constant weight on every channel.
    alternating: square wave between high and low on every channel.
    """

    mode: str = SALIENCE_FIXED
    k: float = 1.0
    fixed_value: float = 1.0
    period_s: float = 20.0
    high: float = 1.0
    low: float = 0.0

    def __post_init__(self):
        if self.mode not in (SALIENCE_PHYSIO, SALIENCE_FIXED, SALIENCE_ALTERNATING):
            raise ValueError(f"unknown salience mode {self.mode!r}")
        if self.mode == SALIENCE_ALTERNATING and self.period_s <= 0:
            raise ValueError("alternating salience needs period_s > 0")

    def evaluate(self, landscape: Landscape, physio: PhysioState, t: float) -> SalienceVector:
        if self.mode == SALIENCE_PHYSIO:
            return salience(physio, landscape, self.k)
        if self.mode == SALIENCE_ALTERNATING:
            phase = int(t / self.period_s) % 2
            return uniform_salience(landscape, self.high if phase == 0 else self.low)
        return uniform_salience(landscape, self.fixed_value)


@dataclass(frozen=True)
class Action:
    linear_accel: float
    angular_accel: float

    def __post_init__(self):
        if not (math.isfinite(self.linear_accel) and math.isfinite(self.angular_accel)):
            raise ValueError(f"non-finite action ({self.linear_accel}, {self.angular_accel})")


@dataclass(frozen=True)
class Observation:
    mode: str
    values: tuple[float, ...]
    noise_std: float


@dataclass
class EnvState:
    """Hidden state: pose, physiology, salience, clock, and the episode RNG."""

    x: float
    y: float
    heading: float
    speed: float
    omega: float
    physio: PhysioState
    beta: SalienceVector
    t: float
    rng: np.random.Generator

    @property
    def z(self) -> tuple[float, float]:
        return (self.x, self.y)

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.speed * math.cos(self.heading), self.speed * math.sin(self.heading))


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    done: bool
    state_snapshot: EnvState | None = None


def _reflect(v: float, lo: float, hi: float) -> float:
    """Fold v into [lo, hi] by mirror reflection."""
    width = hi - lo
    if width <= 0:
        raise ValueError("degenerate bounds")
    v = (v - lo) % (2.0 * width)
    if v > width:
        v = 2.0 * width - v
    return v + lo


class Environment:
    """One agent in one landscape. Single-threaded; run many with separate seeds."""

    def __init__(
        self,
        landscape: Landscape,
        params: EnvParams,
        start: StartSpec = StartSpec(),
        salience_schedule: SalienceSchedule = SalienceSchedule(),
        physio_init: PhysioState = PhysioState(),
        neuromod_rule: NeuromodRule | None = None,
    ):
        self.landscape = landscape
        self.params = params
        self.start = start
        self.salience_schedule = salience_schedule
        self.physio_init = physio_init
        self.neuromod_rule = neuromod_rule
        self._attractant_channels = tuple(
            ch for ch in landscape.channels if landscape.channel_polarity(ch) == ATTRACTANT
        )

    def reset(self, seed: int) -> EnvState:
        rng = np.random.default_rng(seed)
        b = self.landscape.bounds
        if self.start.mode == "uniform":
            x = rng.uniform(b.x_min, b.x_max)
            y = rng.uniform(b.y_min, b.y_max)
            heading = rng.uniform(-math.pi, math.pi)
        else:
            x, y = self.start.z
            if not b.contains(x, y):
                raise ValueError(f"start position {self.start.z} outside bounds")
            heading = wrap_angle(self.start.heading)
        physio = self.physio_init
        beta = self.salience_schedule.evaluate(self.landscape, physio, 0.0)
        return EnvState(
            x=float(x), y=float(y), heading=float(heading), speed=0.0, omega=0.0,
            physio=physio, beta=beta, t=0.0, rng=rng,
        )

    def local_density(self, z) -> float:
        """Total attractant-side density at z, the neuromodulators' drive signal."""
        return sum(self.landscape.channel_density(ch, z) for ch in self._attractant_channels)

    def step(self, state: EnvState, action: Action, dt: float | None = None):
        p = self.params
        if dt is None:
            dt = p.dt_s
        if not (0.0 < dt <= 0.1):
            raise ValueError(f"dt must be in (0, 0.1], got {dt}")

        lin = min(p.linear_accel_max_units_per_s2, max(-p.linear_accel_max_units_per_s2, action.linear_accel))
        ang = min(p.angular_accel_max_rad_per_s2, max(-p.angular_accel_max_rad_per_s2, action.angular_accel))

        # Semi-implicit Euler: update velocities first, then integrate the pose.
        speed = min(p.v_max_units_per_s, max(0.0, state.speed + lin * dt))
        omega = (state.omega + ang * dt) * max(0.0, 1.0 - p.angular_damping_per_s * dt)
        heading = wrap_angle(state.heading + omega * dt)
        b = self.landscape.bounds
        x = _reflect(state.x + speed * math.cos(heading) * dt, b.x_min, b.x_max)
        y = _reflect(state.y + speed * math.sin(heading) * dt, b.y_min, b.y_max)
        t = state.t + dt
        z = (x, y)

        physio = state.physio
        if physio.variables:
            physio = update_physio(physio, self.landscape, z, dt)
        if self.neuromod_rule is not None:
            rho = self.local_density(z)
            intake = sum(
                v.intake_gain * self.landscape.channel_density(v.channel, z)
                for v in physio.variables
            )
            physio = update_neuromodulators(physio, self.neuromod_rule, rho, intake, dt)

        beta = self.salience_schedule.evaluate(self.landscape, physio, t)

        vx = speed * math.cos(heading)
        vy = speed * math.sin(heading)
        g = self.landscape.gradient(z, beta)
        reward = float(g[0] * vx + g[1] * vy)

        new_state = EnvState(
            x=x, y=y, heading=heading, speed=speed, omega=omega,
            physio=physio, beta=beta, t=t, rng=state.rng,
        )
        obs = self.observe(new_state, gradient=g, reward=reward)
        done = t >= p.episode_s - 1e-12
        return new_state, StepResult(observation=obs, reward=reward, done=done)

    def observe(self, state: EnvState, gradient=None, reward=None) -> Observation:
        """Draw an observation for the current state, consuming the state RNG."""
        p = self.params
        mode = p.observation_mode
        if mode == FCD_SCALAR:
            if reward is None:
                reward = self.landscape.directional_derivative(state.z, state.velocity, state.beta)
            values = [reward]
        elif mode == FULL_GRADIENT:
            if gradient is None:
                gradient = self.landscape.gradient(state.z, state.beta)
            values = [float(gradient[0]), float(gradient[1])]
        else:
            v = state.velocity
            values = []
            for ch in self.landscape.channels:
                single = SalienceVector({ch: state.beta.get(ch)})
                values.append(self.landscape.directional_derivative(state.z, v, single))
        if p.noise_std > 0.0:
            values = [v + p.noise_std * state.rng.standard_normal() for v in values]
        return Observation(mode=mode, values=tuple(values), noise_std=p.noise_std)
