"""Internal physiology, need-driven salience, and neuromodulator dynamics.

Each physiological variable tracks one landscape channel. Deficits below the
setpoint translate into salience weights on that channel; local density is
consumed (attractants replenish, repellents harm). Dopamine and serotonin are
first-order low-pass filters of local density, routed to gait modulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .landscape import ATTRACTANT, Landscape, SalienceVector

NEUROMOD_TAU_S = 1.0  # time constant of both low-pass filters


@dataclass(frozen=True)
class PhysioVariable:
    """One homeostatic variable: level in [0, 1], 1 = fully sated."""

    channel: str
    level: float
    setpoint: float
    decay_rate: float = 0.0
    intake_gain: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.level <= 1.0):
            raise ValueError(f"level must be in [0, 1], got {self.level}")
        if not (0.0 <= self.setpoint <= 1.0):
            raise ValueError(f"setpoint must be in [0, 1], got {self.setpoint}")
        if self.decay_rate < 0 or self.intake_gain < 0:
            raise ValueError("decay_rate and intake_gain must be >= 0")


@dataclass(frozen=True)
class PhysioState:
    """Physiological variables plus current neuromodulator levels."""

    variables: tuple[PhysioVariable, ...] = ()
    dopamine: float = 0.0
    serotonin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        channels = [v.channel for v in self.variables]
        if len(set(channels)) != len(channels):
            raise ValueError("duplicate physiological channels")
        if not (self.dopamine >= 0.0):
            raise ValueError(f"dopamine must be >= 0, got {self.dopamine}")
        if not (0.0 <= self.serotonin <= 1.0):
            raise ValueError(f"serotonin must be in [0, 1], got {self.serotonin}")

    def level(self, channel: str) -> float:
        for v in self.variables:
            if v.channel == channel:
                return v.level
        raise KeyError(channel)

    def deficit(self, channel: str) -> float:
        for v in self.variables:
            if v.channel == channel:
                return max(0.0, v.setpoint - v.level)
        raise KeyError(channel)


@dataclass(frozen=True)
class NeuromodRule:
    """Gains mapping local density onto dopamine and serotonin targets."""

    dopamine_gain: float = 0.0
    serotonin_gain: float = 0.0
    serotonin_threshold: float = 0.0

    def __post_init__(self):
        if self.dopamine_gain < 0 or self.serotonin_gain < 0:
            raise ValueError("neuromodulator gains must be >= 0")


def update_physio(state: PhysioState, landscape: Landscape, z, dt: float) -> PhysioState:
    """Advance levels one step: linear decay plus density-driven intake or harm."""
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    updated = []
    for var in state.variables:
        rho = landscape.channel_density(var.channel, z)
        if landscape.channel_polarity(var.channel) == ATTRACTANT:
            delta = -var.decay_rate * dt + var.intake_gain * rho * dt
        else:
            delta = -var.decay_rate * dt - var.intake_gain * rho * dt
        level = min(1.0, max(0.0, var.level + delta))
        updated.append(replace(var, level=level))
    return replace(state, variables=tuple(updated))


def salience(state: PhysioState, landscape: Landscape, k: float) -> SalienceVector:
    """Deficit-proportional weights for appetitive channels; threats stay at k."""
    if not (k > 0):
        raise ValueError(f"k must be positive, got {k}")
    weights = {}
    for var in state.variables:
        if landscape.channel_polarity(var.channel) == ATTRACTANT:
            weights[var.channel] = k * max(0.0, var.setpoint - var.level)
        else:
            weights[var.channel] = k
    return SalienceVector(weights)


def update_neuromodulators(
    state: PhysioState,
    rule: NeuromodRule,
    local_density: float,
    intake_rate: float,
    dt: float,
) -> PhysioState:
    """First-order low-pass of dopamine and serotonin toward their density targets."""
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    if local_density < 0:
        raise ValueError(f"local_density must be >= 0, got {local_density}")
    # Exact exponential integrator for the first-order filter, stable for any dt.
    alpha = 1.0 - math.exp(-dt / NEUROMOD_TAU_S)
    da_target = rule.dopamine_gain * local_density
    se_target = rule.serotonin_gain * max(0.0, local_density - rule.serotonin_threshold)
    dopamine = state.dopamine + alpha * (da_target - state.dopamine)
    serotonin = state.serotonin + alpha * (se_target - state.serotonin)
    serotonin = min(1.0, max(0.0, serotonin))
    return replace(state, dopamine=dopamine, serotonin=serotonin)
