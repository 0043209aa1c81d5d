"""Compositional attractant/repellent density landscapes.

The landscape is a sum of unnormalized log-density components, each tied to a
resource or threat channel. Per-channel salience weights temper the landscape
as exponents on the component densities, so the total log-density is linear in
the salience weights and a zero-salience landscape is exactly flat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GAUSSIAN = "gaussian"
CONE = "cone"
ATTRACTANT = "attractant"
REPELLENT = "repellent"

_KINDS = (GAUSSIAN, CONE)
_POLARITIES = (ATTRACTANT, REPELLENT)


@dataclass(frozen=True)
class DensityComponent:
    """One attractant or repellent density bump.

    Gaussian components have unnormalized log-density -|z - center|^2 / (2 scale^2);
    cone components have -|z - center| / scale. Both peak at 0 at the center.
    Repellent polarity negates the contribution.
    """

    kind: str
    center: tuple[float, float]
    scale: float
    channel: str
    polarity: str = ATTRACTANT

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown component kind {self.kind!r}")
        if self.polarity not in _POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")
        if not (self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def sign(self) -> float:
        return 1.0 if self.polarity == ATTRACTANT else -1.0

    def log_density(self, x: float, y: float) -> float:
        """Unnormalized log-density of this component alone (no sign, no salience)."""
        dx = x - self.center[0]
        dy = y - self.center[1]
        if self.kind == GAUSSIAN:
            return -(dx * dx + dy * dy) / (2.0 * self.scale * self.scale)
        return -math.hypot(dx, dy) / self.scale

    def grad(self, x: float, y: float) -> tuple[float, float]:
        """Analytic gradient of log_density. Cone apex returns (0, 0) (subgradient choice)."""
        dx = x - self.center[0]
        dy = y - self.center[1]
        if self.kind == GAUSSIAN:
            inv = 1.0 / (self.scale * self.scale)
            return (-dx * inv, -dy * inv)
        r = math.hypot(dx, dy)
        if r == 0.0:
            return (0.0, 0.0)
        inv = 1.0 / (self.scale * r)
        return (-dx * inv, -dy * inv)


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned rectangle [x_min, x_max] x [y_min, y_max]."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("bounds must have positive extent")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class SalienceVector:
    """Nonnegative per-channel weights; a missing channel means weight 0."""

    weights: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for ch, w in self.weights.items():
            if not (w >= 0.0):
                raise ValueError(f"salience weight for {ch!r} must be >= 0, got {w}")

    def get(self, channel: str) -> float:
        return self.weights.get(channel, 0.0)


@dataclass(frozen=True)
class Landscape:
    """Ordered set of density components over a bounded rectangle.

    Total log-density is log gamma(z; beta) = sum_i sign_i * beta_channel(i) * l_i(z)
    and the energy is its negation. Immutable; safe to share across rollout workers.
    """

    components: tuple[DensityComponent, ...]
    bounds: Bounds

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("landscape needs at least one component")
        for c in self.components:
            if not self.bounds.contains(*c.center):
                raise ValueError(f"component center {c.center} outside bounds")

    @property
    def channels(self) -> tuple[str, ...]:
        seen: list[str] = []
        for c in self.components:
            if c.channel not in seen:
                seen.append(c.channel)
        return tuple(seen)

    def log_density(self, z, beta: SalienceVector) -> float:
        """log gamma(z; beta); equals minus the energy."""
        x, y = float(z[0]), float(z[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite position {z!r}")
        total = 0.0
        for c in self.components:
            w = beta.get(c.channel)
            if w != 0.0:
                total += c.sign * w * c.log_density(x, y)
        return total

    def energy(self, z, beta: SalienceVector) -> float:
        return -self.log_density(z, beta)

    def gradient(self, z, beta: SalienceVector) -> np.ndarray:
        """Analytic grad_z log gamma(z; beta) as a length-2 array."""
        x, y = float(z[0]), float(z[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite position {z!r}")
        gx = 0.0
        gy = 0.0
        for c in self.components:
            w = beta.get(c.channel)
            if w != 0.0:
                cgx, cgy = c.grad(x, y)
                gx += c.sign * w * cgx
                gy += c.sign * w * cgy
        return np.array([gx, gy])

    def directional_derivative(self, z, u, beta: SalienceVector) -> float:
        """grad log gamma . u, where u is a velocity (not necessarily unit length)."""
        g = self.gradient(z, beta)
        return float(g[0] * float(u[0]) + g[1] * float(u[1]))

    def channel_density(self, channel: str, z) -> float:
        """Unit-salience attractant-side density exp(sum of that channel's log-densities).

        Used as the local concentration a physiological channel can draw on;
        polarity sign is ignored here (the caller decides harm vs intake).
        """
        x, y = float(z[0]), float(z[1])
        total = 0.0
        found = False
        for c in self.components:
            if c.channel == channel:
                total += c.log_density(x, y)
                found = True
        return math.exp(total) if found else 0.0

    def channel_polarity(self, channel: str) -> str:
        """Polarity of a channel's components (mixed-polarity channels are rejected)."""
        pols = {c.polarity for c in self.components if c.channel == channel}
        if not pols:
            return ATTRACTANT
        if len(pols) > 1:
            raise ValueError(f"channel {channel!r} mixes attractant and repellent components")
        return pols.pop()


def uniform_salience(landscape: Landscape, value: float = 1.0) -> SalienceVector:
    """Same weight on every channel; handy for assays with fixed tempering."""
    return SalienceVector({ch: value for ch in landscape.channels})
