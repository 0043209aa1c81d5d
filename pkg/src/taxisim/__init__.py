"""Taxis navigation over compositional density landscapes: simulation engine,
controllers, behavioral assays, and inverse energy-surface recovery."""

__version__ = "0.1.0"

from .landscape import (  # noqa: F401
    Bounds,
    DensityComponent,
    Landscape,
    SalienceVector,
    uniform_salience,
)
