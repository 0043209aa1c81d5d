"""Trajectory records and their CSV / line-delimited JSON serialization.

Field order is part of the file contract:
t, x, y, heading, speed, reward, obs_0..obs_{k-1}, beta_<channel>..., dopamine, serotonin.
Floats are written in shortest round-trip decimal form, so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

BASE_FIELDS = ("t", "x", "y", "heading", "speed", "reward")
TAIL_FIELDS = ("dopamine", "serotonin")


def trajectory_columns(n_obs: int, channels: tuple[str, ...]) -> tuple[str, ...]:
    obs = tuple(f"obs_{i}" for i in range(n_obs))
    beta = tuple(f"beta_{ch}" for ch in channels)
    return BASE_FIELDS + obs + beta + TAIL_FIELDS


@dataclass
class Trajectory:
    """Column-named float matrix, one row per environment step."""

    columns: tuple[str, ...]
    data: np.ndarray  # (n_steps, n_columns)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise ValueError("data shape does not match columns")

    def __len__(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def positions(self) -> np.ndarray:
        return self.data[:, [self.columns.index("x"), self.columns.index("y")]]

    @property
    def speed(self) -> np.ndarray:
        return self.column("speed")

    @property
    def reward(self) -> np.ndarray:
        return self.column("reward")

    def obs_columns(self) -> list[str]:
        return [c for c in self.columns if c.startswith("obs_")]

    def beta_columns(self) -> list[str]:
        return [c for c in self.columns if c.startswith("beta_")]

    def dt(self) -> float:
        """Sampling interval; requires at least two rows."""
        t = self.t
        if len(t) < 2:
            raise ValueError("trajectory too short to infer dt")
        return float(t[1] - t[0])

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write(",".join(self.columns) + "\n")
            for row in self.data:
                f.write(",".join(repr(float(v)) for v in row) + "\n")

    def write_jsonl(self, path):
        with open(path, "w") as f:
            for row in self.data:
                f.write(json.dumps({c: float(v) for c, v in zip(self.columns, row)}) + "\n")


class TrajectoryReadError(ValueError):
    """Malformed trajectory file; carries the file path and line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def read_csv(path) -> Trajectory:
    with open(path) as f:
        header = f.readline()
        if not header.strip():
            raise TrajectoryReadError(path, 1, "missing header")
        columns = tuple(header.strip().split(","))
        rows = []
        for i, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(columns):
                raise TrajectoryReadError(path, i, f"expected {len(columns)} fields, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as e:
                raise TrajectoryReadError(path, i, str(e)) from e
    if not rows:
        raise TrajectoryReadError(path, 2, "no data rows")
    return Trajectory(columns, np.array(rows))


def read_jsonl(path) -> Trajectory:
    rows = []
    columns = None
    with open(path) as f:
        for i, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise TrajectoryReadError(path, i, str(e)) from e
            if columns is None:
                columns = tuple(rec.keys())
            elif tuple(rec.keys()) != columns:
                raise TrajectoryReadError(path, i, "inconsistent fields")
            rows.append([float(rec[c]) for c in columns])
    if not rows:
        raise TrajectoryReadError(path, 1, "empty file")
    return Trajectory(columns, np.array(rows))


def read_trajectory(path) -> Trajectory:
    path = str(path)
    if path.endswith(".jsonl"):
        return read_jsonl(path)
    return read_csv(path)
