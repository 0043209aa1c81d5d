"""Recovering an energy surface from movement data.

Supervision pairs each visited position and velocity with the scalar
relative-change signal it produced; the field is a grid of Gaussian radial
basis functions whose predicted directional derivatives are regressed onto
those signals. Because only derivatives are observed, the field is
identifiable up to an additive constant, so all evaluation is mean-centered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .landscape import Bounds, Landscape, SalienceVector

EXACT_GRADIENT = "exact_gradient"
FORWARD_GRADIENT = "forward_gradient"

DEFAULT_RIDGE = 1e-4
DIVERGENCE_LOSS = 1e6


class FitError(RuntimeError):
    """Raised when fitting diverges."""


@dataclass(frozen=True)
class TrajectoryDataset:
    """Supervision tuples (position, velocity, signal) inside known bounds."""

    z: np.ndarray   # (N, 2) positions
    v: np.ndarray   # (N, 2) velocities
    r: np.ndarray   # (N,) observed directional-derivative signals
    bounds: Bounds

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        v = np.asarray(self.v, dtype=float)
        r = np.asarray(self.r, dtype=float)
        if z.ndim != 2 or z.shape[1] != 2 or v.shape != z.shape or r.shape != (z.shape[0],):
            raise ValueError("dataset arrays must be (N,2), (N,2), (N,)")
        if not (np.isfinite(z).all() and np.isfinite(v).all() and np.isfinite(r).all()):
            raise ValueError("dataset contains non-finite values")
        b = self.bounds
        if (z[:, 0] < b.x_min).any() or (z[:, 0] > b.x_max).any() or \
           (z[:, 1] < b.y_min).any() or (z[:, 1] > b.y_max).any():
            raise ValueError("dataset positions outside bounds")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "r", r)

    def __len__(self) -> int:
        return self.z.shape[0]


def _grid_centers(bounds: Bounds, shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    ys = np.linspace(bounds.y_min, bounds.y_max, h)
    xs = np.linspace(bounds.x_min, bounds.x_max, w)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)  # (h*w, 2)


def _grid_spacing(bounds: Bounds, shape: tuple[int, int]) -> float:
    h, w = shape
    return max((bounds.x_max - bounds.x_min) / (w - 1), (bounds.y_max - bounds.y_min) / (h - 1))


@dataclass
class ParametricEnergy:
    """Gaussian-RBF grid field: energy(z) = sum_ij w_ij exp(-|z - c_ij|^2 / (2 s^2)).

    The modeled log-density is the negated energy.
    """

    bounds: Bounds
    weights: np.ndarray  # (H, W)
    rbf_scale: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        h, w = self.weights.shape
        if h < 4 or w < 4:
            raise ValueError("grid must be at least 4x4")
        spacing = _grid_spacing(self.bounds, (h, w))
        if not (0.5 * spacing <= self.rbf_scale <= 3.0 * spacing):
            raise ValueError(
                f"rbf_scale {self.rbf_scale} outside 0.5-3x grid spacing {spacing}"
            )
        self._centers = _grid_centers(self.bounds, (h, w))

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def _kernels(self, z: np.ndarray) -> np.ndarray:
        """(N, P) kernel matrix for positions z (N, 2)."""
        d = z[:, None, :] - self._centers[None, :, :]
        return np.exp(-np.sum(d * d, axis=2) / (2.0 * self.rbf_scale**2))

    def energy(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return self._kernels(z) @ self.weights.ravel()

    def log_density_hat(self, z) -> np.ndarray:
        return -self.energy(z)

    def gradient_hat(self, z) -> np.ndarray:
        """(N, 2) analytic gradient of the modeled log-density."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        d = z[:, None, :] - self._centers[None, :, :]             # (N, P, 2)
        k = np.exp(-np.sum(d * d, axis=2) / (2.0 * self.rbf_scale**2))
        # grad(-E) = sum_ij w_ij (z - c_ij) / s^2 * K_ij
        return np.einsum("np,npd->nd", k * self.weights.ravel(), d) / self.rbf_scale**2

    def predict_dd(self, z, v) -> np.ndarray:
        """Directional derivative of the modeled log-density along velocity v."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return np.sum(self.gradient_hat(z) * v, axis=1)

    def to_dict(self) -> dict:
        b = self.bounds
        return {
            "bounds": {"x_min": b.x_min, "x_max": b.x_max, "y_min": b.y_min, "y_max": b.y_max},
            "shape": list(self.shape),
            "rbf_scale": self.rbf_scale,
            "weights": self.weights.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParametricEnergy":
        b = d["bounds"]
        return cls(
            bounds=Bounds(b["x_min"], b["x_max"], b["y_min"], b["y_max"]),
            weights=np.array(d["weights"], dtype=float),
            rbf_scale=float(d["rbf_scale"]),
            metadata=d.get("metadata", {}),
        )


def _design_matrix(data: TrajectoryDataset, centers: np.ndarray, rbf_scale: float) -> np.ndarray:
    """(N, P) features: d(predict_dd)/dw for each weight, linear-in-weights model."""
    d = data.z[:, None, :] - centers[None, :, :]
    k = np.exp(-np.sum(d * d, axis=2) / (2.0 * rbf_scale**2))
    proj = np.einsum("npd,nd->np", d, data.v) / rbf_scale**2
    return k * proj


def fit_energy(
    data: TrajectoryDataset,
    grid_shape: tuple[int, int] = (16, 16),
    rbf_scale: float | None = None,
    optimizer: str = EXACT_GRADIENT,
    epochs: int = 500,
    step_size: float | None = None,
    seed: int = 0,
    ridge: float = DEFAULT_RIDGE,
    batch_size: int = 1024,
) -> ParametricEnergy:
    """Fit the RBF field by ridge-regularized least squares on observed signals.

    exact_gradient runs full-batch gradient descent with the analytic gradient;
    forward_gradient runs minibatch descent where each minibatch gradient is
    replaced by its projection (g . u) u onto one random Gaussian direction u,
    which is unbiased for the true gradient since E[u u^T] = I.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    if optimizer not in (EXACT_GRADIENT, FORWARD_GRADIENT):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    spacing = _grid_spacing(data.bounds, grid_shape)
    if rbf_scale is None:
        rbf_scale = 1.2 * spacing
    centers = _grid_centers(data.bounds, grid_shape)
    n, p = len(data), centers.shape[0]
    phi = _design_matrix(data, centers, rbf_scale)
    r = data.r

    # Quadratic loss: L(w) = |phi w - r|^2 / N + ridge |w|^2, grad = 2 (A w - b).
    a_mat = phi.T @ phi / n + ridge * np.eye(p)
    b_vec = phi.T @ r / n
    const = float(r @ r) / n
    lam_max = float(np.linalg.eigvalsh(a_mat)[-1])
    if step_size is None:
        if optimizer == EXACT_GRADIENT:
            step_size = 0.9 / lam_max  # just under the 1/lambda_max stability bound
        else:
            # the projected update (g . u) u has magnitude ~P times the gradient
            # (E|u|^2 = P), so the stable step shrinks by the same factor
            step_size = 0.9 / (lam_max * p)
    if not (step_size > 0):
        raise ValueError("step_size must be positive")

    def loss(w):
        return float(w @ (a_mat @ w) - 2.0 * b_vec @ w + const)

    rng = np.random.default_rng(seed)
    w = np.zeros(p)
    losses = [loss(w)]
    if optimizer == EXACT_GRADIENT:
        for _ in range(epochs):
            w = w - step_size * 2.0 * (a_mat @ w - b_vec)
            losses.append(loss(w))
            if losses[-1] > DIVERGENCE_LOSS:
                raise FitError(
                    f"diverged at epoch {len(losses) - 1}: loss {losses[-1]:.3e} "
                    f"(step_size {step_size:.3e}, stability bound {1.0 / lam_max:.3e})"
                )
    else:
        order = np.arange(n)
        for _ in range(epochs):
            rng.shuffle(order)
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                pb = phi[idx]
                g = 2.0 * (pb.T @ (pb @ w - r[idx]) / len(idx) + ridge * w)
                u = rng.standard_normal(p)
                w = w - step_size * (g @ u) * u
            losses.append(loss(w))
            if losses[-1] > DIVERGENCE_LOSS:
                raise FitError(
                    f"diverged at epoch {len(losses) - 1}: loss {losses[-1]:.3e} "
                    f"(step_size {step_size:.3e})"
                )

    return ParametricEnergy(
        bounds=data.bounds,
        weights=w.reshape(grid_shape),
        rbf_scale=rbf_scale,
        metadata={
            "optimizer": optimizer,
            "epochs": epochs,
            "step_size": step_size,
            "ridge": ridge,
            "seed": seed,
            "final_loss": losses[-1],
            "loss_curve": losses,
            "n_samples": n,
        },
    )


@dataclass(frozen=True)
class RecoveryReport:
    correlation: float
    rmse_aligned: float
    degenerate: bool
    n_points: int


def evaluation_grid(bounds: Bounds, shape: tuple[int, int] = (32, 32)) -> np.ndarray:
    """Cell-center evaluation points, (shape[0]*shape[1], 2)."""
    h, w = shape
    xs = bounds.x_min + (np.arange(w) + 0.5) * (bounds.x_max - bounds.x_min) / w
    ys = bounds.y_min + (np.arange(h) + 0.5) * (bounds.y_max - bounds.y_min) / h
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def evaluate_recovery(
    model: ParametricEnergy,
    truth: Landscape,
    beta: SalienceVector,
    eval_points: np.ndarray | None = None,
) -> RecoveryReport:
    """Compare recovered and true log-densities up to the unidentifiable constant."""
    if eval_points is None:
        eval_points = evaluation_grid(model.bounds)
    pred = model.log_density_hat(eval_points)
    true = np.array([truth.log_density(z, beta) for z in eval_points])
    pred_c = pred - pred.mean()
    true_c = true - true.mean()
    if pred_c.std() < 1e-12:
        return RecoveryReport(0.0, float(np.sqrt(np.mean(true_c**2))), True, len(eval_points))
    corr = float(np.corrcoef(pred_c, true_c)[0, 1])
    # Best affine alignment a * pred + b onto truth, then residual RMSE.
    a = float(true_c @ pred_c / (pred_c @ pred_c))
    rmse = float(np.sqrt(np.mean((true_c - a * pred_c) ** 2)))
    return RecoveryReport(corr, rmse, False, len(eval_points))
