"""Riemannian SGD on Stiefel weights with structured spectral backpropagation.

Gradients flow through the eigendecomposition-based layers via the
divided-difference (Loewner) kernel: for a spectral map ``Y = U f(L) U^T``
the pullback of an upstream gradient ``dY`` is ``U (G * (U^T sym(dY) U)) U^T``
where ``G_ij = (f(l_i) - f(l_j)) / (l_i - l_j)`` off the diagonal and
``G_ii = f'(l_i)``.  Near-degenerate eigenvalue gaps are clamped at a
configurable floor and counted, since the quotient is numerically unstable
there.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    TrainingDivergedError,
)
from .network import ForwardTrace, Network
from .spd import SpdMatrix, _eigh_desc, _symmetrize, logm, project_to_spd
from .stiefel import stiefel_project, stiefel_retract

__all__ = [
    "LOSS_MSE",
    "LOSS_LOG_EUCLIDEAN",
    "TrainConfig",
    "TrainResult",
    "BackwardResult",
    "loss_mse",
    "loss_log_euclidean",
    "backward",
    "train",
]

LOSS_MSE = "mse"
LOSS_LOG_EUCLIDEAN = "log_euclidean"
_LOSSES = (LOSS_MSE, LOSS_LOG_EUCLIDEAN)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 30
    batch_size: int = 32
    loss: str = LOSS_LOG_EUCLIDEAN
    seed: int = 0
    eig_gap_floor: float = 1e-6
    lr_decay: float = 0.95

    def __post_init__(self) -> None:
        if self.learning_rate < 0.0:
            raise ValueError("learning_rate must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.loss not in _LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}, expected one of {_LOSSES}")
        if not (self.eig_gap_floor > 0.0):
            raise ValueError("eig_gap_floor must be positive")
        if not (0.0 < self.lr_decay <= 1.0):
            raise ValueError("lr_decay must be in (0, 1]")


@dataclass
class TrainResult:
    """Per-epoch training diagnostics plus the trained network."""

    network: Network
    epoch_losses: np.ndarray
    grad_norms: np.ndarray
    min_eig_gaps: np.ndarray
    gap_clamp_count: int
    floored_target_count: int

    def write_trace(self, path: str | Path) -> None:
        """Loss trace as CSV: epoch, mean_loss, grad_norm, min_eig_gap."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "mean_loss", "grad_norm", "min_eig_gap"])
            for i in range(len(self.epoch_losses)):
                writer.writerow(
                    [i, f"{self.epoch_losses[i]:.17g}", f"{self.grad_norms[i]:.17g}",
                     f"{self.min_eig_gaps[i]:.17g}"]
                )


@dataclass
class BackwardResult:
    """Euclidean weight gradients for one recorded forward pass."""

    weight_grads: list[np.ndarray]
    input_grad: np.ndarray
    gap_clamps: int
    min_gap: float


def _loewner_kernel(
    values: np.ndarray, fvalues: np.ndarray, fprime: np.ndarray, gap_floor: float
) -> tuple[np.ndarray, int, float]:
    """Divided-difference multiplier; near-zero gaps clamped to sign/gap_floor."""
    gaps = values[:, None] - values[None, :]
    small = np.abs(gaps) < gap_floor
    safe = np.where(small, np.where(gaps >= 0.0, gap_floor, -gap_floor), gaps)
    kernel = (fvalues[:, None] - fvalues[None, :]) / safe
    np.fill_diagonal(kernel, fprime)
    n = values.shape[0]
    clamped = int(small.sum()) - n  # the diagonal is always "small"
    if n > 1:
        off = np.abs(gaps)[~np.eye(n, dtype=bool)]
        min_gap = float(off.min())
    else:
        min_gap = np.inf
    return kernel, clamped, min_gap


def _spectral_backward(
    upstream: np.ndarray,
    values: np.ndarray,
    vectors: np.ndarray,
    fvalues: np.ndarray,
    fprime: np.ndarray,
    gap_floor: float,
) -> tuple[np.ndarray, int, float]:
    kernel, clamped, min_gap = _loewner_kernel(values, fvalues, fprime, gap_floor)
    inner = vectors.T @ _symmetrize(upstream) @ vectors
    return _symmetrize(vectors @ (kernel * inner) @ vectors.T), clamped, min_gap


def loss_mse(pred: SpdMatrix, target: SpdMatrix) -> float:
    """Mean squared entry error: ``||pred - target||_F^2 / n^2``."""
    if pred.dim != target.dim:
        raise DimensionMismatchError(f"dimension mismatch: {pred.dim} vs {target.dim}")
    n = pred.dim
    return float(np.sum((pred.data - target.data) ** 2)) / (n * n)


def loss_log_euclidean(
    pred: SpdMatrix, target: SpdMatrix, spd_floor: float = 1e-8
) -> float:
    """Squared log-Euclidean loss ``||logm(pred) - logm(target)||_F^2``.

    Rank-deficient operands are floor-projected (relative floor
    ``spd_floor * lambda_max``) with a warning.
    """
    if pred.dim != target.dim:
        raise DimensionMismatchError(f"dimension mismatch: {pred.dim} vs {target.dim}")

    def _ensure_pd(s: SpdMatrix, label: str) -> SpdMatrix:
        lmax = float(s.eig.values[0])
        floor = spd_floor * (lmax if lmax > 0.0 else 1.0)
        if s.eig.values[-1] < floor:
            warnings.warn(
                f"{label} is rank deficient; floor-projected at {floor:.3e}",
                RuntimeWarning,
                stacklevel=3,
            )
            return project_to_spd(s, floor)
        return s

    diff = logm(_ensure_pd(pred, "prediction")) - logm(_ensure_pd(target, "target"))
    return float(np.sum(diff**2))


def _grad_mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    n = pred.shape[0]
    diff = pred - target
    return float(np.sum(diff**2)) / (n * n), (2.0 / (n * n)) * diff


def _grad_log_euclidean(
    pred: np.ndarray, target_log: np.ndarray, gap_floor: float
) -> tuple[float, np.ndarray, int]:
    values, vectors = _eigh_desc(pred)
    if values[-1] <= 0.0:
        raise NotPositiveDefiniteError(
            "prediction lost strict positive definiteness during training"
        )
    log_pred = _symmetrize((vectors * np.log(values)) @ vectors.T)
    diff = log_pred - target_log
    loss = float(np.sum(diff**2))
    grad, clamped, _ = _spectral_backward(
        2.0 * diff, values, vectors, np.log(values), 1.0 / values, gap_floor
    )
    return loss, grad, clamped


def backward(
    net: Network,
    trace: ForwardTrace,
    output_grad: np.ndarray,
    gap_floor: float = 1e-6,
) -> BackwardResult:
    """Pull a loss gradient at the output back to Euclidean weight gradients.

    Bilinear layers contribute ``dW = 2 sym(g) W X`` and propagate
    ``W^T sym(g) W``; expansion layers truncate to the original block;
    rectification layers apply the spectral kernel with
    ``f = max(eps, .)`` and subgradient 0 at the clip boundary.
    """
    eps = net.spec.eps_rectify
    g = _symmetrize(np.asarray(output_grad, dtype=float))
    grads: list[np.ndarray] = [np.empty(0)] * len(net.weights)
    clamps = 0
    min_gap = np.inf
    for i in reversed(range(len(net.weights))):
        w = net.weights[i].value
        x = trace.layer_inputs[i]
        grads[i] = 2.0 * g @ w @ x
        g = w.T @ g @ w
        pre = trace.pre_dims[i]
        if pre < g.shape[0]:
            g = _symmetrize(g[:pre, :pre].copy())
        if i > 0:
            values, vectors = trace.rectify_eigs[i - 1]
            fvalues = np.maximum(values, eps)
            fprime = (values > eps).astype(float)
            g, c, gap = _spectral_backward(g, values, vectors, fvalues, fprime, gap_floor)
            clamps += c
            min_gap = min(min_gap, gap)
    return BackwardResult(grads, g, clamps, min_gap)


def _prepare_targets(
    targets: Sequence[SpdMatrix], loss: str, spd_floor: float = 1e-8
) -> tuple[list[np.ndarray], int]:
    """For the log-Euclidean loss, precompute target logarithms (floored if needed)."""
    if loss == LOSS_MSE:
        return [t.data for t in targets], 0
    logs = []
    floored = 0
    for t in targets:
        lmax = float(t.eig.values[0])
        floor = spd_floor * (lmax if lmax > 0.0 else 1.0)
        if t.eig.values[-1] < floor:
            t = project_to_spd(t, floor)
            floored += 1
        logs.append(logm(t))
    if floored:
        warnings.warn(
            f"{floored} training targets were rank deficient and floor-projected",
            RuntimeWarning,
            stacklevel=3,
        )
    return logs, floored


def train(
    net: Network,
    inputs: Sequence[SpdMatrix],
    targets: Sequence[SpdMatrix],
    cfg: TrainConfig,
) -> TrainResult:
    """Minibatch Riemannian SGD.

    Per batch: average the Euclidean weight gradients, project each onto the
    tangent space at its weight, and retract ``W - lr * V`` back onto the
    manifold.  The learning rate decays geometrically per epoch.  Run order
    is driven entirely by ``cfg.seed``, so training is reproducible given
    (seed, config, data order).  A non-finite loss aborts with diagnostics.
    """
    if len(inputs) != len(targets) or len(inputs) == 0:
        raise DimensionMismatchError("inputs and targets must be equal-length and nonempty")
    x_arrays = [x.data for x in inputs]
    target_arrays, floored = _prepare_targets(targets, cfg.loss)

    rng = np.random.default_rng(cfg.seed)
    lr = cfg.learning_rate
    n_samples = len(x_arrays)
    epoch_losses = np.zeros(cfg.epochs)
    grad_norms = np.zeros(cfg.epochs)
    min_gaps = np.full(cfg.epochs, np.inf)
    total_clamps = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(n_samples)
        batch_losses: list[float] = []
        batch_norms: list[float] = []
        for start in range(0, n_samples, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            acc = [np.zeros(p.shape) for p in net.weights]
            running = 0.0
            for idx in batch:
                trace = net.forward_trace(x_arrays[idx])
                if cfg.loss == LOSS_MSE:
                    loss, out_grad = _grad_mse(trace.output, target_arrays[idx])
                else:
                    loss, out_grad, c = _grad_log_euclidean(
                        trace.output, target_arrays[idx], cfg.eig_gap_floor
                    )
                    total_clamps += c
                back = backward(net, trace, out_grad, cfg.eig_gap_floor)
                total_clamps += back.gap_clamps
                min_gaps[epoch] = min(min_gaps[epoch], back.min_gap)
                running += loss
                for a, g in zip(acc, back.weight_grads):
                    a += g
            mean_loss = running / len(batch)
            if not np.isfinite(mean_loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch starting {start} "
                    f"(learning_rate={lr:.3e})"
                )
            batch_losses.append(mean_loss)
            sq_norm = 0.0
            for param, g in zip(net.weights, acc):
                g /= len(batch)
                param.grad_euclidean = g
                v = stiefel_project(param.value, g)
                sq_norm += float(np.sum(v**2))
                if lr != 0.0:
                    param.value = stiefel_retract(param.value, -lr * v)
            batch_norms.append(np.sqrt(sq_norm))
        epoch_losses[epoch] = float(np.mean(batch_losses))
        grad_norms[epoch] = float(np.mean(batch_norms))
        lr *= cfg.lr_decay

    return TrainResult(
        net, epoch_losses, grad_norms, min_gaps, total_clamps, floored
    )
