"""Training losses and their analytical gradients in scatterer coordinates.

Four terms enter the joint objective: decoder reconstruction error, scatterer
coordinate error, the interaction-energy ("force-vector") penalty with its
centroid regularizer, and the sparse field-reconstruction penalty.  The two
physics terms differentiate through the coupled force solve, so their
gradients cost one extra linear solve rather than a finite-difference sweep.

Real-valued losses of complex intermediates use d|z| = Re(conj(z) dz) / |z|
with a floor on |z| (subgradient 0 at the nonsmooth point).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import CentroidSingularError
from .grids import FieldGrid
from .scatter import (
    ABS_GRAD_FLOOR,
    Cluster,
    IncidentForce,
    eval_field,
    energy_position_gradient,
    field_position_jacobian,
    interaction_energy,
    solve_forces,
)

CENTROID_MIN_DISTANCE = 1e-9

STAGE_I = "stage1"
STAGE_II = "stage2"
STAGE_TRANSFER = "transfer"
STAGES = (STAGE_I, STAGE_II, STAGE_TRANSFER)


@dataclass(frozen=True)
class LossWeights:
    """Weights of (decoder MSE, coordinate MSE, force, sparse) terms."""

    decoder_mse: float = 1.0
    coord_mse: float = 1.0
    force: float = 1.0
    sparse: float = 1.0

    def __post_init__(self):
        vals = (self.decoder_mse, self.coord_mse, self.force, self.sparse)
        if any(v < 0 for v in vals):
            raise ValueError("loss weights must be nonnegative")
        if not any(v > 0 for v in vals):
            raise ValueError("at least one loss weight must be positive")

    def masked(self, stage: str) -> "LossWeights":
        """Stage masking: burn-in drops sparse, stage II drops the decoder,
        transfer keeps only the sparse term."""
        if stage == STAGE_I:
            return replace(self, sparse=0.0)
        if stage == STAGE_II:
            return replace(self, decoder_mse=0.0)
        if stage == STAGE_TRANSFER:
            return LossWeights(0.0, 0.0, 0.0, self.sparse)
        raise ValueError(f"unknown stage {stage!r}")

    def as_tuple(self):
        return (self.decoder_mse, self.coord_mse, self.force, self.sparse)


def joint_loss(weights: LossWeights, values, stage: str | None = None) -> float:
    """Weighted sum of the four loss values, optionally stage-masked."""
    w = weights if stage is None else weights.masked(stage)
    return float(sum(wi * vi for wi, vi in zip(w.as_tuple(), values)))


def loss_mse_fields(targets, predictions) -> float:
    """Batch mean of squared L2 deviations between field tensors."""
    x = np.asarray(targets, dtype=float)
    y = np.asarray(predictions, dtype=float)
    if x.shape != y.shape:
        raise ValueError("field tensors must share a shape")
    batch = x.shape[0]
    return float(np.sum((x - y) ** 2) / batch)


def loss_mse_coords(targets, predictions):
    """Batch mean of squared L2 coordinate deviations plus its gradient.

    Gradient with respect to the predictions is 2 (pred - target) / batch.
    """
    x = np.asarray(targets, dtype=float)
    y = np.asarray(predictions, dtype=float)
    if x.shape != y.shape:
        raise ValueError("coordinate sets must share a shape")
    batch = x.shape[0]
    value = float(np.sum((y - x) ** 2) / batch)
    return value, 2.0 * (y - x) / batch


class SparsePointSampler:
    """Draws the random pixel subset the sparse loss is evaluated on.

    Each call draws ``n_points`` distinct cells, uniformly without
    replacement; the stream is deterministic under the seed and advances with
    every draw.
    """

    def __init__(self, n_points: int = 225, seed: int = 0):
        if n_points < 1:
            raise ValueError("need at least one sparse point")
        self.n_points = n_points
        self._rng = np.random.default_rng(np.random.SeedSequence((seed, 3)))

    def sample(self, grid: FieldGrid):
        """Returns (points (m, 2), flat row-major indices) for one batch."""
        total = grid.values.size
        if self.n_points > total:
            raise ValueError("more sparse points than grid cells")
        idx = self._rng.choice(total, size=self.n_points, replace=False)
        idx = np.sort(idx)
        return grid.points()[idx], idx


def _centroid_term(true_positions, pred_positions, x0):
    c_true = true_positions.mean(axis=0)
    c_pred = pred_positions.mean(axis=0)
    denom = float(np.hypot(*(c_true - x0)))
    if denom < CENTROID_MIN_DISTANCE:
        raise CentroidSingularError("true centroid coincides with the forcing location")
    diff = c_true - c_pred
    dist = float(np.hypot(*diff))
    value = dist / denom
    if dist < ABS_GRAD_FLOOR:
        grad = np.zeros_like(pred_positions)
    else:
        # d||c_true - c_pred|| / d pred = -(c_true - c_pred)/dist * (1/n)
        grad = np.broadcast_to(-diff / (dist * len(pred_positions) * denom),
                               pred_positions.shape).copy()
    return value, grad


def loss_force(ctx, force: IncidentForce, true_cluster: Cluster, pred_cluster: Cluster,
               splines=None):
    """Interaction-energy deviation plus centroid regularizer, single sample.

    value = |E*(X) - E*(Xhat)| / f0^2 + ||c(X) - c(Xhat)|| / ||c(X) - x0||,
    with the complex modulus on the energy difference.  Returns the value and
    its gradient with respect to the predicted positions, shape (n, 2).
    """
    e_true = interaction_energy(ctx, true_cluster, force, splines)
    sol = solve_forces(ctx, pred_cluster, force, splines)
    e_pred = interaction_energy(ctx, pred_cluster, force, splines, solution=sol)
    diff = e_true - e_pred
    f0_sq = force.amplitude**2
    energy_value = abs(diff) / f0_sq

    if abs(diff) < ABS_GRAD_FLOOR:
        energy_grad = np.zeros((len(pred_cluster), 2))
    else:
        de = energy_position_gradient(ctx, pred_cluster, force, splines, solution=sol)
        # d|e_true - e_pred| = Re(conj(diff) * (-de)) / |diff|
        energy_grad = np.real(np.conj(diff) * (-de)) / (abs(diff) * f0_sq)

    cent_value, cent_grad = _centroid_term(
        true_cluster.positions, pred_cluster.positions, force.xy
    )
    return energy_value + cent_value, energy_grad + cent_grad


def loss_force_batch(items, pred_clusters, splines=None):
    """Mean force loss over (ctx, force, true_cluster) items; grads per item."""
    batch = len(items)
    values, grads = [], []
    for (ctx, force, true_cluster), pred in zip(items, pred_clusters):
        v, g = loss_force(ctx, force, true_cluster, pred, splines)
        values.append(v)
        grads.append(g / batch)
    return float(np.mean(values)), np.stack(grads)


def loss_sparse(ctx, force: IncidentForce, points, target_abs, pred_cluster: Cluster,
                splines=None):
    """Squared amplitude mismatch over the sparse point set, single sample.

    ``target_abs`` holds |psi| of either a true-cluster solution or a
    synthetic target at ``points``.  Returns the value (sum over points) and
    its gradient with respect to the predicted positions.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    target = np.asarray(target_abs, dtype=float).ravel()
    if len(target) == 0:
        raise ValueError("sparse target set is empty")
    if len(target) != len(pts):
        raise ValueError("target values and points disagree in length")
    if not np.all(np.isfinite(target)):
        raise ValueError("target values must be finite")

    sol = solve_forces(ctx, pred_cluster, force, splines)
    psi = eval_field(ctx, pred_cluster, force, sol, pts, splines)
    amp = np.abs(psi)
    mismatch = amp - target
    value = float(np.sum(mismatch**2))

    jac = field_position_jacobian(ctx, pred_cluster, force, pts, splines, solution=sol)
    # d|psi| = Re(conj(psi) dpsi) / max(|psi|, floor)
    damp = np.real(np.conj(psi)[:, None, None] * jac) / np.maximum(amp, ABS_GRAD_FLOOR)[:, None, None]
    grad = np.einsum("p,pac->ac", 2.0 * mismatch, damp)
    return value, grad


def loss_sparse_batch(items, pred_clusters, splines=None):
    """Mean sparse loss over (ctx, force, points, target_abs) items."""
    batch = len(items)
    values, grads = [], []
    for (ctx, force, pts, target), pred in zip(items, pred_clusters):
        v, g = loss_sparse(ctx, force, pts, target, pred, splines)
        values.append(v)
        grads.append(g / batch)
    return float(np.mean(values)), np.stack(grads)
