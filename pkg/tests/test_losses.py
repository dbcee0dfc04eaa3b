"""The four training losses, their gradients, and stage masking."""

import numpy as np
import pytest

from platescatter import (
    FieldGrid,
    IncidentForce,
    LossWeights,
    SparsePointSampler,
    WaveContext,
    eval_field,
    interaction_energy,
    joint_loss,
    loss_force,
    loss_mse_coords,
    loss_mse_fields,
    loss_sparse,
    preset,
    sample_cluster,
    solve_forces,
)
from platescatter.errors import CentroidSingularError
from platescatter.fdiff import central_difference, relative_error
from platescatter.losses import STAGE_I, STAGE_II, STAGE_TRANSFER


@pytest.fixture(scope="module")
def instance():
    spec = preset("nearfar")
    rng = np.random.default_rng(31)
    cluster, force, k = sample_cluster(spec, rng)
    ctx = WaveContext.from_wavenumber(spec.plate, k)
    return spec, ctx, cluster, force


def brute_force_mse(x, y):
    total = 0.0
    for xb, yb in zip(x, y):
        total += float(np.sum((np.asarray(xb) - np.asarray(yb)) ** 2))
    return total / len(x)


# ---------------------------------------------------------------------------
# data losses
# ---------------------------------------------------------------------------

def test_mse_fields_zero_on_identical():
    x = np.random.default_rng(0).normal(size=(3, 2, 8, 8))
    assert loss_mse_fields(x, x) == 0.0


def test_mse_fields_single_pixel():
    x = np.zeros((4, 2, 4, 4))
    y = x.copy()
    y[2, 1, 0, 0] = 0.3
    assert loss_mse_fields(x, y) == pytest.approx(0.3**2 / 4, rel=1e-15)


def test_mse_fields_brute_force():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 2, 5, 5))
    y = rng.normal(size=(6, 2, 5, 5))
    assert loss_mse_fields(x, y) == pytest.approx(brute_force_mse(x, y), rel=1e-14)


def test_mse_fields_shape_mismatch():
    with pytest.raises(ValueError):
        loss_mse_fields(np.zeros((2, 3)), np.zeros((2, 4)))


def test_mse_coords_pythagorean():
    x = np.zeros((1, 1, 2))
    y = np.array([[[3.0, 4.0]]])
    value, grad = loss_mse_coords(x, y)
    assert value == 25.0
    assert np.allclose(grad, 2.0 * y)


def test_mse_coords_gradient_fd():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(3, 4, 2))
    y = rng.normal(size=(3, 4, 2))
    _, grad = loss_mse_coords(x, y)
    fd = central_difference(lambda p: loss_mse_coords(x, p)[0], y)
    assert relative_error(grad, fd) <= 1e-8


# ---------------------------------------------------------------------------
# force loss
# ---------------------------------------------------------------------------

def test_force_loss_zero_at_truth(instance):
    _, ctx, cluster, force = instance
    value, grad = loss_force(ctx, force, cluster, cluster)
    assert value == 0.0
    assert np.all(grad == 0.0)


def test_force_loss_rotation_leaves_energy_term(instance):
    _, ctx, cluster, force = instance
    theta = 0.3
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    rotated = cluster.with_positions((cluster.positions - force.xy) @ rot.T + force.xy)
    value, _ = loss_force(ctx, force, cluster, rotated)
    centroid = cluster.positions.mean(axis=0)
    chord = np.linalg.norm(centroid - rotated.positions.mean(axis=0))
    expected = chord / np.linalg.norm(centroid - force.xy)
    # energy term vanishes under rigid rotation about the forcing point
    assert value == pytest.approx(expected, rel=1e-9)


def test_force_loss_gradient_fd(instance):
    spec, ctx, cluster, force = instance
    truth, _, _ = sample_cluster(spec, np.random.default_rng(55))
    _, grad = loss_force(ctx, force, truth, cluster)
    fd = central_difference(
        lambda p: loss_force(ctx, force, truth, cluster.with_positions(p.reshape(-1, 2)))[0],
        cluster.positions,
    )
    assert relative_error(grad, fd) <= 1e-5


def test_force_loss_f0_normalization(instance):
    # scaling the shared forcing leaves the energy term unchanged
    spec, ctx, cluster, force = instance
    truth, _, _ = sample_cluster(spec, np.random.default_rng(56))
    base, _ = loss_force(ctx, force, truth, cluster)
    scaled_force = IncidentForce(tuple(force.xy), force.amplitude * 7.0)
    scaled, _ = loss_force(ctx, scaled_force, truth, cluster)
    assert scaled == pytest.approx(base, rel=1e-10)


def test_force_loss_centroid_singularity(instance):
    _, ctx, cluster, force = instance
    # truth centred exactly on the forcing point
    offsets = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]])
    centred = cluster.with_positions(force.xy + offsets - offsets.mean(axis=0))
    with pytest.raises(CentroidSingularError):
        loss_force(ctx, force, centred, cluster)


def test_energy_quadratic_scaling(instance):
    _, ctx, cluster, force = instance
    e1 = interaction_energy(ctx, cluster, force)
    e2 = interaction_energy(ctx, cluster, IncidentForce(tuple(force.xy), 2 * force.amplitude))
    assert e2 == pytest.approx(4.0 * e1, rel=1e-12)


# ---------------------------------------------------------------------------
# sparse loss
# ---------------------------------------------------------------------------

def test_sparse_sampler_properties():
    grid = FieldGrid(np.zeros((16, 16)), (-1.0, 1.0, -1.0, 1.0))
    sampler = SparsePointSampler(n_points=50, seed=3)
    pts, idx = sampler.sample(grid)
    assert len(np.unique(idx)) == 50
    assert pts.shape == (50, 2)
    # same seed reproduces the same stream; the stream advances per draw
    again = SparsePointSampler(n_points=50, seed=3)
    assert np.array_equal(again.sample(grid)[1], idx)
    assert not np.array_equal(sampler.sample(grid)[1], idx)


def test_sparse_sampler_full_grid():
    grid = FieldGrid(np.zeros((4, 4)), (-1.0, 1.0, -1.0, 1.0))
    _, idx = SparsePointSampler(n_points=16, seed=0).sample(grid)
    assert sorted(idx) == list(range(16))
    with pytest.raises(ValueError):
        SparsePointSampler(n_points=17, seed=0).sample(grid)


def test_sparse_loss_zero_on_self_target(instance):
    _, ctx, cluster, force = instance
    pts = np.array([[40.0, 10.0], [-25.0, 33.0], [5.0, -48.0]])
    solution = solve_forces(ctx, cluster, force)
    target = np.abs(eval_field(ctx, cluster, force, solution, pts))
    value, _ = loss_sparse(ctx, force, pts, target, cluster)
    assert value == 0.0


def test_sparse_loss_gradient_fd(instance):
    spec, ctx, cluster, force = instance
    truth, _, _ = sample_cluster(spec, np.random.default_rng(91))
    sol = solve_forces(ctx, truth, force)
    pts = FieldGrid(np.zeros((15, 15)), spec.window).points()[::2][:112]
    target = np.abs(eval_field(ctx, truth, force, sol, pts))
    _, grad = loss_sparse(ctx, force, pts, target, cluster)
    fd = central_difference(
        lambda p: loss_sparse(ctx, force, pts, target, cluster.with_positions(p.reshape(-1, 2)))[0],
        cluster.positions,
    )
    assert relative_error(grad, fd) <= 1e-5


def test_sparse_loss_empty_target(instance):
    _, ctx, cluster, force = instance
    with pytest.raises(ValueError):
        loss_sparse(ctx, force, np.zeros((0, 2)), np.zeros(0), cluster)


def test_sparse_loss_accepts_synthetic_target(instance):
    # any finite amplitude raster works as a target, not only solver output
    _, ctx, cluster, force = instance
    pts = np.array([[10.0, 20.0], [30.0, -5.0]])
    value, grad = loss_sparse(ctx, force, pts, np.array([1.5, 0.5]), cluster)
    assert value > 0
    assert grad.shape == (len(cluster), 2)


# ---------------------------------------------------------------------------
# joint loss and stage masks
# ---------------------------------------------------------------------------

def test_joint_loss_recovers_single_term():
    values = (3.0, 5.0, 7.0, 11.0)
    assert joint_loss(LossWeights(1, 0, 0, 0), values) == 3.0
    assert joint_loss(LossWeights(0, 0, 0, 2), values) == 22.0


def test_joint_loss_linearity():
    values = (3.0, 5.0, 7.0, 11.0)
    base = joint_loss(LossWeights(0.1, 0.2, 0.3, 0.4), values)
    doubled = joint_loss(LossWeights(0.2, 0.2, 0.3, 0.4), values)
    assert doubled - base == pytest.approx(0.1 * values[0], rel=1e-12)


def test_stage_masks():
    w = LossWeights(1.0, 2.0, 3.0, 4.0)
    assert w.masked(STAGE_I).as_tuple() == (1.0, 2.0, 3.0, 0.0)
    assert w.masked(STAGE_II).as_tuple() == (0.0, 2.0, 3.0, 4.0)
    assert w.masked(STAGE_TRANSFER).as_tuple() == (0.0, 0.0, 0.0, 4.0)


def test_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(-1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        LossWeights(0.0, 0.0, 0.0, 0.0)
