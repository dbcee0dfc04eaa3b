"""Binary round-trips and atomicity of the on-disk formats."""

import os

import numpy as np
import pytest

from platescatter import FieldGrid
from platescatter.errors import ConfigError
from platescatter.formats import (
    atomic_write_bytes,
    field_grid_bytes,
    load_checkpoint,
    read_dataset_shard,
    read_field_grid,
    save_checkpoint,
    sha256_file,
    write_dataset_shard,
    write_field_grid,
    write_loss_history_csv,
    write_trial_log_csv,
)
from platescatter.grids import KIND_ABS_TOTAL, KIND_RE_INCIDENT
from platescatter.inverse import SurrogateConfig, SurrogateModel
from platescatter.problems import NormStats, build_dataset, preset


def test_field_grid_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    grid = FieldGrid(rng.normal(size=(12, 16)), (-3.0, 5.0, -2.0, 2.0), KIND_RE_INCIDENT)
    path = tmp_path / "grid.msfg"
    write_field_grid(path, grid)
    back = read_field_grid(path)
    assert np.array_equal(back.values, grid.values)
    assert back.extent == grid.extent
    assert back.kind == grid.kind


def test_field_grid_header_layout(tmp_path):
    grid = FieldGrid(np.zeros((2, 3)), (0.0, 1.0, 0.0, 1.0), KIND_ABS_TOTAL)
    raw = field_grid_bytes(grid)
    assert raw[:4] == b"MSFG"
    # header: magic + 3 u32 + 4 f64 + u8, then 6 little-endian f64 values
    assert len(raw) == 4 + (4 + 4 + 4 + 32 + 1) + 6 * 8


def test_field_grid_rejects_garbage(tmp_path):
    path = tmp_path / "bad.msfg"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ConfigError):
        read_field_grid(path)


def test_dataset_shard_round_trip(tmp_path):
    spec = preset("nearfar")
    ds = build_dataset(spec, 5, seed=1, resolution=(8, 8))
    path = tmp_path / "shard.msds"
    write_dataset_shard(path, ds)
    k, x0, f0, coords, fields = read_dataset_shard(path)
    assert np.array_equal(k, ds.k)
    assert np.array_equal(x0, ds.x0)
    assert np.array_equal(coords, ds.coords)
    assert np.array_equal(fields, ds.fields)


def test_dataset_shard_byte_stability(tmp_path):
    spec = preset("nearfar")
    a = build_dataset(spec, 3, seed=9, resolution=(8, 8))
    b = build_dataset(spec, 3, seed=9, resolution=(8, 8))
    pa, pb = tmp_path / "a.msds", tmp_path / "b.msds"
    write_dataset_shard(pa, a)
    write_dataset_shard(pb, b)
    assert sha256_file(pa) == sha256_file(pb)


def test_checkpoint_round_trip(tmp_path):
    config = SurrogateConfig(input_shape=(2, 4, 4), n_scatterers=3,
                             encoder_hidden=(6,), latent=4, head_hidden=(5,))
    norm = NormStats(np.array([0.1, 0.2]), np.array([1.5, 2.5]),
                     np.zeros((3, 2)), np.ones((3, 2)))
    model = SurrogateModel(config, norm=norm, stage="stage2").init_params(3)
    path = tmp_path / "model.msmc"
    save_checkpoint(path, model)
    back = load_checkpoint(path)
    assert back.stage == "stage2"
    assert back.config == config
    for pa, pb in zip(model.parameters(), back.parameters()):
        assert np.array_equal(pa, pb)
    assert np.array_equal(back.norm.channel_std, norm.channel_std)


def test_loss_history_csv(tmp_path):
    history = [
        {"epoch": 1, "stage": "stage1", "split": "train", "loss": "coord_mse", "value": 2.5},
        {"epoch": 1, "stage": "stage1", "split": "validation", "loss": "force", "value": 0.125},
    ]
    path = tmp_path / "history.csv"
    write_loss_history_csv(path, history)
    text = path.read_text().splitlines()
    assert text[0] == "epoch,split,loss_name,value"
    assert text[1] == "1,train,coord_mse,2.5"


def test_trial_log_csv(tmp_path):
    from platescatter.hyperopt import Trial

    trials = [Trial(0, {"a": 0.5, "b": 2.0}, 1.25, 0.01)]
    path = tmp_path / "trials.csv"
    write_trial_log_csv(path, trials, ["a", "b"])
    lines = path.read_text().splitlines()
    assert lines[0] == "trial,a,b,objective,wall_time"
    assert lines[1].startswith("0,0.5,2,1.25,")


def test_atomic_write_leaves_no_temp_on_success(tmp_path):
    target = tmp_path / "x.bin"
    atomic_write_bytes(target, b"hello")
    assert target.read_bytes() == b"hello"
    assert [p.name for p in tmp_path.iterdir()] == ["x.bin"]
