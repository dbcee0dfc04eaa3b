"""On-disk formats: field grids, dataset shards, model checkpoints, CSV logs.

All binary payloads are little-endian float64 so files are bit-reproducible
across runs and readable from any language.  Writes go through a temp file
plus rename, so a crashed command never leaves a half-written artifact.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile

import numpy as np

from .errors import ConfigError
from .grids import CHANNEL_KINDS, FieldGrid

FIELD_MAGIC = b"MSFG"
DATASET_MAGIC = b"MSDS"
CHECKPOINT_MAGIC = b"MSMC"
FORMAT_VERSION = 1


def atomic_write_bytes(path, payload: bytes):
    """Write bytes via temp file + rename in the destination directory."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# field grids
# ---------------------------------------------------------------------------

def field_grid_bytes(grid: FieldGrid) -> bytes:
    w, h = grid.resolution
    kind_idx = CHANNEL_KINDS.index(grid.kind)
    header = FIELD_MAGIC + struct.pack(
        "<IIIddddB", FORMAT_VERSION, w, h, *[float(v) for v in grid.extent], kind_idx
    )
    values = np.ascontiguousarray(grid.values, dtype="<f8")
    return header + values.tobytes()


def write_field_grid(path, grid: FieldGrid):
    atomic_write_bytes(path, field_grid_bytes(grid))


def read_field_grid(path) -> FieldGrid:
    with open(path, "rb") as handle:
        raw = handle.read()
    if raw[:4] != FIELD_MAGIC:
        raise ConfigError(f"{path}: not a field grid file")
    version, w, h, x0, x1, y0, y1, kind_idx = struct.unpack_from("<IIIddddB", raw, 4)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported version {version}")
    offset = 4 + struct.calcsize("<IIIddddB")
    values = np.frombuffer(raw, dtype="<f8", count=w * h, offset=offset).reshape(h, w)
    return FieldGrid(values.copy(), (x0, x1, y0, y1), CHANNEL_KINDS[kind_idx])


# ---------------------------------------------------------------------------
# dataset shards
# ---------------------------------------------------------------------------

def dataset_shard_bytes(k, x0, f0, coords, fields) -> bytes:
    """Pack samples: per record [k, x0(2), f0, X(2n), Re psi0(W*H), |psi|(W*H)]."""
    n_samples, n_scatterers = coords.shape[0], coords.shape[1]
    h, w = fields.shape[2], fields.shape[3]
    header = DATASET_MAGIC + struct.pack("<IIIII", FORMAT_VERSION, n_samples, n_scatterers, w, h)
    buf = io.BytesIO()
    buf.write(header)
    for i in range(n_samples):
        record = np.concatenate([
            [k[i]], x0[i], [f0[i]], coords[i].ravel(),
            fields[i, 0].ravel(), fields[i, 1].ravel(),
        ])
        buf.write(np.ascontiguousarray(record, dtype="<f8").tobytes())
    return buf.getvalue()


def write_dataset_shard(path, dataset, indices=None):
    idx = np.arange(len(dataset)) if indices is None else np.asarray(indices)
    payload = dataset_shard_bytes(
        dataset.k[idx], dataset.x0[idx], dataset.f0[idx],
        dataset.coords[idx], dataset.fields[idx],
    )
    atomic_write_bytes(path, payload)


def read_dataset_shard(path):
    """Returns (k, x0, f0, coords, fields) arrays."""
    with open(path, "rb") as handle:
        raw = handle.read()
    if raw[:4] != DATASET_MAGIC:
        raise ConfigError(f"{path}: not a dataset shard")
    version, n_samples, n_scatterers, w, h = struct.unpack_from("<IIIII", raw, 4)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported version {version}")
    offset = 4 + struct.calcsize("<IIIII")
    record_len = 1 + 2 + 1 + 2 * n_scatterers + 2 * w * h
    data = np.frombuffer(raw, dtype="<f8", offset=offset)
    if data.size != n_samples * record_len:
        raise ConfigError(f"{path}: truncated shard")
    data = data.reshape(n_samples, record_len)
    k = data[:, 0].copy()
    x0 = data[:, 1:3].copy()
    f0 = data[:, 3].copy()
    coords = data[:, 4:4 + 2 * n_scatterers].reshape(n_samples, n_scatterers, 2).copy()
    fields = data[:, 4 + 2 * n_scatterers:].reshape(n_samples, 2, h, w).copy()
    return k, x0, f0, coords, fields


# ---------------------------------------------------------------------------
# model checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, model):
    """JSON architecture header followed by one little-endian float64 block."""
    from .inverse import SurrogateModel  # runtime import; formats stays import-light

    assert isinstance(model, SurrogateModel)
    cfg = model.config
    header = {
        "architecture": {
            "input_shape": list(cfg.input_shape),
            "n_scatterers": cfg.n_scatterers,
            "encoder_hidden": list(cfg.encoder_hidden),
            "latent": cfg.latent,
            "head_hidden": list(cfg.head_hidden),
            "activation": cfg.activation,
        },
        "stage": model.stage,
        "norm_stats": None if model.norm is None else model.norm.to_dict(),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    params = model.parameters()
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in params)
    payload = CHECKPOINT_MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(blob)) + blob + body
    atomic_write_bytes(path, payload)


def load_checkpoint(path):
    from .inverse import SurrogateConfig, SurrogateModel
    from .problems import NormStats

    with open(path, "rb") as handle:
        raw = handle.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path}: not a model checkpoint")
    version, blob_len = struct.unpack_from("<IQ", raw, 4)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported version {version}")
    offset = 4 + struct.calcsize("<IQ")
    header = json.loads(raw[offset:offset + blob_len].decode("utf-8"))
    arch = header["architecture"]
    config = SurrogateConfig(
        input_shape=tuple(arch["input_shape"]),
        n_scatterers=int(arch["n_scatterers"]),
        encoder_hidden=tuple(arch["encoder_hidden"]),
        latent=int(arch["latent"]),
        head_hidden=tuple(arch["head_hidden"]),
        activation=arch["activation"],
    )
    norm = None if header["norm_stats"] is None else NormStats.from_dict(header["norm_stats"])
    model = SurrogateModel(config, norm=norm, stage=header["stage"])
    flat = np.frombuffer(raw, dtype="<f8", offset=offset + blob_len)
    cursor = 0
    for p in model.parameters():
        p[:] = flat[cursor:cursor + p.size].reshape(p.shape)
        cursor += p.size
    if cursor != flat.size:
        raise ConfigError(f"{path}: parameter block size mismatch")
    return model


# ---------------------------------------------------------------------------
# CSV logs
# ---------------------------------------------------------------------------

def write_loss_history_csv(path, history):
    """Rows of (epoch, split, loss_name, value)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "split", "loss_name", "value"])
    for row in history:
        writer.writerow([row["epoch"], row["split"], row["loss"], f"{row['value']:.12g}"])
    atomic_write_text(path, buf.getvalue())


def write_trial_log_csv(path, trials, param_names):
    """Rows of (trial, parameters..., objective, wall_time)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", *param_names, "objective", "wall_time"])
    for tr in trials:
        writer.writerow([
            tr.index,
            *[f"{tr.params[name]:.12g}" for name in param_names],
            f"{tr.objective:.12g}",
            f"{tr.wall_time:.6f}",
        ])
    atomic_write_text(path, buf.getvalue())


def write_json(path, payload: dict):
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)
