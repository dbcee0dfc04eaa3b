"""Problem classes, stratified sampling, datasets, and synthetic target fields.

Three scattering configurations are built in:

* ``nearfar``    five scatterers, one per 72-degree sector of a radius-30 m
  disc around a jittered central force; wavenumber in [pi/10, pi/5].
* ``downstream`` a 6x3 scatterer grid (56x66 m footprint around (-65, 0))
  excited from (-125, 0); the 100x100 m window sits 37 m downstream of the
  grid; wavenumber in [pi/16, pi/8].
* ``incident``   a 4x4 grid with 11 m pitch perturbed by +-1 m, hit by the
  near-plane wave of a source at (-1e5, 0); fixed wavenumber pi/10.

Sampling uses Latin hypercube stratification with one permutation stream per
dimension and one jitter stream per sample index, so record i depends only on
(seed, i, n) and parallel generation order cannot change the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .errors import DegenerateChannelError, InvalidGeometryError
from .grids import FieldGrid, KIND_SYNTHETIC, cell_centres
from .plate import PlateSpec, WaveContext
from .scatter import (
    Cluster,
    IncidentForce,
    eval_field_parts,
    eval_field_grid,
    solve_forces,
)

GEOMETRY_SECTORS = "sectors"
GEOMETRY_GRID = "grid"

# seed-stream tags keeping permutation, jitter, and split streams disjoint
_STREAM_PERM = 0
_STREAM_JITTER = 1
_STREAM_SPLIT = 2


@dataclass(frozen=True)
class OscillatorRule:
    """How oscillator constants are derived from the drive frequency.

    Natural frequency sits at ``freq_ratio * omega`` and the dashpot at
    ``2 * damping_ratio * mass * omega_a``: near-resonant tuning scatters
    strongly while keeping the interaction matrix well conditioned.
    """

    mass: float = 1.0
    freq_ratio: float = 1.1
    damping_ratio: float = 0.02

    def constants(self, omega: float):
        omega_a = self.freq_ratio * omega
        stiffness = self.mass * omega_a**2
        damping = 2.0 * self.damping_ratio * self.mass * omega_a
        return self.mass, damping, stiffness


@dataclass(frozen=True)
class ProblemSpec:
    """Geometry, forcing, and sampling rules of one scattering problem class."""

    name: str
    window: tuple                       # observation extent (x_min, x_max, y_min, y_max)
    k_range: tuple                      # (k_lo, k_hi), equal entries fix k
    geometry: str                       # "sectors" | "grid"
    n_scatterers: int
    forcing_center: tuple
    f0: float = 100.0
    forcing_jitter_std: float = 0.0     # per-coordinate normal sigma in metres
    resolution: tuple = (64, 64)        # (W, H)
    sector_radius: float = 0.0
    nominal_positions: Optional[np.ndarray] = None
    perturbation: tuple = (0.0, 0.0)    # half-widths of the per-scatterer box
    oscillators: OscillatorRule = field(default_factory=OscillatorRule)
    plate: PlateSpec = field(default_factory=PlateSpec)

    def __post_init__(self):
        if self.k_range[0] > self.k_range[1] or self.k_range[0] <= 0:
            raise InvalidGeometryError("need 0 < k_lo <= k_hi")
        if self.n_scatterers < 1:
            raise InvalidGeometryError("need at least one scatterer")
        if self.geometry == GEOMETRY_GRID:
            nominal = np.asarray(self.nominal_positions, dtype=float)
            if nominal.shape != (self.n_scatterers, 2):
                raise InvalidGeometryError("nominal grid shape mismatch")
            object.__setattr__(self, "nominal_positions", nominal)
            if min(self.perturbation) < 0:
                raise InvalidGeometryError("perturbation half-widths must be >= 0")
        elif self.geometry == GEOMETRY_SECTORS:
            if self.sector_radius <= 0:
                raise InvalidGeometryError("sector radius must be > 0")
        else:
            raise InvalidGeometryError(f"unknown geometry {self.geometry!r}")

    # --- sampling dimensions -------------------------------------------------
    @property
    def varies_k(self) -> bool:
        return self.k_range[1] > self.k_range[0]

    @property
    def varies_forcing(self) -> bool:
        return self.forcing_jitter_std > 0.0

    @property
    def sample_dims(self) -> int:
        """Unit-cube dimensions: 2 per scatterer, then k, then forcing jitter."""
        return 2 * self.n_scatterers + (1 if self.varies_k else 0) + (2 if self.varies_forcing else 0)

    # --- feasible region ------------------------------------------------------
    def scatterer_boxes(self) -> np.ndarray:
        """Axis-aligned feasibility box per scatterer, shape (n, 2, 2) as [lo, hi]."""
        if self.geometry == GEOMETRY_GRID:
            lo = self.nominal_positions - np.asarray(self.perturbation)
            hi = self.nominal_positions + np.asarray(self.perturbation)
            return np.stack([lo, hi], axis=1)
        boxes = np.empty((self.n_scatterers, 2, 2))
        for s in range(self.n_scatterers):
            th = np.linspace(s, s + 1, 64) * 2.0 * np.pi / self.n_scatterers
            arc = self.sector_radius * np.column_stack([np.cos(th), np.sin(th)])
            pts = np.vstack([arc, [[0.0, 0.0]]])
            boxes[s, 0] = pts.min(axis=0)
            boxes[s, 1] = pts.max(axis=0)
        return boxes

    def scatter_bounds(self) -> tuple:
        """Bounding box of the whole scatterer region."""
        if self.geometry == GEOMETRY_SECTORS:
            r = self.sector_radius
            return (-r, r, -r, r)
        boxes = self.scatterer_boxes()
        return (
            float(boxes[:, 0, 0].min()), float(boxes[:, 1, 0].max()),
            float(boxes[:, 0, 1].min()), float(boxes[:, 1, 1].max()),
        )

    def project(self, positions: np.ndarray) -> np.ndarray:
        """Clamp candidate positions into the per-scatterer feasible region."""
        pos = np.asarray(positions, dtype=float).reshape(self.n_scatterers, 2)
        if self.geometry == GEOMETRY_GRID:
            boxes = self.scatterer_boxes()
            return np.clip(pos, boxes[:, 0], boxes[:, 1])
        out = np.empty_like(pos)
        width = 2.0 * np.pi / self.n_scatterers
        for s in range(self.n_scatterers):
            theta = math.atan2(pos[s, 1], pos[s, 0]) % (2.0 * np.pi)
            rel = (theta - s * width) % (2.0 * np.pi)
            if rel > width:
                # outside the sector: snap to the wrap-aware nearer edge
                rel = width if (rel - width) <= (2.0 * np.pi - rel) else 0.0
            radius = min(np.hypot(pos[s, 0], pos[s, 1]), self.sector_radius)
            ang = s * width + rel
            out[s] = radius * np.array([math.cos(ang), math.sin(ang)])
        return out


def preset(name: str) -> ProblemSpec:
    """Published geometry of the three built-in problem classes."""
    if name == "nearfar":
        return ProblemSpec(
            name="nearfar",
            window=(-60.0, 60.0, -60.0, 60.0),
            k_range=(np.pi / 10, np.pi / 5),
            geometry=GEOMETRY_SECTORS,
            n_scatterers=5,
            sector_radius=30.0,
            forcing_center=(0.0, 0.0),
            forcing_jitter_std=math.sqrt(5.0),
        )
    if name == "downstream":
        # 6 columns spanning 40 m in x1, 3 rows at 25 m pitch in x2, centred
        # at (-65, 0); with +-8 m perturbations the scatterer footprint is the
        # 56x66 m box [-93, -37] x [-33, 33] and the window starts 37 m to its
        # right at x = 0
        cols = -65.0 + np.linspace(-20.0, 20.0, 6)
        rows = np.array([-25.0, 0.0, 25.0])
        nominal = np.array([[c, r] for r in rows for c in cols])
        return ProblemSpec(
            name="downstream",
            window=(0.0, 100.0, -50.0, 50.0),
            k_range=(np.pi / 16, np.pi / 8),
            geometry=GEOMETRY_GRID,
            n_scatterers=18,
            nominal_positions=nominal,
            perturbation=(8.0, 8.0),
            forcing_center=(-125.0, 0.0),
        )
    if name == "incident":
        pitch = 11.0
        line = (np.arange(4) - 1.5) * pitch
        nominal = np.array([[c, r] for r in line for c in line])
        return ProblemSpec(
            name="incident",
            window=(-30.0, 30.0, -30.0, 30.0),
            k_range=(np.pi / 10, np.pi / 10),
            geometry=GEOMETRY_GRID,
            n_scatterers=16,
            nominal_positions=nominal,
            perturbation=(1.0, 1.0),
            forcing_center=(-1e5, 0.0),
        )
    raise InvalidGeometryError(f"unknown problem class {name!r}")


PRESET_NAMES = ("nearfar", "downstream", "incident")


def incident_channel_centers(spec: Optional[ProblemSpec] = None) -> np.ndarray:
    """Centres of the 3x3 cells between the nominal grid lines."""
    spec = spec or preset("incident")
    if spec.geometry != GEOMETRY_GRID:
        raise InvalidGeometryError("channels are defined for grid geometries only")
    xs = np.unique(spec.nominal_positions[:, 0])
    ys = np.unique(spec.nominal_positions[:, 1])
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    return np.array([[x, y] for y in cy for x in cx])


# ---------------------------------------------------------------------------
# quantile map and Latin hypercube sampling
# ---------------------------------------------------------------------------

def positions_from_quantiles(spec: ProblemSpec, u_sc) -> np.ndarray:
    """Scatterer positions from per-scatterer unit quantiles, shape (n, 2).

    Grid classes map the two quantiles to the perturbation box; sector
    classes map them to the angle within the scatterer's sector and an
    area-uniform radius.
    """
    u_sc = np.asarray(u_sc, dtype=float).reshape(spec.n_scatterers, 2)
    if spec.geometry == GEOMETRY_GRID:
        offsets = (2.0 * u_sc - 1.0) * np.asarray(spec.perturbation)
        return spec.nominal_positions + offsets
    n = spec.n_scatterers
    width = 2.0 * np.pi / n
    angles = (np.arange(n) + u_sc[:, 0]) * width
    radii = spec.sector_radius * np.sqrt(u_sc[:, 1])  # uniform in area
    return radii[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])


def cluster_from_quantiles(spec: ProblemSpec, u):
    """Map a unit-cube point to (Cluster, IncidentForce, k).

    Layout of ``u``: two entries per scatterer (grid: x/y perturbation
    quantiles; sectors: angle within sector and area-uniform radius), then the
    wavenumber quantile when k varies, then two forcing-jitter quantiles when
    the force location is randomised.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.shape != (spec.sample_dims,):
        raise ValueError(f"expected {spec.sample_dims} quantiles, got {u.shape}")
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("quantiles must lie in [0, 1]")
    n = spec.n_scatterers
    positions = positions_from_quantiles(spec, u[: 2 * n])
    cursor = 2 * n

    if spec.varies_k:
        k = spec.k_range[0] + u[cursor] * (spec.k_range[1] - spec.k_range[0])
        cursor += 1
    else:
        k = spec.k_range[0]

    x0 = np.asarray(spec.forcing_center, dtype=float)
    if spec.varies_forcing:
        q = np.clip(u[cursor : cursor + 2], 1e-12, 1.0 - 1e-12)
        x0 = x0 + spec.forcing_jitter_std * ndtri(q)

    ctx = WaveContext.from_wavenumber(spec.plate, float(k))
    mass, damping, stiffness = spec.oscillators.constants(ctx.angular_frequency)
    cluster = Cluster(positions, masses=mass, dampings=damping, stiffnesses=stiffness)
    return cluster, IncidentForce(tuple(x0), spec.f0), float(k)


def sample_cluster(spec: ProblemSpec, rng: np.random.Generator):
    """Single random draw (plain uniform quantiles) from the design space."""
    return cluster_from_quantiles(spec, rng.random(spec.sample_dims))


def lhs_quantiles(seed: int, n_samples: int, dims: int) -> np.ndarray:
    """Latin hypercube design on the unit cube, shape (n_samples, dims).

    Stratification uses one permutation per dimension from (seed, dim), and
    the in-bin jitter of row i comes from its own (seed, i) stream, so any
    single row is reproducible without generating the others' jitter.
    """
    if n_samples < 1:
        return np.zeros((0, dims))
    bins = np.empty((n_samples, dims), dtype=float)
    for d in range(dims):
        rng = np.random.default_rng(np.random.SeedSequence((seed, _STREAM_PERM, d)))
        bins[:, d] = rng.permutation(n_samples)
    jitter = np.vstack([sample_jitter(seed, i, dims) for i in range(n_samples)])
    return (bins + jitter) / n_samples


def sample_jitter(seed: int, index: int, dims: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((seed, _STREAM_JITTER, index)))
    return rng.random(dims)


def sample_batch(spec: ProblemSpec, n_samples: int, seed: int):
    """Latin-hypercube-stratified batch of (Cluster, IncidentForce, k) draws."""
    u = lhs_quantiles(seed, n_samples, spec.sample_dims)
    return [cluster_from_quantiles(spec, u[i]) for i in range(n_samples)]


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """In-memory labelled sample collection of one problem class."""

    spec: ProblemSpec
    k: np.ndarray          # (N,)
    x0: np.ndarray         # (N, 2)
    f0: np.ndarray         # (N,)
    coords: np.ndarray     # (N, n, 2) true scatterer positions
    fields: np.ndarray     # (N, 2, H, W): channel 0 Re psi_0, channel 1 |psi|
    seed: int = 0

    def __len__(self):
        return len(self.k)

    def context(self, i: int) -> WaveContext:
        return WaveContext.from_wavenumber(self.spec.plate, float(self.k[i]))

    def incident(self, i: int) -> IncidentForce:
        return IncidentForce(tuple(self.x0[i]), float(self.f0[i]))

    def cluster(self, i: int) -> Cluster:
        ctx = self.context(i)
        mass, damping, stiffness = self.spec.oscillators.constants(ctx.angular_frequency)
        return Cluster(self.coords[i], masses=mass, dampings=damping, stiffnesses=stiffness)


def build_dataset(spec: ProblemSpec, n_samples: int, seed: int, resolution=None) -> Dataset:
    """Forward-solve an LHS batch into raster records."""
    res = tuple(resolution or spec.resolution)
    w, h = int(res[0]), int(res[1])
    draws = sample_batch(spec, n_samples, seed)
    k = np.empty(n_samples)
    x0 = np.empty((n_samples, 2))
    f0 = np.empty(n_samples)
    coords = np.empty((n_samples, spec.n_scatterers, 2))
    fields = np.empty((n_samples, 2, h, w))
    for i, (cluster, force, ki) in enumerate(draws):
        ctx = WaveContext.from_wavenumber(spec.plate, ki)
        incident, amplitude = eval_field_grid(ctx, cluster, force, spec.window, res)
        k[i] = ki
        x0[i] = force.xy
        f0[i] = force.amplitude
        coords[i] = cluster.positions
        fields[i, 0] = incident.values
        fields[i, 1] = amplitude.values
    return Dataset(spec, k, x0, f0, coords, fields, seed=seed)


def train_test_split(n: int, fraction: float = 0.8, seed: int = 0):
    """Deterministic disjoint shuffle split; train gets ceil(fraction * n)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, _STREAM_SPLIT)))
    perm = rng.permutation(n)
    n_train = math.ceil(fraction * n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


# ---------------------------------------------------------------------------
# spec serialization and on-disk datasets
# ---------------------------------------------------------------------------

def spec_to_dict(spec: ProblemSpec) -> dict:
    return {
        "name": spec.name,
        "window": list(spec.window),
        "k_range": list(spec.k_range),
        "geometry": spec.geometry,
        "n_scatterers": spec.n_scatterers,
        "forcing_center": list(spec.forcing_center),
        "f0": spec.f0,
        "forcing_jitter_std": spec.forcing_jitter_std,
        "resolution": list(spec.resolution),
        "sector_radius": spec.sector_radius,
        "nominal_positions": None if spec.nominal_positions is None else spec.nominal_positions.tolist(),
        "perturbation": list(spec.perturbation),
        "oscillators": {
            "mass": spec.oscillators.mass,
            "freq_ratio": spec.oscillators.freq_ratio,
            "damping_ratio": spec.oscillators.damping_ratio,
        },
        "plate": {
            "youngs_modulus": spec.plate.youngs_modulus,
            "poisson": spec.plate.poisson,
            "thickness": spec.plate.thickness,
            "areal_density": spec.plate.areal_density,
        },
    }


def spec_from_dict(d: dict) -> ProblemSpec:
    return ProblemSpec(
        name=d["name"],
        window=tuple(d["window"]),
        k_range=tuple(d["k_range"]),
        geometry=d["geometry"],
        n_scatterers=int(d["n_scatterers"]),
        forcing_center=tuple(d["forcing_center"]),
        f0=float(d["f0"]),
        forcing_jitter_std=float(d["forcing_jitter_std"]),
        resolution=tuple(int(v) for v in d["resolution"]),
        sector_radius=float(d["sector_radius"]),
        nominal_positions=None if d["nominal_positions"] is None else np.asarray(d["nominal_positions"]),
        perturbation=tuple(d["perturbation"]),
        oscillators=OscillatorRule(**d["oscillators"]),
        plate=PlateSpec(**d["plate"]),
    )


def generate_dataset(spec: ProblemSpec, n_samples: int, seed: int, out_dir,
                     resolution=None) -> dict:
    """Forward-solve an LHS batch to disk; returns the dataset manifest dict.

    Writes one binary shard plus ``dataset.json`` describing the problem,
    seed, shards (with content hashes), the train/validation split seed, and
    the z-statistics of the training rows.  Regeneration from the same seed
    is byte-identical.
    """
    import os

    from . import formats

    res = tuple(resolution or spec.resolution)
    dataset = build_dataset(spec, n_samples, seed, res)
    os.makedirs(out_dir, exist_ok=True)
    shards = []
    if n_samples > 0:
        shard_name = "shard-000.msds"
        shard_path = os.path.join(out_dir, shard_name)
        formats.write_dataset_shard(shard_path, dataset)
        shards.append({
            "path": shard_name,
            "n_samples": n_samples,
            "sha256": formats.sha256_file(shard_path),
        })
    manifest = {
        "format": "MSDS",
        "version": 1,
        "problem": spec_to_dict(replace(spec, resolution=res)),
        "seed": seed,
        "split_seed": seed,
        "n_samples": n_samples,
        "n_scatterers": spec.n_scatterers,
        "resolution": list(res),
        "shards": shards,
    }
    if n_samples > 1:
        train_idx, _ = train_test_split(n_samples, seed=seed)
        manifest["norm_stats"] = compute_norm_stats(dataset, train_idx).to_dict()
    formats.write_json(os.path.join(out_dir, "dataset.json"), manifest)
    return manifest


def load_dataset(manifest_path) -> Dataset:
    """Read a dataset written by :func:`generate_dataset` back into memory."""
    import os

    from . import formats

    manifest = formats.read_json(manifest_path)
    spec = spec_from_dict(manifest["problem"])
    base = os.path.dirname(os.fspath(manifest_path))
    parts = [formats.read_dataset_shard(os.path.join(base, s["path"])) for s in manifest["shards"]]
    if not parts:
        h, w = spec.resolution[1], spec.resolution[0]
        return Dataset(spec, np.zeros(0), np.zeros((0, 2)), np.zeros(0),
                       np.zeros((0, spec.n_scatterers, 2)), np.zeros((0, 2, h, w)),
                       seed=manifest["seed"])
    k = np.concatenate([p[0] for p in parts])
    x0 = np.concatenate([p[1] for p in parts])
    f0 = np.concatenate([p[2] for p in parts])
    coords = np.concatenate([p[3] for p in parts])
    fields = np.concatenate([p[4] for p in parts])
    return Dataset(spec, k, x0, f0, coords, fields, seed=manifest["seed"])


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

@dataclass
class NormStats:
    """Channel z-statistics plus the physical<->unit coordinate map."""

    channel_mean: np.ndarray       # (2,)
    channel_std: np.ndarray        # (2,)
    coord_center: np.ndarray       # (n, 2)
    coord_halfrange: np.ndarray    # (n, 2)

    def apply_fields(self, fields):
        return (fields - self.channel_mean[:, None, None]) / self.channel_std[:, None, None]

    def unapply_fields(self, fields):
        return fields * self.channel_std[:, None, None] + self.channel_mean[:, None, None]

    def apply_coords(self, coords):
        return (coords - self.coord_center) / self.coord_halfrange

    def unapply_coords(self, unit):
        return unit * self.coord_halfrange + self.coord_center

    def to_dict(self):
        return {
            "channel_mean": self.channel_mean.tolist(),
            "channel_std": self.channel_std.tolist(),
            "coord_center": self.coord_center.tolist(),
            "coord_halfrange": self.coord_halfrange.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["channel_mean"], dtype=float),
            np.asarray(d["channel_std"], dtype=float),
            np.asarray(d["coord_center"], dtype=float),
            np.asarray(d["coord_halfrange"], dtype=float),
        )


def compute_norm_stats(dataset: Dataset, indices=None) -> NormStats:
    """Channel statistics over the training rows; coordinate map from the spec boxes."""
    rows = dataset.fields if indices is None else dataset.fields[np.asarray(indices)]
    if rows.size == 0:
        raise DegenerateChannelError("cannot normalise an empty dataset")
    mean = rows.mean(axis=(0, 2, 3))
    std = rows.std(axis=(0, 2, 3))
    if np.any(std < 1e-12):
        raise DegenerateChannelError("zero-variance channel")
    boxes = dataset.spec.scatterer_boxes()
    center = 0.5 * (boxes[:, 0] + boxes[:, 1])
    halfrange = np.maximum(0.5 * (boxes[:, 1] - boxes[:, 0]), 1e-9)
    return NormStats(mean, std, center, halfrange)


# ---------------------------------------------------------------------------
# synthetic target fields
# ---------------------------------------------------------------------------

def synth_downstream(phi: float, x_sc=(-60.0, 0.0), order: int = 40,
                     window=None, resolution=None) -> FieldGrid:
    """Angular beam target: truncated Fourier series of a directional impulse.

    |psi(x)| = |sum_{h=0..order} exp(i h (arg(x - x_sc) - phi))|; along the
    beam direction every summand is 1 and the value is order + 1.
    """
    if order < 0:
        raise ValueError("harmonic order must be >= 0")
    spec = preset("downstream")
    window = tuple(window or spec.window)
    res = tuple(resolution or spec.resolution)
    pts = cell_centres(window, res)
    theta = np.arctan2(pts[:, 1] - x_sc[1], pts[:, 0] - x_sc[0]) - phi
    total = np.zeros(len(pts), dtype=complex)
    for h in range(order + 1):
        total += np.exp(1j * h * theta)
    values = np.abs(total).reshape(res[1], res[0])
    return FieldGrid(values, window, KIND_SYNTHETIC)


def synth_incident(channels, radius: float = 5.0, exponent: float = 4.0,
                   window=None, resolution=None) -> FieldGrid:
    """Localisation target: smooth bumps of width ``radius`` at channel centres.

    Each channel contributes 1 - 1/(1 + (R/d)^M), evaluated in the
    pole-free form R^M / (d^M + R^M), so the channel centre is exactly 1.
    """
    centers = np.atleast_2d(np.asarray(channels, dtype=float))
    if not (1 <= len(centers) <= 9):
        raise ValueError("between 1 and 9 channels")
    if radius <= 0 or exponent <= 0:
        raise ValueError("radius and exponent must be > 0")
    spec = preset("incident")
    window = tuple(window or spec.window)
    res = tuple(resolution or spec.resolution)
    pts = cell_centres(window, res)
    values = np.zeros(len(pts))
    rm = radius**exponent
    for cx, cy in centers:
        d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
        values += rm / (d**exponent + rm)
    return FieldGrid(values.reshape(res[1], res[0]), window, KIND_SYNTHETIC)


def synthetic_batch(spec: ProblemSpec, n: int, seed: int):
    """Random synthetic targets for transfer learning, one per sample.

    Downstream targets draw a beam angle in [-pi/8, pi/8] and a wavenumber
    from the class range; incident targets pick 1 to 9 localisation channels
    at the fixed class wavenumber.  Returns a list of (ctx, force, FieldGrid).
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 4)))
    out = []
    for _ in range(n):
        if spec.varies_k:
            k = rng.uniform(*spec.k_range)
        else:
            k = spec.k_range[0]
        ctx = WaveContext.from_wavenumber(spec.plate, float(k))
        force = IncidentForce(tuple(spec.forcing_center), spec.f0)
        if spec.name == "incident":
            centers = incident_channel_centers(spec)
            count = int(rng.integers(1, 10))
            chosen = centers[rng.choice(len(centers), size=count, replace=False)]
            grid = synth_incident(chosen, window=spec.window, resolution=spec.resolution)
        else:
            phi = rng.uniform(-np.pi / 8, np.pi / 8)
            grid = synth_downstream(phi, window=spec.window, resolution=spec.resolution)
        out.append((ctx, force, grid))
    return out


# ---------------------------------------------------------------------------
# radial diagnostics
# ---------------------------------------------------------------------------

def eval_on_circle(ctx, cluster, force, radius: float, n_angles: int = 360, center=(0.0, 0.0)):
    """Scattered and total amplitude on a circle around ``center``.

    Returns (angles, |psi_s|, |psi|) at uniformly spaced angles.
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    angles = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    pts = np.asarray(center, dtype=float) + radius * np.column_stack([np.cos(angles), np.sin(angles)])
    solution = solve_forces(ctx, cluster, force)
    psi_0, psi_s = eval_field_parts(ctx, cluster, force, solution, pts)
    return angles, np.abs(psi_s), np.abs(psi_0 + psi_s)
