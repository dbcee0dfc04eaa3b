"""Gaussian-process Bayesian search over training hyperparameters.

The objective (a validation loss after a short training run, or any injected
callable) is modelled by a zero-mean GP with a Matern 5/2 kernel on the unit
cube.  Minimization proceeds by maximizing expected improvement over a Latin
hypercube candidate set with a local coordinate refinement.  Three staged
searches mirror the model development order: autoencoder layers first, then
the coordinate head, then the physics-stage weights and learning rates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr

from .errors import PlateScatterError
from .losses import SparsePointSampler, loss_force, loss_mse_coords, loss_sparse
from .problems import lhs_quantiles

SQRT5 = math.sqrt(5.0)


def matern52(r, length_scale: float, signal_variance: float = 1.0):
    """Matern 5/2 covariance as a function of distance r >= 0."""
    if length_scale <= 0:
        raise ValueError("length scale must be > 0")
    if signal_variance < 0:
        raise ValueError("signal variance must be >= 0")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be >= 0")
    s = SQRT5 * r / length_scale
    out = signal_variance * (1.0 + s + s * s / 3.0) * np.exp(-s)
    return out if out.ndim else float(out)


def _cross_kernel(xa, xb, length_scale, signal_variance):
    d = np.linalg.norm(xa[:, None, :] - xb[None, :, :], axis=-1)
    return matern52(d, length_scale, signal_variance)


@dataclass
class GpState:
    """Noise-free GP regression state over unit-cube inputs."""

    x: np.ndarray                 # (m, d)
    y: np.ndarray                 # (m,)
    length_scale: float = 0.3
    signal_variance: float = 1.0
    jitter: float = 1e-8
    _chol: tuple = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if len(self.x) != len(self.y) or len(self.y) == 0:
            raise ValueError("need matching, nonempty observations")
        self._factorize()

    def _factorize(self):
        k = _cross_kernel(self.x, self.x, self.length_scale, self.signal_variance)
        jitter = self.jitter * max(self.signal_variance, 1.0)
        for _ in range(6):
            try:
                self._chol = cho_factor(k + jitter * np.eye(len(self.x)), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter *= 10.0
        else:
            raise PlateScatterError("kernel matrix not positive definite after jitter escalation")
        self._alpha = cho_solve(self._chol, self.y)

    def log_marginal_likelihood(self) -> float:
        half_logdet = float(np.sum(np.log(np.diag(self._chol[0]))))
        return float(-0.5 * self.y @ self._alpha - half_logdet - 0.5 * len(self.y) * math.log(2 * math.pi))


def gp_fit(x, y, jitter: float = 1e-8) -> GpState:
    """Fit kernel hyperparameters: grid-searched length scale, variance from data."""
    y = np.asarray(y, dtype=float).ravel()
    signal = float(np.var(y)) if len(y) > 1 and np.var(y) > 0 else 1.0
    best = None
    for ls in np.geomspace(0.05, 1.0, 16):
        state = GpState(x, y, length_scale=float(ls), signal_variance=signal, jitter=jitter)
        lml = state.log_marginal_likelihood()
        if best is None or lml > best[0]:
            best = (lml, state)
    return best[1]


def gp_posterior(state: GpState, query):
    """Posterior (mean, variance) at query points; prior mean 0, variance sigma^2."""
    q = np.atleast_2d(np.asarray(query, dtype=float))
    k_star = _cross_kernel(q, state.x, state.length_scale, state.signal_variance)
    mean = k_star @ state._alpha
    v = cho_solve(state._chol, k_star.T)
    var = matern52(0.0, state.length_scale, state.signal_variance) - np.einsum("qm,mq->q", k_star, v)
    var = np.maximum(var, 0.0)
    if np.ndim(query) == 1:
        return float(mean[0]), float(var[0])
    return mean, var


def expected_improvement(state: GpState, query, best: float):
    """EI for minimization: E[max(best - Y, 0)] under the posterior."""
    mean, var = gp_posterior(state, np.atleast_2d(np.asarray(query, dtype=float)))
    sigma = np.sqrt(var)
    gap = best - mean
    out = np.where(sigma > 0, 0.0, np.maximum(gap, 0.0))
    mask = sigma > 0
    if np.any(mask):
        u = gap[mask] / sigma[mask]
        pdf = np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
        out = out.astype(float)
        out[mask] = gap[mask] * ndtr(u) + sigma[mask] * pdf
    out = np.maximum(out, 0.0)
    if np.ndim(query) == 1:
        return float(out[0])
    return out


def propose_next(state: GpState, dims: int, rng: np.random.Generator,
                 n_candidates: int = 1024, refine_steps: int = 24):
    """Unit-cube point maximizing EI over an LHS sweep plus coordinate descent."""
    best_y = float(np.min(state.y))
    seed = int(rng.integers(0, 2**31 - 1))
    candidates = lhs_quantiles(seed, n_candidates, dims)
    ei = expected_improvement(state, candidates, best_y)
    x = candidates[int(np.argmax(ei))].copy()
    best_ei = float(np.max(ei))
    step = 0.1
    for _ in range(refine_steps):
        improved = False
        for d in range(dims):
            for sign in (+1.0, -1.0):
                trial = x.copy()
                trial[d] = min(1.0, max(0.0, trial[d] + sign * step))
                val = expected_improvement(state, trial, best_y)
                if val > best_ei:
                    best_ei, x, improved = val, trial, True
        if not improved:
            step *= 0.5
            if step < 1e-3:
                break
    return x


# ---------------------------------------------------------------------------
# search space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperParam:
    name: str
    lo: float
    hi: float
    scale: str = "linear"       # "linear" | "log"
    integer: bool = False

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"{self.name}: bounds must satisfy lo < hi")
        if self.scale == "log" and self.lo <= 0:
            raise ValueError(f"{self.name}: log scale needs positive bounds")


@dataclass(frozen=True)
class HyperSpace:
    params: tuple

    @property
    def dims(self) -> int:
        return len(self.params)

    def from_unit(self, u) -> dict:
        u = np.asarray(u, dtype=float).ravel()
        out = {}
        for p, ui in zip(self.params, u):
            if p.scale == "log":
                val = p.lo * (p.hi / p.lo) ** ui
            else:
                val = p.lo + ui * (p.hi - p.lo)
            out[p.name] = int(round(val)) if p.integer else float(val)
        return out

    def to_unit(self, values: dict) -> np.ndarray:
        u = np.empty(self.dims)
        for i, p in enumerate(self.params):
            v = values[p.name]
            if p.scale == "log":
                u[i] = math.log(v / p.lo) / math.log(p.hi / p.lo)
            else:
                u[i] = (v - p.lo) / (p.hi - p.lo)
        return np.clip(u, 0.0, 1.0)


def joint_space() -> HyperSpace:
    """Physics-stage search box: loss weights, stage learning rates, batch size."""
    return HyperSpace((
        HyperParam("coord_weight", 1e-4, 1.0, "log"),
        HyperParam("force_weight", 1e-4, 1.0, "log"),
        HyperParam("sparse_weight", 1e-4, 1.0, "log"),
        HyperParam("lr_stage1", 1e-5, 1e-2, "log"),
        HyperParam("lr_stage2", 1e-5, 1e-2, "log"),
        HyperParam("batch_size", 15, 100, "linear", integer=True),
    ))


def cae_space() -> HyperSpace:
    """Dense-autoencoder analogue of the convolutional layer search."""
    return HyperSpace((
        HyperParam("encoder_first", 256, 2048, "log", integer=True),
        HyperParam("encoder_last", 64, 512, "log", integer=True),
    ))


def mlp_space() -> HyperSpace:
    return HyperSpace((
        HyperParam("head_first", 124, 256, "linear", integer=True),
        HyperParam("head_last", 12, 124, "linear", integer=True),
        HyperParam("latent", 12, 256, "linear", integer=True),
    ))


STAGE_SPACES = {"cae": cae_space, "mlp": mlp_space, "joint": joint_space}


# ---------------------------------------------------------------------------
# objective weight normalization
# ---------------------------------------------------------------------------

def normalize_loss_weights(ctx, force, cluster, grid, seed: int = 0,
                           n_directions: int = 32, n_sparse: int = 225):
    """Reciprocal-mean weights that equalize the three prediction losses.

    Each loss is evaluated at the true cluster displaced by 1 m per scatterer
    in random directions; weights are 1/mean so every weighted contribution
    is about 1 at that perturbation scale.
    Returns (coord_weight, force_weight, sparse_weight).
    """
    if len(cluster) == 0:
        raise ValueError("need a nonempty reference cluster")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 8)))
    sampler = SparsePointSampler(min(n_sparse, grid.values.size), seed=seed + 3)
    pts, idx = sampler.sample(grid)
    target_vals = grid.values.ravel()[idx]
    sums = np.zeros(3)
    for _ in range(n_directions):
        angles = rng.uniform(0, 2 * np.pi, size=len(cluster))
        offset = np.column_stack([np.cos(angles), np.sin(angles)])
        displaced = cluster.with_positions(cluster.positions + offset)
        sums[0] += loss_mse_coords(cluster.positions[None], displaced.positions[None])[0]
        sums[1] += loss_force(ctx, force, cluster, displaced)[0]
        sums[2] += loss_sparse(ctx, force, pts, target_vals, displaced)[0]
    means = sums / n_directions
    if np.any(means <= 0):
        raise PlateScatterError("degenerate loss magnitude during weight normalization")
    return tuple(1.0 / means)


# ---------------------------------------------------------------------------
# staged search driver
# ---------------------------------------------------------------------------

@dataclass
class Trial:
    index: int
    params: dict
    objective: float
    wall_time: float


def run_stage(stage: str, budget: int = 50, seed: int = 0,
              objective: Optional[Callable[[dict], float]] = None,
              space: Optional[HyperSpace] = None,
              n_initial: int = 8):
    """Bayesian search of one hyperparameter stage.

    ``objective`` maps a parameter dict to a scalar to minimize; failures
    inside it are recorded as +inf.  When omitted, the caller is expected to
    wire in a training objective (see the command-line driver).  Returns
    (best_params, trials).
    """
    if stage not in STAGE_SPACES:
        raise ValueError(f"unknown stage {stage!r}")
    if objective is None:
        raise ValueError("an objective callable is required")
    space = space or STAGE_SPACES[stage]()
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 9)))

    trials: list[Trial] = []
    xs, ys = [], []
    init = lhs_quantiles(seed, min(n_initial, budget), space.dims)
    for t in range(budget):
        if t < len(init):
            u = init[t]
        else:
            finite = np.isfinite(ys)
            if finite.sum() >= 2:
                y_arr = np.asarray(ys)[finite]
                x_arr = np.asarray(xs)[finite]
                mu, sd = float(np.mean(y_arr)), float(np.std(y_arr))
                sd = sd if sd > 0 else 1.0
                state = gp_fit(x_arr, (y_arr - mu) / sd)
                u = propose_next(state, space.dims, rng)
            else:
                u = rng.random(space.dims)
        params = space.from_unit(u)
        t0 = time.perf_counter()
        try:
            value = float(objective(params))
            if not math.isfinite(value):
                value = math.inf
        except PlateScatterError:
            value = math.inf
        wall = time.perf_counter() - t0
        trials.append(Trial(t, params, value, wall))
        xs.append(u)
        ys.append(value)
    best = min(trials, key=lambda tr: tr.objective)
    return best.params, trials
