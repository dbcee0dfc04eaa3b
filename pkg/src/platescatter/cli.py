"""Command-line entry point.

Every subcommand takes ``--seed`` and ``--out``, writes its artifacts
atomically under the output directory, and finishes with a ``manifest.json``
recording the effective argument vector, package version, and content hashes
of all outputs.  ``replay`` re-executes a manifest into a fresh directory and
reproduces those outputs byte for byte.

Exit codes: 0 success, 1 failed checks or unexpected errors, 2 configuration
errors, 3 solver errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from importlib import resources

import numpy as np

from . import __version__
from . import formats, hyperopt as hyper
from .errors import (
    AllStartsFailedError,
    ConfigError,
    InvalidGeometryError,
    OutOfDomainError,
    PlateScatterError,
    ResonantSingularError,
    SingularMatrixError,
)
from .fdiff import central_difference, central_difference_map, relative_error
from .grids import FieldGrid, KIND_ABS_TOTAL, KIND_RE_INCIDENT, KIND_RE_SCATTERED
from .inverse import (
    InversionConfig,
    SurrogateConfig,
    SurrogateModel,
    invert_direct,
    surrogate_forward,
    train,
    train_config_preset,
)
from .losses import LossWeights, loss_force, loss_sparse
from .plate import PlateSpec, WaveContext, fit_greens_splines
from .problems import (
    PRESET_NAMES,
    OscillatorRule,
    eval_on_circle,
    generate_dataset,
    incident_channel_centers,
    load_dataset,
    preset,
    sample_cluster,
    synth_downstream,
    synth_incident,
)
from .scatter import (
    Cluster,
    IncidentForce,
    energy_position_gradient,
    eval_field,
    eval_field_parts,
    field_position_jacobian,
    interaction_energy,
    self_consistency_error,
    solve_forces,
)

GRADCHECK_TOLERANCE = 1e-4


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            cfg = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    import jsonschema

    schema = json.loads(
        resources.files("platescatter").joinpath("schemas/runconfig.schema.json").read_text()
    )
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    return cfg


def _build_spec(args, cfg):
    name = cfg.get("preset", getattr(args, "preset", None))
    if name is None:
        raise ConfigError("a problem preset is required (flag or config)")
    spec = preset(name)
    updates = {}
    if getattr(args, "resolution", None):
        updates["resolution"] = _parse_resolution(args.resolution)
    elif "resolution" in cfg:
        updates["resolution"] = tuple(cfg["resolution"])
    if "f0" in cfg:
        updates["f0"] = float(cfg["f0"])
    if "k" in cfg:
        k = float(cfg["k"])
        updates["k_range"] = (k, k)
    if "material" in cfg:
        updates["plate"] = PlateSpec(**{**_plate_dict(spec.plate), **cfg["material"]})
    if "oscillator" in cfg:
        base = spec.oscillators
        updates["oscillators"] = OscillatorRule(**{
            "mass": base.mass, "freq_ratio": base.freq_ratio,
            "damping_ratio": base.damping_ratio, **cfg["oscillator"],
        })
    return replace(spec, **updates) if updates else spec


def _plate_dict(plate: PlateSpec):
    return {
        "youngs_modulus": plate.youngs_modulus,
        "poisson": plate.poisson,
        "thickness": plate.thickness,
        "areal_density": plate.areal_density,
    }


def _parse_resolution(text) -> tuple:
    try:
        w, h = (int(v) for v in str(text).lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"resolution must look like 64x64, got {text!r}") from exc
    if w < 2 or h < 2:
        raise ConfigError("resolution must be at least 2x2")
    return (w, h)


def _instance_from_config(spec, cfg, seed):
    """One (cluster, force, ctx) draw, honouring an inline cluster/k override."""
    if "cluster" in cfg:
        positions = np.asarray(cfg["cluster"]["positions"], dtype=float)
        k = float(cfg.get("k", 0.5 * (spec.k_range[0] + spec.k_range[1])))
        ctx = WaveContext.from_wavenumber(spec.plate, k)
        mass, damping, stiffness = spec.oscillators.constants(ctx.angular_frequency)
        cluster = Cluster(positions, masses=mass, dampings=damping, stiffnesses=stiffness)
        force = IncidentForce(tuple(spec.forcing_center), spec.f0)
        return cluster, force, ctx
    rng = np.random.default_rng(np.random.SeedSequence((seed, 10)))
    cluster, force, k = sample_cluster(spec, rng)
    return cluster, force, WaveContext.from_wavenumber(spec.plate, k)


# ---------------------------------------------------------------------------
# command bodies: each returns (relative output names, manifest extras, exit code)
# ---------------------------------------------------------------------------

def _cmd_solve(args, out_dir):
    cfg = _load_config(args.config) if args.config else {}
    spec = _build_spec(args, cfg)
    cluster, force, ctx = _instance_from_config(spec, cfg, args.seed)
    splines = None
    if args.spline:
        splines = fit_greens_splines(ctx, spec.window, spec.scatter_bounds(), force.xy)

    solution = solve_forces(ctx, cluster, force, splines)
    res = spec.resolution
    pts = FieldGrid(np.zeros((res[1], res[0])), spec.window).points()
    psi0, psi_s = eval_field_parts(ctx, cluster, force, solution, pts, splines)
    shape = (res[1], res[0])
    grids = {
        "re_psi0.msfg": FieldGrid(psi0.real.reshape(shape), spec.window, KIND_RE_INCIDENT),
        "re_psi_s.msfg": FieldGrid(psi_s.real.reshape(shape), spec.window, KIND_RE_SCATTERED),
        "abs_psi.msfg": FieldGrid(np.abs(psi0 + psi_s).reshape(shape), spec.window, KIND_ABS_TOTAL),
    }
    for name, grid in grids.items():
        formats.write_field_grid(os.path.join(out_dir, name), grid)
    info = {
        "problem": spec.name,
        "k": ctx.wavenumber,
        "x0": list(force.xy),
        "f0": force.amplitude,
        "extent": list(spec.window),
        "resolution": list(res),
        "positions": cluster.positions.tolist(),
    }
    formats.write_json(os.path.join(out_dir, "field_info.json"), info)
    extra = {
        "residual": solution.residual,
        "self_consistency": self_consistency_error(solution),
        "spline_route": bool(args.spline),
    }
    return [*grids.keys(), "field_info.json"], extra, 0


def _cmd_dataset(args, out_dir):
    cfg = _load_config(args.config) if args.config else {}
    spec = _build_spec(args, cfg)
    manifest = generate_dataset(spec, args.n, args.seed, out_dir)
    outputs = [s["path"] for s in manifest["shards"]] + ["dataset.json"]
    return outputs, {"n_samples": args.n}, 0


def _cmd_synth(args, out_dir):
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 11)))
    if args.type == "downstream":
        spec = preset("downstream")
        phi = args.angle if args.angle is not None else float(rng.uniform(-np.pi / 8, np.pi / 8))
        res = _parse_resolution(args.resolution) if args.resolution else spec.resolution
        grid = synth_downstream(phi, window=spec.window, resolution=res)
        k = float(rng.uniform(*spec.k_range))
        info = {"type": "downstream", "angle": phi, "order": 40}
    else:
        spec = preset("incident")
        centers = incident_channel_centers(spec)
        count = args.channels if args.channels is not None else int(rng.integers(1, 10))
        if not 1 <= count <= len(centers):
            raise ConfigError(f"channel count must lie in [1, {len(centers)}]")
        chosen = centers[rng.choice(len(centers), size=count, replace=False)]
        res = _parse_resolution(args.resolution) if args.resolution else spec.resolution
        grid = synth_incident(chosen, window=spec.window, resolution=res)
        k = spec.k_range[0]
        info = {"type": "incident", "channels": chosen.tolist(), "radius": 5.0, "exponent": 4.0}
    formats.write_field_grid(os.path.join(out_dir, "synth_abs.msfg"), grid)
    info.update({
        "problem": spec.name,
        "k": k,
        "x0": list(spec.forcing_center),
        "f0": spec.f0,
        "extent": list(spec.window),
        "resolution": list(grid.resolution),
    })
    formats.write_json(os.path.join(out_dir, "field_info.json"), info)
    return ["synth_abs.msfg", "field_info.json"], {"type": args.type}, 0


def _surrogate_config_from(cfg, spec, resolution):
    sur = cfg.get("surrogate", {})
    return SurrogateConfig(
        input_shape=(2, resolution[1], resolution[0]),
        n_scatterers=spec.n_scatterers,
        encoder_hidden=tuple(sur.get("encoder_hidden", (1024, 256))),
        latent=int(sur.get("latent", 64)),
        head_hidden=tuple(sur.get("head_hidden", (128, 64))),
        activation=sur.get("activation", "elu"),
    )


def _train_config_from(cfg, name, args):
    tc = train_config_preset(name) if name in PRESET_NAMES else train_config_preset("nearfar")
    overrides = dict(cfg.get("train", {}))
    if "weights" in overrides:
        tc = replace(tc, weights=LossWeights(**{**dict(zip(
            ("decoder_mse", "coord_mse", "force", "sparse"), tc.weights.as_tuple()
        )), **overrides.pop("weights")}))
    if overrides:
        tc = replace(tc, **overrides)
    updates = {"seed": args.seed}
    if getattr(args, "epochs1", None) is not None:
        updates["epochs_stage1"] = args.epochs1
    if getattr(args, "epochs2", None) is not None:
        updates["epochs_stage2"] = args.epochs2
    return replace(tc, **updates)


def _cmd_train(args, out_dir):
    cfg = _load_config(args.config) if args.config else {}
    manifest_path = args.dataset
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, "dataset.json")
    dataset = load_dataset(manifest_path)
    spec = dataset.spec
    res = spec.resolution
    tc = _train_config_from(cfg, spec.name, args)
    model = SurrogateModel(_surrogate_config_from(cfg, spec, res)).init_params(tc.seed)
    history = train(model, dataset, tc)
    formats.save_checkpoint(os.path.join(out_dir, "model.msmc"), model)
    formats.write_loss_history_csv(os.path.join(out_dir, "loss_history.csv"), history)
    final = {row["loss"]: row["value"] for row in history
             if row["split"] == "validation" and row["epoch"] == history[-1]["epoch"]}
    return ["model.msmc", "loss_history.csv"], {"final_validation": final}, 0


def _read_target(target_dir):
    try:
        info = formats.read_json(os.path.join(target_dir, "field_info.json"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{target_dir}: not a solve/synth output ({exc})") from exc
    for name in ("abs_psi.msfg", "synth_abs.msfg"):
        path = os.path.join(target_dir, name)
        if os.path.exists(path):
            return formats.read_field_grid(path), info
    raise ConfigError(f"{target_dir}: no amplitude raster found")


def _cmd_invert(args, out_dir):
    cfg = _load_config(args.config) if args.config else {}
    target, info = _read_target(args.target)
    spec = _build_spec(args, {**cfg, "preset": cfg.get("preset", info.get("problem"))})
    ctx = WaveContext.from_wavenumber(spec.plate, float(info["k"]))
    force = IncidentForce(tuple(info["x0"]), float(info["f0"]))

    if args.mode == "direct":
        inv_cfg = InversionConfig(
            n_starts=args.starts, iterations=args.iterations, seed=args.seed, lr=args.lr,
        )
        result = invert_direct(ctx, force, target, spec, inv_cfg)
        positions = result.cluster.positions
        extra = {
            "mode": "direct",
            "objective": result.objective,
            "final_rel_field_error": result.rel_field_error,
            "best_start": result.best_start,
        }
        cluster = result.cluster
    else:
        if not args.model:
            raise ConfigError("surrogate mode needs --model")
        model = formats.load_checkpoint(args.model)
        c, h, w = model.config.input_shape
        if (w, h) != target.resolution:
            raise ConfigError("target resolution does not match the model input")
        empty = Cluster.empty()
        psi0, _ = eval_field_parts(ctx, empty, force, solve_forces(ctx, empty, force),
                                   target.points())
        stack = np.stack([psi0.real.reshape(h, w), target.values])
        _, coords = surrogate_forward(model, model.norm.apply_fields(stack)[None])
        positions = spec.project(coords[0])
        mass, damping, stiffness = spec.oscillators.constants(ctx.angular_frequency)
        cluster = Cluster(positions, masses=mass, dampings=damping, stiffnesses=stiffness)
        from .scatter import eval_field_grid

        _, amplitude = eval_field_grid(ctx, cluster, force, target.extent, target.resolution)
        rel = float(np.linalg.norm(amplitude.values - target.values)
                    / np.linalg.norm(target.values))
        extra = {"mode": "surrogate", "final_rel_field_error": rel}

    formats.write_json(os.path.join(out_dir, "predicted_cluster.json"),
                       {"positions": positions.tolist(), "k": ctx.wavenumber,
                        "x0": list(force.xy), "f0": force.amplitude})
    solution = solve_forces(ctx, cluster, force)
    pts = target.points()
    psi0, psi_s = eval_field_parts(ctx, cluster, force, solution, pts)
    recon = FieldGrid(np.abs(psi0 + psi_s).reshape(target.values.shape),
                      target.extent, KIND_ABS_TOTAL)
    formats.write_field_grid(os.path.join(out_dir, "abs_psi_recon.msfg"), recon)
    return ["predicted_cluster.json", "abs_psi_recon.msfg"], extra, 0


def _cmd_hyperopt(args, out_dir):
    spec = replace(preset(args.preset), resolution=_parse_resolution(args.resolution))
    from .problems import build_dataset

    dataset = build_dataset(spec, args.samples, args.seed)
    space = hyper.STAGE_SPACES[args.stage]()

    scale = {}
    if args.stage == "joint":
        ctx = dataset.context(0)
        force = dataset.incident(0)
        cluster = dataset.cluster(0)
        grid = FieldGrid(dataset.fields[0, 1], tuple(spec.window))
        scale = dict(zip(("coord", "force", "sparse"),
                         hyper.normalize_loss_weights(ctx, force, cluster, grid, seed=args.seed)))

    def objective(params):
        tc = train_config_preset(spec.name)
        sur = SurrogateConfig(
            input_shape=(2, spec.resolution[1], spec.resolution[0]),
            n_scatterers=spec.n_scatterers,
            encoder_hidden=(int(params.get("encoder_first", 128)),),
            latent=int(params.get("latent", 16)),
            head_hidden=(int(params.get("head_first", 32)), int(params.get("head_last", 16))),
        )
        if args.stage == "cae":
            weights = LossWeights(1.0, 0.0, 0.0, 0.0)
            sur = replace(sur, encoder_hidden=(int(params["encoder_first"]),
                                               int(params["encoder_last"])))
            tc = replace(tc, weights=weights, epochs_stage1=args.epochs1, epochs_stage2=0,
                         seed=args.seed)
        elif args.stage == "mlp":
            weights = LossWeights(1.0, 1.0, 0.0, 0.0)
            tc = replace(tc, weights=weights, epochs_stage1=args.epochs1, epochs_stage2=0,
                         seed=args.seed)
        else:
            weights = LossWeights(1.0, float(params["coord_weight"]),
                                  float(params["force_weight"]), float(params["sparse_weight"]))
            tc = replace(tc, weights=weights, epochs_stage1=args.epochs1,
                         epochs_stage2=args.epochs2, batch_size=int(params["batch_size"]),
                         lr_stage1=float(params["lr_stage1"]),
                         lr_stage2=float(params["lr_stage2"]), seed=args.seed,
                         n_sparse=64)
        model = SurrogateModel(sur).init_params(tc.seed)
        history = train(model, dataset, tc)
        val = {("%s@%d" % (r["loss"], r["epoch"])): r["value"] for r in history
               if r["split"] == "validation"}
        last_stage1 = tc.epochs_stage1
        last = history[-1]["epoch"]
        if args.stage == "cae":
            return val[f"decoder_mse@{last}"]
        if args.stage == "mlp":
            return val[f"coord_mse@{last}"]
        return (scale["coord"] * val[f"coord_mse@{last_stage1}"]
                + scale["force"] * val[f"force@{last_stage1}"]
                + scale["sparse"] * val[f"sparse@{last}"])

    best, trials = hyper.run_stage(args.stage, budget=args.trials, seed=args.seed,
                                   objective=objective, space=space)
    names = [p.name for p in space.params]
    formats.write_trial_log_csv(os.path.join(out_dir, "trials.csv"), trials, names)
    formats.write_json(os.path.join(out_dir, "best.json"),
                       {"stage": args.stage, "params": best,
                        "objective": min(t.objective for t in trials)})
    return ["trials.csv", "best.json"], {"stage": args.stage, "trials": args.trials}, 0


def _gradcheck_rows(seed):
    rows = []
    for name in PRESET_NAMES:
        spec = preset(name)
        rng = np.random.default_rng(np.random.SeedSequence((seed, 12)))
        cluster, force, k = sample_cluster(spec, rng)
        ctx = WaveContext.from_wavenumber(spec.plate, k)
        truth, _, _ = sample_cluster(spec, rng)

        pts = FieldGrid(np.zeros((spec.resolution[1], spec.resolution[0])), spec.window).points()
        probe = pts[rng.choice(len(pts), size=24, replace=False)]
        sol = solve_forces(ctx, truth, force)
        target_abs = np.abs(eval_field(ctx, truth, force, sol, probe))

        def with_positions(positions):
            return cluster.with_positions(positions.reshape(-1, 2))

        def field_at(positions):
            moved = with_positions(positions)
            return eval_field(ctx, moved, force, solve_forces(ctx, moved, force), probe)

        jac = field_position_jacobian(ctx, cluster, force, probe)
        fd_jac = central_difference_map(field_at, cluster.positions)
        rows.append((name, "field_jacobian", relative_error(jac, fd_jac)))

        de = energy_position_gradient(ctx, cluster, force)
        fd_de = central_difference(
            lambda p: interaction_energy(ctx, with_positions(p), force),
            cluster.positions,
        )
        rows.append((name, "energy_gradient", relative_error(de, fd_de)))

        _, gf = loss_force(ctx, force, truth, cluster)
        fd_gf = central_difference(
            lambda p: loss_force(ctx, force, truth, with_positions(p))[0],
            cluster.positions,
        )
        rows.append((name, "loss_force", relative_error(gf, fd_gf)))

        _, gs = loss_sparse(ctx, force, probe, target_abs, cluster)
        fd_gs = central_difference(
            lambda p: loss_sparse(ctx, force, probe, target_abs, with_positions(p))[0],
            cluster.positions,
        )
        rows.append((name, "loss_sparse", relative_error(gs, fd_gs)))
    return rows


def _cmd_gradcheck(args, out_dir):
    rows = _gradcheck_rows(args.seed)
    lines = ["problem,check,rel_error"]
    worst = 0.0
    for problem, check, err in rows:
        lines.append(f"{problem},{check},{err:.6e}")
        worst = max(worst, err)
    formats.atomic_write_text(os.path.join(out_dir, "gradcheck.csv"), "\n".join(lines) + "\n")
    passed = worst <= GRADCHECK_TOLERANCE
    for line in lines[1:]:
        print(line)
    print(f"worst relative error {worst:.3e} ({'pass' if passed else 'FAIL'})")
    return ["gradcheck.csv"], {"worst_rel_error": worst, "passed": passed}, 0 if passed else 1


def _cmd_circle(args, out_dir):
    spec = preset(args.preset)
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 13)))
    cluster, force, k = sample_cluster(spec, rng)
    ctx = WaveContext.from_wavenumber(spec.plate, k)
    radii = [float(r) for r in args.radii.split(",")]
    outputs = []
    for radius in radii:
        angles, abs_s, abs_t = eval_on_circle(ctx, cluster, force, radius, args.n_angles)
        name = f"circle_r{radius:g}.csv"
        lines = ["angle_rad,abs_scattered,abs_total"]
        lines += [f"{a:.12g},{s:.12g},{t:.12g}" for a, s, t in zip(angles, abs_s, abs_t)]
        formats.atomic_write_text(os.path.join(out_dir, name), "\n".join(lines) + "\n")
        outputs.append(name)
    return outputs, {"radii": radii, "k": k}, 0


def _cmd_replay(args, out_dir):
    manifest = formats.read_json(args.manifest)
    argv = list(manifest["argv"])
    if "--out" in argv:
        argv[argv.index("--out") + 1] = out_dir
    else:
        argv += ["--out", out_dir]
    code = main(argv)
    if code != 0:
        raise PlateScatterError(f"replayed command exited with {code}")
    return None, None, 0  # replayed command wrote its own manifest


_HANDLERS = {}


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platescatter",
        description="Multiple-scattering forward solves, datasets, training, and inverse design",
    )
    parser.add_argument("--version", action="version", version=f"platescatter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, preset_flag=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")
        if preset_flag:
            p.add_argument("--preset", choices=PRESET_NAMES)
        p.add_argument("--config", help="JSON run configuration")

    p = sub.add_parser("solve", help="forward-solve one instance and write field rasters")
    common(p)
    p.add_argument("--resolution", help="WxH raster size, e.g. 128x128")
    p.add_argument("--spline", action="store_true", help="use the spline kernel route")
    _HANDLERS["solve"] = _cmd_solve

    p = sub.add_parser("dataset", help="generate a labelled dataset")
    common(p)
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--resolution", help="WxH raster size")
    _HANDLERS["dataset"] = _cmd_dataset

    p = sub.add_parser("synth", help="write a synthetic target field")
    common(p, preset_flag=False)
    p.add_argument("--type", choices=("downstream", "incident"), required=True)
    p.add_argument("--angle", type=float, help="beam angle (downstream)")
    p.add_argument("--channels", type=int, help="localisation channel count (incident)")
    p.add_argument("--resolution", help="WxH raster size")
    _HANDLERS["synth"] = _cmd_synth

    p = sub.add_parser("train", help="train the surrogate on a dataset")
    common(p, preset_flag=False)
    p.add_argument("--dataset", required=True, help="dataset directory or manifest")
    p.add_argument("--epochs1", type=int, help="burn-in stage epochs")
    p.add_argument("--epochs2", type=int, help="physics stage epochs")
    _HANDLERS["train"] = _cmd_train

    p = sub.add_parser("invert", help="recover scatterers from a target amplitude raster")
    common(p)
    p.add_argument("--target", required=True, help="directory with a solve/synth output")
    p.add_argument("--mode", choices=("direct", "surrogate"), default="direct")
    p.add_argument("--model", help="checkpoint for surrogate mode")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.05)
    _HANDLERS["invert"] = _cmd_invert

    p = sub.add_parser("hyperopt", help="staged Bayesian hyperparameter search")
    common(p, preset_flag=False)
    p.add_argument("--stage", choices=("cae", "mlp", "joint"), default="joint")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--preset", choices=PRESET_NAMES, default="nearfar")
    p.add_argument("--samples", type=int, default=256, help="training samples per trial")
    p.add_argument("--resolution", default="24x24")
    p.add_argument("--epochs1", type=int, default=3)
    p.add_argument("--epochs2", type=int, default=2)
    _HANDLERS["hyperopt"] = _cmd_hyperopt

    p = sub.add_parser("gradcheck", help="compare analytical gradients against finite differences")
    common(p, preset_flag=False)
    _HANDLERS["gradcheck"] = _cmd_gradcheck

    p = sub.add_parser("circle", help="amplitude on radial contours")
    common(p, preset_flag=False)
    p.add_argument("--preset", choices=PRESET_NAMES, default="nearfar")
    p.add_argument("--radii", default="20,50,70")
    p.add_argument("--n-angles", type=int, default=720)
    _HANDLERS["circle"] = _cmd_circle

    p = sub.add_parser("replay", help="re-execute a run manifest into a new directory")
    p.add_argument("manifest", help="path to a manifest.json")
    p.add_argument("--out", required=True)
    _HANDLERS["replay"] = _cmd_replay

    return parser


def _dispatch(args, argv) -> int:
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    handler = _HANDLERS[args.command]
    before = set(os.listdir(out_dir))
    try:
        outputs, extra, code = handler(args, out_dir)
    except BaseException:
        # never leave partial outputs behind
        import shutil

        for name in set(os.listdir(out_dir)) - before:
            path = os.path.join(out_dir, name)
            shutil.rmtree(path) if os.path.isdir(path) else os.unlink(path)
        raise
    if outputs is None:
        return code
    manifest = {
        "command": args.command,
        "argv": argv,
        "package": "platescatter",
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "outputs": [
            {"path": name, "sha256": formats.sha256_file(os.path.join(out_dir, name))}
            for name in sorted(outputs)
        ],
        "extra": extra,
    }
    formats.write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return code


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args, list(argv))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SingularMatrixError, ResonantSingularError, InvalidGeometryError,
            OutOfDomainError, AllStartsFailedError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except PlateScatterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
