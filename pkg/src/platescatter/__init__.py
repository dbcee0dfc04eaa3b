"""Multiple scattering on infinite thin plates: forward models, physics-loss
gradients, inverse design, and a desk-scale surrogate with staged training."""

__version__ = "0.1.0"

from .errors import (
    AllStartsFailedError,
    CentroidSingularError,
    ConfigError,
    DegenerateChannelError,
    InvalidGeometryError,
    OutOfDomainError,
    PlateScatterError,
    ResonantSingularError,
    SingularMatrixError,
    TrainingDivergedError,
)
from .grids import FieldGrid
from .plate import (
    GreensSpline,
    PlateSpec,
    WaveContext,
    fit_greens_splines,
    greens,
    greens_grad,
    greens_spline_eval,
    omega_from_wavenumber,
    wavenumber_from_omega,
)
from .scatter import (
    Cluster,
    IncidentForce,
    ScatterSolution,
    Scatterer,
    assemble_system,
    energy_position_gradient,
    eval_field,
    eval_field_grid,
    eval_field_parts,
    field_position_jacobian,
    interaction_energy,
    self_consistency_error,
    solve_forces,
    transmission_mu,
)
from .problems import (
    Dataset,
    NormStats,
    OscillatorRule,
    ProblemSpec,
    build_dataset,
    compute_norm_stats,
    eval_on_circle,
    generate_dataset,
    incident_channel_centers,
    load_dataset,
    preset,
    sample_batch,
    sample_cluster,
    synth_downstream,
    synth_incident,
    synthetic_batch,
    train_test_split,
)
from .losses import (
    LossWeights,
    SparsePointSampler,
    joint_loss,
    loss_force,
    loss_mse_coords,
    loss_mse_fields,
    loss_sparse,
)
from .inverse import (
    AdamState,
    InversionConfig,
    InversionResult,
    SurrogateConfig,
    SurrogateModel,
    TrainConfig,
    adam_step,
    invert_direct,
    surrogate_backprop,
    surrogate_forward,
    train,
    desk_train_config,
    train_config_preset,
    transfer_learn,
)
from .hyperopt import (
    GpState,
    HyperParam,
    HyperSpace,
    expected_improvement,
    gp_fit,
    gp_posterior,
    matern52,
    normalize_loss_weights,
    propose_next,
    run_stage,
)
