"""Recovery of structured signals from non-linear, adversarially corrupted
Gaussian observations, plus the diagnostics (mean widths, model parameters,
restricted strong convexity, small-ball tails) that govern when it works."""

from .core import (
    CovarianceFactor,
    MeasurementEnsemble,
    RngStream,
    identity_factor,
    mahalanobis_error,
    make_covariance_factor,
    sample_ensemble,
)
from .losses import Glm, Loss, LogisticPaper, Square, empirical_gradient, empirical_loss
from .observations import (
    BitFlipBudget,
    BoundedL2,
    FixedOffsets,
    FlipSign,
    LinearNoise,
    NoCorruption,
    NoisySign,
    ObservationSet,
    SignClean,
    UniformQuantizer,
    corrupt,
    generate_observations,
    make_observation_set,
)
from .signal_sets import (
    DictionaryImage,
    L1Ball,
    L2Ball,
    PolytopeHull,
    ProjectionResult,
    SignalSet,
    SqrtSparsitySet,
    Subspace,
    dykstra_intersection_project,
    max_linear_localized,
    membership,
    project,
    support_value,
)
from .model_params import (
    ModelParams,
    QuadratureSpec,
    closed_form_params,
    compute_sigma_eta,
    error_floor_t0,
    expected_score,
    resolve_params,
    solve_mu,
)
from .analysis import (
    RscReport,
    SmallBallEstimate,
    WidthEstimate,
    effective_dimension,
    empirical_rsc,
    local_mean_width_mc,
    mean_width_mc,
    small_ball_q,
    taylor_remainder,
)
from .estimator import EstimateReport, TrialRecord, run_trial, solve, solve_anisotropic
from .config import ExperimentConfig, SolverConfig, TrialSpec, validate_config
from .harness import SweepResult, fit_rate, run_config

__version__ = "0.1.0"
