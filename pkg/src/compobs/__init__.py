"""Compressive observability of linear systems.

Recover a sparse initial state ``x0`` of ``x_k = A x_{k-1}`` from a few
random linear measurements ``y_k = C_k x_k`` collected at chosen times, and
evaluate the concentration and RIP bounds that govern when this works.
"""

__version__ = "0.1.0"

from .concentration import (
    ComBoundReport,
    Regime,
    RipBoundInput,
    b_normalizer,
    com_tail_bound,
    deterministic_ak_bounds,
    empirical_com,
    gamma_scaled_unitary,
    gamma_stat,
    lambda_stat,
    rho_lower_bound,
    rho_scaled_unitary,
    rip_measurement_count,
)
from .errors import CompobsError, ConfigError, InstanceTooLargeError, InvalidParameterError
from .experiments import (
    ExperimentConfig,
    TrialRecord,
    cluster_sparse_state,
    com_verification_suite,
    multi_time_sweep,
    noise_histogram,
    phase_transition,
    scattered_sparse_state,
)
from .kernels import BACKEND
from .measure import (
    MeasurementEnsemble,
    ObservabilityOperator,
    Sharing,
    dense_gaussian_ensemble,
    line_ensemble,
    load_ensemble,
    observability,
    save_ensemble,
)
from .recovery import (
    RecoveryProblem,
    RecoveryResult,
    Status,
    brute_force_oracle,
    recovery_metrics,
    solve_bp,
    solve_bpdn,
)
from .system import (
    EigSplit,
    ModelKind,
    SampleSet,
    StateModel,
    cyclic_shift,
    diffusion_model,
    grid_laplacian,
    path_laplacian,
    random_orthogonal,
    scaled_unitary,
    spectral_split,
    stacked_apply,
)
