"""Finite-memory state estimation toolkit.

Three estimators over one discrete linear state-space model: the classic
Kalman filter, a receding-horizon Kalman filter that reruns the
information filter over a sliding window, and an unbiased FIR filter
that ignores noise statistics entirely. Plus seeded simulation, model
mismatch injection, and a Monte-Carlo harness for choosing the window
length.
"""

from .errors import (
    ConfigError,
    FirkitError,
    ModelConsistencyError,
    NotObservableError,
    SingularityError,
    UnsupportedConfigurationError,
)
from .horizon import (
    FilterSpec,
    SweepResult,
    filter_estimates,
    minimal_horizon_for_rhkf,
    mse_sweep,
    select_optimal_horizon,
    simulate_runs,
)
from .kalman import (
    if_predict,
    if_update,
    info_to_state,
    kf_gain_posterior_form,
    kf_predict,
    kf_run,
    kf_update,
    state_to_info,
)
from .model import (
    InfoEstimate,
    MeasurementWindow,
    ModelOverride,
    ModelSequence,
    StateEstimate,
    StepDiagnostics,
    UfirEstimate,
    load_model,
    model_from_dict,
    observable_init_length,
    stacked_observation,
    transition_product,
    window_observable,
)
from .rhkf import (
    BATCH_LEAST_SQUARES,
    ZERO_INFORMATION,
    RhkfConfig,
    rhkf_batch_init,
    rhkf_run,
    rhkf_window_estimate,
)
from .sim import (
    MismatchSpec,
    SimConfig,
    TransitionPerturbation,
    apply_mismatch,
    run_rng,
    simulate_trajectory,
)
from .ufir import (
    UfirConfig,
    ufir_batch_init,
    ufir_batch_oracle,
    ufir_iterate_step,
    ufir_window_estimate,
)

__version__ = "0.1.0"
