"""Adaptive Bayesian binary-search estimation of a driven qubit's frequency shift."""

from .estimator import (
    IDEAL_MODEL,
    REFERENCE_MODEL,
    EstimationAborted,
    GaussianBelief,
    LikelihoodModel,
    NumericalConsistencyError,
    ProbeSettings,
    StepRecord,
    design_probe,
    likelihood_probability,
    optimal_detuning,
    optimal_tau,
    run_estimation,
    update,
)
from .oracle import GridPosterior, from_gaussian, grid_update, kl_divergence, moments
from .qubitsim import (
    NoiseProcess,
    QubitState,
    cycle_duration,
    initial_state,
    no_reset_outcome,
    rng_for_run,
    sample_outcome,
    step_noise,
)

__version__ = "0.1.0"

__all__ = [
    "IDEAL_MODEL",
    "REFERENCE_MODEL",
    "EstimationAborted",
    "GaussianBelief",
    "GridPosterior",
    "LikelihoodModel",
    "NoiseProcess",
    "NumericalConsistencyError",
    "ProbeSettings",
    "QubitState",
    "StepRecord",
    "cycle_duration",
    "design_probe",
    "from_gaussian",
    "grid_update",
    "initial_state",
    "kl_divergence",
    "likelihood_probability",
    "moments",
    "no_reset_outcome",
    "optimal_detuning",
    "optimal_tau",
    "rng_for_run",
    "run_estimation",
    "sample_outcome",
    "step_noise",
    "update",
]
