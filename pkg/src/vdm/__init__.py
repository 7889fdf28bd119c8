"""Variational dynamic mixtures: multi-modal sequential latent-variable forecasting.

A sequential latent-variable model whose inference recursion pushes multiple
cubature samples through a shared recurrent cell, forming a mixture-of-
Gaussians posterior per step.  Training maximizes a per-step evidence bound
with predictive and adversarial regularizers; evaluation covers sample NLL
and the empirical Wasserstein distance between forecast and truth sets.
"""
from .autodiff import Tape, Tensor, backward
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import (
    Dataset,
    LorenzConfig,
    Trajectory,
    generate_four_mode,
    group_by_prefix,
    load_csv,
    rk4_step,
    save_csv,
    simulate_lorenz,
    simulate_lorenz_paths,
)
from .evaluation import (
    ForecastBundle,
    dataset_multi_step_nll,
    forecast_dataset,
    multi_step_nll,
    one_step_nll,
    w_distance_protocol,
    wasserstein,
)
from .gaussians import DiagGaussian, gaussian_kl, gaussian_log_pdf
from .inference import (
    MixtureBelief,
    PredictiveMixture,
    belief_init,
    belief_step,
    compute_weights,
    export_predictive_prior,
    filter_sequence,
    generate,
    one_step_predictive,
)
from .nets import ModelConfig, VdmModel, parameter_counts
from .objective import LossBreakdown, TrainResult, adv_regularizer, elbo_step, total_loss, train
from .optim import ParameterStore, adam_step
from .sampling import SigmaSet, mc_sample, sca_sample, sigma_points

__version__ = "0.1.0"

__all__ = [
    "Tape",
    "Tensor",
    "backward",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "Dataset",
    "LorenzConfig",
    "Trajectory",
    "generate_four_mode",
    "group_by_prefix",
    "load_csv",
    "rk4_step",
    "save_csv",
    "simulate_lorenz",
    "simulate_lorenz_paths",
    "ForecastBundle",
    "dataset_multi_step_nll",
    "forecast_dataset",
    "multi_step_nll",
    "one_step_nll",
    "w_distance_protocol",
    "wasserstein",
    "DiagGaussian",
    "gaussian_kl",
    "gaussian_log_pdf",
    "MixtureBelief",
    "PredictiveMixture",
    "belief_init",
    "belief_step",
    "compute_weights",
    "export_predictive_prior",
    "filter_sequence",
    "generate",
    "one_step_predictive",
    "ModelConfig",
    "VdmModel",
    "parameter_counts",
    "LossBreakdown",
    "TrainResult",
    "adv_regularizer",
    "elbo_step",
    "total_loss",
    "train",
    "ParameterStore",
    "adam_step",
    "SigmaSet",
    "mc_sample",
    "sca_sample",
    "sigma_points",
]
