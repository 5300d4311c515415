"""Active Bayesian causal discovery over Gaussian-process networks.

A belief over all DAGs on a few continuous variables, with GP-modelled
mechanisms, is updated from observational and interventional samples; the
next intervention is chosen by maximising a Monte-Carlo estimate of the
expected information gain with per-target GP-UCB Bayesian optimisation.
"""

from .belief import (
    BeliefState,
    InterventionSpec,
    OBSERVATIONAL,
    RootModel,
    Sample,
    edge_marginals,
    graph_log_posterior,
    initialize,
    node_log_evidence,
    sample_interventional,
    update,
)
from .dags import Dag, GraphPrior, enumerate_dags, log_prior, shd
from .design import (
    DesignConfig,
    DesignResult,
    mc_expected_info_gain,
    optimize_intervention,
    ucb_acquisition,
    utility,
)
from .envs import GroundTruthScm, bivariate_tanh_scm, chain_tanh_scm, sample_truth
from .gp import (
    FitBounds,
    GpDataset,
    GpHyperparams,
    fit_hyperparams,
    kernel_se,
    log_marginal_likelihood,
    predictive,
)
from .loop import EpisodeConfig, StepRecord, baseline_strategies, metrics, run_episode

__version__ = "0.1.0"

__all__ = [
    "BeliefState",
    "Dag",
    "DesignConfig",
    "DesignResult",
    "EpisodeConfig",
    "FitBounds",
    "GpDataset",
    "GpHyperparams",
    "GraphPrior",
    "GroundTruthScm",
    "InterventionSpec",
    "OBSERVATIONAL",
    "RootModel",
    "Sample",
    "StepRecord",
    "baseline_strategies",
    "bivariate_tanh_scm",
    "chain_tanh_scm",
    "edge_marginals",
    "enumerate_dags",
    "fit_hyperparams",
    "graph_log_posterior",
    "initialize",
    "kernel_se",
    "log_marginal_likelihood",
    "log_prior",
    "mc_expected_info_gain",
    "metrics",
    "node_log_evidence",
    "optimize_intervention",
    "predictive",
    "run_episode",
    "sample_interventional",
    "sample_truth",
    "shd",
    "ucb_acquisition",
    "update",
    "utility",
]
