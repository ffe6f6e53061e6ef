"""Hierarchical vertex components models for structured interaction networks.

A library for sequences of structured interactions (one sender multiset and
one receiver multiset per event): forward simulation of the hierarchical
partial-pooling urn process, the exact extended-configuration likelihood,
auxiliary-variable Gibbs inference, network statistics, and posterior
predictive checking.
"""

__version__ = "0.1.0"

from .interactions import (
    HistoryState,
    Interaction,
    InteractionLog,
    Vocabulary,
    canonicalize_labels,
    replay_history,
    restrict,
)
from .params import HvcmParams
from .generative import (
    LatentDegreeState,
    SimulationResult,
    escape_probability,
    hollywood_simulate,
    sample_receiver,
    sample_sender,
    sample_z,
    simulate,
    simulate_conditional,
    simulate_full,
    stick_breaking_frequencies,
    update_latent,
)
from .seating import (
    SeatingState,
    SeatingInvariantError,
    load_checkpoint,
    log_likelihood,
    marginal_likelihood_bruteforce,
    save_checkpoint,
)
from .gibbs import (
    BetaPrior,
    FitConfig,
    GammaPrior,
    GibbsPriors,
    GibbsTrace,
    default_priors,
    fit,
    gibbs_iteration,
    hollywood_fit,
    sample_z_posterior,
)
from .netstats import (
    NetStats,
    compute_stats,
    degree_distribution_distance,
    node_sharing_histogram,
    powerlaw_slope,
    sparsity_slope,
    subject_overlap,
    yule_reference,
)
from .ppc import PpcReport, coverage_report, generate_replicates, interval

__all__ = [
    "BetaPrior",
    "FitConfig",
    "GammaPrior",
    "GibbsPriors",
    "GibbsTrace",
    "HistoryState",
    "HvcmParams",
    "Interaction",
    "InteractionLog",
    "LatentDegreeState",
    "NetStats",
    "PpcReport",
    "SeatingInvariantError",
    "SeatingState",
    "SimulationResult",
    "Vocabulary",
    "canonicalize_labels",
    "compute_stats",
    "coverage_report",
    "default_priors",
    "degree_distribution_distance",
    "escape_probability",
    "fit",
    "generate_replicates",
    "gibbs_iteration",
    "hollywood_fit",
    "hollywood_simulate",
    "interval",
    "load_checkpoint",
    "log_likelihood",
    "marginal_likelihood_bruteforce",
    "node_sharing_histogram",
    "powerlaw_slope",
    "replay_history",
    "restrict",
    "sample_receiver",
    "sample_sender",
    "sample_z",
    "sample_z_posterior",
    "save_checkpoint",
    "simulate",
    "simulate_conditional",
    "simulate_full",
    "sparsity_slope",
    "stick_breaking_frequencies",
    "subject_overlap",
    "update_latent",
    "yule_reference",
]
