"""Python face of the hud composed-retrieval testbed.

Everything heavy lives in the C++ core; this package re-exports the bound
operations and adds nothing on top.
"""

from ._core import (
    config_hash,
    dataset_stats,
    default_config,
    distribution_regularization,
    grad_check,
    hierarchical_similarity,
    kl_categorical,
    l2_normalize_rows,
    log_softmax_rows,
    pronoun_ratio,
    rank_loss,
    run_training,
    softmax_rows,
    token_scores,
    total_loss,
)

__all__ = [
    "config_hash",
    "dataset_stats",
    "default_config",
    "distribution_regularization",
    "grad_check",
    "hierarchical_similarity",
    "kl_categorical",
    "l2_normalize_rows",
    "log_softmax_rows",
    "pronoun_ratio",
    "rank_loss",
    "run_training",
    "softmax_rows",
    "token_scores",
    "total_loss",
]
