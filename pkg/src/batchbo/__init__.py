"""Batch Bayesian optimization: slice-sample the acquisition surface,
cluster the samples, evaluate the centroids — plus baseline batch
strategies, a compressed-sensing front end for high dimensions, and a
seeded benchmark harness."""

from .acquisition import AcquisitionContext, ei_surface, expected_improvement
from .compression import (
    CompressionModel,
    compress_many,
    compress_point,
    cs_kmbbo_run,
    decompress_many,
    decompress_point,
    fit_compression,
    twist_solve,
)
from .gp import (
    GpHyperparams,
    GpPosterior,
    exact_posterior,
    fit,
    kernel_eval,
    log_marginal_likelihood,
    log_marginal_likelihood_grad,
)
from .harness import (
    EpochRecord,
    ExperimentConfig,
    ExperimentResult,
    RepeatResult,
    ZScores,
    aggregate_z,
    emit_outputs,
    first_encounter,
    run_experiment,
    z_score,
)
from .objectives import (
    Dataset,
    Domain,
    Objective,
    branin_objective,
    camelback6_objective,
    eval_branin,
    eval_camelback6,
    eval_hartmann6,
    get_objective,
    hartmann6_objective,
    make_sparse_pool,
    oracle_scan,
    register_objective,
)
from .slice_sampling import SliceSampleSet, bgss_sample, estimate_alpha_min
from .strategies import (
    Batch,
    KMeansResult,
    constant_liar_batch,
    kmbbo_batch,
    kmeans_fit,
    lp_batch,
    naive_qei_batch,
    register_strategy,
    snap_to_candidates,
    thompson_batch,
)

__version__ = "0.1.0"
