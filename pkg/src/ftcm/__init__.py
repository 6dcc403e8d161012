"""Fuzzy token clustering and merging for vision-token downsampling."""

from .assignment import ClusterAssignment, assign_tokens, closeness, scs, snn_count
from .clustering import (
    CenterSelection,
    DensityResult,
    distance_score,
    dpc_fknn,
    dpc_knn_density,
    fuzzy_kernel,
    local_density,
    select_centers,
)
from .estimators import DensityPeakTokenClustering, FuzzyTokenMerger
from .exceptions import FormatError, InternalInvariantViolation, InvalidInput
from .merging import (
    InteractionWeights,
    MergeOutput,
    cmerge,
    cmerge_grad,
    importance_scores,
    token_interaction,
)
from .numerics import KnnGraph, Rng, knn_graph, pairwise_distances, softmax, top_k_by_score
from .pipeline import (
    FtcmConfig,
    FtcmWeights,
    TokenSet,
    ftcm_forward,
    origin_label_map,
    patch_embed,
    run_stages,
)

__version__ = "0.1.0"
