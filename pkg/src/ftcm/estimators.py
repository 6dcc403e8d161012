"""scikit-learn compatible wrappers around the functional API."""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_tokens
from .assignment import assign_tokens
from .clustering import dpc_fknn
from .exceptions import InvalidInput
from .numerics import Rng, knn_graph
from .pipeline import FtcmConfig, FtcmWeights, TokenSet, ftcm_stage

__all__ = ["DensityPeakTokenClustering", "FuzzyTokenMerger"]


class DensityPeakTokenClustering(ClusterMixin, BaseEstimator):
    """Density-peak clustering with fuzzy KNN density and SCS assignment.

    Parameters
    ----------
    k_fuzzy : int, default=5
        Neighbor count of the density graph.
    k_scs : int, default=5
        Neighbor count used for the connectivity score.
    ratio : int, default=4
        ``n_samples // ratio`` clusters are formed (at least one).
    density : {"fuzzy", "knn"}, default="fuzzy"
        ``"knn"`` uses the baseline DPC-KNN density.

    Attributes
    ----------
    rho_, delta_, gamma_ : ndarray of shape (n_samples,)
        Local density, distance score and their product.
    centers_ : ndarray of int, shape (n_clusters,)
        Indices of the selected cluster centers, ascending.
    labels_ : ndarray of int, shape (n_samples,)
        Cluster id per sample; cluster ``c`` is centered on ``centers_[c]``.
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
    """

    def __init__(self, k_fuzzy=5, k_scs=5, ratio=4, density="fuzzy"):
        self.k_fuzzy = k_fuzzy
        self.k_scs = k_scs
        self.ratio = ratio
        self.density = density

    def fit(self, X, y=None):
        X = check_tokens(X, min_rows=2)
        self.n_features_in_ = X.shape[1]
        graph, result, selection = dpc_fknn(X, k=self.k_fuzzy, ratio=self.ratio, density=self.density)
        scs_graph = graph if self.k_scs == graph.k else knn_graph(graph.dist, self.k_scs)
        asg = assign_tokens(scs_graph, selection)
        self.rho_ = result.rho
        self.delta_ = result.delta
        self.gamma_ = result.gamma
        self.centers_ = asg.centers
        self.labels_ = asg.assign
        self.cluster_centers_ = X[asg.centers]
        self.assignment_ = asg
        return self


class FuzzyTokenMerger(TransformerMixin, BaseEstimator):
    """Downsample a token matrix by clustering and channel-wise merging.

    ``fit`` draws the stage weights from ``seed``; ``transform`` returns
    ``max(1, n // ratio)`` merged and attention-refined tokens.

    Parameters
    ----------
    k_fuzzy, k_scs, ratio : int
        See :class:`DensityPeakTokenClustering`.
    seed : int, default=0
        Seed of the interaction weight initialisation.
    interaction : bool, default=True
        If False, ``transform`` returns the merged tokens without the
        cross-attention refinement.
    """

    def __init__(self, k_fuzzy=5, k_scs=5, ratio=4, seed=0, interaction=True):
        self.k_fuzzy = k_fuzzy
        self.k_scs = k_scs
        self.ratio = ratio
        self.seed = seed
        self.interaction = interaction

    def fit(self, X, y=None):
        X = check_tokens(X)
        self.n_features_in_ = X.shape[1]
        self.weights_ = FtcmWeights.init(X.shape[1], Rng(self.seed))
        return self

    def _config(self):
        return FtcmConfig(k_fuzzy=self.k_fuzzy, k_scs=self.k_scs, ratio=self.ratio,
                          channels=self.n_features_in_, seed=self.seed)

    def transform_stage(self, X):
        """Full stage result (tokens, assignment, merge, density) for ``X``."""
        check_is_fitted(self, "weights_")
        X = check_tokens(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInput(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        ts = TokenSet(X, [np.array([t]) for t in range(X.shape[0])], 1, X.shape[0])
        return ftcm_stage(ts, self._config(), self.weights_)

    def transform(self, X):
        res = self.transform_stage(X)
        if self.interaction:
            return res.tokens.features
        return res.merge.merged
