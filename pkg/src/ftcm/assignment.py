"""Token-to-center assignment by spatial connectivity score (SCS).

``SCS(i, j) = CN(i, j) * |KNN(i) & KNN(j)|`` where ``CN`` sums the
shifted inverse distances ``1 / (d + 1)`` from each token to its own
neighbors. A token joins the center it is best connected to and falls
back to the Euclidean-nearest center when it shares no neighbor with any.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInput

__all__ = [
    "ClusterAssignment",
    "assign_tokens",
    "closeness",
    "neighbor_closeness",
    "scs",
    "scs_matrix",
    "snn_count",
]


@dataclass(frozen=True)
class ClusterAssignment:
    """Total token-to-cluster map.

    Cluster ``c`` is represented by token ``centers[c]``; ``assign[t]`` is
    the cluster id of token ``t``.
    """

    centers: np.ndarray
    assign: np.ndarray

    @property
    def n_clusters(self):
        return self.centers.shape[0]

    def members(self, c):
        return np.flatnonzero(self.assign == c)

    def validate(self):
        m = self.n_clusters
        if m == 0:
            raise InvalidInput("assignment has no clusters")
        if np.any((self.assign < 0) | (self.assign >= m)):
            raise InvalidInput("cluster id out of range")
        if np.any(self.assign[self.centers] != np.arange(m)):
            raise InvalidInput("a center is not a member of its own cluster")
        return self


def _check_pair(graph, i, j):
    n = graph.n
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidInput(f"token index out of range for n={n}")
    if i == j:
        raise InvalidInput("SCS terms are defined for distinct tokens only")


def snn_count(graph, i, j):
    """Number of neighbors shared by tokens ``i`` and ``j``."""
    _check_pair(graph, i, j)
    return len(set(graph.neighbors[i].tolist()) & set(graph.neighbors[j].tolist()))


def neighbor_closeness(graph):
    """Per-token ``sum_{u in KNN(i)} 1 / (d_iu + 1)``."""
    return (1.0 / (graph.neighbor_dists + 1.0)).sum(axis=1)


def closeness(graph, i, j):
    _check_pair(graph, i, j)
    s = neighbor_closeness(graph)
    return float(s[i] + s[j])


def scs(graph, i, j):
    return closeness(graph, i, j) * snn_count(graph, i, j)


def scs_matrix(graph, rows, cols):
    """SCS between every token in ``rows`` and every token in ``cols``.

    Entries where a row token equals a column token are meaningless and
    left as computed; callers exclude them.
    """
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    member = graph.membership().astype(np.int64)
    shared = member[rows] @ member[cols].T
    s = neighbor_closeness(graph)
    return (s[rows][:, None] + s[cols][None, :]) * shared


def assign_tokens(graph, centers):
    """Assign every token to a center.

    Parameters
    ----------
    graph : KnnGraph
        Neighbor graph over all tokens, built with ``K_SCS``.
    centers : CenterSelection or array-like of int
        Sorted center indices.

    Returns
    -------
    ClusterAssignment
    """
    centers = np.asarray(getattr(centers, "centers", centers), dtype=np.intp)
    n = graph.n
    if centers.size == 0:
        raise InvalidInput("no centers given")
    if np.any(np.diff(centers) <= 0) or centers[0] < 0 or centers[-1] >= n:
        raise InvalidInput("centers must be sorted, distinct and within range")

    assign = np.empty(n, dtype=np.intp)
    assign[centers] = np.arange(centers.size)
    others = np.setdiff1d(np.arange(n), centers)
    if others.size:
        score = scs_matrix(graph, others, centers)
        dist = graph.dist[np.ix_(others, centers)]
        best = score.max(axis=1)
        # Among max-SCS candidates take the closer center; argmin returns
        # the first hit, i.e. the lower center index on exact ties.
        masked_dist = np.where(score == best[:, None], dist, np.inf)
        choice = np.argmin(masked_dist, axis=1)
        fallback = np.argmin(dist, axis=1)
        assign[others] = np.where(best > 0, choice, fallback)
    return ClusterAssignment(centers=centers, assign=assign)
