"""Density-peak center determination with a fuzzy KNN density.

Local density mixes a KNN term and a global term, both driven by a fuzzy
distance kernel that attenuates non-neighbors by the dispersion ``phi`` of
the token set. Centers are the tokens with the largest ``rho * delta``.
A plain DPC-KNN density is kept alongside for benchmarking.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_tokens, check_vector
from .exceptions import InvalidInput
from .numerics import KnnGraph, knn_graph, pairwise_distances, top_k_by_score

__all__ = [
    "CenterSelection",
    "DensityResult",
    "distance_score",
    "dpc_fknn",
    "dpc_knn_density",
    "fuzzy_kernel",
    "local_density",
    "n_centers",
    "select_centers",
]


@dataclass(frozen=True)
class DensityResult:
    rho: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray

    @classmethod
    def from_parts(cls, rho, delta):
        rho = np.asarray(rho, dtype=np.float64)
        delta = np.asarray(delta, dtype=np.float64)
        if rho.shape != delta.shape:
            raise InvalidInput("rho and delta lengths differ")
        return cls(rho=rho, delta=delta, gamma=rho * delta)


@dataclass(frozen=True)
class CenterSelection:
    centers: np.ndarray
    m_requested: int


def fuzzy_kernel(d, in_knn, phi):
    """Fuzzy distance kernel between two tokens at distance ``d``.

    Neighbors get ``exp(-d**2) / (d + 1)**2``; everything else is damped
    by the dispersion inside the exponent, ``exp(-(phi*d)**2) / (d + 1)**2``.
    Works elementwise on arrays.
    """
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise InvalidInput("kernel distance must be finite and >= 0")
    if phi < 0 or not math.isfinite(phi):
        raise InvalidInput("phi must be finite and >= 0")
    scaled = np.where(in_knn, d, phi * d)
    out = np.exp(-(scaled * scaled)) / ((d + 1.0) * (d + 1.0))
    return float(out) if out.ndim == 0 else out


def local_density(graph, k_fuzzy=None):
    """Fuzzy KNN local density of every token.

    ``rho_i = mean_{j in KNN(i)} mu(i, j) + (1/N) * sum_{j=1..N} mu(i, j)``.
    The global sum runs over every token, ``i`` itself included (its
    kernel value is 1), and counts KNN members a second time.

    Parameters
    ----------
    graph : KnnGraph
    k_fuzzy : int, optional
        Must equal ``graph.k`` when given.

    Returns
    -------
    rho : ndarray of shape (n,)
    """
    graph.validate()
    if k_fuzzy is not None and int(k_fuzzy) != graph.k:
        raise InvalidInput(f"k_fuzzy={k_fuzzy} does not match graph.k={graph.k}")
    mu = fuzzy_kernel(graph.dist, graph.membership(), graph.phi)
    n = graph.n
    knn_term = np.take_along_axis(mu, graph.neighbors, axis=1).sum(axis=1) / graph.k
    return knn_term + mu.sum(axis=1) / n


def distance_score(dist, rho):
    """Distance from each token to its nearest strictly denser token.

    Tokens with no strictly denser peer take their largest distance to any
    other token instead. A single token scores 0.
    """
    D = check_tokens(dist, name="dist")
    n = D.shape[0]
    rho = check_vector(rho, name="rho", size=n)
    if D.shape != (n, n):
        raise InvalidInput(f"dist must be square, got {D.shape}")
    denser = rho[None, :] > rho[:, None]
    has_denser = denser.any(axis=1)
    nearest = np.where(denser, D, np.inf).min(axis=1)
    return np.where(has_denser, nearest, D.max(axis=1))


def n_centers(n, ratio):
    """Number of clusters kept: ``max(1, n // ratio)`` capped at ``n``."""
    if n < 1:
        raise InvalidInput("cannot select centers from zero tokens")
    if ratio < 1:
        raise InvalidInput(f"ratio must be >= 1, got {ratio}")
    return min(n, max(1, n // ratio))


def select_centers(density, ratio, n=None):
    """Pick the ``n_centers(n, ratio)`` tokens with the largest ``gamma``."""
    if n is None:
        n = density.gamma.shape[0]
    m = n_centers(int(n), int(ratio))
    return CenterSelection(centers=top_k_by_score(density.gamma, m), m_requested=m)


def dpc_knn_density(graph):
    """Baseline DPC-KNN density ``exp(-mean_{j in KNN(i)} d_ij**2)``."""
    graph.validate()
    sq = graph.neighbor_dists * graph.neighbor_dists
    return np.exp(-sq.sum(axis=1) / graph.k)


def dpc_fknn(tokens, k=5, ratio=4, density="fuzzy"):
    """Run center determination end to end on a token matrix.

    Parameters
    ----------
    tokens : array-like of shape (n, c)
    k : int
        Neighbor count for the density graph.
    ratio : int
        Downsampling ratio; ``n // ratio`` centers are kept.
    density : {"fuzzy", "knn"}
        ``"knn"`` swaps in the baseline DPC-KNN density.

    Returns
    -------
    graph : KnnGraph
    result : DensityResult
    selection : CenterSelection
    """
    dist = pairwise_distances(tokens)
    graph = knn_graph(dist, k)
    if density == "fuzzy":
        rho = local_density(graph, graph.k)
    elif density == "knn":
        rho = dpc_knn_density(graph)
    else:
        raise InvalidInput(f"unknown density {density!r}")
    result = DensityResult.from_parts(rho, distance_score(dist, rho))
    return graph, result, select_centers(result, ratio, dist.shape[0])
