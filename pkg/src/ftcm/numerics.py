"""Dense distance, neighbor-graph and normalization primitives.

Everything here is a pure function of its inputs and runs in a fixed
reduction order, so results are bit-identical between runs.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_tokens, check_vector
from .exceptions import InvalidInput

__all__ = [
    "KnnGraph",
    "Rng",
    "knn_graph",
    "pairwise_distances",
    "softmax",
    "top_k_by_score",
]

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class Rng:
    """SplitMix64 generator.

    The i-th output (1-based) of a generator seeded with ``s`` is
    ``mix64(s + i * 0x9E3779B97F4A7C15 mod 2**64)``, which makes batched
    draws a closed-form vector computation and keeps streams identical on
    every platform.
    """

    def __init__(self, seed=0):
        self.state = int(seed) & _MASK64

    def next_u64(self, n=1):
        """Return the next ``n`` raw 64-bit outputs as a uint64 array."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self.state) + steps * np.uint64(_GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GOLDEN_GAMMA) & _MASK64
        return z

    def uniform(self, size):
        """Uniform floats in [0, 1) with 53 random bits each."""
        size = tuple(np.atleast_1d(size))
        n = int(np.prod(size))
        bits = self.next_u64(n) >> np.uint64(11)
        return (bits.astype(np.float64) * 2.0**-53).reshape(size)

    def normal(self, size):
        """Standard normal draws via the Box-Muller transform."""
        size = tuple(np.atleast_1d(size))
        n = int(np.prod(size))
        half = (n + 1) // 2
        u1 = 1.0 - self.uniform(half)  # (0, 1], keeps log finite
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return z[:n].reshape(size)

    def spawn(self):
        """Independent child generator seeded from this stream."""
        return Rng(int(self.next_u64(1)[0]))


def pairwise_distances(tokens):
    """Euclidean distance matrix of the rows of ``tokens``.

    Squared differences are accumulated channel by channel in index order,
    so ``dist[i, j]`` equals a naive double loop bit for bit and the
    matrix is exactly symmetric with a zero diagonal.

    Parameters
    ----------
    tokens : array-like of shape (n_tokens, n_channels)

    Returns
    -------
    dist : ndarray of shape (n_tokens, n_tokens)
    """
    X = check_tokens(tokens)
    n = X.shape[0]
    acc = np.zeros((n, n), dtype=np.float64)
    for c in range(X.shape[1]):
        col = X[:, c]
        diff = col[:, None] - col[None, :]
        acc += diff * diff
    return np.sqrt(acc)


@dataclass(frozen=True)
class KnnGraph:
    """K-nearest-neighbor graph with self excluded.

    Attributes
    ----------
    k : int
        Effective neighbor count (after clamping to ``n - 1``).
    neighbors : ndarray of int, shape (n, k)
        Row ``i`` lists the neighbors of token ``i``, nearest first, ties
        broken by ascending index.
    neighbor_dists : ndarray of shape (n, k)
    dist : ndarray of shape (n, n)
        Full distance matrix the graph was built from.
    phi : float
        Population standard deviation of the ``n(n-1)/2`` distinct-pair
        distances.
    """

    k: int
    neighbors: np.ndarray
    neighbor_dists: np.ndarray
    dist: np.ndarray
    phi: float

    @property
    def n(self):
        return self.dist.shape[0]

    def membership(self):
        """Boolean (n, n) matrix, ``True`` where column j is in KNN(row i)."""
        mask = np.zeros((self.n, self.n), dtype=bool)
        rows = np.repeat(np.arange(self.n), self.k)
        mask[rows, self.neighbors.ravel()] = True
        return mask

    def validate(self):
        n, k = self.n, self.k
        if self.dist.shape != (n, n):
            raise InvalidInput("distance matrix must be square")
        if not 1 <= k <= n - 1:
            raise InvalidInput(f"graph k={k} outside [1, {n - 1}]")
        if self.neighbors.shape != (n, k) or self.neighbor_dists.shape != (n, k):
            raise InvalidInput("neighbor arrays do not have shape (n, k)")
        if np.any(self.neighbors == np.arange(n)[:, None]):
            raise InvalidInput("a neighbor row contains its own index")
        if np.any((self.neighbors < 0) | (self.neighbors >= n)):
            raise InvalidInput("neighbor index out of range")
        return self


def knn_graph(dist, k):
    """Build the self-excluding KNN graph from a distance matrix.

    ``k`` larger than ``n - 1`` is clamped with a ``RuntimeWarning``.

    Raises
    ------
    InvalidInput
        If fewer than two tokens are given, ``k < 1``, or ``dist`` is not a
        finite square matrix.
    """
    D = check_tokens(dist, name="dist")
    n = D.shape[0]
    if D.shape[1] != n:
        raise InvalidInput(f"dist must be square, got {D.shape}")
    if n < 2:
        raise InvalidInput("knn_graph needs at least two tokens")
    k = int(k)
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    if k > n - 1:
        warnings.warn(f"k={k} clamped to n-1={n - 1}", RuntimeWarning, stacklevel=2)
        k = n - 1

    # Self goes last by giving it +inf; a stable sort keeps index order on ties.
    keyed = D.copy()
    np.fill_diagonal(keyed, np.inf)
    order = np.argsort(keyed, axis=1, kind="stable")[:, :k]
    neighbor_dists = np.take_along_axis(D, order, axis=1)

    iu = np.triu_indices(n, 1)
    phi = float(np.std(D[iu]))
    return KnnGraph(k=k, neighbors=order, neighbor_dists=neighbor_dists, dist=D, phi=phi)


def top_k_by_score(scores, m):
    """Indices of the ``m`` largest scores, returned in ascending index order.

    Ties are resolved in favour of the lower index.
    """
    s = check_vector(scores, name="scores")
    m = int(m)
    if not 1 <= m <= s.shape[0]:
        raise InvalidInput(f"m must lie in [1, {s.shape[0]}], got {m}")
    order = np.argsort(-s, kind="stable")
    return np.sort(order[:m])


def softmax(v, axis=-1):
    """Max-shifted softmax along ``axis``."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise InvalidInput("softmax of an empty vector")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("softmax input contains non-finite values")
    z = np.exp(v - np.max(v, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)
