"""Channel-wise token merging and importance-biased token interaction."""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_shape, check_tokens, check_vector
from .exceptions import InvalidInput
from .numerics import softmax

__all__ = [
    "InteractionWeights",
    "MergeOutput",
    "cmerge",
    "cmerge_grad",
    "importance_scores",
    "token_interaction",
]


@dataclass(frozen=True)
class MergeOutput:
    merged: np.ndarray
    importance: np.ndarray


@dataclass(frozen=True)
class InteractionWeights:
    """Single-head cross-attention projections, all ``(C, C)``."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray

    @property
    def d_k(self):
        return self.w_q.shape[1]

    @classmethod
    def random(cls, channels, rng):
        """Gaussian init scaled by ``1/sqrt(channels)``, drawn from ``rng``."""
        scale = 1.0 / math.sqrt(channels)
        mats = [rng.normal((channels, channels)) * scale for _ in range(4)]
        return cls(*mats)

    def validate(self, channels):
        for name in ("w_q", "w_k", "w_v", "w_o"):
            w = getattr(self, name)
            check_shape(w, (channels, channels), name)
            if not np.all(np.isfinite(w)):
                raise InvalidInput(f"{name} contains non-finite values")
        return self


def importance_scores(tokens, w_p, b_p):
    """Channel-level importance scores ``P = tokens @ w_p + b_p``."""
    X = check_tokens(tokens)
    c = X.shape[1]
    w_p = check_tokens(w_p, name="w_p")
    check_shape(w_p, (c, c), "w_p")
    b_p = check_vector(b_p, name="b_p", size=c)
    return X @ w_p + b_p


def _check_merge_inputs(tokens, p, asg):
    X = check_tokens(tokens)
    P = check_tokens(p, name="importance")
    check_shape(P, X.shape, "importance")
    if asg.assign.shape != (X.shape[0],):
        raise InvalidInput("assignment length does not match token count")
    asg.validate()
    return X, P


def _cluster_weights(P, members):
    return softmax(P[members], axis=0)


def cmerge(tokens, p, asg):
    """Merge each cluster into one token with per-channel softmax weights.

    For cluster ``i`` and channel ``c``::

        y[i, c] = sum_j exp(P[j, c]) * x[j, c] / sum_j exp(P[j, c])

    over the cluster's members ``j``. Rows of the output follow
    ``asg.centers``.

    Returns
    -------
    MergeOutput
    """
    X, P = _check_merge_inputs(tokens, p, asg)
    merged = np.empty((asg.n_clusters, X.shape[1]))
    for c in range(asg.n_clusters):
        members = asg.members(c)
        w = _cluster_weights(P, members)
        merged[c] = (w * X[members]).sum(axis=0)
    return MergeOutput(merged=merged, importance=P)


def cmerge_grad(tokens, p, asg, upstream):
    """Gradients of ``sum(upstream * cmerge(tokens, p, asg).merged)``.

    Returns
    -------
    grad_tokens : ndarray of shape (n, c)
    grad_p : ndarray of shape (n, c)
    """
    X, P = _check_merge_inputs(tokens, p, asg)
    G = check_tokens(upstream, name="upstream")
    check_shape(G, (asg.n_clusters, X.shape[1]), "upstream")
    grad_x = np.zeros_like(X)
    grad_p = np.zeros_like(X)
    for c in range(asg.n_clusters):
        members = asg.members(c)
        w = _cluster_weights(P, members)
        xs = X[members]
        y = (w * xs).sum(axis=0)
        grad_x[members] = G[c] * w
        grad_p[members] = G[c] * w * (xs - y)
    return grad_x, grad_p


def token_interaction(merged, original, p, weights, return_attention=False):
    """Cross-attention from merged tokens to the original tokens.

    Queries come from ``merged``, keys and values from ``original``. The
    channel mean of ``p`` is added to the logit of each key, the rows are
    softmax-normalised, and the attended values are projected by ``w_o``
    and added back onto ``merged``.

    Parameters
    ----------
    merged : array-like of shape (m, c)
    original : array-like of shape (n, c)
    p : array-like of shape (n, c)
        Importance scores of the original tokens.
    weights : InteractionWeights
    return_attention : bool, default=False
        Also return the ``(m, n)`` attention matrix.
    """
    Y = check_tokens(merged, name="merged")
    X = check_tokens(original, name="original")
    P = check_tokens(p, name="importance")
    c = X.shape[1]
    check_shape(Y, (Y.shape[0], c), "merged")
    check_shape(P, X.shape, "importance")
    weights.validate(c)

    q = Y @ weights.w_q
    k = X @ weights.w_k
    v = X @ weights.w_v
    bias = P.mean(axis=1)
    logits = q @ k.T / math.sqrt(weights.d_k) + bias[None, :]
    attn = softmax(logits, axis=1)
    out = Y + (attn @ v) @ weights.w_o
    if return_attention:
        return out, attn
    return out
