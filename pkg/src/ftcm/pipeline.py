"""Multi-stage token clustering forward pass with spatial-origin tracking."""

import math
from dataclasses import dataclass, field, fields

import numpy as np

from ._validation import check_tokens
from .assignment import ClusterAssignment, assign_tokens
from .clustering import (
    DensityResult,
    distance_score,
    local_density,
    n_centers,
    select_centers,
)
from .exceptions import InternalInvariantViolation, InvalidInput
from .merging import InteractionWeights, MergeOutput, cmerge, importance_scores, token_interaction
from .numerics import Rng, knn_graph, pairwise_distances

__all__ = [
    "FtcmConfig",
    "FtcmWeights",
    "StageResult",
    "TokenSet",
    "ftcm_forward",
    "origin_label_map",
    "patch_embed",
    "run_stages",
    "stage_counts",
]


@dataclass(frozen=True)
class FtcmConfig:
    k_fuzzy: int = 5
    k_scs: int = 5
    ratio: int = 4
    stages: int = 3
    patch: int = 4
    channels: int = 16
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise InvalidInput(f"{f.name} must be an integer, got {value!r}")
            if f.name != "seed" and value < 1:
                raise InvalidInput(f"{f.name} must be >= 1, got {value}")

    @classmethod
    def from_dict(cls, mapping):
        """Build a config from a mapping, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise InvalidInput(f"unknown config keys: {', '.join(unknown)}")
        return cls(**mapping)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class FtcmWeights:
    """Learnable parameters of one clustering stage.

    The importance projection starts at zero, which makes merging a plain
    per-cluster mean until it is trained.
    """

    w_p: np.ndarray
    b_p: np.ndarray
    interaction: InteractionWeights

    @classmethod
    def init(cls, channels, rng):
        return cls(
            w_p=np.zeros((channels, channels)),
            b_p=np.zeros(channels),
            interaction=InteractionWeights.random(channels, rng),
        )


@dataclass
class TokenSet:
    """Token features plus the patch-grid cells each token stands for.

    ``origins[t]`` is a sorted int array of row-major cell indices over a
    ``grid_h x grid_w`` patch grid; together the origins partition the grid.
    """

    features: np.ndarray
    origins: list
    grid_h: int
    grid_w: int
    padding: tuple = field(default=(0, 0))

    @property
    def n_tokens(self):
        return self.features.shape[0]

    def validate(self):
        if len(self.origins) != self.n_tokens:
            raise InternalInvariantViolation("one origin set per token required")
        n_cells = self.grid_h * self.grid_w
        seen = np.zeros(n_cells, dtype=np.int64)
        for cells in self.origins:
            if len(cells) == 0:
                raise InternalInvariantViolation("empty origin set")
            if np.any((cells < 0) | (cells >= n_cells)):
                raise InternalInvariantViolation("origin cell outside the grid")
            np.add.at(seen, cells, 1)
        if np.any(seen != 1):
            raise InternalInvariantViolation("origin sets do not partition the grid")
        return self


@dataclass(frozen=True)
class StageResult:
    tokens: TokenSet
    assignment: ClusterAssignment
    merge: MergeOutput
    density: DensityResult = None


def patch_embed(image, cfg, rng):
    """Split an image into non-overlapping patches and project them.

    Each ``patch x patch x ch`` block is flattened (row, column, channel
    order) and multiplied by a Gaussian matrix drawn from ``rng`` and scaled
    by ``1/sqrt(patch**2 * ch)``. Images whose sides are not multiples of
    ``patch`` are zero-padded at the bottom and right; the pad sizes are kept
    in ``TokenSet.padding``.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.size == 0:
        raise InvalidInput(f"image must be a non-empty HxW or HxWxch grid, got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InvalidInput("image contains non-finite values")
    p = cfg.patch
    h, w, ch = img.shape
    pad_h, pad_w = (-h) % p, (-w) % p
    if pad_h or pad_w:
        img = np.pad(img, ((0, pad_h), (0, pad_w), (0, 0)))
    gh, gw = img.shape[0] // p, img.shape[1] // p
    patches = img.reshape(gh, p, gw, p, ch).transpose(0, 2, 1, 3, 4).reshape(gh * gw, p * p * ch)
    proj = rng.normal((p * p * ch, cfg.channels)) / math.sqrt(p * p * ch)
    features = patches @ proj
    origins = [np.array([t], dtype=np.intp) for t in range(gh * gw)]
    return TokenSet(features, origins, gh, gw, padding=(pad_h, pad_w))


def _single_token_stage(ts, weights):
    X = ts.features
    asg = ClusterAssignment(centers=np.array([0]), assign=np.array([0]))
    P = importance_scores(X, weights.w_p, weights.b_p)
    merge = cmerge(X, P, asg)
    out = token_interaction(merge.merged, X, P, weights.interaction)
    return StageResult(
        tokens=TokenSet(out, [ts.origins[0]], ts.grid_h, ts.grid_w, ts.padding),
        assignment=asg,
        merge=merge,
    )


def ftcm_stage(ts, cfg, weights):
    """One clustering-and-merging stage, keeping every intermediate."""
    X = check_tokens(ts.features)
    if X.shape[0] == 1:
        return _single_token_stage(ts, weights)

    dist = pairwise_distances(X)
    # Late stages routinely have fewer than k+1 tokens; clamp quietly here.
    k_max = X.shape[0] - 1
    density_graph = knn_graph(dist, min(cfg.k_fuzzy, k_max))
    rho = local_density(density_graph, density_graph.k)
    density = DensityResult.from_parts(rho, distance_score(dist, rho))
    selection = select_centers(density, cfg.ratio, X.shape[0])

    k_scs = min(cfg.k_scs, k_max)
    scs_graph = density_graph if k_scs == density_graph.k else knn_graph(dist, k_scs)
    asg = assign_tokens(scs_graph, selection)

    P = importance_scores(X, weights.w_p, weights.b_p)
    merge = cmerge(X, P, asg)
    out = token_interaction(merge.merged, X, P, weights.interaction)

    origins = [
        np.sort(np.concatenate([ts.origins[t] for t in asg.members(c)]))
        for c in range(asg.n_clusters)
    ]
    new = TokenSet(out, origins, ts.grid_h, ts.grid_w, ts.padding)
    return StageResult(tokens=new, assignment=asg, merge=merge, density=density)


def ftcm_forward(ts, cfg, weights):
    """Cluster, assign, merge and refine one token set.

    Returns
    -------
    tokens : TokenSet
        ``max(1, n // ratio)`` refined tokens with merged origins.
    assignment : ClusterAssignment
    merge : MergeOutput
        Merged features before the interaction step, plus the importance
        scores.
    """
    res = ftcm_stage(ts, cfg, weights)
    return res.tokens, res.assignment, res.merge


def stage_counts(n, ratio, stages):
    """Token count after each stage, starting with ``n``."""
    counts = [n]
    for _ in range(stages):
        counts.append(n_centers(counts[-1], ratio))
    return counts


def run_stages(image, cfg, rng=None):
    """Patch-embed ``image`` then apply ``cfg.stages`` clustering stages.

    Returns
    -------
    list of StageResult
        Entry 0 is the embedded patch grid (``assignment`` and ``merge``
        are ``None``); entry ``s`` is the output of stage ``s``.
    """
    if rng is None:
        rng = Rng(cfg.seed)
    ts = patch_embed(image, cfg, rng)
    results = [StageResult(tokens=ts, assignment=None, merge=None)]
    for _ in range(cfg.stages):
        weights = FtcmWeights.init(cfg.channels, rng.spawn())
        res = ftcm_stage(results[-1].tokens, cfg, weights)
        results.append(res)
    return results


def origin_label_map(ts):
    """``(grid_h, grid_w)`` int grid giving the owning token of every cell."""
    ts.validate()
    labels = np.empty(ts.grid_h * ts.grid_w, dtype=np.intp)
    for t, cells in enumerate(ts.origins):
        labels[cells] = t
    return labels.reshape(ts.grid_h, ts.grid_w)
