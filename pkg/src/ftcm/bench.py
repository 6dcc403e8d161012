"""Synthetic blob generators and the uneven-density center-recovery bench."""

import numpy as np

from .clustering import dpc_fknn
from .exceptions import InvalidInput
from .numerics import Rng

__all__ = [
    "BENCH_COLUMNS",
    "make_blobs",
    "make_uneven_blobs",
    "parse_blob_spec",
    "recovers_centers",
    "run_uneven_bench",
]

BENCH_COLUMNS = ("k", "method", "trial", "recovered", "recovery_rate")
METHODS = {"dpc-fknn": "fuzzy", "dpc-knn": "knn"}


def parse_blob_spec(spec):
    """Parse ``"count:spread:x,y[,...];..."`` into (count, spread, center) triples."""
    blobs = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            count, spread, center = part.split(":")
            blob = (int(count), float(spread), np.array([float(v) for v in center.split(",")]))
        except ValueError:
            raise InvalidInput(f"bad blob spec {part!r}; expected count:spread:x,y") from None
        if blob[0] < 1 or blob[1] < 0:
            raise InvalidInput(f"bad blob spec {part!r}; count >= 1 and spread >= 0 required")
        blobs.append(blob)
    if not blobs:
        raise InvalidInput("empty blob spec")
    dims = {b[2].shape[0] for b in blobs}
    if len(dims) != 1:
        raise InvalidInput("all blob centers must have the same dimension")
    return blobs


def make_blobs(blobs, rng):
    """Isotropic Gaussian blobs.

    Returns
    -------
    X : ndarray of shape (n, dim)
    labels : ndarray of int, shape (n,)
    """
    points, labels = [], []
    for label, (count, spread, center) in enumerate(blobs):
        points.append(center + spread * rng.normal((count, center.shape[0])))
        labels.append(np.full(count, label))
    return np.vstack(points), np.concatenate(labels)


def make_uneven_blobs(rng, separation=4.0, dim=2):
    """One dense blob (80 points, spread 0.1) next to a sparse one (20, spread 1.0)."""
    far = np.zeros(dim)
    far[0] = separation
    return make_blobs([(80, 0.1, np.zeros(dim)), (20, 1.0, far)], rng)


def recovers_centers(X, labels, k, density):
    """True when the top ``n_blobs`` density peaks fall in distinct blobs."""
    n_blobs = int(labels.max()) + 1
    ratio = X.shape[0] // n_blobs
    _, _, selection = dpc_fknn(X, k=k, ratio=ratio, density=density)
    return len(set(labels[selection.centers].tolist())) == n_blobs


def run_uneven_bench(trials, k_list, seed=0):
    """Center-recovery table for both density estimators.

    Every (k, method) pair sees the same ``trials`` datasets. Rows are
    dicts keyed by ``BENCH_COLUMNS``; ``recovery_rate`` is the fraction of
    trials recovered for that (k, method).
    """
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    rng = Rng(seed)
    datasets = [make_uneven_blobs(rng.spawn()) for _ in range(trials)]
    rows = []
    for k in k_list:
        for method, density in METHODS.items():
            hits = [recovers_centers(X, y, k, density) for X, y in datasets]
            rate = sum(hits) / trials
            for t, hit in enumerate(hits):
                rows.append(
                    {"k": k, "method": method, "trial": t, "recovered": int(hit), "recovery_rate": rate}
                )
    return rows
