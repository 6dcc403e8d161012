"""Input validation helpers shared by the estimators and the functional API."""

import numpy as np
from sklearn.utils import check_array

from .exceptions import InvalidInput


def check_tokens(X, name="tokens", min_rows=1):
    """Return ``X`` as a finite, C-contiguous float64 matrix.

    Raises
    ------
    InvalidInput
        If ``X`` is not 2-D, has fewer than ``min_rows`` rows, or holds
        NaN/Inf.
    """
    try:
        X = check_array(
            X,
            dtype=np.float64,
            order="C",
            ensure_min_samples=min_rows,
            ensure_all_finite=True,
            copy=False,
        )
    except ValueError as exc:
        raise InvalidInput(f"{name}: {exc}") from exc
    return X


def check_vector(v, name="vector", size=None):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInput(f"{name} must be 1-D, got shape {v.shape}")
    if size is not None and v.shape[0] != size:
        raise InvalidInput(f"{name} must have length {size}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise InvalidInput(f"{name} contains non-finite values")
    return v


def check_shape(a, shape, name):
    if a.shape != tuple(shape):
        raise InvalidInput(f"{name} has shape {a.shape}, expected {tuple(shape)}")
