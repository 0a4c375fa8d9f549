"""Input checks shared by the estimators."""

from __future__ import annotations

import math
import numbers

import numpy as np
from sklearn.utils import check_array, check_random_state

from .complex import SparseMetricSpace


def check_thresholds(tau_u, epsilon) -> tuple:
    for name, x in (("tau_u", tau_u), ("epsilon", epsilon)):
        if not isinstance(x, numbers.Real) or not (x > 0 and math.isfinite(x)):
            raise ValueError(f"{name} must be a positive finite number, got {x!r}")
    return float(tau_u), float(epsilon)


def check_dims(dims) -> tuple:
    if isinstance(dims, numbers.Integral):
        dims = (dims,)
    dims = tuple(sorted(set(int(d) for d in dims)))
    if not dims or any(d not in (1, 2) for d in dims):
        raise ValueError(f"dims must be drawn from (1, 2), got {dims!r}")
    return dims


def check_points(X, min_dim: int = 1, max_dim: int | None = None) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    if X.shape[1] < min_dim or (max_dim is not None and X.shape[1] > max_dim):
        raise ValueError(f"points must have between {min_dim} and {max_dim} coordinates")
    return X


def check_space(X, metric: str, threshold: float) -> tuple:
    """Build the sparse space for ``X``; returns ``(space, coordinates or None)``."""
    if isinstance(X, SparseMetricSpace):
        return X, None
    if metric == "euclidean":
        P = check_points(X)
        return SparseMetricSpace.from_points(P, threshold), P
    if metric == "precomputed":
        D = np.asarray(X, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("precomputed distances must be a square matrix")
        return SparseMetricSpace.from_distance_matrix(D, threshold), None
    raise ValueError(f"unknown metric {metric!r}")


def check_seed(random_state) -> int:
    """Integer seed for the counter-based streams."""
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    rs = check_random_state(random_state)
    return int(rs.randint(0, 2**31 - 1))
