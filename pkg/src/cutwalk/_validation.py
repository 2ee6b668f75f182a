"""Small argument checkers shared by the estimator wrappers and the CLI."""
import numbers

import numpy as np

from ._rng import check_seed  # noqa: F401  (re-exported)


def check_positive(value, name, strict=True):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise TypeError(f"{name} must be a finite real number")
    if value < 0 or (strict and value == 0):
        raise ValueError(f"{name} must be {'> 0' if strict else '>= 0'}")
    return float(value)


def check_count(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}")
    return int(value)


def check_hk(h, k):
    """``h > 0`` real and ``k >= 0`` integer."""
    return check_positive(h, "h"), check_count(k, "k")


def check_increasing(values, name="checkpoints"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0 or np.any(np.diff(arr) <= 0):
        raise ValueError(f"{name} must be a nonempty strictly increasing sequence")
    return arr
