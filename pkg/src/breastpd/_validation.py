"""Input checks shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import BreastPDError


def check_features(X, min_rows=1):
    X = check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_min_samples=1)
    if X.shape[0] < min_rows:
        raise BreastPDError(f"need at least {min_rows} rows, got {X.shape[0]}")
    return X


def check_binary_labels(y, n=None):
    """Coerce labels to 0/1 ints and require both classes."""
    y = np.asarray(y).ravel()
    if n is not None and y.shape[0] != n:
        raise BreastPDError(f"{y.shape[0]} labels for {n} rows")
    values = np.unique(y)
    if values.size < 2:
        raise BreastPDError(f"single-class labels ({values.tolist()}); both classes are required")
    if values.size > 2:
        raise BreastPDError(f"expected binary labels, got {values.tolist()}")
    if set(values.tolist()) <= {0, 1}:
        return y.astype(np.int64)
    return (y == values[1]).astype(np.int64)


def check_same_shape(a, b, what="masks"):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise BreastPDError(f"{what} differ in shape: {a.shape} vs {b.shape}")
    return a, b
