"""Input checks shared by the estimator facade and the command line."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.utils.validation import check_array

from .ensemble import Ensemble, EnsembleError
from .shared_randomness import SharedSeed


def check_ensemble(ensemble) -> Ensemble:
    """Accept an :class:`Ensemble`, its dict description, or a JSON path."""
    if isinstance(ensemble, Ensemble):
        return ensemble
    if isinstance(ensemble, dict):
        return Ensemble.from_dict(ensemble)
    if isinstance(ensemble, (str, Path)):
        return Ensemble.load(ensemble)
    raise EnsembleError("an ensemble (object, dict or JSON path) is required")


def check_seed(seed, session_label="") -> SharedSeed:
    if isinstance(seed, SharedSeed):
        return seed
    if seed is None:
        return SharedSeed.generate(session_label)
    if isinstance(seed, (bytes, bytearray)):
        return SharedSeed(bytes(seed), session_label)
    return SharedSeed.from_hex(str(seed), session_label)


def check_labels(X, n_states: int) -> np.ndarray:
    """2-D integer array of state labels in ``range(n_states)``."""
    X = check_array(X, dtype=None, ensure_2d=True)
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise ValueError("labels must be integers")
        X = X.astype(np.int64)
    if X.size and (X.min() < 0 or X.max() >= n_states):
        raise ValueError(f"labels must lie in range(0, {n_states})")
    return X
