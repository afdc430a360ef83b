"""scikit-learn style facade over the codec.

Rows of ``X`` are label sequences (one state index per system). ``transform``
compresses each row into a :class:`~lhcompress.codec.Message` and
``inverse_transform`` turns messages back into basis strings, so the
compressor can sit in a pipeline or be cloned and grid-searched over its
codebook policy.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_ensemble, check_labels, check_seed
from .analysis import fidelity_lower_bound, sequence_error
from .codec import (
    DEFAULT_LITERAL_CAP,
    FAST,
    decode,
    encode,
    message_bit_length,
    schedule_params,
)
from .ensemble import levitin_holevo
from .sequence import SequenceSpec


class VisibleCompressor(TransformerMixin, BaseEstimator):
    """Compress label sequences of a commuting ensemble with a shared codebook.

    Parameters
    ----------
    ensemble : Ensemble, dict or path
        The source; dicts and JSON files use the ``d``/``states``/``weights``
        schema.
    seed : str, bytes or SharedSeed, optional
        64 hex characters shared by both parties. ``None`` draws a fresh seed
        at fit time.
    s_policy : str
        ``"margin:<delta>"``, ``"explicit:<S>"`` or ``"paper:<K>,<alpha>"``.
    mode : {"fast", "literal"}
    literal_cap : int
        Largest codebook literal mode will materialize.
    session_label : str
    start_index : int
        Sequence index of the first row; row ``i`` uses ``start_index + i``.

    Attributes
    ----------
    params_ : CodecParams
    levitin_holevo_ : float
    bits_per_signal_ : float
        Message length over ``N`` under the fixed-width layout.
    """

    def __init__(
        self,
        ensemble=None,
        seed=None,
        s_policy="margin:0.25",
        mode=FAST,
        literal_cap=DEFAULT_LITERAL_CAP,
        session_label="",
        start_index=0,
    ):
        self.ensemble = ensemble
        self.seed = seed
        self.s_policy = s_policy
        self.mode = mode
        self.literal_cap = literal_cap
        self.session_label = session_label
        self.start_index = start_index

    def fit(self, X, y=None):
        self.ensemble_ = check_ensemble(self.ensemble)
        X = check_labels(X, self.ensemble_.L)
        self.seed_ = check_seed(self.seed, self.session_label)
        self.n_features_in_ = X.shape[1]
        self.params_ = schedule_params(
            self.n_features_in_, self.ensemble_, self.s_policy, self.mode, self.literal_cap
        )
        self.levitin_holevo_ = levitin_holevo(self.ensemble_)
        self.bits_per_signal_ = (
            message_bit_length(self.params_, self.ensemble_.L) / self.n_features_in_
        )
        return self

    def _rows(self, X):
        check_is_fitted(self, "params_")
        X = check_labels(X, self.ensemble_.L)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} columns, the compressor was fit with {self.n_features_in_}"
            )
        return [SequenceSpec(tuple(row), self.ensemble_.L) for row in X]

    def transform(self, X):
        """Encode each row; returns a 1-D object array of messages."""
        specs = self._rows(X)
        out = np.empty(len(specs), dtype=object)
        for i, spec in enumerate(specs):
            out[i] = encode(spec, self.ensemble_, self.params_, self.seed_, self.start_index + i)
        return out

    def inverse_transform(self, messages, X=None):
        """Decode messages into an ``(n, N)`` array of basis symbols.

        Fast mode needs the original label rows ``X`` for block positions.
        """
        check_is_fitted(self, "params_")
        specs = self._rows(X) if X is not None else [None] * len(messages)
        if len(specs) != len(messages):
            raise ValueError("messages and X have different lengths")
        out = np.zeros((len(messages), self.n_features_in_), dtype=np.uint8)
        for i, (msg, spec) in enumerate(zip(messages, specs)):
            out[i] = decode(msg, self.ensemble_, self.params_, self.seed_, self.start_index + i, spec)
        return out

    def score(self, X, y=None):
        """Mean exact fidelity lower bound ``1 - E_K`` over the rows."""
        specs = self._rows(X)
        cache = {}
        total = 0.0
        for spec in specs:
            if spec.counts not in cache:
                e = sequence_error(SequenceSpec.contiguous(spec.counts), self.ensemble_, self.params_.S)
                cache[spec.counts] = float(fidelity_lower_bound(e))
            total += cache[spec.counts]
        return total / len(specs)
