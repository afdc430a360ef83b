"""Visible compression of commuting mixed-state ensembles with shared randomness."""

__version__ = "0.1.0"

from .analysis import (
    BudgetExceededError,
    CodebookSize,
    DiagonalDistribution,
    alice_distribution,
    average_error,
    average_fidelity,
    basis_overhead,
    blind_counterexample,
    bob_distribution,
    error_probability,
    fidelity,
    fidelity_lower_bound,
    match_probability,
    sequence_error,
    typical_match_probability,
)
from .codec import (
    CodecParams,
    Message,
    decode,
    encode,
    margin_schedule,
    message_bit_length,
    paper_S_schedule,
)
from .ensemble import (
    DiagonalState,
    Ensemble,
    average_state,
    entropy_bits,
    levitin_holevo,
)
from .estimator import VisibleCompressor
from .sequence import SequenceSpec, block_structure, mixture_weights
from .shared_randomness import SharedSeed, derive_stream

__all__ = [name for name in dir() if not name.startswith("_")]
