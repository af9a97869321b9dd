"""Uniform-grid function representation and tail envelopes."""

from .grid_function import (EnvelopeKind, GridFunction, TailEnvelope, block_inf,
                            block_sup, fit_tail_exponent, lp_norm)

__all__ = [
    "EnvelopeKind", "GridFunction", "TailEnvelope", "block_inf", "block_sup",
    "fit_tail_exponent", "lp_norm",
]
