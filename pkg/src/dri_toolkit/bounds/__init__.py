"""Seed constants, the Phi_n operator and the envelope chain h_bar_1..h_bar_n."""

from .envelope_chain import (EnvelopeChain, block_bound_check, bootstrap_check,
                             build_envelope_chain, feller_bound_check, phi_apply,
                             weighted_sum_check)

__all__ = [
    "EnvelopeChain", "block_bound_check", "bootstrap_check", "build_envelope_chain",
    "feller_bound_check", "phi_apply", "weighted_sum_check",
]
