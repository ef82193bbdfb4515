"""Channel coding and modulation: QC-LDPC codes, QPSK mapping, framing."""

from dataclasses import dataclass

import numpy as np

from .ldpc import (CodeSpec, decode, encode, load_alist, make_code,
                   save_alist, spec_from_parity, syndrome_ok)
from .modem import (demap_llr_exact, hard_decisions, qpsk_demap_llr, qpsk_map,
                    remodulate, soft_symbols, LLR_CAP, QPSK_SYMBOLS)
from .framing import CodewordFrame, deframe_codeword, frame_codeword


@dataclass
class SoftDataState:
    """Per-iteration decoder state for a batch of codewords."""

    llr_pre: np.ndarray       # (..., n) channel LLRs into the decoder
    llr_post: np.ndarray      # (..., n) posterior LLRs out of the decoder
    s_hat: np.ndarray         # (..., n_sym) soft symbol estimates
    sigma_sq: np.ndarray      # (...,) mean squared soft-symbol amplitude
    decoded_ok: np.ndarray    # (...,) parity-check success flags
    hard_bits: np.ndarray     # (..., n) hard decisions


__all__ = [
    "CodeSpec", "CodewordFrame", "SoftDataState", "LLR_CAP", "QPSK_SYMBOLS",
    "decode", "deframe_codeword", "demap_llr_exact", "encode",
    "frame_codeword", "hard_decisions", "load_alist", "make_code",
    "qpsk_demap_llr", "qpsk_map", "remodulate", "save_alist",
    "soft_symbols", "spec_from_parity", "syndrome_ok",
]
