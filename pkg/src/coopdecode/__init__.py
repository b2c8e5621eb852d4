"""Cooperative-optimization decoding of LDPC codes, with a sum-product baseline."""

from .channel import ChannelParams, ReceivedFrame, llr, sigma_from_ebn0, transmit
from .codes import (
    LinearCode,
    ParityCheckMatrix,
    alist_read,
    alist_write,
    build_gallager_regular,
    build_hamming74,
    build_product_code,
    code_from_h,
    rank_gf2,
    syndrome,
)
from .coop_core import (
    AssignmentConstraints,
    CoopConfig,
    CostDecomposition,
    IterationReport,
    PropagationMatrix,
    TableSubproblem,
    build_propagation_matrix,
    consensus_check,
    coop_iterate,
    gap_certificate,
    run,
    validate_propagation_matrix,
)
from .ldpc_coop import (
    CoopDecoderConfig,
    CooperativeDecoder,
    DecodeResult,
    DecodeStatus,
    TannerDecomposition,
    decode_cooperative,
    parity_constrained_min,
    unary_costs,
)
from .spa import SumProductDecoder, decode_sum_product

__version__ = "0.1.0"
