"""Quantized min-sum LDPC decoding: density evolution, decoders, simulation."""
from .channel import (ChannelSpec, QuantizedChannel, build_quantized_channel,
                      channel_llr, gaussian_cell_pmf)
from .de import (DEReport, ReliabilitySchedule, de_init_quantized,
                 de_init_unquantized, de_run, lin_distribution, make_de_runner,
                 optimize_steps, threshold_search)
from .decoders import (DecodeResult, DecoderConfig, decode_batch, mqms_decode,
                       qms_decode, spa_decode, syndrome_check)
from .ensemble import DegreeDistribution, get_ensemble
from .graph import (TannerGraph, alist_read, alist_write, degree_sequence,
                    girth, peg_construct)
from .harness import SimConfig, SimRecord, run_campaign, run_point, write_records_csv
from .quant import QuantizerSpec, quantize, reliability_from_pmf
from .stability import build_jacobian, is_stable, spectral_radius

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec", "QuantizedChannel", "build_quantized_channel", "channel_llr",
    "gaussian_cell_pmf", "DEReport", "ReliabilitySchedule", "de_init_quantized",
    "de_init_unquantized", "de_run", "lin_distribution", "make_de_runner",
    "optimize_steps", "threshold_search", "DecodeResult", "DecoderConfig",
    "decode_batch", "mqms_decode", "qms_decode", "spa_decode", "syndrome_check",
    "DegreeDistribution", "get_ensemble", "TannerGraph", "alist_read",
    "alist_write", "degree_sequence", "girth", "peg_construct", "SimConfig",
    "SimRecord", "run_campaign", "run_point", "write_records_csv",
    "QuantizerSpec", "quantize", "reliability_from_pmf", "build_jacobian",
    "is_stable", "spectral_radius",
]
