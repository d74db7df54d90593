"""Steganographic communication over Pauli noise: channels, codebooks, audits and simulation."""

from .bounds import (
    BoundInputs,
    achievable_rate,
    key_rate,
    max_output_entropy,
    upper_bound_M,
)
from .codec import (
    Codebook,
    SecretKeyStream,
    build_codebook,
    decode_ml,
    encode,
    key_bits_per_block,
    partition_count,
)
from .pauli import PauliChannel, compose, compose_parameter, sample_error, solve_intermediate
from .qecc import SyndromeTable, coset_output_entropy, get_code
from .secrecy import induced_distribution, secrecy_deficit, tv_distance
from .sim import ExperimentConfig, SimReport, run_trials, run_with_code
from .typicality import TypicalSetSpec, enumerate_typical, is_typical, typical_mass, typical_size

__version__ = "0.1.0"

__all__ = [
    "BoundInputs", "Codebook", "ExperimentConfig", "PauliChannel", "SecretKeyStream",
    "SimReport", "SyndromeTable", "TypicalSetSpec", "achievable_rate", "build_codebook",
    "compose", "compose_parameter", "coset_output_entropy", "decode_ml", "encode",
    "enumerate_typical", "get_code", "induced_distribution", "is_typical", "key_bits_per_block",
    "key_rate", "max_output_entropy", "partition_count", "run_trials", "run_with_code",
    "sample_error", "secrecy_deficit", "solve_intermediate", "tv_distance", "typical_mass",
    "typical_size", "upper_bound_M",
]
