"""Hybrid Gibbs / Metropolis-Hastings sampler and chain diagnostics."""
from .chain import (ChainConfig, ChainOutput, NumericalFailure, initial_params,
                    initial_state, run_chain, sweep)
from .diagnostics import (batch_means_se, cusum_path, hpd_interval, inefficiency_factor,
                          mpm)
from .steps import (SamplerState, Target, Tuner, rtruncnorm_pos, sample_static_params,
                    sample_variance_jump_occurrences, sample_variance_jump_sizes,
                    sample_volatility)

__all__ = [
    "ChainConfig", "ChainOutput", "NumericalFailure", "initial_params", "initial_state",
    "run_chain", "sweep", "batch_means_se", "cusum_path", "hpd_interval",
    "inefficiency_factor", "mpm", "SamplerState", "Target", "Tuner", "rtruncnorm_pos",
    "sample_static_params", "sample_variance_jump_occurrences",
    "sample_variance_jump_sizes", "sample_volatility",
]
