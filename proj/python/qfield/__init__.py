"""Simulation laboratory for stationary multi-indexed random fields.

Thin convenience layer over the C++ core exposed by ``qfield._qfield``.
"""

from ._qfield import (
    config_hash,
    model_roundtrip,
    replicate_sum,
    run_config,
    sigma2,
    u_moment_series,
)

__all__ = [
    "config_hash",
    "model_roundtrip",
    "replicate_sum",
    "run_config",
    "sigma2",
    "u_moment_series",
]
