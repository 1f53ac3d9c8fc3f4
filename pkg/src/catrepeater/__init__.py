"""Rate and fidelity engine for quantum repeaters built on entangled coherent states."""

from .analytic import LinkParams, MixedLinkState, RateReport, chain_time, chain_time_four_links
from .chain import ChainConfig, simulate_chain
from .optimize import SearchSpec, optimize

__all__ = [
    "ChainConfig",
    "LinkParams",
    "MixedLinkState",
    "RateReport",
    "SearchSpec",
    "chain_time",
    "chain_time_four_links",
    "optimize",
    "simulate_chain",
]
