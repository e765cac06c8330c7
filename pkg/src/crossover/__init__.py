"""Numerical construction of the crossover orbit of a weakly long-range phi^4 flow."""
from . import bounds, flow, kernels, scan, seqspace
from .errors import (
    ContractError,
    CrossoverError,
    DivergenceError,
    DomainError,
    NumericalError,
    PreconditionError,
    TruncationError,
    UsageError,
)
from .flow import FlowParams, GbarSequence, build_gbar
from .kernels import KernelSet, build_kernels
from .seqspace import DeviationSequence, NormWeights, SolverConfig, solve_orbit

__version__ = "0.1.0"

__all__ = [
    "bounds",
    "flow",
    "kernels",
    "scan",
    "seqspace",
    "FlowParams",
    "GbarSequence",
    "build_gbar",
    "KernelSet",
    "build_kernels",
    "DeviationSequence",
    "NormWeights",
    "SolverConfig",
    "solve_orbit",
    "CrossoverError",
    "UsageError",
    "DomainError",
    "NumericalError",
    "TruncationError",
    "PreconditionError",
    "ContractError",
    "DivergenceError",
]
