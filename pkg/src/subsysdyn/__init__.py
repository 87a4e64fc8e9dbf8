"""Stochastic measurement-only dynamics of Pauli subsystem codes."""

from __future__ import annotations

from .codes import CodeParameters, CodeSpec, build_code, compute_code_parameters, frustration_graph, half_cut, is_bipartite
from .dynamics import DynamicsConfig, EnsembleResult, TrajectoryRecord, run_ensemble, run_trajectory
from .pauli import ContractViolation, PauliOperator, SymplecticMatrix, commutes, multiply
from .state import Region, StabilizerState

__all__ = [
    "CodeParameters",
    "CodeSpec",
    "ContractViolation",
    "DynamicsConfig",
    "EnsembleResult",
    "PauliOperator",
    "Region",
    "StabilizerState",
    "SymplecticMatrix",
    "TrajectoryRecord",
    "build_code",
    "commutes",
    "compute_code_parameters",
    "frustration_graph",
    "half_cut",
    "is_bipartite",
    "multiply",
    "run_ensemble",
    "run_trajectory",
]
