"""Branching MERA circuits: exact contraction, Gaussian simulation and fits."""
from .circuit import BranchingCircuit, CircuitSpec, build_circuit, parameter_count
from .cone import energy, expectation, reduced_density
from .errors import (DegenerateInputError, InvalidInputError, NumericalError,
                     ResourceLimitError, StallError)
from .gaussian import CovarianceMatrix, block_entropy, run_branching_gaussian
from .scaling import EntropyCurve, FitReport, entropy_curve, fit_forms

__version__ = "0.1.0"

__all__ = [
    "BranchingCircuit", "CircuitSpec", "build_circuit", "parameter_count",
    "energy", "expectation", "reduced_density",
    "DegenerateInputError", "InvalidInputError", "NumericalError", "ResourceLimitError",
    "StallError", "CovarianceMatrix", "block_entropy", "run_branching_gaussian",
    "EntropyCurve", "FitReport", "entropy_curve", "fit_forms",
]
