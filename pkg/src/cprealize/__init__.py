"""Quasi-realizations of stochastic processes and their completely positive liftings."""
from .process_core import Alphabet, QuasiRealization, StructuralError, probability_array, word_probability
from .quantum_ops import CPRealization, QuantumInstrument, SuperOperator, as_quasi_realization
from .quotient import equivalence_isomorphism, quotient_realization
from .sdp_feasibility import EngineConfig, FeasibilityOutcome, FeasibilityProblem, solve

__all__ = [
    "Alphabet", "QuasiRealization", "StructuralError", "probability_array", "word_probability",
    "CPRealization", "QuantumInstrument", "SuperOperator", "as_quasi_realization",
    "equivalence_isomorphism", "quotient_realization",
    "EngineConfig", "FeasibilityOutcome", "FeasibilityProblem", "solve",
]
