"""Polynomial-time simulation of free-fermion (matchgate) circuits.

The main entry points are :class:`Circuit` with its gate types,
:func:`probability` / :func:`distribution` for measurement probabilities, and
the :mod:`fermisim.oracle` exact-diagonalization reference.
"""

from .fermiops import (
    Circuit,
    DenseLayer,
    GeneralGate,
    PauliTerm,
    PreservingGate,
    assemble_alpha,
    circuit_r_matrix,
    gate_r_matrix,
    nn_pairs,
    pauli_decompose,
)
from .measure import (
    ImaginaryResidual,
    MeasurementQuery,
    build_t,
    build_wick_system,
    distribution,
    probability,
    probability_batch,
)
from .skewlin import canonical_decompose, pfaffian, skew_exp

__all__ = [
    "Circuit",
    "DenseLayer",
    "GeneralGate",
    "PauliTerm",
    "PreservingGate",
    "assemble_alpha",
    "circuit_r_matrix",
    "gate_r_matrix",
    "nn_pairs",
    "pauli_decompose",
    "ImaginaryResidual",
    "MeasurementQuery",
    "build_t",
    "build_wick_system",
    "distribution",
    "probability",
    "probability_batch",
    "canonical_decompose",
    "pfaffian",
    "skew_exp",
]

__version__ = "0.1.0"
