"""Exact-diagonalization reference for small systems.

Qubit 0 is the leftmost character of a bitstring and the most significant
bit of the basis index; Kronecker products put qubit 0 leftmost. Gate
Hamiltonians come from :func:`fermisim.fermiops.pauli_decompose` and are
exponentiated by Hermitian eigendecomposition on the span of qubits they
touch, then applied to the state vector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fermiops import Circuit, GateSpec, PauliTerm, pauli_decompose
from .measure import MeasurementQuery, parse_bits

__all__ = [
    "MAX_ORACLE_MODES",
    "MAX_MAXCUT_NODES",
    "WeightedGraph",
    "pauli_to_dense",
    "gate_unitary",
    "circuit_unitary",
    "evolve",
    "exact_probability",
    "exact_distribution",
    "majorana_operator",
    "maxcut_exhaustive",
    "cut_values",
]

MAX_ORACLE_MODES = 14
MAX_MAXCUT_NODES = 20


def _check_size(n: int) -> None:
    if n > MAX_ORACLE_MODES:
        raise ValueError(f"exact diagonalization is limited to {MAX_ORACLE_MODES} qubits, got {n}")


def pauli_to_dense(terms: Sequence[PauliTerm], n: int) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of a sum of weighted Pauli strings."""
    _check_size(n)
    dim = 2**n
    basis = np.arange(dim)
    out = np.zeros((dim, dim), dtype=complex)
    for coef, ops in terms:
        if len(ops) != n:
            raise ValueError(f"Pauli string {ops!r} does not have length {n}")
        flip = 0
        phase = np.full(dim, complex(coef))
        for q, op in enumerate(ops):
            shift = n - 1 - q
            bit = (basis >> shift) & 1
            if op == "I":
                continue
            if op == "X":
                flip |= 1 << shift
            elif op == "Y":
                flip |= 1 << shift
                phase *= np.where(bit, -1j, 1j)
            elif op == "Z":
                phase *= np.where(bit, -1.0, 1.0)
            else:
                raise ValueError(f"unknown Pauli operator {op!r}")
        out[basis ^ flip, basis] += phase
    return out


def _expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * t * evals)) @ evecs.conj().T


def _span(gate: GateSpec) -> tuple[int, int]:
    return min(gate.modes), max(gate.modes)


def gate_unitary(gate: GateSpec, n: int) -> np.ndarray:
    """``exp(-i t H)`` on all ``n`` qubits (dense)."""
    _check_size(n)
    return _expm_hermitian(pauli_to_dense(pauli_decompose(gate, n), n), gate.time)


def _local_unitary(gate: GateSpec, n: int) -> tuple[int, int, np.ndarray]:
    lo, hi = _span(gate)
    width = hi - lo + 1
    terms = [PauliTerm(c, ops[lo : hi + 1]) for c, ops in pauli_decompose(gate, n)]
    for c, ops in pauli_decompose(gate, n):
        if set(ops[:lo] + ops[hi + 1 :]) - {"I"}:
            raise AssertionError(f"term {ops} leaves the span [{lo}, {hi}]")
    return lo, hi, _expm_hermitian(pauli_to_dense(terms, width), gate.time)


def _apply_local(psi: np.ndarray, n: int, lo: int, hi: int, u: np.ndarray) -> np.ndarray:
    shaped = psi.reshape(2**lo, 2 ** (hi - lo + 1), 2 ** (n - hi - 1))
    return np.einsum("ij,ajb->aib", u, shaped).reshape(-1)


def basis_state(x) -> np.ndarray:
    x = parse_bits(x)
    psi = np.zeros(2 ** len(x), dtype=complex)
    psi[int("".join(map(str, x)), 2) if x else 0] = 1.0
    return psi


def evolve(circuit: Circuit, x) -> np.ndarray:
    """State vector ``U|x>`` with ``gates[0]`` applied first."""
    n = circuit.n_modes
    _check_size(n)
    psi = basis_state(x)
    if len(psi) != 2**n:
        raise ValueError(f"x has {int(np.log2(len(psi)))} bits but circuit has {n} modes")
    for gate in circuit.gates:
        lo, hi, u = _local_unitary(gate, n)
        psi = _apply_local(psi, n, lo, hi, u)
    return psi


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense ``U = U_{m-1} ... U_1 U_0``; intended for a handful of qubits."""
    n = circuit.n_modes
    _check_size(n)
    u = np.eye(2**n, dtype=complex)
    for gate in circuit.gates:
        u = gate_unitary(gate, n) @ u
    return u


def _marginal(probs: np.ndarray, n: int, mask) -> np.ndarray:
    measured = [q for q, m in enumerate(mask) if m]
    unmeasured = [q for q, m in enumerate(mask) if not m]
    cube = probs.reshape((2,) * n) if n else probs
    cube = cube.transpose(measured + unmeasured)
    return cube.reshape(2 ** len(measured), -1).sum(axis=1)


def exact_distribution(circuit: Circuit, x, mask=None) -> np.ndarray:
    """All ``2**k`` outcome probabilities on the masked qubits (binary order)."""
    n = circuit.n_modes
    mask = (1,) * n if mask is None else parse_bits(mask)
    probs = np.abs(evolve(circuit, x)) ** 2
    return _marginal(probs, n, mask)


def exact_probability(circuit: Circuit, q: MeasurementQuery) -> float:
    if q.n_modes != circuit.n_modes:
        raise ValueError(f"query has {q.n_modes} modes but circuit has {circuit.n_modes}")
    dist = exact_distribution(circuit, q.x, q.mask)
    index = int("".join(map(str, q.y)), 2) if q.y else 0
    return float(dist[index])


def majorana_operator(k: int, n: int) -> np.ndarray:
    """Dense Jordan-Wigner Majorana: ``c_{2j} = Z..Z X_j``, ``c_{2j+1} = Z..Z Y_j``."""
    j, kind = divmod(k, 2)
    ops = "Z" * j + ("Y" if kind else "X") + "I" * (n - j - 1)
    return pauli_to_dense([PauliTerm(1.0, ops)], n)


@dataclass(frozen=True)
class WeightedGraph:
    n_nodes: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        seen = set()
        edges = []
        for i, j, w in self.edges:
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) outside {self.n_nodes} nodes")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            edges.append((i, j, w))
        object.__setattr__(self, "edges", tuple(edges))

    @property
    def total_weight(self) -> float:
        return float(sum(abs(w) for _, _, w in self.edges))

    def cut_value(self, bits) -> float:
        bits = parse_bits(bits)
        return float(sum(w for i, j, w in self.edges if bits[i] != bits[j]))

    @classmethod
    def random_complete(cls, n_nodes: int, seed: int) -> "WeightedGraph":
        """Complete graph with weights uniform in [0, 1) rounded to 2 digits."""
        rng = np.random.default_rng(seed)
        edges = [
            (i, j, round(float(rng.random()), 2))
            for i, j in itertools.combinations(range(n_nodes), 2)
        ]
        return cls(n_nodes, tuple(edges))


def cut_values(graph: WeightedGraph) -> np.ndarray:
    """Cut weight of every assignment, indexed in binary order (node 0 = MSB)."""
    n = graph.n_nodes
    if n > MAX_MAXCUT_NODES:
        raise ValueError(f"exhaustive MaxCut is limited to {MAX_MAXCUT_NODES} nodes, got {n}")
    idx = np.arange(2**n)
    values = np.zeros(2**n)
    for i, j, w in graph.edges:
        bi = (idx >> (n - 1 - i)) & 1
        bj = (idx >> (n - 1 - j)) & 1
        values += w * (bi != bj)
    return values


def maxcut_exhaustive(graph: WeightedGraph) -> tuple[str, float]:
    """Best assignment over all ``2**n``; ties go to the lowest binary value."""
    values = cut_values(graph)
    best = int(np.argmax(values))
    return format(best, f"0{graph.n_nodes}b"), float(values[best])
