"""Gates, circuits, Majorana conjugation matrices and Pauli export.

Conventions
-----------
* Modes (qubits) are 0-based. Majorana ``c_{2i}`` and ``c_{2i+1}`` belong to
  mode ``i``.
* A gate with coefficient matrix ``A`` has Hamiltonian ``H = (i/4) c^T A c``
  and acts as ``exp(-i t H)``. Its conjugation matrix is
  ``R = exp(-A t)``, i.e. ``U c_k U^dag = sum_l R[k, l] c_l``.
* ``gates[0]`` is applied to the ket first and the circuit matrix is
  ``R_total = R_0 @ R_1 @ ... @ R_{m-1}``.
* Constant (identity) energy offsets are dropped everywhere.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .skewlin import skew_exp

__all__ = [
    "PreservingGate",
    "GeneralGate",
    "DenseLayer",
    "GateSpec",
    "Circuit",
    "PauliTerm",
    "preserving_as_general",
    "assemble_alpha",
    "gate_r_matrix",
    "circuit_r_matrix",
    "pauli_decompose",
    "nn_pairs",
]


def _check_pair(i: int, j: int) -> tuple[int, int]:
    if int(i) != i or int(j) != j:
        raise ValueError(f"mode indices must be integers, got ({i}, {j})")
    i, j = int(i), int(j)
    if not 0 <= i < j:
        raise ValueError(f"mode pair must satisfy 0 <= i < j, got ({i}, {j})")
    return i, j


def _check_params(params, size: int) -> tuple[float, ...]:
    params = tuple(float(p) for p in params)
    if len(params) != size:
        raise ValueError(f"expected {size} parameters, got {len(params)}")
    if not all(math.isfinite(p) for p in params):
        raise ValueError(f"parameters must be finite, got {params}")
    return params


def preserving_as_general(a: float, b: float, c: float, d: float) -> tuple[float, ...]:
    """General-gate parameters ``(a, b, c, d, e, f)`` of a number-preserving gate.

    ``Preserving(a, b, c, d) == General(a=d, b=c, c=-c, d=d, e=a, f=b)``.
    """
    return (d, c, -c, d, a, b)


@dataclass(frozen=True)
class PreservingGate:
    """Number-preserving pair gate.

    ``H = a n_i + b n_j + (c + i d) a_i^dag a_j + h.c.`` up to a constant:
    ``a``/``b`` are on-site energies and ``c + i d`` is the hopping amplitude.
    """

    i: int
    j: int
    params: tuple[float, float, float, float]
    time: float = 1.0

    n_params = 4

    def __post_init__(self):
        i, j = _check_pair(self.i, self.j)
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "params", _check_params(self.params, 4))
        object.__setattr__(self, "time", float(self.time))

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.i, self.j)

    def with_params(self, params) -> "PreservingGate":
        return PreservingGate(self.i, self.j, tuple(params), self.time)

    def local_alpha(self) -> np.ndarray:
        a, b, c, d = self.params
        # rows/cols: c_{2i}, c_{2i+1}, c_{2j}, c_{2j+1}
        upper = np.array(
            [
                [0.0, a, d, c],
                [0.0, 0.0, -c, d],
                [0.0, 0.0, 0.0, b],
                [0.0, 0.0, 0.0, 0.0],
            ]
        )
        return upper - upper.T


@dataclass(frozen=True)
class GeneralGate:
    """Pair gate with the full six-parameter quadratic block.

    The 4x4 block on ``(c_{2i}, c_{2i+1}, c_{2j}, c_{2j+1})`` is
    ``[[0, e, a, b], [-e, 0, c, d], [-a, -c, 0, f], [-b, -d, -f, 0]]``
    with ``params = (a, b, c, d, e, f)``.
    """

    i: int
    j: int
    params: tuple[float, float, float, float, float, float]
    time: float = 1.0

    n_params = 6

    def __post_init__(self):
        i, j = _check_pair(self.i, self.j)
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "params", _check_params(self.params, 6))
        object.__setattr__(self, "time", float(self.time))

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.i, self.j)

    def with_params(self, params) -> "GeneralGate":
        return GeneralGate(self.i, self.j, tuple(params), self.time)

    def local_alpha(self) -> np.ndarray:
        a, b, c, d, e, f = self.params
        return np.array(
            [
                [0.0, e, a, b],
                [-e, 0.0, c, d],
                [-a, -c, 0.0, f],
                [-b, -d, -f, 0.0],
            ]
        )


def _block_gate(i, j, params) -> PreservingGate | GeneralGate:
    if len(params) == 4:
        return PreservingGate(i, j, tuple(params))
    if len(params) == 6:
        return GeneralGate(i, j, tuple(params))
    raise ValueError(f"a dense-layer block takes 4 or 6 parameters, got {len(params)}")


@dataclass(frozen=True)
class DenseLayer:
    """One evolution under a sum of pair Hamiltonians.

    ``blocks`` is a sequence of ``(i, j, params)``; four parameters give a
    number-preserving block, six a general block. The layer's coefficient
    matrix is the sum of the blocks' matrices.
    """

    blocks: tuple[tuple[int, int, tuple[float, ...]], ...]
    time: float = 1.0
    _gates: tuple = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        gates = tuple(_block_gate(i, j, params) for i, j, params in self.blocks)
        if not gates:
            raise ValueError("a dense layer needs at least one block")
        pairs = [g.modes for g in gates]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate mode pair in dense layer")
        object.__setattr__(
            self, "blocks", tuple((g.i, g.j, g.params) for g in gates)
        )
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "_gates", gates)

    @property
    def pair_gates(self) -> tuple[PreservingGate | GeneralGate, ...]:
        return self._gates

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(sorted({m for g in self._gates for m in g.modes}))

    @property
    def params(self) -> tuple[float, ...]:
        return tuple(p for g in self._gates for p in g.params)

    @property
    def n_params(self) -> int:
        return sum(g.n_params for g in self._gates)

    def with_params(self, params) -> "DenseLayer":
        params = list(params)
        if len(params) != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {len(params)}")
        blocks, pos = [], 0
        for g in self._gates:
            blocks.append((g.i, g.j, tuple(params[pos : pos + g.n_params])))
            pos += g.n_params
        return DenseLayer(tuple(blocks), self.time)

    def local_alpha(self) -> np.ndarray:
        index = {m: k for k, m in enumerate(self.modes)}
        out = np.zeros((2 * len(index), 2 * len(index)))
        for g in self._gates:
            sl = _majorana_indices([index[g.i], index[g.j]])
            out[np.ix_(sl, sl)] += g.local_alpha()
        return out


GateSpec = Union[PreservingGate, GeneralGate, DenseLayer]


@dataclass(frozen=True)
class Circuit:
    n_modes: int
    gates: tuple[GateSpec, ...] = ()

    def __post_init__(self):
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError(f"n_modes must be a positive integer, got {self.n_modes}")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.modes) >= self.n_modes:
                raise ValueError(f"gate {g} touches a mode >= {self.n_modes}")

    @property
    def n_params(self) -> int:
        return sum(g.n_params for g in self.gates)

    def parameters(self) -> np.ndarray:
        """Flat parameter vector in gate order, then per-gate order."""
        return np.array([p for g in self.gates for p in g.params], dtype=float)

    def with_parameters(self, theta) -> "Circuit":
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {theta.size}")
        gates, pos = [], 0
        for g in self.gates:
            gates.append(g.with_params(theta[pos : pos + g.n_params]))
            pos += g.n_params
        return Circuit(self.n_modes, tuple(gates))


class PauliTerm(NamedTuple):
    coefficient: float
    ops: str


def nn_pairs(n_modes: int) -> list[tuple[int, int]]:
    """Open-chain nearest-neighbour pairs ``(0, 1), (1, 2), ...``."""
    return [(i, i + 1) for i in range(n_modes - 1)]


def _majorana_indices(modes) -> list[int]:
    return [k for m in modes for k in (2 * m, 2 * m + 1)]


def assemble_alpha(gate: GateSpec, n_modes: int) -> np.ndarray:
    """Full ``2N x 2N`` coefficient matrix of a gate on ``n_modes`` modes."""
    if max(gate.modes) >= n_modes:
        raise ValueError(f"gate touches mode {max(gate.modes)} but n_modes={n_modes}")
    out = np.zeros((2 * n_modes, 2 * n_modes))
    idx = _majorana_indices(gate.modes)
    out[np.ix_(idx, idx)] = gate.local_alpha()
    return out


def gate_r_matrix(gate: GateSpec, n_modes: int) -> np.ndarray:
    return skew_exp(assemble_alpha(gate, n_modes), gate.time)


_FLUSH_BELOW = 1e-150


@functools.lru_cache(maxsize=8192)
def _local_r(gate: GateSpec) -> np.ndarray:
    r = skew_exp(gate.local_alpha(), gate.time)
    r.flags.writeable = False
    return r


def circuit_r_matrix(circuit: Circuit) -> np.ndarray:
    """Total conjugation matrix ``R_0 @ R_1 @ ... @ R_{m-1}``.

    Each gate only mixes the Majoranas of its own modes, so right-multiplying
    by it touches just those columns.
    """
    r = np.eye(2 * circuit.n_modes)
    for gate in circuit.gates:
        idx = _majorana_indices(gate.modes)
        r[:, idx] = r[:, idx] @ _local_r(gate)
    # Light-cone tails decay into subnormals, which are very slow downstream.
    r[np.abs(r) < _FLUSH_BELOW] = 0.0
    return r


def _string(n_modes: int, i: int, j: int, left: str, right: str) -> str:
    ops = ["I"] * n_modes
    ops[i] = left
    ops[j] = right
    for k in range(i + 1, j):
        ops[k] = "Z"
    return "".join(ops)


def _z(n_modes: int, k: int) -> str:
    ops = ["I"] * n_modes
    ops[k] = "Z"
    return "".join(ops)


def _pair_terms(gate, n_modes: int) -> list[PauliTerm]:
    i, j = gate.i, gate.j
    if isinstance(gate, PreservingGate):
        a, b, c, d = gate.params
        raw = [
            (-a / 2, _z(n_modes, i)),
            (-b / 2, _z(n_modes, j)),
            (c / 2, _string(n_modes, i, j, "X", "X")),
            (c / 2, _string(n_modes, i, j, "Y", "Y")),
            (d / 2, _string(n_modes, i, j, "Y", "X")),
            (-d / 2, _string(n_modes, i, j, "X", "Y")),
        ]
    else:
        a, b, c, d, e, f = gate.params
        raw = [
            (-e / 2, _z(n_modes, i)),
            (-f / 2, _z(n_modes, j)),
            (-c / 2, _string(n_modes, i, j, "X", "X")),
            (b / 2, _string(n_modes, i, j, "Y", "Y")),
            (-d / 2, _string(n_modes, i, j, "X", "Y")),
            (a / 2, _string(n_modes, i, j, "Y", "X")),
        ]
    return [PauliTerm(coef, ops) for coef, ops in raw if coef != 0.0]


def pauli_decompose(gate: GateSpec, n_modes: int) -> list[PauliTerm]:
    """Jordan-Wigner Pauli terms of a gate's Hamiltonian (constants dropped).

    Zero-coefficient terms are omitted. A dense layer yields the
    concatenation of its blocks' terms, unmerged.
    """
    if max(gate.modes) >= n_modes:
        raise ValueError(f"gate touches mode {max(gate.modes)} but n_modes={n_modes}")
    if isinstance(gate, DenseLayer):
        return [t for g in gate.pair_gates for t in _pair_terms(g, n_modes)]
    return _pair_terms(gate, n_modes)
