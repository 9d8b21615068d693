"""Measurement probabilities ``p(y|x)`` through Wick contraction and a Pfaffian.

For input ``|x> = c_{2 p_1} ... c_{2 p_l} |0>`` (up to phase) and measured
qubits ``j_1 < ... < j_k`` the probability is the vacuum expectation

    <0| c_{2p_l} .. c_{2p_1}  P_{j_1} .. P_{j_k}  c_{2p_1} .. c_{2p_l} |0>

with ``P_j = (U^dag a_j^dag U)(U^dag a_j U)`` when ``y_j = 1`` and the
reversed pair when ``y_j = 0``. Every factor is linear in Majoranas, so
Wick's theorem gives ``Pf(M)`` with ``M_ab = v_a^T G v_b`` (``a < b``) and
vacuum two-point matrix ``G = I + i Omega``. :func:`build_wick_system` and
:func:`wick_matrix` build exactly this system.

The evaluation routines use an equivalent, smaller system. A basis state
is itself Gaussian: its two-point matrix ``G_x`` equals ``G`` with the sign
of ``Omega`` flipped on occupied modes. Contracting against ``|x>`` directly
leaves only the ``2k`` projector vectors, so the Pfaffian has dimension
``2k`` instead of ``2(l + k)`` and gives the same value.
"""

from __future__ import annotations

import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fermiops import Circuit, circuit_r_matrix
from .skewlin import pfaffian

__all__ = [
    "ImaginaryResidual",
    "MeasurementQuery",
    "WickSystem",
    "IMAG_TOL",
    "build_t",
    "vacuum_covariance",
    "input_covariance",
    "build_wick_system",
    "wick_matrix",
    "probability",
    "probability_batch",
    "distribution",
    "bits_to_str",
    "parse_bits",
    "all_bitstrings",
]

IMAG_TOL = 1e-8
# bound on (batch * dim^2) complex entries per Pfaffian chunk
_CHUNK_ENTRIES = 2_000_000


class ImaginaryResidual(ArithmeticError):
    """The Pfaffian came out with a non-negligible imaginary part."""


def parse_bits(bits) -> tuple[int, ...]:
    if isinstance(bits, str):
        if any(ch not in "01" for ch in bits):
            raise ValueError(f"bitstring must contain only 0/1, got {bits!r}")
        return tuple(int(ch) for ch in bits)
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ValueError(f"bits must be 0 or 1, got {out}")
    return out


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def all_bitstrings(k: int) -> np.ndarray:
    """All ``2**k`` bit vectors in binary order, bit 0 most significant."""
    idx = np.arange(2**k)
    shifts = np.arange(k - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.int8)


@dataclass(frozen=True)
class MeasurementQuery:
    """Input basis state ``x``, measured qubits ``mask`` and outcomes ``y``.

    ``y`` lists the outcomes of the masked qubits in ascending qubit order.
    """

    x: tuple[int, ...]
    mask: tuple[int, ...]
    y: tuple[int, ...]

    def __post_init__(self):
        x, mask, y = parse_bits(self.x), parse_bits(self.mask), parse_bits(self.y)
        if len(x) != len(mask):
            raise ValueError(f"x has {len(x)} bits but mask has {len(mask)}")
        if sum(mask) != len(y):
            raise ValueError(f"mask selects {sum(mask)} qubits but y has {len(y)} bits")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "y", y)

    @classmethod
    def full(cls, x, y) -> "MeasurementQuery":
        x = parse_bits(x)
        return cls(x, (1,) * len(x), y)

    @property
    def n_modes(self) -> int:
        return len(self.x)

    @property
    def measured(self) -> tuple[int, ...]:
        return tuple(q for q, m in enumerate(self.mask) if m)

    @property
    def occupied(self) -> tuple[int, ...]:
        return tuple(p for p, b in enumerate(self.x) if b)


@dataclass(frozen=True)
class WickSystem:
    vectors: np.ndarray  # (2K, 2N) complex, one Majorana coefficient vector per row
    covariance: np.ndarray  # (2N, 2N) complex


def build_t(r) -> np.ndarray:
    """``T[i, j] = (R[j, 2i] + i R[j, 2i+1]) / 2`` so that ``U^dag a_i U = sum_j T[i, j] c_j``."""
    r = np.asarray(r, dtype=float)
    return 0.5 * (r[:, 0::2].T + 1j * r[:, 1::2].T)


def vacuum_covariance(n_modes: int) -> np.ndarray:
    """``G[k, l] = <0|c_k c_l|0>``, i.e. ``I + i Omega``."""
    g = np.eye(2 * n_modes, dtype=complex)
    for i in range(n_modes):
        g[2 * i, 2 * i + 1] = 1j
        g[2 * i + 1, 2 * i] = -1j
    return g


def _row_indices(q: MeasurementQuery, order: Sequence[int] | None = None) -> list[int]:
    """Rows of the table ``[I_{2N}; T; T*]`` making up the operator sequence."""
    n = q.n_modes
    occupied = q.occupied
    measured = q.measured
    outcome = dict(zip(measured, q.y))
    if order is not None:
        if sorted(order) != sorted(measured):
            raise ValueError("order must be a permutation of the measured qubits")
        measured = tuple(order)
    rows = [2 * p for p in reversed(occupied)]
    for j in measured:
        t_row, tc_row = 2 * n + j, 3 * n + j
        rows += [tc_row, t_row] if outcome[j] else [t_row, tc_row]
    rows += [2 * p for p in occupied]
    return rows


def build_wick_system(t, q: MeasurementQuery, order: Sequence[int] | None = None) -> WickSystem:
    """Operator sequence for ``q``.

    ``order`` permutes the measured qubits inside the sequence; the default
    is ascending qubit index. The projectors commute, so any order gives the
    same probability.
    """
    t = np.asarray(t)
    n = t.shape[0]
    if q.n_modes != n:
        raise ValueError(f"query has {q.n_modes} modes but T has {n}")
    table = np.vstack([np.eye(2 * n, dtype=complex), t, t.conj()])
    return WickSystem(table[_row_indices(q, order)], vacuum_covariance(n))


def _antisymmetrize_upper(p: np.ndarray) -> np.ndarray:
    upper = np.triu(p, 1)
    return upper - np.swapaxes(upper, -1, -2)


def wick_matrix(system: WickSystem) -> np.ndarray:
    v = system.vectors
    return _antisymmetrize_upper(v @ system.covariance @ v.T)


def input_covariance(x) -> np.ndarray:
    """``G_x[k, l] = <x|c_k c_l|x>`` for a basis state ``x``."""
    x = parse_bits(x)
    g = vacuum_covariance(len(x))
    for i, bit in enumerate(x):
        if bit:
            g[2 * i, 2 * i + 1] = -1j
            g[2 * i + 1, 2 * i] = 1j
    return g


def _checked(values: np.ndarray, clamp: bool) -> np.ndarray:
    worst = np.max(np.abs(values.imag), initial=0.0)
    if worst >= IMAG_TOL:
        raise ImaginaryResidual(f"Pfaffian imaginary part {worst:.3e} >= {IMAG_TOL}")
    real = values.real
    return np.clip(real, 0.0, 1.0) if clamp else real


def _times_omega(v: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """``v @ Omega_x`` where mode ``i`` carries the block ``signs[i] * [[0, 1], [-1, 0]]``."""
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2] * signs
    out[..., 1::2] = v[..., 0::2] * signs
    return out


def _projector_table(t: np.ndarray, x: tuple[int, ...]) -> np.ndarray:
    """``F G_x F^T`` for the stacked rows ``F = [T; T*]``."""
    ft = np.vstack([t, t.conj()])
    signs = 1.0 - 2.0 * np.asarray(x, dtype=float)
    return (ft + 1j * _times_omega(ft, signs)) @ ft.T


@functools.lru_cache(maxsize=64)
def _mask_rows(mask: tuple[int, ...]) -> np.ndarray:
    """Rows of ``[T; T*]`` for every outcome on ``mask``, one outcome per row.

    For measured qubit ``j`` (ascending) the pair is ``(T*_j, T_j)`` when the
    outcome bit is 1 and ``(T_j, T*_j)`` when it is 0.
    """
    n = len(mask)
    measured = np.array([q for q, m in enumerate(mask) if m], dtype=int)
    ys = all_bitstrings(len(measured)).astype(int)
    first = np.where(ys == 1, n + measured, measured)
    second = np.where(ys == 1, measured, n + measured)
    rows = np.stack([first, second], axis=2).reshape(len(ys), -1)
    rows.flags.writeable = False
    return rows


def _query_rows(q: MeasurementQuery) -> np.ndarray:
    n = q.n_modes
    rows = []
    for j, bit in zip(q.measured, q.y):
        rows += [n + j, j] if bit else [j, n + j]
    return np.array(rows, dtype=int)


def _pfaffians_from_rows(table: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Pfaffians of ``table[rows, rows]`` for each row list in ``idx`` (equal lengths)."""
    count, dim = idx.shape
    out = np.empty(count, dtype=complex)
    chunk = max(1, _CHUNK_ENTRIES // max(1, dim * dim))
    for start in range(0, count, chunk):
        sub = idx[start : start + chunk]
        m = _antisymmetrize_upper(table[sub[:, :, None], sub[:, None, :]])
        if len(sub) == 1:
            out[start] = pfaffian(m[0])
        else:
            out[start : start + chunk] = pfaffian(m)
    return out


def _pfaffians_for_t(t: np.ndarray, queries: Sequence[MeasurementQuery]) -> np.ndarray:
    """Raw complex values of ``p(y|x)`` for queries sharing one T matrix."""
    n = t.shape[0]
    out = np.empty(len(queries), dtype=complex)
    groups: dict[tuple, list[int]] = {}
    for pos, q in enumerate(queries):
        if q.n_modes != n:
            raise ValueError(f"query has {q.n_modes} modes but circuit has {n}")
        groups.setdefault((q.x, len(q.y)), []).append(pos)
    for (x, k), members in groups.items():
        if k == 0:
            out[members] = 1.0
            continue
        table = _projector_table(t, x)
        idx = np.array([_query_rows(queries[p]) for p in members])
        out[np.array(members)] = _pfaffians_from_rows(table, idx)
    return out


def probability(circuit: Circuit, q: MeasurementQuery) -> float:
    """``p(y|x)`` for one query, clamped to ``[0, 1]``.

    Raises :class:`ImaginaryResidual` if ``|Im Pf(M)| >= 1e-8``.
    """
    if q.n_modes != circuit.n_modes:
        raise ValueError(f"query has {q.n_modes} modes but circuit has {circuit.n_modes}")
    if not q.y:
        return 1.0
    t = build_t(circuit_r_matrix(circuit))
    return float(_checked(_pfaffians_for_t(t, [q]), clamp=True)[0])


def probability_batch(
    circuit: Circuit,
    queries: Sequence[MeasurementQuery],
    workers: int = 1,
    clamp: bool = True,
) -> np.ndarray:
    """``p(y|x)`` for many queries on one circuit; R and T are built once.

    With ``workers > 1`` the queries are split into contiguous slices
    evaluated on a thread pool; the output order always matches the input.
    """
    queries = list(queries)
    if not queries:
        return np.zeros(0)
    t = build_t(circuit_r_matrix(circuit))
    if workers <= 1 or len(queries) < 2 * workers:
        raw = _pfaffians_for_t(t, queries)
    else:
        bounds = np.linspace(0, len(queries), workers + 1).astype(int)
        slices = [queries[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda qs: _pfaffians_for_t(t, qs), slices))
        raw = np.concatenate(parts)
    return _checked(raw, clamp)


def distribution(circuit: Circuit, x, mask=None, workers: int = 1, clamp: bool = True) -> np.ndarray:
    """Probabilities of all ``2**k`` outcomes on the masked qubits.

    Entry ``b`` is the outcome whose bits (first masked qubit most
    significant) spell ``b`` in binary. Equivalent to :func:`probability_batch`
    over all outcomes, without building a query object per outcome.
    """
    x = parse_bits(x)
    mask = (1,) * len(x) if mask is None else parse_bits(mask)
    if len(x) != circuit.n_modes or len(mask) != circuit.n_modes:
        raise ValueError(
            f"x/mask have {len(x)}/{len(mask)} bits but circuit has {circuit.n_modes} modes"
        )
    if sum(mask) == 0:
        return np.ones(1)
    rows = _mask_rows(mask)
    table = _projector_table(build_t(circuit_r_matrix(circuit)), x)
    if workers <= 1 or len(rows) < 2 * workers:
        raw = _pfaffians_from_rows(table, rows)
    else:
        parts = np.array_split(np.arange(len(rows)), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = np.concatenate(list(pool.map(lambda p: _pfaffians_from_rows(table, rows[p]), parts)))
    return _checked(raw, clamp)
