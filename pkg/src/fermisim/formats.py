"""Line-oriented text formats: circuit configs, PBM patterns, PDFs, edge lists.

Circuit config
--------------
One record per line; ``#`` starts a comment. Fields are ``key=value``
tokens and unknown keys are rejected::

    n_modes 4
    seed 7
    preserving i=0 j=1 params=0.1,0.2,0.3,0.4 time=1.0
    general i=0 j=3 params=1,0,0,0,0,0
    layer time=0.5
    block i=0 j=1 params=0,0,1,0
    block i=2 j=3
    end

``n_modes`` must come first. A gate or block without ``params`` is filled
uniformly from ``[0, pi)`` by a generator seeded with ``seed``, in file order,
which makes the seed line mandatory in that case. :func:`format_circuit_config`
always writes every parameter explicitly, so parsing its output reproduces
the same config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fermiops import Circuit, DenseLayer, GeneralGate, PreservingGate
from .oracle import WeightedGraph

__all__ = [
    "ParseError",
    "CircuitConfig",
    "parse_circuit_config",
    "format_circuit_config",
    "read_circuit",
    "parse_pbm",
    "parse_pdf_lines",
    "parse_edge_list",
    "read_text",
]

PDF_SUM_TOL = 1e-6


class ParseError(ValueError):
    """Malformed input; ``line`` and ``column`` are 1-based (0 when unknown)."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class CircuitConfig:
    circuit: Circuit
    seed: int | None = None


def _tokens(text: str):
    """Yield ``(line_no, [(column, token), ...])`` for non-blank lines."""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = []
        pos = 0
        for part in line.split():
            pos = line.index(part, pos)
            toks.append((pos + 1, part))
            pos += len(part)
        if toks:
            yield line_no, toks


def _int(tok: str, line: int, col: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", line, col) from None


def _float(tok: str, line: int, col: int) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", line, col) from None
    if not math.isfinite(value):
        raise ParseError(f"value must be finite, got {tok!r}", line, col)
    return value


_GATE_KEYS = {"preserving": {"i", "j", "params", "time"}, "general": {"i", "j", "params", "time"}}
_N_PARAMS = {"preserving": 4, "general": 6}


def _fields(toks, allowed: set[str], line: int) -> dict[str, tuple[int, str]]:
    out = {}
    for col, tok in toks:
        key, sep, value = tok.partition("=")
        if not sep or not value:
            raise ParseError(f"expected key=value, got {tok!r}", line, col)
        if key not in allowed:
            raise ParseError(f"unknown field {key!r}", line, col)
        if key in out:
            raise ParseError(f"duplicate field {key!r}", line, col)
        out[key] = (col, value)
    return out


def parse_circuit_config(text: str) -> CircuitConfig:
    n_modes = None
    seed = None
    # each record: (kind, i, j, params or None, time, line, col); layers hold lists
    records: list = []
    layer = None
    last_line = 0
    for line, toks in _tokens(text):
        last_line = line
        col, head = toks[0]
        rest = toks[1:]
        if head == "n_modes":
            if n_modes is not None or records or seed is not None:
                raise ParseError("n_modes must appear once, on the first record", line, col)
            if len(rest) != 1:
                raise ParseError("n_modes takes one value", line, col)
            n_modes = _int(rest[0][1], line, rest[0][0])
            if n_modes < 1:
                raise ParseError(f"n_modes must be positive, got {n_modes}", line, rest[0][0])
            continue
        if n_modes is None:
            raise ParseError("the first record must be n_modes", line, col)
        if head == "seed":
            if seed is not None or records or layer is not None:
                raise ParseError("seed must appear once, before any gate", line, col)
            if len(rest) != 1:
                raise ParseError("seed takes one value", line, col)
            seed = _int(rest[0][1], line, rest[0][0])
        elif head in _GATE_KEYS or head == "block":
            if head == "block" and layer is None:
                raise ParseError("block outside a layer", line, col)
            if head != "block" and layer is not None:
                raise ParseError(f"{head} inside a layer; use block", line, col)
            allowed = {"i", "j", "params"} if head == "block" else _GATE_KEYS[head]
            f = _fields(rest, allowed, line)
            for key in ("i", "j"):
                if key not in f:
                    raise ParseError(f"missing field {key!r}", line, col)
            i = _int(f["i"][1], line, f["i"][0])
            j = _int(f["j"][1], line, f["j"][0])
            if not 0 <= i < j < n_modes:
                raise ParseError(f"need 0 <= i < j < {n_modes}, got ({i}, {j})", line, f["i"][0])
            params = None
            if "params" in f:
                pcol, ptext = f["params"]
                params = tuple(_float(p, line, pcol) for p in ptext.split(","))
                if head != "block" and len(params) != _N_PARAMS[head]:
                    raise ParseError(
                        f"{head} takes {_N_PARAMS[head]} parameters, got {len(params)}", line, pcol
                    )
                if head == "block" and len(params) not in (4, 6):
                    raise ParseError(f"block takes 4 or 6 parameters, got {len(params)}", line, pcol)
            time = _float(f["time"][1], line, f["time"][0]) if "time" in f else 1.0
            record = (head, i, j, params, time, line, col)
            if head == "block":
                layer["blocks"].append(record)
            else:
                records.append(record)
        elif head == "layer":
            if layer is not None:
                raise ParseError("nested layer", line, col)
            f = _fields(rest, {"time"}, line)
            time = _float(f["time"][1], line, f["time"][0]) if "time" in f else 1.0
            layer = {"time": time, "blocks": [], "line": line, "col": col}
        elif head == "end":
            if layer is None or rest:
                raise ParseError("unexpected end", line, col)
            if not layer["blocks"]:
                raise ParseError("empty layer", layer["line"], layer["col"])
            records.append(("layer", layer))
            layer = None
        else:
            raise ParseError(f"unknown record {head!r}", line, col)
    if layer is not None:
        raise ParseError("layer without end", last_line + 1, 1)
    if n_modes is None:
        raise ParseError("missing n_modes record", 1, 1)

    rng = np.random.default_rng(seed) if seed is not None else None

    def fill(rec, size: int) -> tuple[float, ...]:
        params = rec[3]
        if params is not None:
            return params
        if rng is None:
            raise ParseError("parameters omitted but no seed given", rec[5], rec[6])
        return tuple(float(v) for v in math.pi * rng.random(size))

    gates = []
    for rec in records:
        if rec[0] == "layer":
            info = rec[1]
            blocks = []
            for b in info["blocks"]:
                size = len(b[3]) if b[3] is not None else 4
                blocks.append((b[1], b[2], fill(b, size)))
            try:
                gates.append(DenseLayer(tuple(blocks), info["time"]))
            except ValueError as exc:
                raise ParseError(str(exc), info["line"], info["col"]) from None
        else:
            kind, i, j, _, time, line, col = rec
            cls = PreservingGate if kind == "preserving" else GeneralGate
            gates.append(cls(i, j, fill(rec, _N_PARAMS[kind]), time))
    return CircuitConfig(Circuit(n_modes, tuple(gates)), seed)


def _num(v: float) -> str:
    return repr(float(v))


def format_circuit_config(config: CircuitConfig | Circuit) -> str:
    if isinstance(config, Circuit):
        config = CircuitConfig(config)
    circuit = config.circuit
    lines = [f"n_modes {circuit.n_modes}"]
    if config.seed is not None:
        lines.append(f"seed {config.seed}")
    for g in circuit.gates:
        if isinstance(g, DenseLayer):
            lines.append(f"layer time={_num(g.time)}")
            for i, j, params in g.blocks:
                lines.append(f"block i={i} j={j} params={','.join(map(_num, params))}")
            lines.append("end")
        else:
            kind = "preserving" if isinstance(g, PreservingGate) else "general"
            lines.append(
                f"{kind} i={g.i} j={g.j} params={','.join(map(_num, g.params))} time={_num(g.time)}"
            )
    return "\n".join(lines) + "\n"


def read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not ASCII text ({exc.reason})") from None


def read_circuit(path) -> CircuitConfig:
    return parse_circuit_config(read_text(path))


def parse_pbm(text: str) -> tuple[int, int, tuple[int, ...]]:
    """Plain PBM (``P1``): returns ``(width, height, bits)`` in row-major order."""
    values: list[tuple[int, int, str]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        pos = 0
        for part in line.split():
            pos = line.index(part, pos)
            values.append((line_no, pos + 1, part))
            pos += len(part)
    if not values or values[0][2] != "P1":
        line, col = (values[0][0], values[0][1]) if values else (1, 1)
        raise ParseError("expected the P1 magic number", line, col)
    if len(values) < 3:
        raise ParseError("missing width/height", values[-1][0], values[-1][1])
    width = _int(values[1][2], values[1][0], values[1][1])
    height = _int(values[2][2], values[2][0], values[2][1])
    if width < 1 or height < 1:
        raise ParseError(f"bad size {width}x{height}", values[1][0], values[1][1])
    bits = []
    for line, col, tok in values[3:]:
        for offset, ch in enumerate(tok):
            if ch not in "01":
                raise ParseError(f"pixel must be 0 or 1, got {ch!r}", line, col + offset)
            bits.append(int(ch))
    if len(bits) != width * height:
        raise ParseError(f"expected {width * height} pixels, got {len(bits)}", values[-1][0], 1)
    return width, height, tuple(bits)


def parse_pdf_lines(text: str) -> np.ndarray:
    """Lines ``bitstring probability``; missing outcomes get probability 0.

    Returns the ``2**k`` vector indexed by the bitstrings read as binary
    numbers. The probabilities must be non-negative and sum to 1 within 1e-6.
    """
    k = None
    entries: dict[int, float] = {}
    last = 1
    for line, toks in _tokens(text):
        last = line
        if len(toks) != 2:
            raise ParseError("expected 'bitstring probability'", line, toks[0][0])
        (bcol, bits), (pcol, ptext) = toks
        if any(ch not in "01" for ch in bits):
            raise ParseError(f"bitstring must contain only 0/1, got {bits!r}", line, bcol)
        if k is None:
            k = len(bits)
        elif len(bits) != k:
            raise ParseError(f"bitstring length {len(bits)} differs from {k}", line, bcol)
        p = _float(ptext, line, pcol)
        if p < 0:
            raise ParseError(f"probability must be non-negative, got {p}", line, pcol)
        index = int(bits, 2)
        if index in entries:
            raise ParseError(f"duplicate outcome {bits}", line, bcol)
        entries[index] = p
    if k is None:
        raise ParseError("no outcomes given", 1, 1)
    pdf = np.zeros(2**k)
    for index, p in entries.items():
        pdf[index] = p
    if abs(pdf.sum() - 1.0) > PDF_SUM_TOL:
        raise ParseError(f"probabilities sum to {pdf.sum():.9g}, not 1", last, 1)
    return pdf


def parse_edge_list(text: str, n_nodes: int | None = None) -> WeightedGraph:
    """Lines ``i j weight``; the node count defaults to the largest index + 1."""
    edges = []
    for line, toks in _tokens(text):
        if len(toks) != 3:
            raise ParseError("expected 'i j weight'", line, toks[0][0])
        i = _int(toks[0][1], line, toks[0][0])
        j = _int(toks[1][1], line, toks[1][0])
        w = _float(toks[2][1], line, toks[2][0])
        if i < 0 or j < 0:
            raise ParseError("node indices must be non-negative", line, toks[0][0])
        edges.append((i, j, w, line))
    if not edges:
        raise ParseError("no edges given", 1, 1)
    if n_nodes is None:
        n_nodes = max(max(i, j) for i, j, _, _ in edges) + 1
    try:
        return WeightedGraph(n_nodes, tuple((i, j, w) for i, j, w, _ in edges))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
