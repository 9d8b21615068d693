"""Command-line interface: ``prob``, ``compare``, ``bench``, ``train`` and ``pauli``.

Exit codes: 0 success, 2 parse error, 3 dimension mismatch, 4 oracle size
ceiling exceeded, 5 numerical failure (non-finite loss, imaginary Pfaffian
residual, or a ``compare`` run whose total variation is not below 1e-9).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

import numpy as np

from .fermiops import Circuit, PreservingGate, nn_pairs, pauli_decompose
from .formats import (
    ParseError,
    parse_edge_list,
    parse_pbm,
    parse_pdf_lines,
    read_circuit,
    read_text,
)
from .measure import (
    ImaginaryResidual,
    MeasurementQuery,
    all_bitstrings,
    bits_to_str,
    distribution,
    parse_bits,
    probability,
)
from .optimize import (
    MaxcutExpectation,
    Mmd,
    NegProb,
    NonFiniteLoss,
    random_parameters,
    train,
)
from .oracle import MAX_ORACLE_MODES, exact_distribution, maxcut_exhaustive

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DIMENSION = 3
EXIT_ORACLE_CEILING = 4
EXIT_NUMERIC = 5

TV_TOL = 1e-9
BENCH_HEADER = ["n_qubits", "n_layers", "wall_seconds_mean", "wall_seconds_std", "repetitions"]


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt(value: float) -> str:
    """At least 12 significant digits."""
    value = float(value)
    if value == 0.0 or abs(value) >= 0.1:
        return f"{value:.12f}"
    return f"{value:.12e}"


def _bits_arg(text: str, name: str) -> tuple[int, ...]:
    try:
        return parse_bits(text)
    except ValueError as exc:
        raise CliError(f"--{name}: {exc}", EXIT_PARSE) from None


def _check_len(bits, n: int, name: str) -> None:
    if len(bits) != n:
        raise CliError(f"--{name} has {len(bits)} bits but the circuit has {n} modes", EXIT_DIMENSION)


def _workers(args) -> int:
    return 1 if args.serial else (os.cpu_count() or 1)


def cmd_prob(args) -> int:
    circuit = read_circuit(args.circuit).circuit
    n = circuit.n_modes
    x = _bits_arg(args.x, "x")
    _check_len(x, n, "x")
    mask = _bits_arg(args.mask, "mask") if args.mask is not None else (1,) * n
    _check_len(mask, n, "mask")
    y = _bits_arg(args.y, "y") if args.y is not None else ()
    if len(y) != sum(mask):
        raise CliError(f"--y has {len(y)} bits but the mask selects {sum(mask)}", EXIT_DIMENSION)
    print(fmt(probability(circuit, MeasurementQuery(x, mask, y))))
    return EXIT_OK


def cmd_compare(args) -> int:
    circuit = read_circuit(args.circuit).circuit
    n = circuit.n_modes
    if n > MAX_ORACLE_MODES:
        raise CliError(
            f"compare needs exact diagonalization, limited to {MAX_ORACLE_MODES} modes (got {n})",
            EXIT_ORACLE_CEILING,
        )
    x = _bits_arg(args.x, "x")
    _check_len(x, n, "x")
    fast = distribution(circuit, x, workers=_workers(args))
    exact = exact_distribution(circuit, x)
    print("outcome\tfermion\texact\tabs_diff")
    for bits, pf, pe in zip(all_bitstrings(n), fast, exact):
        print(f"{bits_to_str(bits)}\t{fmt(pf)}\t{fmt(pe)}\t{abs(pf - pe):.3e}")
    tv = float(np.sum(np.abs(fast - exact)))
    print(f"TV\t{tv:.6e}")
    return EXIT_OK if tv < TV_TOL else EXIT_NUMERIC


def nn_circuit(n_modes: int, layers: int, seed: int) -> Circuit:
    """``layers`` nearest-neighbour sweeps of preserving gates, seeded parameters."""
    gates = tuple(PreservingGate(i, j, (0.0,) * 4) for i, j in nn_pairs(n_modes)) * layers
    return random_parameters(Circuit(n_modes, gates), seed)


def alternating_bits(n: int) -> tuple[int, ...]:
    return tuple((k + 1) % 2 for k in range(n))


def run_bench(n_list, layers: int, reps: int, seed: int) -> list[dict]:
    records = []
    for n in n_list:
        circuit = nn_circuit(n, layers, seed + n)
        x = alternating_bits(n)
        query = MeasurementQuery.full(x, x)
        times = []
        for _ in range(reps):
            start = time.perf_counter()
            probability(circuit, query)
            times.append(time.perf_counter() - start)
        records.append(
            {
                "n_qubits": n,
                "n_layers": layers,
                "wall_seconds_mean": float(np.mean(times)),
                "wall_seconds_std": float(np.std(times, ddof=1)) if reps > 1 else 0.0,
                "repetitions": reps,
            }
        )
    return records


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"--n-list must be comma-separated integers, got {text!r}", EXIT_PARSE) from None
    if not values:
        raise CliError("--n-list is empty", EXIT_PARSE)
    return values


def cmd_bench(args) -> int:
    n_list = _int_list(args.n_list)
    if any(n < 2 or n % 2 for n in n_list):
        raise CliError(f"bench sizes must be even and >= 2, got {n_list}", EXIT_DIMENSION)
    if args.reps < 1 or args.layers < 1:
        raise CliError("--reps and --layers must be >= 1", EXIT_PARSE)
    records = run_bench(n_list, args.layers, args.reps, args.seed)
    try:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=BENCH_HEADER, lineterminator="\n")
            writer.writeheader()
            for rec in records:
                writer.writerow({**rec, "wall_seconds_mean": repr(rec["wall_seconds_mean"]),
                                 "wall_seconds_std": repr(rec["wall_seconds_std"])})
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", 1) from None
    for rec in records:
        print(f"N={rec['n_qubits']}\tmean={rec['wall_seconds_mean']:.4f}s")
    return EXIT_OK


def _memorize_setup(text: str, layers: int):
    width, height, bits = parse_pbm(text)
    n = width * height
    if n < 2:
        raise CliError("the pattern needs at least 2 pixels", EXIT_DIMENSION)
    gates = tuple(PreservingGate(i, j, (0.0,) * 4) for i, j in nn_pairs(n)) * layers
    return Circuit(n, gates), NegProb(MeasurementQuery.full(bits, bits))


def born_ansatz(k: int, layers: int) -> tuple[Circuit, tuple[int, ...], tuple[int, ...]]:
    """Star ansatz on ``2k`` modes, input ``1^k 0^k``, first ``k`` qubits measured."""
    n = 2 * k
    gates = tuple(PreservingGate(i, n - 1, (0.0,) * 4) for i in range(n - 1)) * layers
    x = (1,) * k + (0,) * k
    return Circuit(n, gates), x, x


def maxcut_ansatz(n_nodes: int, layers: int) -> tuple[Circuit, tuple[int, ...], tuple[int, ...]]:
    """Nearest-neighbour layers on ``2n`` modes, input ``1010...``, first ``n`` qubits measured."""
    n = 2 * n_nodes
    gates = tuple(PreservingGate(i, j, (0.0,) * 4) for i, j in nn_pairs(n)) * layers
    mask = (1,) * n_nodes + (0,) * n_nodes
    return Circuit(n, gates), alternating_bits(n), mask


TASK_DEFAULTS = {
    # task: (layers, beta1)
    "memorize": (1, 0.5),
    "born": (2, 0.5),
    "maxcut": (2, 0.9),
}


def cmd_train(args) -> int:
    text = read_text(args.input)
    default_layers, beta1 = TASK_DEFAULTS[args.task]
    layers = args.layers if args.layers is not None else default_layers
    if layers < 1 or args.iters < 1:
        raise CliError("--layers and --iters must be >= 1", EXIT_PARSE)
    if args.task == "memorize":
        circuit, obj = _memorize_setup(text, layers)
    elif args.task == "born":
        pdf = parse_pdf_lines(text)
        k = int(np.log2(len(pdf)))
        circuit, x, mask = born_ansatz(k, layers)
        obj = Mmd(x, mask, pdf)
    else:
        graph = parse_edge_list(text)
        circuit, x, mask = maxcut_ansatz(graph.n_nodes, layers)
        obj = MaxcutExpectation(graph, x, mask)

    result = train(obj, circuit, args.iters, args.lr, seed=args.seed, beta1=beta1,
                   workers=_workers(args))
    out = Path(args.out)
    try:
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", "loss"])
            for it, loss in enumerate(result.losses):
                writer.writerow([it, repr(float(loss))])
        params_path = out.with_name(out.stem + ".params.csv")
        with open(params_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index", "value"])
            for idx, value in enumerate(result.circuit.parameters()):
                writer.writerow([idx, repr(float(value))])
    except OSError as exc:
        raise CliError(f"cannot write output: {exc}", 1) from None

    final = result.circuit
    if args.task == "memorize":
        print(f"p\t{fmt(-obj.evaluate(final))}")
    elif args.task == "born":
        print(f"mmd\t{fmt(obj.evaluate(final))}")
    else:
        bits, cut = obj.best_outcome(final)
        best_bits, best_cut = maxcut_exhaustive(obj.graph)
        print(f"expected_cut\t{fmt(-obj.evaluate(final))}")
        print(f"argmax\t{bits}\t{fmt(cut)}")
        print(f"optimum\t{best_bits}\t{fmt(best_cut)}")
    return EXIT_OK


def cmd_pauli(args) -> int:
    circuit = read_circuit(args.circuit).circuit
    terms = [t for g in circuit.gates for t in pauli_decompose(g, circuit.n_modes)]
    for coef, ops in sorted(terms, key=lambda t: t.ops):
        print(f"{coef!r}\t{ops}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fermisim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, circuit=True):
        if circuit:
            p.add_argument("--circuit", required=True, help="circuit config file")
        p.add_argument("--serial", action="store_true", help="single-threaded evaluation")

    p = sub.add_parser("prob", help="print p(y|x)")
    common(p)
    p.add_argument("--x", required=True, help="input bitstring")
    p.add_argument("--y", help="outcome bits of the masked qubits (ascending order)")
    p.add_argument("--mask", help="measured qubits as a bitstring (default: all)")
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("compare", help="fermion engine vs exact diagonalization")
    common(p)
    p.add_argument("--x", required=True, help="input bitstring")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="time single full-measurement probabilities")
    common(p, circuit=False)
    p.add_argument("--n-list", default="100,200,300,400,500,600,700,800,900,1000")
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train", help="train a circuit on a demo task")
    common(p, circuit=False)
    p.add_argument("--task", required=True, choices=sorted(TASK_DEFAULTS))
    p.add_argument("--input", required=True, help="PBM pattern, PDF lines or edge list")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layers", type=int, help="ansatz depth (task default if omitted)")
    p.add_argument("--out", required=True, help="loss-trace CSV; parameters go to <stem>.params.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("pauli", help="print the Pauli terms of every gate")
    common(p)
    p.set_defaults(func=cmd_pauli)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (NonFiniteLoss, ImaginaryResidual) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
