"""Training objectives, finite-difference gradients and Adam.

Every objective is a function of measurement probabilities only, so it can be
evaluated by the Pfaffian engine at any size. Gradients are central finite
differences over the flat parameter vector of a :class:`Circuit`
(``Circuit.parameters()`` / ``Circuit.with_parameters()``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

import numpy as np

from .fermiops import Circuit
from .measure import MeasurementQuery, all_bitstrings, distribution, parse_bits, probability
from .oracle import WeightedGraph, cut_values

__all__ = [
    "NonFiniteLoss",
    "Objective",
    "NegProb",
    "Mmd",
    "MaxcutExpectation",
    "RbfMixtureKernel",
    "DEFAULT_SIGMAS",
    "evaluate",
    "gradient_fd",
    "AdamState",
    "adam_step",
    "TrainResult",
    "train",
    "random_parameters",
]

# A spread of bandwidths from narrow (near-delta) to wide.
DEFAULT_SIGMAS = (0.1, 0.2, 0.25, 0.5, 4.0, 10.0)


class NonFiniteLoss(ArithmeticError):
    """An objective evaluation returned NaN or infinity."""


class Objective(Protocol):
    def evaluate(self, circuit: Circuit) -> float: ...


@dataclass(frozen=True)
class NegProb:
    """Loss ``-p(y|x)`` for one target query."""

    query: MeasurementQuery

    @property
    def support(self) -> tuple[tuple[int, ...], ...]:
        return (self.query.y,)

    def evaluate(self, circuit: Circuit) -> float:
        return -probability(circuit, self.query)


@dataclass(frozen=True)
class RbfMixtureKernel:
    """``K(u, v) = sum_s exp(-|u - v|^2 / (2 s))`` over bit vectors."""

    sigma_list: tuple[float, ...] = DEFAULT_SIGMAS

    def __post_init__(self):
        sigmas = tuple(float(s) for s in self.sigma_list)
        if not sigmas or any(not s > 0 for s in sigmas):
            raise ValueError(f"sigma_list must be non-empty and positive, got {sigmas}")
        object.__setattr__(self, "sigma_list", sigmas)

    def gram(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        sq = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
        return sum(np.exp(-sq / (2.0 * s)) for s in self.sigma_list)


@dataclass(frozen=True, eq=False)
class Mmd:
    """``(p_data - p_model)^T K (p_data - p_model)`` over all masked outcomes.

    ``target`` is indexed like :func:`fermisim.measure.distribution`.
    """

    x: tuple[int, ...]
    mask: tuple[int, ...]
    target: np.ndarray
    kernel: RbfMixtureKernel = field(default_factory=RbfMixtureKernel)
    _gram: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x, mask = parse_bits(self.x), parse_bits(self.mask)
        if len(x) != len(mask):
            raise ValueError(f"x has {len(x)} bits but mask has {len(mask)}")
        k = sum(mask)
        if k == 0:
            raise ValueError("the mask must select at least one qubit")
        target = np.array(self.target, dtype=float)
        if target.shape != (2**k,):
            raise ValueError(f"target must have {2**k} entries, got shape {target.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "_gram", self.kernel.gram(all_bitstrings(k)))

    @property
    def support(self) -> np.ndarray:
        return all_bitstrings(sum(self.mask))

    def model(self, circuit: Circuit, workers: int = 1) -> np.ndarray:
        return distribution(circuit, self.x, self.mask, workers=workers)

    def loss_of(self, p_model: np.ndarray) -> float:
        diff = self.target - p_model
        return float(diff @ self._gram @ diff)

    def evaluate(self, circuit: Circuit) -> float:
        return self.loss_of(self.model(circuit))


@dataclass(frozen=True, eq=False)
class MaxcutExpectation:
    """Expected negative cut weight of the outcomes on the masked qubits.

    Masked qubit ``m`` (in ascending order) plays graph node ``m``.
    """

    graph: WeightedGraph
    x: tuple[int, ...]
    mask: tuple[int, ...]
    _cuts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x, mask = parse_bits(self.x), parse_bits(self.mask)
        if len(x) != len(mask):
            raise ValueError(f"x has {len(x)} bits but mask has {len(mask)}")
        if sum(mask) != self.graph.n_nodes:
            raise ValueError(
                f"mask selects {sum(mask)} qubits but the graph has {self.graph.n_nodes} nodes"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "_cuts", -cut_values(self.graph))

    @property
    def support(self) -> np.ndarray:
        return all_bitstrings(self.graph.n_nodes)

    def model(self, circuit: Circuit, workers: int = 1) -> np.ndarray:
        return distribution(circuit, self.x, self.mask, workers=workers)

    def loss_of(self, probs: np.ndarray) -> float:
        return float(probs @ self._cuts / probs.sum())

    def evaluate(self, circuit: Circuit) -> float:
        return self.loss_of(self.model(circuit))

    def best_outcome(self, circuit: Circuit) -> tuple[str, float]:
        """Most likely outcome and its cut weight."""
        probs = self.model(circuit)
        best = int(np.argmax(probs))
        bits = format(best, f"0{self.graph.n_nodes}b")
        return bits, self.graph.cut_value(bits)


def evaluate(obj: Objective, circuit: Circuit) -> float:
    value = float(obj.evaluate(circuit))
    if not math.isfinite(value):
        raise NonFiniteLoss(f"objective returned {value}")
    return value


def gradient_fd(obj: Objective, circuit: Circuit, step: float = 1e-5, workers: int = 1) -> np.ndarray:
    """Central-difference gradient with respect to ``circuit.parameters()``.

    Each entry costs two objective evaluations. With ``workers > 1`` the
    evaluations run on a thread pool; every entry is computed the same way
    either way, so the result does not depend on ``workers``.
    """
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    theta = circuit.parameters()

    def component(p: int) -> float:
        shifted = theta.copy()
        shifted[p] = theta[p] + step
        up = evaluate(obj, circuit.with_parameters(shifted))
        shifted[p] = theta[p] - step
        down = evaluate(obj, circuit.with_parameters(shifted))
        return (up - down) / (2.0 * step)

    if workers <= 1:
        return np.array([component(p) for p in range(theta.size)])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(component, range(theta.size))))


@dataclass(frozen=True, eq=False)
class AdamState:
    lr: float
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def initial(cls, n_params: int, lr: float, beta1: float = 0.9, beta2: float = 0.999) -> "AdamState":
        zeros = np.zeros(n_params)
        return cls(lr=float(lr), m=zeros, v=zeros.copy(), beta1=beta1, beta2=beta2)


def adam_step(state: AdamState, params, grad) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update; returns the new state and parameters."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if params.shape != state.m.shape or grad.shape != state.m.shape:
        raise ValueError(
            f"shape mismatch: state {state.m.shape}, params {params.shape}, grad {grad.shape}"
        )
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step=t), new_params


def random_parameters(circuit: Circuit, seed: int) -> Circuit:
    """Circuit with every parameter drawn uniformly from ``[0, pi)``."""
    rng = np.random.default_rng(seed)
    return circuit.with_parameters(math.pi * rng.random(circuit.n_params))


@dataclass(frozen=True, eq=False)
class TrainResult:
    circuit: Circuit
    losses: np.ndarray


def train(
    obj: Objective,
    circuit: Circuit,
    iters: int,
    lr: float,
    seed: int | None = None,
    *,
    beta1: float = 0.9,
    step: float = 1e-5,
    workers: int = 1,
    stop_below: float | None = None,
    callback: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Adam on finite-difference gradients.

    ``losses[i]`` is the loss at the parameters entering iteration ``i``. If
    ``seed`` is given the parameters are first redrawn with
    :func:`random_parameters`; with ``seed=None`` the circuit's own parameters
    are the starting point. ``stop_below`` ends the run as soon as a recorded
    loss falls under it, returning the parameters that achieved it.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    if seed is not None:
        circuit = random_parameters(circuit, seed)
    state = AdamState.initial(circuit.n_params, lr, beta1=beta1)
    theta = circuit.parameters()
    losses = []
    for it in range(iters):
        current = circuit.with_parameters(theta)
        loss = evaluate(obj, current)
        losses.append(loss)
        if callback is not None:
            callback(it, loss)
        if stop_below is not None and loss < stop_below:
            return TrainResult(current, np.array(losses))
        grad = gradient_fd(obj, current, step=step, workers=workers)
        state, theta = adam_step(state, theta, grad)
    return TrainResult(circuit.with_parameters(theta), np.array(losses))
