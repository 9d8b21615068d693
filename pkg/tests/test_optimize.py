import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _helpers import random_bits, random_circuit
from fermisim.fermiops import Circuit, PreservingGate
from fermisim.measure import MeasurementQuery, all_bitstrings, distribution
from fermisim.optimize import (
    AdamState,
    MaxcutExpectation,
    Mmd,
    NegProb,
    NonFiniteLoss,
    RbfMixtureKernel,
    adam_step,
    evaluate,
    gradient_fd,
    random_parameters,
    train,
)
from fermisim.oracle import WeightedGraph, maxcut_exhaustive

seeds = st.integers(0, 2**32 - 1)


class TestKernel:
    def test_formula(self):
        k = RbfMixtureKernel((0.5, 2.0))
        gram = k.gram(np.array([[0, 0], [1, 1]]))
        off = math.exp(-2 / 1.0) + math.exp(-2 / 4.0)
        assert gram == pytest.approx(np.array([[2, off], [off, 2]]))

    def test_structure(self):
        gram = RbfMixtureKernel().gram(all_bitstrings(4))
        assert np.array_equal(gram, gram.T)
        assert np.allclose(np.diag(gram), len(RbfMixtureKernel().sigma_list))
        assert np.linalg.eigvalsh(gram).min() > -1e-10

    def test_rejects_bad_sigmas(self):
        with pytest.raises(ValueError):
            RbfMixtureKernel(())
        with pytest.raises(ValueError):
            RbfMixtureKernel((1.0, 0.0))


class TestObjectives:
    def test_negprob_identity(self):
        c = Circuit(3)
        assert evaluate(NegProb(MeasurementQuery.full("101", "101")), c) == -1.0

    @given(seeds)
    def test_negprob_bounded(self, seed):
        rng = np.random.default_rng(seed)
        c = random_circuit(rng, 4)
        q = MeasurementQuery.full(random_bits(rng, 4), random_bits(rng, 4))
        assert -1.0 <= evaluate(NegProb(q), c) <= 0.0

    def test_mmd_zero_at_target(self):
        c = random_circuit(np.random.default_rng(1), 6)
        x, mask = "110100", "111000"
        obj = Mmd(x, mask, distribution(c, x, mask))
        assert abs(evaluate(obj, c)) < 1e-14

    @given(seeds)
    def test_mmd_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        c = random_circuit(rng, 5)
        target = rng.random(8)
        obj = Mmd("10100", "10101", target / target.sum())
        assert evaluate(obj, c) >= -1e-12

    def test_mmd_positive_when_different(self):
        target = np.zeros(4)
        target[0] = 1.0
        obj = Mmd("11", "11", target)
        assert evaluate(obj, Circuit(2)) > 0.1

    def test_mmd_validation(self):
        with pytest.raises(ValueError):
            Mmd("10", "11", np.ones(3) / 3)
        with pytest.raises(ValueError):
            Mmd("10", "00", np.ones(1))

    def test_maxcut_at_optimum(self):
        g = WeightedGraph.random_complete(4, seed=3)
        bits, value = maxcut_exhaustive(g)
        x = tuple(int(b) for b in bits) + (0, 1, 0, 1)
        obj = MaxcutExpectation(g, x, (1, 1, 1, 1, 0, 0, 0, 0))
        assert evaluate(obj, Circuit(8)) == pytest.approx(-value, abs=1e-12)
        assert obj.best_outcome(Circuit(8)) == (bits, pytest.approx(value))

    @given(seeds)
    def test_maxcut_bounded(self, seed):
        rng = np.random.default_rng(seed)
        g = WeightedGraph.random_complete(3, seed=seed % 1000)
        c = random_circuit(rng, 6)
        obj = MaxcutExpectation(g, random_bits(rng, 6), (0, 1, 1, 0, 1, 0))
        assert -g.total_weight - 1e-12 <= evaluate(obj, c) <= 1e-12

    def test_maxcut_validation(self):
        g = WeightedGraph(2, ((0, 1, 1.0),))
        with pytest.raises(ValueError):
            MaxcutExpectation(g, "1010", "1110")

    def test_non_finite_loss(self):
        class Broken:
            def evaluate(self, circuit):
                return math.nan

        with pytest.raises(NonFiniteLoss):
            evaluate(Broken(), Circuit(1))


def two_mode_transfer_derivative(a, b, c, d, t=1.0):
    """d/dc of -p(01|10) for one preserving gate, from the two-level closed form."""
    delta = (a - b) / 2
    k2 = c * c + d * d
    om = math.sqrt(delta * delta + k2)
    s, co = math.sin(om * t), math.cos(om * t)
    dom = c / om
    dp = (2 * c / om**2 - 2 * k2 * dom / om**3) * s * s + (k2 / om**2) * 2 * s * co * t * dom
    return -dp


class TestGradient:
    def test_constant_objective(self):
        c = random_circuit(np.random.default_rng(0), 4)
        obj = NegProb(MeasurementQuery("1010", "0000", ""))
        assert np.array_equal(gradient_fd(obj, c), np.zeros(c.n_params))

    @pytest.mark.parametrize("params", [(0.3, -0.4, 0.8, 0.5), (1.0, 1.0, 0.2, -0.7)])
    def test_two_mode_closed_form(self, params):
        c = Circuit(2, (PreservingGate(0, 1, params),))
        obj = NegProb(MeasurementQuery.full("10", "01"))
        grad = gradient_fd(obj, c)
        assert grad[2] == pytest.approx(two_mode_transfer_derivative(*params), abs=1e-6)

    def test_disconnected_parameter(self):
        rng = np.random.default_rng(2)
        base = random_circuit(rng, 6)
        tail = PreservingGate(4, 5, tuple(rng.normal(size=4)))
        c = Circuit(6, base.gates + (tail,))
        obj = NegProb(MeasurementQuery("101101", "111000", "100"))
        grad = gradient_fd(obj, c)
        assert np.abs(grad[-4:]).max() < 1e-9

    def test_second_order_agreement(self):
        h = 0.02
        for seed in range(3):
            rng = np.random.default_rng(500 + seed)
            c = random_circuit(rng, 4, layers=2)
            x = random_bits(rng, 4)
            y = all_bitstrings(4)[int(np.argmax(distribution(c, x)))]
            obj = NegProb(MeasurementQuery.full(x, y))
            g1, g2, g3 = (gradient_fd(obj, c, step=s) for s in (h, h / 2, h / 4))
            assert np.abs(g1 - g2).max() <= 1.0 * h**2
            ratio = np.linalg.norm(g1 - g2) / np.linalg.norm(g2 - g3)
            assert 3.5 < ratio < 4.5

    def test_workers_match_serial(self):
        c = random_circuit(np.random.default_rng(3), 4)
        obj = Mmd("1100", "1111", np.full(16, 1 / 16))
        assert np.array_equal(gradient_fd(obj, c, workers=3), gradient_fd(obj, c))

    def test_bad_step(self):
        with pytest.raises(ValueError):
            gradient_fd(NegProb(MeasurementQuery.full("1", "1")), Circuit(1), step=0.0)


class TestAdam:
    def test_zero_gradient(self):
        state = AdamState.initial(3, lr=0.1)
        new_state, params = adam_step(state, [1.0, 2.0, 3.0], np.zeros(3))
        assert np.array_equal(params, [1.0, 2.0, 3.0])
        assert new_state.step == 1

    def test_first_step_magnitude(self):
        state = AdamState.initial(3, lr=0.05)
        _, params = adam_step(state, np.zeros(3), np.array([3.0, -0.01, 200.0]))
        assert params == pytest.approx([-0.05, 0.05, -0.05], rel=1e-5)

    def test_quadratic_bowl(self):
        theta = np.array([1.0, -2.0, 0.5])
        state = AdamState.initial(3, lr=0.1)
        losses = []
        for _ in range(20):
            losses.append(float(theta @ theta))
            state, theta = adam_step(state, theta, 2 * theta)
        assert all(b < a for a, b in zip(losses[3:], losses[4:]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(AdamState.initial(2, 0.1), np.zeros(3), np.zeros(3))


class TestTrain:
    def test_zero_lr_keeps_parameters(self):
        c = random_circuit(np.random.default_rng(4), 3)
        res = train(NegProb(MeasurementQuery.full("100", "010")), c, iters=1, lr=0.0)
        assert len(res.losses) == 1
        assert np.array_equal(res.circuit.parameters(), c.parameters())

    def test_seeded_initialization(self):
        c = Circuit(3, (PreservingGate(0, 1, (0,) * 4), PreservingGate(1, 2, (0,) * 4)))
        a = random_parameters(c, 7).parameters()
        assert np.array_equal(a, random_parameters(c, 7).parameters())
        assert np.all((a >= 0) & (a < math.pi))

    def test_reproducible(self):
        c = Circuit(4, tuple(PreservingGate(i, i + 1, (0,) * 4) for i in range(3)))
        obj = NegProb(MeasurementQuery.full("1100", "0011"))
        r1 = train(obj, c, iters=5, lr=0.1, seed=3)
        r2 = train(obj, c, iters=5, lr=0.1, seed=3)
        assert np.array_equal(r1.losses, r2.losses)
        assert np.array_equal(r1.circuit.parameters(), r2.circuit.parameters())

    def test_born_target_is_initial_distribution(self):
        c = Circuit(4, tuple(PreservingGate(i, 3, (0,) * 4) for i in range(3)))
        x, mask = "1100", "1100"
        target = distribution(random_parameters(c, 11), x, mask)
        res = train(Mmd(x, mask, target), c, iters=2, lr=0.1, seed=11)
        assert abs(res.losses[0]) < 1e-14

    def test_memorize_small_pattern(self):
        c = Circuit(4, tuple(PreservingGate(i, i + 1, (0,) * 4) for i in range(3)))
        obj = NegProb(MeasurementQuery.full("1111", "1111"))
        res = train(obj, c, iters=30, lr=0.1, seed=0, beta1=0.5)
        assert -evaluate(obj, res.circuit) >= 0.99

    def test_stop_below(self):
        c = Circuit(2, (PreservingGate(0, 1, (0,) * 4),))
        obj = NegProb(MeasurementQuery.full("10", "01"))
        res = train(obj, c, iters=200, lr=0.1, seed=1, stop_below=-0.9)
        assert res.losses[-1] < -0.9 and len(res.losses) < 200
        assert evaluate(obj, res.circuit) == res.losses[-1]

    def test_bad_iters(self):
        with pytest.raises(ValueError):
            train(NegProb(MeasurementQuery.full("1", "1")), Circuit(1), iters=0, lr=0.1)
