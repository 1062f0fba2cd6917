from __future__ import annotations

import math

import numpy as np
import pytest

from addictfree.lstm import (
    AlignmentError,
    DivergenceDetected,
    EmptySequence,
    LstmParams,
    LstmState,
    ShapeMismatch,
    TrainConfig,
    dumps_params,
    forward,
    gradient,
    init_params,
    load_params,
    loads_params,
    loss,
    lstm_step,
    save_params,
    train,
    zero_state,
    zeros_like_params,
)


def zero_params(H=4, m=5) -> LstmParams:
    return zeros_like_params(init_params(H, m, seed=0))


def flatten(p: LstmParams) -> np.ndarray:
    parts = [getattr(p, name).ravel() for name in p.array_fields()]
    parts.append(np.array([p.b_out]))
    return np.concatenate(parts)


def unflatten_into(p: LstmParams, vec: np.ndarray) -> None:
    pos = 0
    for name in p.array_fields():
        arr = getattr(p, name)
        n = arr.size
        arr[...] = vec[pos : pos + n].reshape(arr.shape)
        pos += n
    p.b_out = float(vec[pos])


def finite_difference_gradient(p: LstmParams, batch, step_size=1e-5) -> np.ndarray:
    """Central differences over every parameter coordinate."""
    base = flatten(p)
    grad = np.zeros_like(base)
    work = p.copy()
    for idx in range(base.size):
        for sign, slot in ((1.0, 0), (-1.0, 1)):
            vec = base.copy()
            vec[idx] += sign * step_size
            unflatten_into(work, vec)
            if slot == 0:
                up = loss(work, batch)
            else:
                down = loss(work, batch)
        grad[idx] = (up - down) / (2 * step_size)
    return grad


class TestStep:
    def test_zero_params_zero_state(self):
        p = zero_params()
        s = lstm_step(p, np.zeros(5), zero_state(4))
        assert np.allclose(s.c, 0) and np.allclose(s.h, 0)

    def test_zero_params_halve_memory(self):
        # with all weights zero: f = i = o = 0.5, k = 0, so c = 0.5 v
        p = zero_params()
        v = np.array([0.4, -1.2, 2.0, 0.0])
        s = lstm_step(p, np.zeros(5), LstmState(np.zeros(4), v.copy()))
        assert np.allclose(s.c, 0.5 * v)
        assert np.allclose(s.h, 0.5 * np.tanh(0.5 * v))

    def test_scalar_hand_calculation(self):
        # H=1 oracle: evaluate the cell equations with plain math
        p = LstmParams(
            w_f=np.array([[0.1, -0.2, 0.3, 0.0, 0.5]]), u_f=np.array([[0.7]]), b_f=np.array([-0.1]),
            w_i=np.array([[0.2, 0.1, -0.4, 0.3, 0.0]]), u_i=np.array([[-0.6]]), b_i=np.array([0.2]),
            w_o=np.array([[-0.3, 0.2, 0.1, 0.0, 0.4]]), u_o=np.array([[0.5]]), b_o=np.array([0.05]),
            w_k=np.array([[0.4, 0.0, -0.1, 0.2, -0.2]]), u_k=np.array([[0.3]]), b_k=np.array([-0.05]),
            w_out=np.array([0.9]), b_out=-0.2,
        )
        x = [0.5, 1.0, -0.3, 0.25, 0.8]
        h_prev, c_prev = 0.3, -0.4

        def sig(z):
            return 1.0 / (1.0 + math.exp(-z))

        zf = sum(wi * xi for wi, xi in zip(p.w_f[0], x)) + 0.7 * h_prev - 0.1
        zi = sum(wi * xi for wi, xi in zip(p.w_i[0], x)) + -0.6 * h_prev + 0.2
        zo = sum(wi * xi for wi, xi in zip(p.w_o[0], x)) + 0.5 * h_prev + 0.05
        zk = sum(wi * xi for wi, xi in zip(p.w_k[0], x)) + 0.3 * h_prev - 0.05
        c = sig(zf) * c_prev + sig(zi) * math.tanh(zk)
        h = sig(zo) * math.tanh(c)

        s = lstm_step(p, np.array(x), LstmState(np.array([h_prev]), np.array([c_prev])))
        assert abs(s.c[0] - c) < 1e-12
        assert abs(s.h[0] - h) < 1e-12

    def test_shape_mismatch(self):
        p = zero_params(H=4, m=5)
        with pytest.raises(ShapeMismatch):
            lstm_step(p, np.zeros(3), zero_state(4))
        with pytest.raises(ShapeMismatch):
            lstm_step(p, np.zeros(5), zero_state(2))

    def test_saturating_gates_preserve_memory(self):
        # forget gate biased fully open, input gate fully shut: c passes through
        p = zero_params(H=3, m=5)
        p.b_f[...] = 30.0
        p.b_i[...] = -30.0
        c0 = np.array([0.7, -1.1, 0.25])
        s = LstmState(np.zeros(3), c0.copy())
        for _ in range(10):
            s = lstm_step(p, np.ones(5) * 0.5, s)
        assert np.max(np.abs(s.c - c0)) < 1e-9


class TestForward:
    def test_zero_params_give_half(self):
        p = zero_params()
        y = forward(p, np.zeros((7, 5)))
        assert np.allclose(y, 0.5)

    def test_single_step_sequence(self):
        p = init_params(4, seed=3)
        y = forward(p, np.ones((1, 5)))
        assert y.shape == (1,)
        assert 0.0 < y[0] < 1.0

    def test_constant_input_converges(self):
        p = init_params(8, seed=1)
        xs = np.tile(np.array([1.0, 0.0, 0.5, 0.5, 0.4]), (200, 1))
        y = forward(p, xs)
        deltas = np.abs(np.diff(y))
        assert deltas[-1] < 1e-6
        assert np.all(deltas[150:] <= deltas[100:150].max() + 1e-12)

    def test_prefix_equivariance(self):
        p = init_params(6, seed=5)
        rng = np.random.default_rng(0)
        xs = rng.uniform(0, 1, (40, 5))
        full = forward(p, xs)
        prefix = forward(p, xs[:17])
        assert np.allclose(full[:17], prefix)

    def test_probabilities_strictly_inside_unit_interval(self):
        p = init_params(6, seed=9)
        rng = np.random.default_rng(2)
        y = forward(p, rng.uniform(0, 30, (50, 5)))
        assert np.all(y > 0.0) and np.all(y < 1.0)

    def test_empty_sequence_rejected(self):
        with pytest.raises(EmptySequence):
            forward(zero_params(), np.zeros((0, 5)))


class TestLoss:
    def test_perfect_prediction_zero_loss(self):
        p = zero_params()
        xs = np.zeros((4, 5))
        ys = np.full(3, 0.5)  # zero params predict exactly 0.5
        assert loss(p, [(xs, ys)]) == 0.0

    def test_single_step_squared_error(self):
        p = zero_params()
        xs = np.zeros((2, 5))
        ys = np.array([1.0])
        assert loss(p, [(xs, ys)]) == pytest.approx(0.25)

    def test_batch_order_invariant(self):
        p = init_params(4, seed=2)
        rng = np.random.default_rng(4)
        seqs = [(rng.uniform(0, 1, (10, 5)), rng.integers(0, 2, 9).astype(float)) for _ in range(4)]
        assert loss(p, seqs) == pytest.approx(loss(p, list(reversed(seqs))))

    def test_alignment_checked(self):
        p = zero_params()
        with pytest.raises(AlignmentError):
            loss(p, [(np.zeros((4, 5)), np.zeros(4))])


class TestGradient:
    def test_matches_finite_differences(self):
        # H=3, m=5, T=12; the instance is chosen so no true gradient
        # coordinate sits below the finite-difference noise floor.
        p = init_params(3, 5, seed=3)
        rng = np.random.default_rng(103)
        xs = rng.uniform(0, 2, (12, 5))
        ys = rng.integers(0, 2, 11).astype(float)
        batch = [(xs, ys)]
        analytic = flatten(gradient(p, batch))
        numeric = finite_difference_gradient(p, batch)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-4

    def test_zero_everything_gives_zero_readout_gradient(self):
        p = zero_params()
        xs = np.zeros((6, 5))
        ys = np.zeros(5)
        g = gradient(p, [(xs, ys)])
        assert np.allclose(g.w_out, 0.0)  # h_t is identically zero

    def test_batch_gradient_is_sum_of_sequence_gradients(self):
        p = init_params(4, seed=6)
        rng = np.random.default_rng(3)
        s1 = (rng.uniform(0, 1, (8, 5)), rng.integers(0, 2, 7).astype(float))
        s2 = (rng.uniform(0, 1, (5, 5)), rng.integers(0, 2, 4).astype(float))
        g_both = flatten(gradient(p, [s1, s2]))
        g_sum = flatten(gradient(p, [s1])) + flatten(gradient(p, [s2]))
        assert np.allclose(g_both, g_sum)


class TestTrain:
    def _toy_batch(self):
        # learnable rule: label equals the first feature of the next hour's
        # predecessor (feature 0 high -> relapse next hour)
        rng = np.random.default_rng(5)
        seqs = []
        for _ in range(4):
            xs = np.zeros((30, 5))
            hot = rng.integers(0, 2, 30).astype(float)
            xs[:, 0] = hot
            ys = hot[:-1].copy()
            seqs.append((xs, ys))
        return seqs

    def test_zero_epochs_returns_input(self):
        p0 = init_params(4, seed=1)
        cfg = TrainConfig(epochs=0)
        assert train(p0, self._toy_batch(), cfg) is p0

    def test_deterministic_given_seed(self):
        cfg = TrainConfig(learning_rate=0.05, epochs=25, seed=7, gradient_clip=5.0, hidden_size=4)
        batch = self._toy_batch()
        a = train(init_params(4, seed=cfg.seed), batch, cfg)
        b = train(init_params(4, seed=cfg.seed), batch, cfg)
        for name in a.array_fields():
            assert np.array_equal(getattr(a, name), getattr(b, name))
        assert a.b_out == b.b_out

    def test_training_reduces_loss(self):
        cfg = TrainConfig(learning_rate=0.05, epochs=150, seed=3, gradient_clip=5.0, hidden_size=6)
        batch = self._toy_batch()
        p0 = init_params(6, seed=cfg.seed)
        before = loss(p0, batch)
        after = loss(train(p0, batch, cfg), batch)
        assert after < before * 0.5

    def test_divergence_detected(self):
        cfg = TrainConfig(learning_rate=0.05, epochs=5, hidden_size=4)
        batch = self._toy_batch()
        p0 = init_params(4, seed=0)
        p0.b_out = float("nan")
        with pytest.raises(DivergenceDetected):
            train(p0, batch, cfg)


class TestCheckpoint:
    def test_roundtrip_bitwise(self, tmp_path):
        p = init_params(16, seed=42)
        cfg = TrainConfig(seed=42)
        path = tmp_path / "model.bin"
        save_params(path, p, cfg)
        loaded, loaded_cfg = load_params(path)
        for name in p.array_fields():
            assert np.array_equal(getattr(p, name), getattr(loaded, name))
        assert loaded.b_out == p.b_out
        assert loaded_cfg == cfg

    def test_bytes_roundtrip(self):
        p = init_params(3, seed=9)
        data = dumps_params(p)
        loaded, cfg = loads_params(data)
        assert cfg is None
        assert np.array_equal(loaded.w_k, p.w_k)

    def test_bad_magic_rejected(self):
        with pytest.raises(ValueError):
            loads_params(b"not a checkpoint")
