import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from redunet.mlp import (MlpWeights, NetworkShape, accuracy, empirical_loss, forward, grad_E0,
                         init_weights, predict)


def sig(t):
    return 1.0 / (1.0 + math.exp(-t))


def loop_forward(V, U, X):
    h, p = V.shape
    c, n = U.shape[0], X.shape[1]
    H = np.zeros((h, n))
    O = np.zeros((c, n))
    for k in range(n):
        for i in range(h):
            H[i, k] = sig(sum(V[i, j] * X[j, k] for j in range(p)))
        for l in range(c):
            O[l, k] = sig(sum(U[l, i] * H[i, k] for i in range(h)))
    return H, O


def loop_loss(V, U, X, Y):
    _, O = loop_forward(V, U, X)
    return sum((O[l, k] - Y[l, k]) ** 2 for l in range(O.shape[0]) for k in range(O.shape[1]))


def central_diff(f, A, step=1e-5):
    G = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        old = A[idx]
        A[idx] = old + step
        fp = f()
        A[idx] = old - step
        fm = f()
        A[idx] = old
        G[idx] = (fp - fm) / (2 * step)
    return G


def instance(seed):
    rng = np.random.default_rng(seed)
    p, h, c = rng.integers(1, 7), rng.integers(1, 7), rng.integers(2, 7)
    n = rng.integers(1, 11)
    V = rng.normal(0, 1, (h, p))
    U = rng.normal(0, 1, (c, h))
    X = rng.normal(0, 1, (p, n))
    Y = np.eye(c)[:, rng.integers(0, c, n)]
    return V, U, X, Y


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8)


class TestShapesAndInit:
    def test_dimensions(self):
        w = init_weights(NetworkShape(4, 3, 3), seed=0)
        assert w.V.shape == (3, 4) and w.U.shape == (3, 3)

    def test_deterministic(self):
        a = init_weights(NetworkShape(5, 4, 2), seed=9)
        b = init_weights(NetworkShape(5, 4, 2), seed=9)
        np.testing.assert_array_equal(a.V, b.V)
        np.testing.assert_array_equal(a.U, b.U)

    def test_range_and_mean(self):
        w = init_weights(NetworkShape(1000, 100, 2), seed=1)
        allw = np.concatenate([w.V.ravel(), w.U.ravel()])
        assert allw.size > 1e5
        assert abs(allw.mean()) < 0.01
        assert allw.min() >= -0.5 and allw.max() <= 0.5

    def test_shape_rejects_one_class(self):
        with pytest.raises(ValueError):
            NetworkShape(3, 2, 1)

    def test_weights_must_be_finite(self):
        with pytest.raises(ValueError):
            MlpWeights(np.array([[np.inf]]), np.zeros((2, 1)))

    def test_json_roundtrip(self, tmp_path):
        w = init_weights(NetworkShape(3, 4, 2), seed=3)
        w.save(tmp_path / "w.json")
        back = MlpWeights.load(tmp_path / "w.json")
        np.testing.assert_array_equal(back.V, w.V)
        np.testing.assert_array_equal(back.U, w.U)
        assert w.to_dict()["shape"] == {"p": 3, "h": 4, "c": 2}


class TestForward:
    def test_zero_weights(self, rng):
        w = MlpWeights(np.zeros((3, 4)), np.zeros((2, 3)))
        H, O = forward(w, rng.standard_normal((4, 5)))
        assert np.all(H == 0.5) and np.all(O == 0.5)

    def test_zero_input_closed_form(self, rng):
        U = rng.standard_normal((3, 4))
        w = MlpWeights(rng.standard_normal((4, 2)), U)
        _, O = forward(w, np.zeros((2, 1)))
        np.testing.assert_allclose(O[:, 0], 1 / (1 + np.exp(-0.5 * U.sum(axis=1))), atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_loop_oracle(self, seed):
        V, U, X, _ = instance(seed)
        H, O = forward(MlpWeights(V, U), X)
        Hl, Ol = loop_forward(V, U, X)
        np.testing.assert_allclose(H, Hl, atol=1e-12)
        np.testing.assert_allclose(O, Ol, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_bounded(self, seed):
        V, U, X, _ = instance(seed)
        H, O = forward(MlpWeights(V, U), X)
        assert np.all((H > 0) & (H < 1)) and np.all((O > 0) & (O < 1))

    def test_dimension_mismatch(self, rng):
        w = MlpWeights(np.zeros((3, 4)), np.zeros((2, 3)))
        with pytest.raises(ValueError):
            forward(w, rng.standard_normal((5, 2)))


class TestLoss:
    def test_exact_fit_zero(self):
        w = MlpWeights(np.zeros((1, 1)), np.zeros((2, 1)))
        assert empirical_loss(w, np.zeros((1, 3)), np.full((2, 3), 0.5)) == 0.0

    def test_half_half(self):
        w = MlpWeights(np.zeros((1, 1)), np.zeros((2, 1)))
        assert empirical_loss(w, np.zeros((1, 1)), np.array([[1.0], [0.0]])) == pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(5))
    def test_loop_oracle(self, seed):
        V, U, X, Y = instance(seed)
        assert empirical_loss(MlpWeights(V, U), X, Y) == pytest.approx(loop_loss(V, U, X, Y), abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_hidden_permutation(self, seed):
        V, U, X, Y = instance(seed)
        perm = np.random.default_rng(seed).permutation(V.shape[0])
        a = MlpWeights(V, U)
        b = MlpWeights(V[perm], U[:, perm])
        assert empirical_loss(b, X, Y) == pytest.approx(empirical_loss(a, X, Y), abs=1e-12)
        np.testing.assert_allclose(forward(b, X)[1], forward(a, X)[1], atol=1e-12)


class TestGradient:
    def test_zero_at_fit(self):
        w = MlpWeights(np.zeros((2, 3)), np.zeros((2, 2)))
        dU, dV = grad_E0(w, np.ones((3, 4)), np.full((2, 4), 0.5))
        assert np.all(dU == 0) and np.all(dV == 0)

    @pytest.mark.parametrize("seed", range(20))
    def test_finite_differences(self, seed):
        V, U, X, Y = instance(seed)
        dU, dV = grad_E0(MlpWeights(V, U), X, Y)
        fU = central_diff(lambda: loop_loss(V, U, X, Y), U)
        fV = central_diff(lambda: loop_loss(V, U, X, Y), V)
        assert rel_err(dU, fU) <= 1e-5
        assert rel_err(dV, fV) <= 1e-5

    def test_duplicated_samples_double(self):
        V, U, X, Y = instance(3)
        w = MlpWeights(V, U)
        dU, dV = grad_E0(w, X, Y)
        dU2, dV2 = grad_E0(w, np.hstack([X, X]), np.hstack([Y, Y]))
        np.testing.assert_allclose(dU2, 2 * dU, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(dV2, 2 * dV, rtol=1e-13, atol=1e-15)


class TestPredict:
    def test_argmax_and_ties(self):
        # outputs are sigmoid(U h) with h = 0.5, so U picks the output values
        U = np.array([[2.0], [-2.0], [0.0]])
        w = MlpWeights(np.zeros((1, 1)), U)
        assert predict(w, np.zeros((1, 1)))[0] == 0
        w2 = MlpWeights(np.zeros((1, 1)), np.zeros((2, 1)))
        assert predict(w2, np.zeros((1, 1)))[0] == 0

    def test_accuracy(self):
        Y = np.eye(3)[:, [0, 1, 2, 1]]
        assert accuracy([0, 1, 2, 1], Y) == 1.0
        assert accuracy([0, 0, 2, 1], Y) == 0.75
