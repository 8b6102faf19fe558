import numpy as np
import pytest

from memsnn import (CoreParams, LayerState, WtaState, bp_deltas_mse,
                    bp_deltas_wta, lif_forward, register_core,
                    surrogate_deriv, wta_select)
from memsnn.cores import CORE_REGISTRY, get_core, softmax
from memsnn.errors import ConfigError, ShapeError, TargetError

from .conftest import make_core_params


def _state(V, y, x, W):
    return LayerState(V=np.asarray(V, float), y=np.asarray(y, float),
                      x=np.asarray(x, float), W_read=np.asarray(W, float))


def test_core_params_validation():
    with pytest.raises(ConfigError):
        make_core_params(noise_scale=-1.0)
    with pytest.raises(ConfigError):
        make_core_params(eta=-1.0)
    with pytest.raises(ConfigError):
        make_core_params(alpha=1.5)
    with pytest.warns(UserWarning):
        CoreParams(V_th=25.16, alpha=-0.3, eta=1e-3, noise_scale=1e-6, seed=0)


def test_lif_forward_quiescent():
    p = make_core_params(V_th=25.16)
    s = lif_forward(p, None, np.zeros(3), np.zeros((2, 3)))
    assert (s.V == 0).all() and (s.y == 0).all()


def test_lif_forward_hand_case():
    # one neuron: W.x = 0.5 + 0.3 = 0.8, leak 0.5 * 2 * (1-0) = 1.0
    p = make_core_params(V_th=25.16, alpha=0.5)
    prev = _state([2.0], [0.0], [0, 0, 0], [[0.5, 0.2, 0.3]])
    s = lif_forward(p, prev, [1, 0, 1], np.array([[0.5, 0.2, 0.3]]))
    assert s.V[0] == pytest.approx(1.8, rel=1e-12)
    assert s.y[0] == 0.0


def test_lif_forward_post_fire_reset():
    # a neuron that fired last step carries no leak regardless of V_prev
    p = make_core_params(V_th=10.0, alpha=0.9)
    prev = _state([100.0], [1.0], [0], [[1.0]])
    s = lif_forward(p, prev, [0], np.array([[1.0]]))
    assert s.V[0] == 0.0


def test_lif_forward_threshold_is_strict():
    p = make_core_params(V_th=1.0, alpha=0.0)
    s = lif_forward(p, None, [1.0], np.array([[1.0]]))
    assert s.V[0] == 1.0 and s.y[0] == 0.0  # V == V_th does not fire
    s2 = lif_forward(p, None, [1.0], np.array([[1.0 + 1e-12]]))
    assert s2.y[0] == 1.0


def test_lif_forward_shape_errors():
    p = make_core_params()
    with pytest.raises(ShapeError):
        lif_forward(p, None, np.zeros(4), np.zeros((2, 3)))
    prev = _state([0.0], [0.0], [0, 0, 0], [[0, 0, 0]])
    with pytest.raises(ShapeError):
        lif_forward(p, prev, np.zeros(3), np.zeros((2, 3)))


def test_lif_forward_appends_history():
    p = make_core_params(V_th=0.5)
    s1 = lif_forward(p, None, [1.0], np.array([[1.0]]))
    s2 = lif_forward(p, s1, [0.0], np.array([[1.0]]))
    assert len(s2.fire_history) == 2
    assert s2.fire_history[0][0] == 1.0


def test_wta_select_all_quiet_uniform():
    S, winner = wta_select(np.zeros(10), np.zeros(10))
    assert np.allclose(S, 0.1)
    assert abs(S.sum() - 1.0) < 1e-9
    assert winner == 0  # all V equal, lowest index wins


def test_wta_select_tie_breaks_on_voltage():
    S, winner = wta_select(np.array([1.0, 5.0, 2.0]), np.zeros(3))
    assert winner == 1


def test_wta_select_two_firing():
    S, winner = wta_select(np.array([30.0, 26.0]), np.array([1.0, 1.0]))
    # scalar softmax: 1/(1+e^-4), e^-4/(1+e^-4)
    assert S[0] == pytest.approx(0.9820137900379085, rel=1e-12)
    assert S[1] == pytest.approx(0.017986209962091555, rel=1e-12)
    assert winner == 0


def test_wta_select_one_hot_fire():
    rng = np.random.default_rng(4)
    for _ in range(20):
        V = rng.uniform(0.5, 30.0, size=3)
        for i in range(3):
            y = np.zeros(3)
            y[i] = 1.0
            _, winner = wta_select(V, y)
            assert winner == i  # any positive V beats the e^0 crowd


def test_softmax_shift_invariance():
    rng = np.random.default_rng(9)
    z = rng.normal(size=8)
    a = softmax(z)
    b = softmax(z + 123.456)
    assert np.argmax(a) == np.argmax(b)
    assert np.allclose(a, b, atol=1e-12)
    assert abs(a.sum() - 1.0) < 1e-9


def test_surrogate_deriv_bounds_and_determinism():
    p = make_core_params(noise_scale=1e-6, seed=5)
    rng1 = np.random.default_rng(7)
    rng2 = np.random.default_rng(7)
    a = surrogate_deriv(p, (4, 3), rng1)
    b = surrogate_deriv(p, (4, 3), rng2)
    assert np.array_equal(a, b)
    assert (a >= 0).all() and (a <= 1e-6).all()
    zero = surrogate_deriv(make_core_params(noise_scale=0.0), (5,), rng1)
    assert (zero == 0).all()


def test_bp_mse_perfect_output_is_zero():
    p = make_core_params(eta=0.1)
    s = _state([30.0, 0.0], [1.0, 0.0], [1.0, 1.0], np.ones((2, 2)))
    dW, cost = bp_deltas_mse([s], np.array([1.0, 0.0]), p, [np.ones(2)])
    assert (dW[0] == 0).all() and cost == 0.0


def test_bp_mse_hand_case():
    # N=2, y=[1,0], target zero, unit surrogate: delta = [0.5, 0]
    p = make_core_params(eta=0.1)
    x = np.array([1.0, 0.0, 1.0])
    s = _state([30.0, 0.0], [1.0, 0.0], x, np.ones((2, 3)))
    dW, cost = bp_deltas_mse([s], np.array([0.0, 0.0]), p, [np.ones(2)])
    assert np.allclose(dW[0], -0.1 * np.outer([0.5, 0.0], x))
    assert cost == pytest.approx(0.25)  # (1/(2*2)) * 1


def test_bp_mse_shape_error():
    p = make_core_params()
    s = _state([0.0], [0.0], [0.0], [[0.0]])
    with pytest.raises(ShapeError):
        bp_deltas_mse([s], np.zeros(3), p, [np.ones(1)])


def _linear_chain_forward(weights, x, V_th):
    # differentiable twin: the spike function is replaced by its unit-slope
    # surrogate y = V - V_th, matching h' == 1 in the delta recursion
    states = []
    for W in weights:
        V = W @ x
        y = V - V_th
        states.append((x, V, y))
        x = y
    return states


def _fd_grad_mse(weights, x0, y_hat, V_th, layer, eps=1e-6):
    def loss(ws):
        states = _linear_chain_forward(ws, x0, V_th)
        y_out = states[-1][2]
        return float(((y_out - y_hat) ** 2).sum() / (2 * len(y_hat)))

    W = weights[layer]
    g = np.zeros_like(W)
    for i in range(W.shape[0]):
        for j in range(W.shape[1]):
            up = [w.copy() for w in weights]
            dn = [w.copy() for w in weights]
            up[layer][i, j] += eps
            dn[layer][i, j] -= eps
            g[i, j] = (loss(up) - loss(dn)) / (2 * eps)
    return g


def test_bp_mse_matches_finite_differences_two_layer():
    rng = np.random.default_rng(21)
    p = make_core_params(V_th=0.3, eta=1.0)
    for _ in range(100):
        n_in, n_hid, n_out = rng.integers(2, 5, size=3)
        weights = [rng.normal(0.0, 1.0, size=(n_hid, n_in)),
                   rng.normal(0.0, 1.0, size=(n_out, n_hid))]
        x0 = rng.normal(size=n_in)
        y_hat = rng.normal(size=n_out)
        chain = _linear_chain_forward(weights, x0, p.V_th)
        states = [_state(chain[k][1], chain[k][2], chain[k][0], weights[k])
                  for k in range(2)]
        hprime = [np.ones(n_hid), np.ones(n_out)]
        dW, _ = bp_deltas_mse(states, y_hat, p, hprime)
        for layer in range(2):
            fd = _fd_grad_mse(weights, x0, y_hat, p.V_th, layer)
            scale = max(1e-8, np.abs(fd).max())
            assert np.abs(-dW[layer] - fd).max() / scale < 1e-5


def test_bp_mse_linear_in_eta():
    rng = np.random.default_rng(2)
    x = rng.random(4)
    s = _state(rng.random(3), [1.0, 0.0, 1.0], x, rng.random((3, 4)))
    hp = [np.full(3, 0.7)]
    d1, _ = bp_deltas_mse([s], np.array([0.0, 1.0, 0.0]), make_core_params(eta=0.01), hp)
    d2, _ = bp_deltas_mse([s], np.array([0.0, 1.0, 0.0]), make_core_params(eta=0.02), hp)
    assert np.allclose(2.0 * d1[0], d2[0], rtol=1e-12)


def test_bp_mse_one_layer_delta_rule():
    # with h' == 1 the one-layer rule collapses to dW = -(eta/N)(y - yhat) x^T
    rng = np.random.default_rng(13)
    p = make_core_params(eta=0.05)
    for _ in range(20):
        n_out, n_in = rng.integers(2, 6, size=2)
        x = rng.random(n_in)
        y = (rng.random(n_out) > 0.5).astype(float)
        y_hat = (rng.random(n_out) > 0.5).astype(float)
        s = _state(rng.random(n_out), y, x, rng.random((n_out, n_in)))
        dW, _ = bp_deltas_mse([s], y_hat, p, [np.ones(n_out)])
        expect = -0.05 / n_out * np.outer(y - y_hat, x)
        assert np.allclose(dW[0], expect, rtol=1e-12)


def test_bp_wta_zero_gradient_at_optimum():
    p = make_core_params(eta=0.1)
    y_hat = np.array([0.0, 1.0, 0.0])
    s = _state([0.0, 5.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0], np.ones((3, 2)))
    wta = WtaState(S=y_hat.copy(), y_hat=y_hat, Z=s.V * s.y)
    dW, _ = bp_deltas_wta([s], wta, p, [np.zeros(3)])
    assert (dW[0] == 0).all()


def test_bp_wta_quiet_layer_zero_surrogate():
    # nothing fired and h' == 0: S uniform, delta vanishes elementwise
    p = make_core_params(eta=0.1)
    V = np.arange(10.0)
    s = _state(V, np.zeros(10), np.ones(3), np.ones((10, 3)))
    S, _ = wta_select(s.V, s.y)
    y_hat = np.zeros(10)
    y_hat[7] = 1.0
    assert np.allclose(S - y_hat, np.where(np.arange(10) == 7, -0.9, 0.1))
    wta = WtaState(S=S, y_hat=y_hat, Z=s.V * s.y)
    dW, cost = bp_deltas_wta([s], wta, p, [np.zeros(10)])
    assert (dW[0] == 0).all()
    assert cost == pytest.approx(-np.log(0.1), rel=1e-12)


def test_bp_wta_softmax_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        Z = rng.normal(0.0, 2.0, size=n)
        j = int(rng.integers(n))
        S = softmax(Z)
        grad = S.copy()
        grad[j] -= 1.0  # S - y_hat
        eps = 1e-6
        for i in range(n):
            zp, zm = Z.copy(), Z.copy()
            zp[i] += eps
            zm[i] -= eps
            fd = (-np.log(softmax(zp)[j]) + np.log(softmax(zm)[j])) / (2 * eps)
            assert abs(grad[i] - fd) < 1e-6


def test_bp_wta_rejects_non_one_hot():
    p = make_core_params()
    s = _state([1.0, 2.0], [1.0, 0.0], [1.0], [[1.0], [1.0]])
    S, _ = wta_select(s.V, s.y)
    with pytest.raises(TargetError):
        WtaState(S=S, y_hat=np.array([1.0, 1.0]), Z=s.V * s.y)
    wta = WtaState(S=S, y_hat=np.array([0.0, 0.0]), Z=s.V * s.y)
    with pytest.raises(TargetError):
        bp_deltas_wta([s], wta, p, [np.ones(2)])


def test_wta_cost_nonnegative_zero_only_at_one():
    rng = np.random.default_rng(44)
    p = make_core_params()
    for _ in range(50):
        n = int(rng.integers(2, 6))
        V = rng.uniform(0.1, 30, size=n)
        y = (rng.random(n) > 0.4).astype(float)
        S, _ = wta_select(V, y)
        j = int(rng.integers(n))
        y_hat = np.zeros(n)
        y_hat[j] = 1.0
        s = _state(V, y, np.ones(2), np.ones((n, 2)))
        _, cost = bp_deltas_wta([s], WtaState(S=S, y_hat=y_hat, Z=V * y), p,
                                [np.zeros(n)])
        assert cost >= 0.0
        assert (cost == 0.0) == (S[j] == 1.0)


def test_registry():
    with pytest.raises(ConfigError):
        get_core("no_such_core", make_core_params())
    assert set(CORE_REGISTRY) >= {"lif_bp", "lif_bp_wta"}

    class Dummy:
        def __init__(self, params):
            self.params = params

    register_core("dummy_core_for_test", Dummy)
    assert isinstance(get_core("dummy_core_for_test", make_core_params()), Dummy)
    with pytest.raises(ConfigError):
        register_core("lif_bp", Dummy)
    del CORE_REGISTRY["dummy_core_for_test"]


def test_wta_state_softmax_invariant():
    with pytest.raises(ConfigError):
        WtaState(S=np.array([0.5, 0.6]), y_hat=np.array([1.0, 0.0]),
                 Z=np.zeros(2))
