import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from highway_overtake import neural
from highway_overtake.errors import ShapeError, StateError

from oracles import gradient_check_error, mlp_straight_line, random_network


def single_layer(w, b=None):
    w = np.atleast_2d(np.asarray(w, dtype=float))
    return neural.MlpParams([w], [np.zeros(w.shape[1]) if b is None else np.asarray(b, float)])


# -- forward -----------------------------------------------------------------

def test_zero_network_outputs_zero(rng):
    p = neural.init_mlp([4, 6, 3], rng)
    p = neural.zeros_like(p)
    np.testing.assert_array_equal(neural.forward(p, rng.normal(size=4))[0], np.zeros(3))


def test_identity_layer(rng):
    x = rng.normal(size=5)
    np.testing.assert_array_equal(neural.forward(single_layer(np.eye(5)), x)[0], x)


def test_matches_straight_line_evaluation(rng):
    p = neural.init_mlp([3, 4, 2], rng)
    p = p.with_arrays([a + rng.normal(0, 0.1, a.shape) for a in p.arrays()])
    x = rng.normal(size=3)
    want = mlp_straight_line(p.weights, p.biases, x)
    np.testing.assert_allclose(neural.forward(p, x)[0], want, rtol=1e-12, atol=1e-12)


def test_dueling_matches_straight_line(rng):
    p = neural.init_dueling(4, 3, rng, width=6)
    x = rng.normal(size=4)
    h = mlp_straight_line(p.trunk.weights, p.trunk.biases, x, relu_last=True)
    v = mlp_straight_line(p.value.weights, p.value.biases, h)[0]
    a = mlp_straight_line(p.advantage.weights, p.advantage.biases, h)
    np.testing.assert_allclose(neural.forward(p, x)[0], v + a - a.max(), rtol=1e-12, atol=1e-12)


def test_batch_equals_rows(rng):
    p = neural.init_dueling(5, 4, rng, width=7)
    xs = rng.normal(size=(6, 5))
    batch = neural.forward(p, xs)[0]
    for i in range(6):
        np.testing.assert_allclose(batch[i], neural.forward(p, xs[i])[0], rtol=1e-13)


def test_input_width_checked(rng):
    with pytest.raises(ShapeError):
        neural.forward(neural.init_mlp([3, 2], rng), np.zeros(4))


def test_inconsistent_layers_rejected():
    with pytest.raises(ShapeError):
        neural.MlpParams([np.zeros((2, 3)), np.zeros((4, 1))], [np.zeros(3), np.zeros(1)])


def test_default_stream_widths(rng):
    p = neural.init_dueling(23, 5, rng)
    assert p.trunk.layer_dims == [23, 128]
    assert p.value.layer_dims == [128, 128, 1]
    assert p.advantage.layer_dims == [128, 128, 5]


def test_init_determinism():
    a = neural.init_dueling(23, 5, np.random.default_rng(7))
    b = neural.init_dueling(23, 5, np.random.default_rng(7))
    assert neural.params_digest(a) == neural.params_digest(b)
    x = np.linspace(-1, 1, 23)
    np.testing.assert_array_equal(neural.forward(a, x)[0], neural.forward(b, x)[0])


def test_glorot_limits(rng):
    p = neural.init_mlp([30, 50], rng)
    assert np.abs(p.weights[0]).max() <= np.sqrt(6 / 80)
    assert np.all(p.biases[0] == 0)


# -- dueling head ------------------------------------------------------------

def test_aggregate_examples():
    np.testing.assert_allclose(neural.dueling_aggregate(1.0, [0.5, 0.2, 0.5]), [1.0, 0.7, 1.0])
    np.testing.assert_array_equal(neural.dueling_aggregate(2.5, np.zeros(4)), np.full(4, 2.5))
    np.testing.assert_allclose(neural.dueling_aggregate(0.0, [1.0, 3.0], "mean"), [-1.0, 1.0])
    with pytest.raises(ShapeError):
        neural.dueling_aggregate(1.0, [])


finite = st.floats(-1e3, 1e3)


@settings(max_examples=300, deadline=None)
@given(v=finite, a=arrays(float, st.integers(1, 8), elements=finite), c=finite)
def test_aggregate_identities(v, a, c):
    q = neural.dueling_aggregate(v, a)
    np.testing.assert_allclose(neural.dueling_aggregate(v, a + c), q, rtol=0, atol=1e-12 * (1 + abs(c) + abs(v) + np.abs(a).max()))
    assert q.max() == pytest.approx(v, abs=1e-12 * (1 + abs(v)))
    # exact in real arithmetic; adding v can merge advantages closer than one ulp of v
    k = neural.argmax_action(q)
    assert a[k] >= a.max() - 4e-16 * (abs(v) + np.abs(a).max())
    assert neural.argmax_action(neural.dueling_aggregate(0.0, a)) == neural.argmax_action(a)


def test_argmax_examples():
    assert neural.argmax_action([0, 3, 1]) == 1
    assert neural.argmax_action([2, 2]) == 0
    with pytest.raises(ShapeError):
        neural.argmax_action([])


# -- losses and targets ------------------------------------------------------

def test_td_target_examples():
    assert neural.td_target(-1.0, [5.0, 9.0], 0.8, True) == -1.0
    assert neural.td_target(1.0, [0.0, 2.0, 1.0], 0.8, False) == pytest.approx(2.6)
    assert neural.td_target(0.3, [7.0], 0.0, False) == 0.3
    y = neural.td_target(np.array([1.0, 1.0]), np.array([[2.0, 0.0], [2.0, 0.0]]), 0.5,
                         np.array([False, True]))
    np.testing.assert_allclose(y, [2.0, 1.0])
    with pytest.raises(ValueError):
        neural.td_target(0.0, [1.0], 1.1, False)


def test_mse_examples():
    assert neural.mse_loss([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert neural.mse_loss([1.0], [2.0]) == 1.0
    assert neural.mse_loss([0.0, 0.0], [1.0, 3.0]) == 5.0
    with pytest.raises(ShapeError):
        neural.mse_loss([0.0], [1.0, 2.0])


# -- backward ----------------------------------------------------------------

def test_zero_upstream_zero_gradients(rng):
    p = neural.init_dueling(4, 3, rng, width=5)
    _, cache = neural.forward(p, rng.normal(size=4))
    g = neural.backward(p, cache, np.zeros(3))
    assert all(np.all(a == 0) for a in g.arrays())


def test_single_neuron_gradient():
    p = single_layer([[1.0]])
    y, cache = neural.forward(p, np.array([2.0]))
    g = neural.backward(p, cache, 2 * (y - 0.0))
    assert g.weights[0][0, 0] == 8.0 and g.biases[0][0] == 4.0


def test_stale_cache_rejected(rng):
    p = neural.init_mlp([3, 2], rng)
    _, cache = neural.forward(p, np.ones(3))
    grads = neural.backward(p, cache, np.ones(2))
    p2 = neural.sgd_step(p, grads, 0.1)
    with pytest.raises(StateError):
        neural.backward(p2, cache, np.ones(2))


@pytest.mark.parametrize("dueling", [False, True])
def test_gradients_match_finite_differences(dueling):
    rng = np.random.default_rng(100 + dueling)
    for _ in range(5):
        p = random_network(rng, dueling)
        d_in = p.input_dim if dueling else p.layer_dims[0]
        assert gradient_check_error(p, rng.normal(size=d_in), rng) <= 1e-6


def test_batched_gradient_is_sum_of_rows(rng):
    p = neural.init_dueling(3, 4, rng, width=5)
    xs, ups = rng.normal(size=(4, 3)), rng.normal(size=(4, 4))
    _, cache = neural.forward(p, xs)
    total = neural.backward(p, cache, ups).arrays()
    acc = [np.zeros_like(a) for a in total]
    for x, u in zip(xs, ups):
        _, c = neural.forward(p, x)
        acc = [s + g for s, g in zip(acc, neural.backward(p, c, u).arrays())]
    for a, b in zip(total, acc):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


# -- optimiser ---------------------------------------------------------------

def test_sgd_examples():
    p = single_layer([[1.0]])
    g = single_layer([[2.0]])
    assert neural.sgd_step(p, g, 0.1).weights[0][0, 0] == pytest.approx(0.8)
    tiny = neural.sgd_step(p, g, 1e-30)
    assert abs(tiny.weights[0][0, 0] - 1.0) < 1e-20
    two = neural.sgd_step(neural.sgd_step(p, g, 0.1), g, 0.1)
    one = neural.sgd_step(p, g, 0.2)
    assert two.weights[0][0, 0] == pytest.approx(one.weights[0][0, 0], abs=1e-15)
    with pytest.raises(ValueError):
        neural.sgd_step(p, g, 0.0)
    with pytest.raises(ShapeError):
        neural.sgd_step(p, single_layer(np.ones((2, 1))), 0.1)


def test_sgd_does_not_mutate(rng):
    p = neural.init_mlp([3, 2], rng)
    before = neural.params_digest(p)
    neural.sgd_step(p, neural.init_mlp([3, 2], rng), 0.5)
    assert neural.params_digest(p) == before


def test_global_norm_and_scale():
    g = neural.MlpParams([np.array([[3.0]])], [np.array([4.0])])
    assert neural.global_norm(g) == 5.0
    assert neural.global_norm(neural.scale(g, 0.5)) == 2.5
