import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msape.numerics import (
    ConfigError,
    DimensionError,
    EvaluationError,
    Tensor,
    dropout,
    embedding,
    grad_check,
    layer_norm,
    linear,
    log_softmax,
    matmul,
    mean,
    relu,
    reshape,
    scaled_dot_attention,
    softmax,
    transpose,
)
from msape.numerics import ops


def param(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def test_matmul_identity_and_hand_value():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(matmul(a, Tensor(np.eye(2))).data, a.data)
    out = matmul(Tensor(np.array([[1.0, 2.0]])), Tensor(np.array([[3.0], [4.0]])))
    assert out.data.tolist() == [[11.0]]


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_gradcheck():
    rng = np.random.default_rng(0)
    a, b = param(rng, 3, 4), param(rng, 4, 2)
    w = rng.standard_normal((3, 2))
    f = lambda: ops.sum(matmul(a, b) * w)
    assert grad_check(f, a) < 1e-4
    assert grad_check(f, b) < 1e-4


def test_batched_matmul_broadcast_gradcheck():
    rng = np.random.default_rng(1)
    a, b = param(rng, 2, 3, 4), param(rng, 4, 5)
    w = rng.standard_normal((2, 3, 5))
    f = lambda: ops.sum(matmul(a, b) * w)
    assert grad_check(f, a) < 1e-4
    assert grad_check(f, b) < 1e-4


def test_softmax_values():
    np.testing.assert_allclose(softmax(Tensor(np.array([0.0, 0.0]))).data, [0.5, 0.5])
    np.testing.assert_allclose(
        softmax(Tensor(np.array([1.0, 2.0, 3.0]))).data, [0.09003, 0.24473, 0.66524], atol=1e-5
    )
    out = softmax(Tensor(np.array([0.0, -1e32], dtype=np.float32))).data
    assert out.tolist() == [1.0, 0.0]
    out = softmax(Tensor(np.array([0.0, -np.inf]))).data
    assert out.tolist() == [1.0, 0.0]


def test_softmax_bad_axis():
    with pytest.raises(DimensionError):
        softmax(Tensor(np.ones(3)), axis=2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=12))
def test_softmax_sums_to_one_for_large_inputs(xs):
    p = softmax(Tensor(np.array(xs))).data
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-6


def test_softmax_and_log_softmax_gradcheck():
    rng = np.random.default_rng(2)
    x = param(rng, 3, 5)
    w = rng.standard_normal((3, 5))
    assert grad_check(lambda: ops.sum(softmax(x, axis=-1) * w), x) < 1e-4
    assert grad_check(lambda: ops.sum(softmax(x, axis=0) * w), x) < 1e-4
    assert grad_check(lambda: ops.sum(log_softmax(x) * w), x) < 1e-4


def test_softmax_cross_entropy_composite_gradcheck():
    rng = np.random.default_rng(3)
    x = param(rng, 4, 6)
    onehot = np.eye(6)[[1, 0, 5, 2]]
    f = lambda: mean(log_softmax(x) * (-onehot))
    assert grad_check(f, x) < 1e-4


def test_layer_norm_hand_values():
    out = layer_norm(Tensor(np.array([1.0, 3.0])), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=0.0)
    np.testing.assert_allclose(out.data, [-1.0, 1.0])
    const = layer_norm(Tensor(np.full(4, 7.0)), Tensor(np.ones(4)), Tensor(np.zeros(4)), eps=1e-6)
    np.testing.assert_array_equal(const.data, np.zeros(4))


def test_layer_norm_statistics_and_gradcheck():
    rng = np.random.default_rng(4)
    x, gain, bias = param(rng, 3, 6), param(rng, 6), param(rng, 6)
    plain = layer_norm(Tensor(x.data), Tensor(np.ones(6)), Tensor(np.zeros(6)), eps=1e-12).data
    np.testing.assert_allclose(plain.mean(-1), 0.0, atol=1e-12)
    np.testing.assert_allclose(plain.var(-1), 1.0, atol=1e-9)
    w = rng.standard_normal((3, 6))
    f = lambda: ops.sum(layer_norm(x, gain, bias) * w)
    for t in (x, gain, bias):
        assert grad_check(f, t) < 1e-4


def test_layer_norm_dimension_error():
    with pytest.raises(DimensionError):
        layer_norm(Tensor(np.ones((2, 3))), Tensor(np.ones(2)), Tensor(np.zeros(3)))


def naive_attention(q, k, v, mask):
    """Per-head, per-query loop; independent of the vectorised path."""
    heads, lq, _ = q.shape
    out = np.zeros((heads, lq, v.shape[-1]))
    for h in range(heads):
        for i in range(lq):
            scores = []
            for j in range(k.shape[1]):
                s = sum(q[h, i, t] * k[h, j, t] for t in range(q.shape[-1])) / math.sqrt(q.shape[-1])
                scores.append(s if mask[i, j] else -math.inf)
            m = max(scores)
            w = [math.exp(s - m) for s in scores]
            z = sum(w)
            for j in range(k.shape[1]):
                out[h, i] += (w[j] / z) * v[h, j]
    return out


def test_attention_matches_naive_per_head_loop():
    rng = np.random.default_rng(5)
    q, k, v = rng.standard_normal((2, 3, 4)), rng.standard_normal((2, 5, 4)), rng.standard_normal((2, 5, 3))
    mask = rng.random((3, 5)) > 0.3
    mask[:, 0] = True
    got = scaled_dot_attention(Tensor(q), Tensor(k), Tensor(v), mask).data
    np.testing.assert_allclose(got, naive_attention(q, k, v, mask), atol=1e-12)


def test_attention_trivial_cases():
    v = np.array([[2.0, -3.0, 5.0]])
    x = np.array([[0.3, 0.7]])
    out = scaled_dot_attention(Tensor(x), Tensor(x), Tensor(v))
    np.testing.assert_array_equal(out.data, v)

    keys = np.array([[1.0, 0.0], [0.0, 1.0]])
    vals = np.array([[1.0, 2.0], [3.0, 4.0]])
    mask = np.array([[True, False]])
    out = scaled_dot_attention(Tensor(np.array([[0.0, 5.0]])), Tensor(keys), Tensor(vals), mask)
    assert out.data.tolist() == [[1.0, 2.0]]


def test_attention_shape_error():
    with pytest.raises(DimensionError):
        scaled_dot_attention(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 4))), Tensor(np.ones((2, 4))))


def test_attention_gradcheck():
    rng = np.random.default_rng(6)
    q, k, v = param(rng, 2, 3, 4), param(rng, 2, 5, 4), param(rng, 2, 5, 3)
    mask = np.tril(np.ones((3, 5), dtype=bool), k=2)
    w = rng.standard_normal((2, 3, 3))
    f = lambda: ops.sum(scaled_dot_attention(q, k, v, mask) * w)
    for t in (q, k, v):
        assert grad_check(f, t) < 1e-4


def test_linear_relu_reshape_transpose_embedding_gradcheck():
    rng = np.random.default_rng(7)
    x, wt, b = param(rng, 2, 3, 4), param(rng, 4, 6), param(rng, 6)
    table = param(rng, 5, 6)
    ids = np.array([[0, 3, 3], [1, 4, 0]])
    w = rng.standard_normal((2, 3, 3, 2))

    def f():
        h = relu(linear(x, wt, b)) + embedding(table, ids)
        return ops.sum(transpose(reshape(h, (2, 3, 3, 2)), (0, 2, 1, 3)) * np.transpose(w, (0, 2, 1, 3)))

    for t in (x, wt, b, table):
        assert grad_check(f, t) < 1e-4


def test_dropout_identities():
    x = Tensor(np.arange(6.0))
    assert dropout(x, 0.0, training=True) is x
    assert dropout(x, 0.7, training=False) is x
    with pytest.raises(ConfigError):
        dropout(x, 1.0, training=True, rng=np.random.default_rng(0))
    with pytest.raises(ConfigError):
        dropout(x, -0.1, training=False)


def test_dropout_monte_carlo():
    out = dropout(Tensor(np.ones(100_000)), 0.5, training=True, rng=np.random.default_rng(0)).data
    assert abs(out.mean() - 1.0) < 0.02
    assert abs((out == 0).mean() - 0.5) < 0.01


def test_grad_check_sum_is_exact():
    x = Tensor(np.random.default_rng(8).standard_normal(7), requires_grad=True)
    assert grad_check(lambda: ops.sum(x), x) < 1e-8


def test_grad_check_rejects_non_finite():
    x = Tensor(np.array([-1.0, 2.0]), requires_grad=True)
    with pytest.raises(EvaluationError), np.errstate(invalid="ignore"):
        grad_check(lambda: ops.sum(ops.log(x)), x)


def test_gradient_accumulation_is_linear():
    rng = np.random.default_rng(9)
    a, b = param(rng, 3, 3), param(rng, 3, 3)
    w1, w2 = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    g1 = lambda: ops.sum(softmax(matmul(a, b)) * w1)
    g2 = lambda: ops.sum(relu(matmul(b, a)) * w2)

    g1().backward()
    g2().backward()
    separate = a.grad.copy(), b.grad.copy()
    a.grad = b.grad = None
    (g1() + g2()).backward()
    np.testing.assert_allclose(a.grad, separate[0], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(b.grad, separate[1], rtol=1e-12, atol=1e-14)


def test_backward_visits_each_node_once():
    a = Tensor(np.ones(3), requires_grad=True)
    b = a * 2.0
    c = b + b
    d = c + b
    calls = []
    for node in (b, c, d):
        fn = node._backward
        node._backward = lambda g, fn=fn, node=node: (calls.append(id(node)), fn(g))
    order = ops.sum(d).backward()
    assert sorted(calls) == sorted({id(b), id(c), id(d)})
    position = {id(n): i for i, n in enumerate(order)}
    for node in order:
        for p in node._parents:
            if p.requires_grad:
                assert position[id(p)] < position[id(node)]
    np.testing.assert_array_equal(a.grad, np.full(3, 6.0))
