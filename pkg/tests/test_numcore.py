import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vulnscan import numcore as nc

from conftest import weighted_sum


def T(a):
    return nc.Tensor(np.asarray(a, dtype=float))


UNARY = {
    "tanh": nc.tanh,
    "sigmoid": nc.sigmoid,
    "exp": nc.exp,
    "softmax": nc.softmax,
    "log_softmax": nc.log_softmax,
    "transpose": nc.transpose,
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_grad_check(name, rng):
    x = T(rng.normal(size=(3, 4)))
    probe = weighted_sum((4, 3) if name == "transpose" else (3, 4))
    assert nc.grad_check(lambda t: probe(UNARY[name](t)), x) < 1e-6


def test_log_grad_check(rng):
    x = T(rng.uniform(0.5, 2.0, size=(5,)))
    assert nc.grad_check(lambda t: nc.sum(nc.log(t)), x) < 1e-6


def test_relu_grad_away_from_kink(rng):
    x = T(rng.choice([-1, 1], size=(6,)) * rng.uniform(0.1, 1, size=(6,)))
    assert nc.grad_check(lambda t: weighted_sum((6,))(nc.relu(t)), x) < 1e-6


@pytest.mark.parametrize("op", [nc.add, nc.sub, nc.mul])
@pytest.mark.parametrize("shape_b", [(2, 3), (3,)])
def test_binary_grad_check(op, shape_b, rng):
    a = T(rng.normal(size=(2, 3)))
    b = T(rng.normal(size=shape_b))
    probe = weighted_sum((2, 3))
    assert nc.grad_check(lambda t: probe(op(t, b)), a) < 1e-6
    assert nc.grad_check(lambda t: probe(op(a, t)), b) < 1e-6


@pytest.mark.parametrize("sa,sb", [((3, 4), (4, 2)), ((4,), (4, 2)), ((2, 3, 4), (4, 2)), ((2, 3, 4), (2, 4, 5))])
def test_matmul_grad_check(sa, sb, rng):
    a, b = T(rng.normal(size=sa)), T(rng.normal(size=sb))
    probe = weighted_sum(np.matmul(a.data, b.data).shape)
    assert nc.grad_check(lambda t: probe(nc.matmul(t, b)), a) < 1e-6
    assert nc.grad_check(lambda t: probe(nc.matmul(a, t)), b) < 1e-6


def test_layer_norm_grad_check(rng):
    x, g, b = (T(rng.normal(size=s)) for s in [(3, 5), (5,), (5,)])
    probe = weighted_sum((3, 5))
    for which in range(3):
        args = [x, g, b]

        def f(t, which=which):
            args[which] = t
            return probe(nc.layer_norm(*args))

        assert nc.grad_check(f, [x, g, b][which]) < 1e-5


def test_cross_entropy_matches_formula_and_grad(rng):
    logits = T(rng.normal(size=(4, 6)))
    labels = [0, 5, 2, 2]
    z = logits.data
    want = -np.mean([z[i, y] - np.log(np.exp(z[i]).sum()) for i, y in enumerate(labels)])
    assert nc.cross_entropy(logits, labels).item() == pytest.approx(want, rel=1e-12)
    assert nc.grad_check(lambda t: nc.cross_entropy(t, labels), logits) < 1e-6


def test_structural_ops_grad_check(rng):
    x = T(rng.normal(size=(3, 4)))
    other = T(rng.normal(size=(2, 4)))
    assert nc.grad_check(lambda t: weighted_sum((5, 4))(nc.concat([t, other], axis=0)), x) < 1e-6
    assert nc.grad_check(lambda t: weighted_sum((2, 6))(nc.reshape(t, (2, 6))), x) < 1e-6
    assert nc.grad_check(lambda t: weighted_sum((2, 4))(t[np.array([2, 2])]), x) < 1e-6
    assert nc.grad_check(lambda t: weighted_sum((4,))(nc.sum(t, axis=0)), x) < 1e-6
    assert nc.grad_check(lambda t: nc.mean(nc.mul(t, t)), x) < 1e-6
    assert nc.grad_check(lambda t: weighted_sum((2, 4))(nc.stack_rows([t[0], t[2]])), x) < 1e-6


def test_embedding_grad_accumulates_repeats(rng):
    table = T(rng.normal(size=(5, 3)))
    ids = np.array([[1, 1], [4, 0]])
    assert nc.grad_check(lambda t: weighted_sum((2, 2, 3))(nc.embedding(t, ids)), table) < 1e-6
    with pytest.raises(nc.ShapeError):
        nc.embedding(table, [5])


def _lstm_reference(xproj, W, h, c):
    """Step-by-step numpy recurrence, written independently of lstm_scan."""
    H = W.shape[0]
    out = []
    for z_in in xproj:
        z = z_in + h @ W
        i = 1 / (1 + np.exp(-z[..., :H]))
        f = 1 / (1 + np.exp(-z[..., H:2 * H]))
        o = 1 / (1 + np.exp(-z[..., 2 * H:3 * H]))
        g = np.tanh(z[..., 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        out.append(h)
    return np.stack(out)


@pytest.mark.parametrize("batch", [(), (2,)])
def test_lstm_scan_forward_matches_reference(batch, rng):
    H, Tn = 3, 5
    xproj = rng.normal(size=(Tn,) + batch + (4 * H,))
    W = rng.normal(size=(H, 4 * H))
    h0, c0 = rng.normal(size=batch + (H,)), rng.normal(size=batch + (H,))
    got = nc.lstm_scan(T(xproj), T(W), T(h0), T(c0)).data
    np.testing.assert_allclose(got, _lstm_reference(xproj, W, h0, c0), rtol=1e-12, atol=1e-14)


def test_lstm_scan_grad_check(rng):
    H, Tn = 3, 4
    xs = [T(rng.normal(size=s)) for s in [(Tn, 2, 4 * H), (H, 4 * H), (2, H), (2, H)]]
    probe = weighted_sum((Tn, 2, H))
    for which in range(4):
        def f(t, which=which):
            args = list(xs)
            args[which] = t
            return probe(nc.lstm_scan(*args))

        assert nc.grad_check(f, xs[which]) < 1e-5


def test_lstm_scan_rejects_bad_shapes():
    with pytest.raises(nc.ShapeError):
        nc.lstm_scan(T(np.zeros((3, 8))), T(np.zeros((3, 12))))
    with pytest.raises(nc.ShapeError):
        nc.lstm_scan(T(np.zeros((0, 12))), T(np.zeros((3, 12))))


def test_no_grad_records_nothing():
    x = nc.Tensor(np.ones(3), requires_grad=True)
    with nc.no_grad():
        y = nc.tanh(x)
        assert not nc.grad_enabled()
    assert nc.grad_enabled()
    assert not y.requires_grad and y.op == "leaf"


def test_backward_accumulates_shared_nodes():
    x = nc.Tensor(np.array([2.0]), requires_grad=True)
    y = nc.mul(x, x)
    nc.backward(nc.sum(nc.add(y, y)))
    assert x.grad[0] == pytest.approx(8.0)
    with pytest.raises(nc.ShapeError):
        nc.backward(nc.concat([y, y]))


def test_shape_and_numerical_errors():
    with pytest.raises(nc.ShapeError):
        nc.add(T(np.zeros((2, 3))), T(np.zeros((2,))))
    with pytest.raises(nc.ShapeError):
        nc.matmul(T(np.zeros((2, 3))), T(np.zeros((2, 3))))
    with pytest.raises(nc.NumericalError):
        nc.softmax(T([1.0, np.nan]))
    with pytest.raises(nc.NumericalError):
        nc.check_finite(T([np.inf]), "probe")
    with pytest.raises(ValueError):
        nc.cross_entropy(T(np.zeros((1, 3))), [3])


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)),
                  elements=st.floats(-700, 700)))
def test_softmax_rows_are_distributions(x):
    y = nc.softmax(T(x)).data
    assert np.all(y >= 0)
    np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-12)
    logp = nc.log_softmax(T(x)).data
    assert np.all(np.isfinite(logp)) and np.all(logp <= 1e-12)
    np.testing.assert_allclose(np.exp(logp), y, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, st.integers(1, 8), elements=st.floats(-50, 50)))
def test_sigmoid_is_stable_and_symmetric(x):
    s = nc.sigmoid(T(x)).data
    assert np.all((s >= 0) & (s <= 1))
    np.testing.assert_allclose(s + nc.sigmoid(T(-x)).data, 1.0, atol=1e-12)
