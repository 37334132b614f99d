import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlnc.checkpoint import load_arrays, save_arrays
from mlnc.graph import normalize_adjacency
from mlnc.optim import AdamState, adam_step
from mlnc.tensor import NonFiniteError, Param, RunningStats, Tape, Tensor, naive_bce, sigmoid_array

from conftest import random_graph

H = 1e-5


def central_diff(f, x):
    """Numerical gradient of scalar f at array x by central differences."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + H
        fp = f()
        x[idx] = old - H
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * H)
    return g


def max_rel(a, n):
    return np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6))


def check_primitive(build, inputs, rng, tol=1e-4):
    """build(tape, *tensors) -> Tensor; compares tape VJP with finite differences."""
    tensors = [Param(f"x{i}", v) for i, v in enumerate(inputs)]
    tape = Tape()
    out = build(tape, *tensors)
    upstream = rng.normal(size=out.shape)
    tape.backward(out, grad=upstream)
    for t in tensors:
        num = central_diff(lambda: float(np.sum(build(Tape(record=False), *tensors).value * upstream)),
                           t.value)
        assert max_rel(t.grad, num) <= tol, t.name


def test_linear_identity():
    tape = Tape(record=False)
    x = Tensor(np.arange(6.0).reshape(2, 3))
    out = tape.linear(x, Param("w", np.eye(3)), Param("b", np.zeros((1, 3))))
    np.testing.assert_array_equal(out.value, x.value)


def test_linear_scalar_chain_rule():
    tape = Tape()
    x, w, b = Param("x", [[2.0]]), Param("w", [[3.0]]), Param("b", [[1.0]])
    out = tape.linear(x, w, b)
    assert out.value[0, 0] == 7.0
    tape.backward(out)
    assert w.grad[0, 0] == 2.0 and x.grad[0, 0] == 3.0 and b.grad[0, 0] == 1.0


def test_linear_shape_mismatch():
    with pytest.raises(ValueError):
        Tape().linear(Tensor(np.ones((2, 3))), Param("w", np.ones((2, 2))))


@pytest.mark.parametrize("seed", range(20))
def test_primitives_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n, a, b = rng.integers(2, 7), rng.integers(2, 6), rng.integers(1, 5)
    x = rng.normal(size=(n, a))
    check_primitive(lambda t, x, w, c: t.linear(x, w, c), [x, rng.normal(size=(a, b)),
                                                        rng.normal(size=(1, b))], rng, tol=1e-6)
    # keep relu inputs away from the kink
    xr = np.where(np.abs(x) < 1e-3, 0.5, x)
    check_primitive(lambda t, x: t.relu(x), [xr], rng)
    check_primitive(lambda t, x: t.sigmoid(x), [x], rng)
    stats = RunningStats.zeros(a)
    check_primitive(lambda t, x, g, s: t.batch_norm(x, g, s, stats, True),
                    [x, rng.normal(size=(1, a)), rng.normal(size=(1, a))], rng)
    check_primitive(lambda t, x, g, s: t.batch_norm(x, g, s, stats, False),
                    [x, rng.normal(size=(1, a)), rng.normal(size=(1, a))], rng)
    check_primitive(lambda t, x, g, s: t.layer_norm(x, g, s),
                    [x, rng.normal(size=(1, a)), rng.normal(size=(1, a))], rng)
    g = random_graph(rng, int(n))
    adj = normalize_adjacency(g)
    check_primitive(lambda t, x: t.spmm(adj, x), [x], rng)
    check_primitive(lambda t, x, y: t.add(t.scale(x, 0.3), y), [x, rng.normal(size=x.shape)], rng)


def test_relu_and_sigmoid_values():
    tape = Tape(record=False)
    np.testing.assert_array_equal(tape.relu(Tensor([[-1.0, 2.0]])).value, [[0.0, 2.0]])
    assert tape.sigmoid(Tensor([[0.0]])).value[0, 0] == 0.5
    t = Tape()
    x = Param("x", [[0.0]])
    t.backward(t.sigmoid(x))
    assert x.grad[0, 0] == 0.25


def test_sigmoid_open_interval():
    s = sigmoid_array(np.array([[-30.0, 0.0, 30.0]]))
    assert np.all((s > 0) & (s < 1))


def test_batch_norm_constant_column_gives_shift():
    tape = Tape(record=False)
    x = Tensor(np.full((4, 1), 3.0))
    out = tape.batch_norm(x, Param("g", [[2.0]]), Param("b", [[0.7]]), RunningStats.zeros(1), True)
    np.testing.assert_allclose(out.value, 0.7)


def test_batch_norm_hand_value():
    tape = Tape(record=False)
    out = tape.batch_norm(Tensor([[-1.0], [1.0]]), Param("g", [[1.0]]), Param("b", [[0.0]]),
                          RunningStats.zeros(1), True)
    v = 1 / np.sqrt(1 + 1e-5)
    np.testing.assert_allclose(out.value, [[-v], [v]], rtol=1e-15)


def test_batch_norm_single_row_train_errors():
    with pytest.raises(ValueError):
        Tape().batch_norm(Tensor([[1.0]]), Param("g", [[1.0]]), Param("b", [[0.0]]),
                          RunningStats.zeros(1), True)


def test_batch_norm_running_stats_and_eval_affine():
    stats = RunningStats.zeros(2)
    x = np.array([[0.0, 1.0], [2.0, 5.0], [4.0, 3.0]])
    g, b = Param("g", [[1.5, 0.5]]), Param("b", [[0.1, -0.2]])
    Tape(record=False).batch_norm(Tensor(x), g, b, stats, True)
    np.testing.assert_allclose(stats.mean, 0.1 * x.mean(0))
    np.testing.assert_allclose(stats.var, 0.9 + 0.1 * x.var(0, ddof=1))
    # eval: y = a*x + c with fixed a, c
    f = lambda z: Tape(record=False).batch_norm(Tensor(z), g, b, stats, False).value
    y0, y1, y2 = f(np.zeros((1, 2))), f(np.ones((1, 2))), f(2 * np.ones((1, 2)))
    np.testing.assert_allclose(y2 - y1, y1 - y0)
    np.testing.assert_array_equal(f(x), f(x))


def test_layer_norm_values():
    tape = Tape(record=False)
    g, b = Param("g", [[1.0, 1.0]]), Param("b", [[0.5, 0.5]])
    out = tape.layer_norm(Tensor([[3.0, 3.0], [0.0, 2.0]]), g, b).value
    np.testing.assert_allclose(out[0], [0.5, 0.5])
    v = 1 / np.sqrt(1 + 1e-5)
    np.testing.assert_allclose(out[1], [0.5 - v, 0.5 + v], rtol=1e-15)
    with pytest.raises(ValueError):
        tape.layer_norm(Tensor([[1.0]]), Param("g", [[1.0]]), Param("b", [[0.0]]))


def test_dropout_identities():
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(5, 4)))
    tape = Tape()
    assert tape.dropout(x, 0.0, True, rng) is x
    assert tape.dropout(x, 0.7, False, rng) is x
    with pytest.raises(ValueError):
        tape.dropout(x, 1.0, True, rng)


def test_dropout_preserves_expectation():
    rng = np.random.default_rng(1)
    out = Tape(record=False).dropout(Tensor(np.ones((1000, 100))), 0.5, True, rng).value
    assert 0.98 <= out.mean() <= 1.02
    assert set(np.unique(out)) <= {0.0, 2.0}


def test_dropout_backward_uses_mask():
    rng = np.random.default_rng(2)
    x = Param("x", np.ones((10, 10)))
    tape = Tape()
    out = tape.dropout(x, 0.3, True, rng)
    tape.backward(out, grad=np.ones((10, 10)))
    np.testing.assert_array_equal(x.grad, out.value)


def test_bce_examples():
    tape = Tape(record=False)
    for y in (1, 0):
        loss = tape.bce_with_logits(Tensor([[0.0]]), np.array([[y]]), [0])
        assert loss.value[0, 0] == pytest.approx(np.log(2), abs=1e-15)


def test_bce_random_case_matches_naive():
    rng = np.random.default_rng(4)
    z = rng.normal(scale=3, size=(4, 3))
    y = (rng.random((4, 3)) < 0.5).astype(int)
    loss = Tape(record=False).bce_with_logits(Tensor(z), y, [0, 1, 2, 3]).value[0, 0]
    assert loss == pytest.approx(naive_bce(1 / (1 + np.exp(-z)), y), abs=1e-10)


def naive_bce_exact(z, y):
    # the naive formula itself loses ~1e-8 to cancellation in float64 near |z| = 20,
    # so evaluate it in 50-digit arithmetic
    with mpmath.workdps(50):
        total = mpmath.mpf(0)
        for zi, yi in zip(z.ravel(), y.ravel()):
            p = 1 / (1 + mpmath.exp(-mpmath.mpf(float(zi))))
            total -= yi * mpmath.log(p) + (1 - yi) * mpmath.log(1 - p)
        return float(total)


@given(seed=st.integers(0, 2**31), scale=st.floats(0.1, 25))
def test_bce_fused_equals_naive_formula_for_logits_up_to_20(seed, scale):
    rng = np.random.default_rng(seed)
    z = np.clip(rng.normal(scale=scale, size=(6, 4)), -20, 20)
    y = (rng.random((6, 4)) < 0.5).astype(int)
    rows = np.sort(rng.choice(6, size=3, replace=False))
    fused = Tape(record=False).bce_with_logits(Tensor(z), y, rows).value[0, 0]
    assert fused == pytest.approx(naive_bce_exact(z[rows], y[rows]), abs=1e-10)


def test_bce_gradient_and_mask():
    rng = np.random.default_rng(5)
    z = Param("z", rng.normal(size=(5, 3)))
    y = (rng.random((5, 3)) < 0.5).astype(int)
    rows = [0, 3]
    tape = Tape()
    tape.backward(tape.bce_with_logits(z, y, rows))
    num = central_diff(lambda: Tape(record=False).bce_with_logits(z, y, rows).value[0, 0], z.value)
    assert max_rel(z.grad, num) < 1e-6
    assert np.all(z.grad[[1, 2, 4]] == 0)
    with pytest.raises(ValueError):
        tape.bce_with_logits(z, y, [])


def test_bce_extreme_logits_stay_finite():
    loss = Tape(record=False).bce_with_logits(Tensor([[800.0, -800.0]]), np.array([[0, 1]]), [0])
    assert loss.value[0, 0] == pytest.approx(1600.0)


def test_non_finite_detected():
    with pytest.raises(NonFiniteError):
        Tape().matmul(Tensor([[np.inf]]), Param("w", [[1.0]]))


def test_backward_zeroes_param_grads_each_pass():
    w = Param("w", [[2.0]])
    for _ in range(3):
        tape = Tape()
        tape.backward(tape.matmul(Tensor([[1.5]]), w))
        assert w.grad[0, 0] == 1.5


def test_adam_zero_grad_keeps_params():
    p = Param("p", [[1.0, -2.0]])
    st_ = AdamState([p], lr=0.1)
    p.grad = np.zeros_like(p.value)
    adam_step(st_)
    np.testing.assert_array_equal(p.value, [[1.0, -2.0]])
    assert st_.t == 1


def test_adam_first_step():
    p = Param("p", [[0.0]])
    st_ = AdamState([p], lr=0.01)
    p.grad = np.array([[1.0]])
    adam_step(st_)
    # bias corrections cancel on step 1: m_hat = g, v_hat = g^2
    assert p.value[0, 0] == pytest.approx(-0.01 / (1 + 1e-8), rel=1e-12)


def test_adam_constant_gradient_step_tends_to_lr():
    p = Param("p", [[0.0]])
    st_ = AdamState([p], lr=0.01)
    steps = []
    for _ in range(200):
        before = p.value[0, 0]
        p.grad = np.array([[0.37]])
        adam_step(st_)
        steps.append(before - p.value[0, 0])
    assert steps[-1] == pytest.approx(0.01, rel=1e-6)
    assert st_.t == 200


def test_adam_before_backward_errors():
    with pytest.raises(RuntimeError):
        adam_step(AdamState([Param("p", [[1.0]])]))


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {"input_proj.weight": rng.normal(size=(3, 4)), "layers.0.bias": np.zeros((1, 4)),
              "ünïcode": rng.normal(size=(2, 1))}
    save_arrays(arrays, tmp_path / "m.ckpt")
    back = load_arrays(tmp_path / "m.ckpt")
    assert list(back) == list(arrays)
    for k in arrays:
        np.testing.assert_array_equal(back[k], arrays[k])
    raw = (tmp_path / "m.ckpt").read_bytes()
    assert raw[:8] == b"MLNCCKPT"
    (tmp_path / "bad.ckpt").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ValueError):
        load_arrays(tmp_path / "bad.ckpt")
