import math

import numpy as np
import numpy.testing as npt
import pytest

from daqa.diffcore import (
    GradCheckError,
    ShapeError,
    Tape,
    TapeError,
    Tensor,
    ValidationError,
    add,
    attention,
    clamp,
    cross_entropy,
    gather_rows,
    gelu,
    grad_check,
    kl_uniform,
    layer_norm,
    log,
    log_softmax,
    matmul,
    mean_,
    mul,
    neg,
    pick,
    relu,
    reshape,
    select_index,
    softmax,
    sub,
    sum_,
    transpose,
)


# ---------------------------------------------------------------------------
# softmax


def test_softmax_symmetric_input():
    out = softmax(Tensor([0.0, 0.0, 0.0]))
    npt.assert_allclose(out.data, [1 / 3, 1 / 3, 1 / 3], atol=1e-12)


def test_softmax_direct_evaluation():
    # Independent oracle: direct exponential-sum evaluation.
    x = [1.0, 2.0, 3.0]
    z = sum(math.exp(v) for v in x)
    expected = [math.exp(v) / z for v in x]
    out = softmax(Tensor(x))
    npt.assert_allclose(out.data, expected, rtol=1e-12)
    npt.assert_allclose(out.data, [0.09003, 0.24473, 0.66524], atol=5e-6)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(11)
    for _ in range(10):
        x = rng.normal(size=7)
        c = rng.normal() * 10
        npt.assert_allclose(softmax(Tensor(x)).data, softmax(Tensor(x + c)).data,
                            atol=1e-12)


def test_softmax_slices_sum_to_one():
    rng = np.random.default_rng(3)
    x = rng.normal(scale=20, size=(4, 6, 9))
    sums = softmax(Tensor(x)).data.sum(axis=-1)
    npt.assert_allclose(sums, 1.0, atol=1e-9)
    assert np.all(softmax(Tensor(x)).data > 0)


def test_softmax_empty_axis_rejected():
    with pytest.raises(ShapeError):
        softmax(Tensor(np.zeros((2, 0))))


# ---------------------------------------------------------------------------
# cross entropy


def test_cross_entropy_uniform_two_way():
    assert cross_entropy(Tensor([0.0, 0.0]), 0).item() == pytest.approx(math.log(2), abs=1e-12)


def test_cross_entropy_direct_evaluation():
    # -log(e^2 / (e^2 + 2)) == log(1 + 2 e^-2)
    expected = math.log(1 + 2 * math.exp(-2))
    assert cross_entropy(Tensor([2.0, 0.0, 0.0]), 0).item() == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.23954, abs=5e-6)


def test_cross_entropy_vanishes_as_target_prob_approaches_one():
    losses = [cross_entropy(Tensor([m, 0.0, 0.0]), 0).item() for m in (5.0, 10.0, 20.0)]
    assert losses[0] > losses[1] > losses[2]
    assert losses[2] < 1e-8


def test_cross_entropy_target_out_of_range():
    with pytest.raises(IndexError):
        cross_entropy(Tensor([0.0, 1.0]), 2)


def test_cross_entropy_matches_log_softmax():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.normal(scale=3, size=8)
        t = int(rng.integers(8))
        ce = cross_entropy(Tensor(x), t).item()
        assert ce >= 0
        assert ce + math.log(softmax(Tensor(x)).data[t]) == pytest.approx(0, abs=1e-9)


def test_cross_entropy_batched_rows():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(4, 5))
    t = rng.integers(5, size=4)
    batched = cross_entropy(Tensor(x), t).data
    rows = [cross_entropy(Tensor(x[i]), int(t[i])).item() for i in range(4)]
    npt.assert_allclose(batched, rows, rtol=1e-12)


# ---------------------------------------------------------------------------
# KL to uniform


def test_kl_uniform_of_uniform_is_zero():
    assert kl_uniform(Tensor([1 / 6] * 6)).item() == pytest.approx(0.0, abs=1e-12)
    assert kl_uniform(Tensor([1 / 6] * 6)).item() >= 0.0


def kl_to_uniform_oracle(p):
    # Direct summation: KL(U||P) = sum_i (1/K) log((1/K) / p_i).
    k = len(p)
    return sum((1 / k) * math.log((1 / k) / pi) for pi in p)


def test_kl_uniform_direct_summation():
    assert kl_uniform(Tensor([0.7, 0.2, 0.1])).item() == pytest.approx(
        kl_to_uniform_oracle([0.7, 0.2, 0.1]), rel=1e-12)
    assert kl_uniform(Tensor([0.7, 0.2, 0.1])).item() == pytest.approx(0.32431, abs=1e-4)
    assert kl_uniform(Tensor([0.98, 0.01, 0.01])).item() == pytest.approx(
        kl_to_uniform_oracle([0.98, 0.01, 0.01]), rel=1e-12)
    assert kl_uniform(Tensor([0.98, 0.01, 0.01])).item() == pytest.approx(1.97824, abs=1e-4)


def test_kl_uniform_rejects_unnormalized():
    with pytest.raises(ValidationError):
        kl_uniform(Tensor([0.5, 0.6]))


def test_kl_uniform_nonnegative_on_softmax_outputs():
    rng = np.random.default_rng(9)
    for _ in range(200):
        z = rng.normal(scale=rng.uniform(0.1, 30), size=rng.integers(2, 9))
        assert kl_uniform(softmax(Tensor(z))).item() >= 0.0


def test_kl_uniform_batched_rows():
    rng = np.random.default_rng(10)
    p = softmax(Tensor(rng.normal(size=(5, 4)))).data
    batched = kl_uniform(Tensor(p)).data
    rows = [kl_uniform(Tensor(p[i])).item() for i in range(5)]
    npt.assert_allclose(batched, rows, rtol=1e-12)


# ---------------------------------------------------------------------------
# tape semantics


def test_backward_twice_is_an_error():
    x = Tensor([2.0], requires_grad=True)
    with Tape() as tape:
        y = mul(x, x)
        loss = sum_(y)
    tape.backward(loss)
    with pytest.raises(TapeError):
        tape.backward(loss)


def test_no_requires_grad_leaves_no_buffers():
    x = Tensor([1.0, 2.0])
    y = Tensor([3.0, 4.0])
    with Tape() as tape:
        out = sum_(mul(x, y))
    tape.backward(out)
    assert x.grad is None and y.grad is None and out.grad is None


def test_ops_outside_tape_do_not_record():
    x = Tensor([1.0], requires_grad=True)
    out = mul(x, x)
    assert not out.requires_grad
    with Tape() as tape:
        _ = mul(x, x)
    assert len(tape) == 1


def test_nested_tape_rejected():
    with Tape():
        with pytest.raises(TapeError):
            with Tape():
                pass


def test_detach_blocks_gradient():
    x = Tensor([3.0], requires_grad=True)
    with Tape() as tape:
        loss = sum_(mul(x.detach(), x.detach()))
    tape.backward(loss)
    assert x.grad is None


# ---------------------------------------------------------------------------
# gradient checking


def test_grad_check_polynomial():
    x = Tensor(np.array([3.0]), requires_grad=True)

    def f():
        return sum_(mul(x, x))

    # Analytic gradient of x^2 at 3 is 6; central difference is exact here.
    assert grad_check(f, [x]) < 1e-10


def test_grad_check_disconnected_parameter():
    x = Tensor(np.array([1.0]), requires_grad=True)
    unused = Tensor(np.array([5.0]), requires_grad=True)

    def f():
        return sum_(mul(x, x))

    assert grad_check(f, [x, unused]) < 1e-10
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    assert unused.grad is None


def test_grad_check_rejects_float32_params():
    x = Tensor(np.array([1.0], dtype=np.float32), requires_grad=True)
    with pytest.raises(GradCheckError):
        grad_check(f=lambda: sum_(mul(x, x)), params=[x])


def test_grad_check_rejects_nonfinite():
    x = Tensor(np.array([1.0]), requires_grad=True)

    def f():
        return sum_(log(clamp(mul(x, np.nan), 1e-12, 1.0)))

    with pytest.raises(GradCheckError):
        grad_check(f, [x])


def _primitive_cases(rng):
    """One taped scalar function per primitive, with fresh random operands."""
    n, m, k = 3, 4, 5
    w = Tensor(rng.normal(size=(m, k)), requires_grad=True)
    x = Tensor(rng.normal(size=(n, m)), requires_grad=True)
    gain = Tensor(rng.normal(size=(m,)) + 1.0, requires_grad=True)
    bias = Tensor(rng.normal(size=(m,)), requires_grad=True)
    table = Tensor(rng.normal(size=(6, m)), requires_grad=True)
    ids = rng.integers(6, size=(n, 2))
    picks = rng.integers(m, size=n)
    probe = Tensor(rng.normal(size=(n, m)))
    probe_k = Tensor(rng.normal(size=(n, k)))
    bm = Tensor(rng.normal(size=(2, n, m)), requires_grad=True)
    bm2 = Tensor(rng.normal(size=(2, m, k)), requires_grad=True)
    att_q = Tensor(rng.normal(size=(2, 2, n, m)), requires_grad=True)
    att_k = Tensor(rng.normal(size=(2, 2, n, m)), requires_grad=True)
    att_v = Tensor(rng.normal(size=(2, 2, n, m)), requires_grad=True)
    mask_bits = rng.random((2, 1, 1, n)) < 0.3
    mask_bits[..., 0] = False  # every row keeps at least one attendable key
    att_mask = Tensor(np.where(mask_bits, -1e30, 0.0))
    targets = rng.integers(k, size=n)

    return [
        ("matmul", lambda: mean_(mul(matmul(x, w), probe_k)), [x, w]),
        ("matmul_batched", lambda: mean_(matmul(bm, bm2)), [bm, bm2]),
        ("add_broadcast", lambda: mean_(mul(add(x, bias), probe)), [x, bias]),
        ("mul_broadcast", lambda: mean_(mul(mul(x, gain), probe)), [x, gain]),
        ("sub", lambda: mean_(mul(sub(x, mul(x, 0.3)), probe)), [x]),
        ("neg", lambda: mean_(mul(neg(x), probe)), [x]),
        ("gather_rows", lambda: mean_(gather_rows(table, ids)), [table]),
        ("layer_norm", lambda: mean_(mul(layer_norm(x, gain, bias), probe)), [x, gain, bias]),
        ("relu", lambda: mean_(mul(relu(x), probe)), [x]),
        ("gelu", lambda: mean_(mul(gelu(x), probe)), [x]),
        ("softmax", lambda: mean_(mul(softmax(x), probe)), [x]),
        ("log_softmax", lambda: mean_(mul(log_softmax(x), probe)), [x]),
        ("sum_axis", lambda: mean_(sum_(mul(x, probe), axis=0)), [x]),
        ("mean_keepdims", lambda: sum_(mean_(mul(x, probe), axis=1, keepdims=True)), [x]),
        ("reshape_transpose",
         lambda: mean_(mul(transpose(reshape(x, (m, n)), (1, 0)), probe)), [x]),
        ("select_index", lambda: mean_(select_index(mul(x, probe), 1, 2)), [x]),
        ("pick", lambda: mean_(pick(x, picks)), [x]),
        ("clamp_log", lambda: mean_(log(clamp(softmax(x), 1e-12, 1.0))), [x]),
        ("cross_entropy", lambda: mean_(cross_entropy(matmul(x, w), targets)), [x, w]),
        ("kl_uniform", lambda: mean_(kl_uniform(softmax(matmul(x, w)))), [x, w]),
        ("attention", lambda: mean_(attention(att_q, att_k, att_v, att_mask)),
         [att_q, att_k, att_v]),
    ]


def test_every_primitive_grad_checks_under_tolerance():
    names = [name for name, _, _ in _primitive_cases(np.random.default_rng(0))]
    worst = dict.fromkeys(names, 0.0)
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        for name, f, params in _primitive_cases(rng):
            # eps below the 1e-3 default keeps the O(eps^2) truncation term
            # of the central difference well under the asserted tolerance.
            worst[name] = max(worst[name], grad_check(f, params, eps=1e-5))
    bad = {name: err for name, err in worst.items() if err >= 1e-4}
    assert not bad, f"primitives over tolerance: {bad}"


# ---------------------------------------------------------------------------
# shape and dtype contracts


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        matmul(Tensor(np.zeros((2, 3, 4))), Tensor(np.zeros((3, 4, 2))))


def test_tensor_shape_invariant():
    t = Tensor(np.arange(6, dtype=np.float64).reshape(2, 3))
    assert t.shape == (2, 3) and t.size == 6


def test_forward_outputs_finite_on_finite_inputs():
    rng = np.random.default_rng(21)
    x = Tensor(rng.normal(scale=50, size=(4, 9)))
    for out in (softmax(x), log_softmax(x), gelu(x), relu(x),
                layer_norm(x, Tensor(np.ones(9)), Tensor(np.zeros(9)))):
        assert np.all(np.isfinite(out.data))


def test_accumulate_grad_shape_mismatch():
    t = Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(ShapeError):
        t.accumulate_grad(np.zeros(3))
