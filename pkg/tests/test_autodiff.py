import math

import numpy as np
import pytest

from contextproto import autodiff as ad
from contextproto.errors import ContractError, DimensionError, DomainError


def test_matmul_identity():
    a = ad.constant(np.eye(2))
    b = ad.constant([[1.0, 2.0], [3.0, 4.0]])
    out = ad.matmul(a, b)
    np.testing.assert_array_equal(out.data, [[1.0, 2.0], [3.0, 4.0]])


def test_matmul_selector_row():
    a = ad.constant([[1.0, 0.0]])
    b = ad.constant([[5.0], [7.0]])
    np.testing.assert_array_equal(ad.matmul(a, b).data, [[5.0]])


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    expected = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            for k in range(4):
                expected[i, j] += a[i, k] * b[k, j]
    out = ad.matmul(ad.constant(a), ad.constant(b))
    np.testing.assert_allclose(out.data, expected, rtol=0, atol=1e-12)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
        ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 2))))


def test_softmax_symmetry_and_closed_form():
    np.testing.assert_allclose(ad.softmax(ad.constant([0.0, 0.0])).data, [0.5, 0.5], atol=1e-15)
    out = ad.softmax(ad.constant([math.log(2.0), 0.0])).data
    np.testing.assert_allclose(out, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)


def test_softmax_large_inputs_do_not_overflow():
    out = ad.softmax(ad.constant([1000.0, 0.0])).data
    assert np.all(np.isfinite(out))
    assert out[0] > 1.0 - 1e-12
    assert out[1] < 1e-12


def test_softmax_empty_input_rejected():
    with pytest.raises(DomainError):
        ad.softmax(ad.constant(np.zeros(0)))


def test_softmax_shift_invariance():
    rng = np.random.default_rng(11)
    for _ in range(50):
        v = rng.normal(size=rng.integers(1, 12)) * 5.0
        c = float(rng.normal() * 10.0)
        base = ad.softmax(ad.constant(v)).data
        shifted = ad.softmax(ad.constant(v + c)).data
        np.testing.assert_allclose(shifted, base, atol=1e-9)
        assert abs(base.sum() - 1.0) < 1e-9


def test_elementwise_trivials():
    assert ad.sigmoid(ad.constant([0.0])).data[0] == 0.5
    assert ad.tanh(ad.constant([0.0])).data[0] == 0.0
    np.testing.assert_array_equal(
        ad.mul(ad.constant([1.0, 2.0]), ad.constant([3.0, 4.0])).data, [3.0, 8.0]
    )


def test_elementwise_shape_mismatch():
    with pytest.raises(DimensionError):
        ad.mul(ad.constant([1.0]), ad.constant([1.0, 2.0]))
    with pytest.raises(DimensionError):
        ad.add(ad.constant([1.0]), ad.constant([1.0, 2.0]))


def test_backward_square_closed_form():
    x = ad.parameter([3.0])
    loss = ad.tsum(ad.mul(x, x))
    ad.backward(loss)
    assert x.grad[0] == pytest.approx(6.0)
    assert float(loss.grad) == 1.0


def test_backward_requires_scalar_root():
    x = ad.parameter([1.0, 2.0])
    with pytest.raises(ContractError):
        ad.backward(ad.mul(x, x))


def test_cross_entropy_gradient_matches_closed_form():
    logits = ad.parameter([[0.3, -1.2]])
    loss = ad.cross_entropy(logits, [1])
    ad.backward(loss)
    p = ad.softmax_rows(logits.data)[0]
    expected = p - np.array([0.0, 1.0])
    np.testing.assert_allclose(logits.grad[0], expected, atol=1e-12)
    assert float(loss.data) == pytest.approx(-math.log(p[1]))


def test_gradient_accumulates_across_shared_use():
    x = ad.parameter([2.0])
    loss = ad.tsum(ad.add(ad.mul(x, x), x))  # x^2 + x -> 2x + 1 = 5
    ad.backward(loss)
    assert x.grad[0] == pytest.approx(5.0)


def _scalar_loss(out, rng):
    w = ad.constant(rng.normal(size=out.data.shape))
    return ad.tsum(ad.mul(out, w))


def test_every_operation_agrees_with_finite_differences():
    rng = np.random.default_rng(2024)

    def shapes():
        return int(rng.integers(1, 16)), int(rng.integers(1, 16))

    cases = []
    m, k = shapes()
    _, n = shapes()
    a = ad.parameter(rng.normal(size=(m, k)))
    b = ad.parameter(rng.normal(size=(k, n)))
    cases.append((lambda: ad.matmul(a, b), [a, b]))

    v = ad.parameter(rng.normal(size=k))
    cases.append((lambda: ad.matmul(a, v), [a, v]))
    cases.append((lambda: ad.transpose(a), [a]))

    c = ad.parameter(rng.normal(size=(m, k)))
    cases.append((lambda: ad.add(a, c), [a, c]))
    cases.append((lambda: ad.sub(a, c), [a, c]))
    cases.append((lambda: ad.mul(a, c), [a, c]))

    row = ad.parameter(rng.normal(size=k))
    cases.append((lambda: ad.add(a, row), [a, row]))
    cases.append((lambda: ad.sub(a, row), [a, row]))

    cases.append((lambda: ad.scale(a, -1.7), [a]))
    s = ad.parameter([0.8])
    cases.append((lambda: ad.smul(v, s), [v, s]))
    cases.append((lambda: ad.tanh(a), [a]))
    cases.append((lambda: ad.sigmoid(a), [a]))

    pos = ad.parameter(np.abs(rng.normal(size=m)) + 0.5)
    cases.append((lambda: ad.sqrt(pos), [pos]))

    v2 = ad.parameter(rng.normal(size=int(rng.integers(1, 16))))
    cases.append((lambda: ad.concat([v, v2]), [v, v2]))
    a2 = ad.parameter(rng.normal(size=(m, 3)))
    cases.append((lambda: ad.concat([a, a2], axis=1), [a, a2]))

    cols = [ad.parameter(rng.normal(size=m)) for _ in range(4)]
    cases.append((lambda: ad.column_stack(cols), cols))
    cases.append((lambda: ad.tsum(a, axis=1), [a]))
    cases.append((lambda: ad.softmax(v), [v]))

    for build, params in cases:
        loss_w = ad.constant(rng.normal(size=build().data.shape))
        err = ad.grad_check(lambda: ad.tsum(ad.mul(build(), loss_w)), params)
        assert err < 1e-4, f"finite-difference mismatch {err} for {build}"

    logits = ad.parameter(rng.normal(size=(5, 4)))
    targets = rng.integers(0, 4, size=5)
    err = ad.grad_check(lambda: ad.cross_entropy(logits, targets), [logits])
    assert err < 1e-4


def test_grad_check_quadratic_is_tiny():
    x = ad.parameter([1.5, -0.5, 2.0])
    err = ad.grad_check(lambda: ad.tsum(ad.mul(x, x)), [x])
    assert err < 1e-9


def test_forward_backward_replay_is_bit_identical():
    rng = np.random.default_rng(5)
    w = rng.normal(size=(6, 6))
    x = rng.normal(size=6)

    def run():
        wt = ad.parameter(w.copy())
        out = ad.tanh(ad.matmul(wt, ad.constant(x)))
        loss = ad.tsum(ad.mul(out, out))
        ad.backward(loss)
        return loss.data.copy(), wt.grad.copy()

    l1, g1 = run()
    l2, g2 = run()
    assert l1.tobytes() == l2.tobytes()
    assert g1.tobytes() == g2.tobytes()


def test_forward_values_stay_finite():
    rng = np.random.default_rng(3)
    big = ad.constant(rng.normal(size=(8, 8)) * 500.0)
    for out in (ad.tanh(big), ad.sigmoid(big), ad.softmax(ad.constant(rng.normal(size=9) * 800.0))):
        assert np.all(np.isfinite(out.data))
