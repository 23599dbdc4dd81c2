from typing import Callable, Dict

import numpy as np
import pytest

from src.kernel import ops
from src.kernel.gradcheck import compare_gradients, finite_diff_grad
from src.kernel.tape import Tape, Tensor, as_tensor
from src.lib.core.errors import ShapeError, TokenIndexError


def assert_gradients(
    fn: Callable[[Dict[str, object]], Tensor], arrays: Dict[str, np.ndarray]
) -> None:
    """Analytic gradient of <fn(x), R> for a fixed random R matches numerics"""
    direction = np.random.default_rng(99).normal(size=fn(arrays).shape)

    def scalar(m):
        return ops.reduce_sum(ops.elementwise_product(fn(m), direction))

    tape = Tape()
    tracked = {name: tape.watch(name, array) for name, array in arrays.items()}
    analytic = tape.gradients(scalar(tracked))
    numeric = finite_diff_grad(lambda p: scalar(p).item(), arrays)
    report = compare_gradients(analytic, numeric, rtol=1e-5, atol=1e-8)
    assert report.passed, report


@pytest.fixture
def arrays(rng):
    return {
        "a": rng.normal(size=(3, 4)),
        "b": rng.normal(size=(3, 4)),
        "w": rng.normal(size=(4, 2)),
        "v": rng.normal(size=4),
    }


def test_elementwise_gradients(arrays):
    sub = {"a": arrays["a"], "b": arrays["b"]}
    assert_gradients(lambda m: ops.add(m["a"], m["b"]), sub)
    assert_gradients(lambda m: ops.sub(m["a"], m["b"]), sub)
    assert_gradients(lambda m: ops.elementwise_product(m["a"], m["b"]), sub)
    assert_gradients(lambda m: ops.scale(m["a"], -2.5), {"a": arrays["a"]})
    assert_gradients(lambda m: ops.relu(m["a"]), {"a": arrays["a"]})
    assert_gradients(lambda m: ops.transpose(m["a"]), {"a": arrays["a"]})


def test_matmul_gradients(arrays, rng):
    assert_gradients(
        lambda m: ops.matmul(m["a"], m["w"]), {"a": arrays["a"], "w": arrays["w"]}
    )
    assert_gradients(
        lambda m: ops.matmul(m["a"], m["v"]), {"a": arrays["a"], "v": arrays["v"]}
    )
    cube = {"x": rng.normal(size=(2, 3, 4)), "v": arrays["v"]}
    assert_gradients(lambda m: ops.matmul(m["x"], m["v"]), cube)


def test_reduction_gradients(arrays):
    a = {"a": arrays["a"]}
    assert_gradients(lambda m: ops.reduce_sum(m["a"]), a)
    assert_gradients(lambda m: ops.reduce_sum(m["a"], axis=0), a)
    assert_gradients(lambda m: ops.reduce_sum(m["a"], axis=-1), a)
    assert_gradients(lambda m: ops.reduce_max(m["a"]), a)
    assert_gradients(lambda m: ops.square_sum(m["a"]), a)
    assert_gradients(lambda m: ops.abs_sum(m["a"]), a)


def test_softmax_gradients(arrays):
    assert_gradients(lambda m: ops.softmax(m["v"]), {"v": arrays["v"]})
    assert_gradients(lambda m: ops.softmax(m["a"], axis=0), {"a": arrays["a"]})
    assert_gradients(lambda m: ops.softmax(m["a"], axis=1), {"a": arrays["a"]})


def test_gather_and_stack_gradients(arrays):
    ids = np.array([2, 0, 2, 1])
    assert_gradients(lambda m: ops.gather_rows(m["a"], ids), {"a": arrays["a"]})
    assert_gradients(
        lambda m: ops.stack([m["a"], m["b"], m["a"]]),
        {"a": arrays["a"], "b": arrays["b"]},
    )


def test_linear_relu_gradients(rng):
    params = {
        "x": rng.normal(size=(5, 3)),
        "W": rng.normal(size=(2, 3)),
        "b": rng.normal(size=2),
    }
    assert_gradients(lambda m: ops.linear_relu(m["x"], m["W"], m["b"]), params)


def test_conv_context_gradients(rng):
    params = {
        "doc": rng.normal(size=(6, 4)),
        "K": rng.normal(size=(3, 3, 4)),
        "b": rng.normal(size=3),
    }
    pads = np.array([False, False, True, True, True, False])
    assert_gradients(lambda m: ops.conv_context(m["doc"], m["K"], m["b"], pads), params)


def test_pairwise_product_gradients(rng):
    params = {"M": rng.normal(size=(4, 2)), "V": rng.normal(size=(4, 3))}
    assert_gradients(lambda m: ops.pairwise_product(m["M"], m["V"]), params)


def test_pairwise_product_values():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    V = np.array([[5.0], [6.0]])
    out = ops.pairwise_product(M, V).value
    assert out.shape == (2, 1, 2)
    assert np.array_equal(out[1, 0], [10.0, 24.0])


def test_shared_operand_accumulates(rng):
    a = rng.normal(size=3)
    tape = Tape()
    x = tape.watch("x", a)
    total = ops.reduce_sum(ops.elementwise_product(x, x))
    assert np.allclose(tape.gradients(total)["x"], 2 * a)


def test_unused_parameter_gets_zero_gradient():
    tape = Tape()
    x = tape.watch("x", np.ones(2))
    tape.watch("y", np.ones(3))
    grads = tape.gradients(ops.reduce_sum(x))
    assert np.array_equal(grads["y"], np.zeros(3))


def test_constants_are_not_recorded():
    out = ops.add(np.ones(2), np.ones(2))
    assert not out.tracked


def test_gradient_root_must_be_scalar():
    tape = Tape()
    x = tape.watch("x", np.ones(2))
    with pytest.raises(ShapeError):
        tape.gradients(ops.scale(x, 2.0))


def test_relu_subgradient_at_zero():
    tape = Tape()
    x = tape.watch("x", np.array([-1.0, 0.0, 2.0]))
    grads = tape.gradients(ops.reduce_sum(ops.relu(x)))
    assert np.array_equal(grads["x"], [0.0, 0.0, 1.0])


def test_reduce_max_routes_to_first_argmax():
    tape = Tape()
    x = tape.watch("x", np.array([[1.0, 5.0], [3.0, 5.0], [3.0, 0.0]]))
    grads = tape.gradients(ops.reduce_sum(ops.reduce_max(x)))
    assert np.array_equal(grads["x"], [[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]])


def test_softmax_is_stable_for_large_logits():
    y = ops.softmax(np.array([1000.0, 1000.0, -1000.0])).value
    assert np.allclose(y, [0.5, 0.5, 0.0])
    assert np.isfinite(y).all()


def test_softmax_of_empty_vector():
    with pytest.raises(ShapeError):
        ops.softmax(np.zeros(0))


def test_conv_context_empty_document():
    out = ops.conv_context(np.zeros((0, 4)), np.ones((3, 3, 4)), np.zeros(3))
    assert out.shape == (0, 3)


def test_conv_context_all_pad_window_is_zero():
    doc = np.zeros((3, 2))
    doc[1] = [1.0, 1.0]
    kernel = np.ones((1, 1, 2))
    bias = np.array([1.0])
    pads = np.array([True, False, True])
    out = ops.conv_context(doc, kernel, bias, pads).value
    assert np.array_equal(out[:, 0], [0.0, 3.0, 0.0])


def test_conv_context_zero_pads_the_borders():
    doc = np.array([[1.0], [2.0], [3.0]])
    kernel = np.ones((1, 3, 1))
    out = ops.conv_context(doc, kernel, np.zeros(1)).value
    assert np.array_equal(out[:, 0], [3.0, 6.0, 5.0])


def test_conv_context_rejects_even_width():
    with pytest.raises(ShapeError):
        ops.conv_context(np.ones((3, 2)), np.ones((1, 2, 2)), np.zeros(1))


def test_shape_mismatch_is_reported():
    with pytest.raises(ShapeError):
        ops.add(np.ones(2), np.ones(3))
    with pytest.raises(ShapeError):
        ops.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ShapeError):
        ops.linear_relu(np.ones(3), np.ones((2, 4)), np.ones(2))


def test_gather_rows_rejects_out_of_range_ids():
    with pytest.raises(TokenIndexError):
        ops.gather_rows(np.ones((3, 2)), np.array([0, 3]))


def test_dropout_identity_without_rate_or_generator(rng):
    a = as_tensor(np.ones(4))
    assert ops.dropout(a, 0.0, rng) is a
    assert ops.dropout(a, 0.5, None) is a


def test_dropout_rescales_kept_units(rng):
    out = ops.dropout(np.ones(1000), 0.5, rng).value
    assert set(np.unique(out)) <= {0.0, 2.0}
    assert 300 < np.count_nonzero(out) < 700


def test_batched_conv_context_matches_each_document(rng):
    docs = rng.normal(size=(3, 5, 4))
    K, b = rng.normal(size=(2, 3, 4)), rng.normal(size=2)
    pads = rng.random((3, 5)) < 0.3
    batched = ops.conv_context(docs, K, b, pads).value
    assert batched.shape == (3, 5, 2)
    for row in range(3):
        single = ops.conv_context(docs[row], K, b, pads[row]).value
        assert np.allclose(batched[row], single, rtol=0, atol=1e-12)


def test_batched_conv_context_gradients(rng):
    params = {
        "doc": rng.normal(size=(2, 5, 3)),
        "K": rng.normal(size=(2, 3, 3)),
        "b": rng.normal(size=2),
    }
    pads = np.array([[False] * 5, [False, False, True, True, True]])
    assert_gradients(lambda m: ops.conv_context(m["doc"], m["K"], m["b"], pads), params)


def test_batched_reduce_max_gradients(rng):
    cube = {"x": rng.normal(size=(3, 4, 2))}
    assert_gradients(lambda m: ops.reduce_max(m["x"]), cube)


def test_batched_reduce_max_is_per_document():
    x = np.array([[[1.0, 0.0], [2.0, -1.0]], [[0.0, 4.0], [0.0, 3.0]]])
    assert np.array_equal(ops.reduce_max(x).value, [[2.0, 0.0], [0.0, 4.0]])


def test_batched_conv_context_of_empty_documents():
    out = ops.conv_context(np.zeros((2, 0, 4)), np.ones((3, 3, 4)), np.zeros(3))
    assert out.shape == (2, 0, 3)
