"""Reverse-mode differentiation: primitives, backward pass, gradient checks."""

import numpy as np
import pytest

from equisr import diff
from equisr.checks import run_all
from equisr.diff import Tape, Tensor, apply_primitive, backward, check_gradients
from equisr.errors import CatalogueError, ContractError, EvaluationError, ShapeError


class TestPrimitives:
    def test_relu_values(self):
        out = diff.relu(Tensor([-1.0, 0.0, 2.0]))
        assert np.array_equal(out.data, [0.0, 0.0, 2.0])

    def test_matmul_identity(self):
        v = np.array([3.0, -1.0, 2.5])
        out = diff.matmul(Tensor(np.eye(3)), Tensor(v))
        assert np.array_equal(out.data, v)

    def test_conv2d_all_ones_valid(self):
        x = Tensor(np.ones((3, 3, 1)))
        k = Tensor(np.ones((1, 1, 3, 3)))
        out = diff.conv2d(x, k, pad="valid")
        assert out.shape == (1, 1, 1)
        assert out.data[0, 0, 0] == 9.0  # sum of nine 1*1 products

    def test_conv2d_one_hot_kernel_is_shift(self):
        rng = np.random.default_rng(0)
        x = rng.random((6, 7, 2))
        k = np.zeros((2, 2, 3, 3))
        k[0, 0, 0, 2] = 1.0  # output channel 0 reads input channel 0 at (r=0, c=2)
        k[1, 1, 1, 1] = 1.0  # output channel 1 reads input channel 1 centered
        out = diff.conv2d(Tensor(x), Tensor(k), pad="valid")
        assert np.array_equal(out.data[:, :, 0], x[0:4, 2:7, 0])
        assert np.array_equal(out.data[:, :, 1], x[1:5, 1:6, 1])

    def test_conv2d_batch_matches_loop(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3, 6, 6, 2))
        k = rng.standard_normal((4, 2, 3, 3))
        batched = diff.conv2d(Tensor(x), Tensor(k), pad="same")
        for i in range(3):
            single = diff.conv2d(Tensor(x[i]), Tensor(k), pad="same")
            assert np.array_equal(batched.data[i], single.data)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            diff.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        with pytest.raises(ShapeError):
            diff.conv2d(Tensor(np.ones((4, 4, 2))), Tensor(np.ones((1, 3, 3, 3))))
        with pytest.raises(ShapeError):
            diff.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))

    def test_apply_primitive_dispatch(self):
        out = apply_primitive("add", (Tensor([1.0]), Tensor([2.0])))
        assert out.data[0] == 3.0
        out = apply_primitive("sum", Tensor(np.ones((2, 3))), axes=1)
        assert np.array_equal(out.data, [3.0, 3.0])

    def test_unknown_primitive_raises(self):
        with pytest.raises(CatalogueError):
            apply_primitive("tanh", (Tensor([1.0]),))

    def test_gather_and_transpose(self):
        x = Tensor(np.arange(12.0).reshape(3, 4))
        out = diff.gather(x, np.array([2, 0]), axis=0)
        assert np.array_equal(out.data, x.data[[2, 0]])
        tr = diff.transpose(x, (1, 0))
        assert np.array_equal(tr.data, x.data.T)


class TestBackward:
    def test_sum_gives_ones(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        with Tape() as tape:
            loss = diff.reduce_sum(x)
        grads = backward(tape, loss)
        assert np.array_equal(grads[x].data, np.ones((2, 3)))

    def test_product_rule(self):
        rng = np.random.default_rng(2)
        x = Tensor(rng.random((4,)), requires_grad=True)
        y = Tensor(rng.random((4,)), requires_grad=True)
        with Tape() as tape:
            loss = diff.reduce_sum(diff.mul(x, y))
        grads = backward(tape, loss)
        assert np.array_equal(grads[x].data, y.data)
        assert np.array_equal(grads[y].data, x.data)

    def test_relu_net_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        W = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
        x = Tensor(rng.standard_normal(4), requires_grad=True)
        with Tape() as tape:
            loss = diff.reduce_sum(diff.relu(diff.matmul(W, x)))
        grads = backward(tape, loss)
        # independent central-difference oracle, step 1e-5
        step = 1e-5
        for tensor, grad in ((W, grads[W].data), (x, grads[x].data)):
            flat = tensor.data.ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + step
                fp = np.sum(np.maximum(W.data @ x.data, 0.0))
                flat[idx] = orig - step
                fm = np.sum(np.maximum(W.data @ x.data, 0.0))
                flat[idx] = orig
                num = (fp - fm) / (2 * step)
                assert abs(grad.ravel()[idx] - num) <= 1e-6 * max(1.0, abs(num))

    def test_accumulation_when_leaf_reused(self):
        x = Tensor(np.array([2.0]), requires_grad=True)
        with Tape() as tape:
            loss = diff.reduce_sum(diff.mul(x, x))  # d/dx x^2 = 2x
        grads = backward(tape, loss)
        assert np.array_equal(grads[x].data, [4.0])

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with Tape() as tape:
            y = diff.scale(x, 2.0)
        with pytest.raises(ContractError):
            backward(tape, y)

    def test_bit_identical_across_runs(self):
        def run():
            rng = np.random.default_rng(7)
            w = Tensor(rng.standard_normal((6, 6)), requires_grad=True)
            x = Tensor(rng.standard_normal((6, 4)), requires_grad=True)
            with Tape() as tape:
                y = diff.relu(diff.matmul(w, x))
                loss = diff.reduce_sum(diff.mul(y, y))
            grads = backward(tape, loss)
            return grads[w].data.copy(), grads[x].data.copy()

        g1, g2 = run(), run()
        assert np.array_equal(g1[0], g2[0]) and np.array_equal(g1[1], g2[1])

    def test_no_tape_records_nothing(self):
        x = Tensor(np.ones(3), requires_grad=True)
        y = diff.relu(x)
        assert y.requires_grad is False  # nothing was recorded


class TestCheckGradients:
    def test_sum_of_squares_tight(self):
        rng = np.random.default_rng(4)
        err = check_gradients(
            lambda x: diff.reduce_sum(diff.mul(x, x)),
            [Tensor(rng.standard_normal(8))],
        )
        assert err <= 1e-9  # central differences are exact on quadratics

    def test_l1_patch_loss_through_conv_net(self):
        rng = np.random.default_rng(5)
        target = rng.random((2, 2, 2))

        def fn(x, k1, k2):
            y = diff.relu(diff.conv2d(x, k1, pad="valid"))
            y = diff.conv2d(y, k2, pad="valid")
            return diff.reduce_sum(diff.absolute(diff.sub(y, diff.constant(target))))

        err = check_gradients(fn, [
            Tensor(rng.standard_normal((6, 6, 1))),
            Tensor(rng.standard_normal((3, 1, 3, 3)) * 0.5),
            Tensor(rng.standard_normal((2, 3, 3, 3)) * 0.5),
        ])
        assert err <= 1e-4

    def test_kink_exactly_at_zero_is_skipped(self):
        # coordinate 1 sits exactly on the relu kink; analytic subgradient 0
        # disagrees with one-sided slopes, and the guard must exclude it
        x = Tensor(np.array([1.0, 0.0, -1.0]))
        err = check_gradients(lambda v: diff.reduce_sum(diff.relu(v)), [x])
        assert err <= 1e-9

    def test_step_bounds_enforced(self):
        with pytest.raises(ContractError):
            check_gradients(lambda x: diff.reduce_sum(x), [Tensor(np.ones(2))], step=1e-2)

    def test_non_finite_forward_raises(self):
        big = Tensor(np.array([1e308]))
        with np.errstate(over="ignore"):
            with pytest.raises(EvaluationError):
                check_gradients(lambda x: diff.mul(x, x), [big])

    def test_sampled_subset_above_cap(self):
        rng = np.random.default_rng(6)
        err = check_gradients(
            lambda x: diff.reduce_sum(diff.sin(x)),
            [Tensor(rng.standard_normal(64))],
            max_coords=16, seed=1,
        )
        assert err <= 1e-8


def test_every_primitive_passes_fd_suite():
    results = run_all("diff")
    for r in results:
        assert r.ok, f"{r.name}: {r.max_rel_err:.3e} > {r.tol}"


def test_finite_check_flag():
    diff.CHECK_FINITE = True
    try:
        with np.errstate(over="ignore"):
            with pytest.raises(EvaluationError):
                diff.mul(Tensor([1e300]), Tensor([1e300]))
    finally:
        diff.CHECK_FINITE = False


def test_float32_runtime_option():
    diff.set_default_dtype(np.float32)
    try:
        out = diff.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
        assert out.data.dtype == np.float32
    finally:
        diff.set_default_dtype(np.float64)
    with pytest.raises(ContractError):
        diff.set_default_dtype(np.int32)
