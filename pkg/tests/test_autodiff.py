"""Forward primitives, the projection split, and gradient fidelity."""

import numpy as np
import pytest

from evcoref.autodiff import (
    NonDeterministicClosure,
    Parameter,
    ShapeMismatch,
    Tape,
    affine,
    concat,
    dot,
    grad_check,
    logsumexp,
    matmul_const,
    mul,
    project_decompose,
    relu,
    reshape,
    sigmoid,
    sum_all,
    take_rows,
)


class TestForwardPrimitives:
    def test_sigmoid_at_zero(self):
        t = Tape()
        assert float(sigmoid(t.constant(0.0)).value) == 0.5

    def test_relu(self):
        t = Tape()
        np.testing.assert_array_equal(relu(t.constant([-1.0, 2.0])).value, [0.0, 2.0])

    def test_dot(self):
        t = Tape()
        assert float(dot(t.constant([1.0, 2.0]), t.constant([3.0, 4.0])).value) == 11.0

    def test_affine_vector_and_matrix_agree(self):
        rng = np.random.default_rng(0)
        t = Tape()
        w = t.constant(rng.normal(size=(3, 4)))
        b = t.constant(rng.normal(size=3))
        x = rng.normal(size=(5, 4))
        batched = affine(w, b, t.constant(x)).value
        for i in range(5):
            row = affine(w, b, t.constant(x[i])).value
            np.testing.assert_allclose(batched[i], row, rtol=1e-13, atol=1e-15)

    def test_purity_bit_identical(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=7)
        outs = []
        for _ in range(2):
            t = Tape()
            node = sigmoid(relu(t.constant(x)))
            outs.append(node.value.copy())
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_shape_mismatch_diagnostics(self):
        t = Tape()
        with pytest.raises(ShapeMismatch, match="affine"):
            affine(t.constant(np.ones((2, 3))), t.constant(np.ones(2)), t.constant(np.ones(4)))
        with pytest.raises(ShapeMismatch, match="dot"):
            dot(t.constant(np.ones(3)), t.constant(np.ones(4)))
        with pytest.raises(ShapeMismatch, match="concat"):
            concat([t.constant(np.ones((2, 3))), t.constant(np.ones((3, 3)))])

    def test_logsumexp_matches_naive(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            v = rng.normal(scale=5.0, size=rng.integers(1, 9))
            t = Tape()
            got = float(logsumexp(t.constant(v)).value)
            assert got == pytest.approx(np.log(np.exp(v).sum()), rel=1e-12)


class TestProjectDecompose:
    def test_axis_aligned(self):
        t = Tape()
        par, orth = project_decompose(t.constant([1.0, 0.0]), t.constant([3.0, 4.0]))
        np.testing.assert_array_equal(par.value, [3.0, 0.0])
        np.testing.assert_array_equal(orth.value, [0.0, 4.0])

    def test_self_projection(self):
        t = Tape()
        par, orth = project_decompose(t.constant([2.0, 2.0]), t.constant([2.0, 2.0]))
        np.testing.assert_allclose(par.value, [2.0, 2.0], atol=1e-14)
        np.testing.assert_allclose(orth.value, [0.0, 0.0], atol=1e-14)

    def test_singularity_convention(self):
        t = Tape()
        par, orth = project_decompose(t.constant([0.0, 0.0]), t.constant([5.0, -1.0]))
        np.testing.assert_array_equal(par.value, [0.0, 0.0])
        np.testing.assert_array_equal(orth.value, [5.0, -1.0])

    def test_decomposition_properties_1000_trials(self):
        """parallel + orthogonal reconstructs h; orthogonal is normal to t;
        parallel is collinear with t (vanishing 2x2 minors)."""
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n = int(rng.integers(2, 9))
            tv = rng.normal(scale=rng.choice([0.01, 1.0, 100.0]), size=n)
            hv = rng.normal(scale=rng.choice([0.01, 1.0, 100.0]), size=n)
            if tv @ tv < 1e-12:
                continue
            t = Tape()
            par, orth = project_decompose(t.constant(tv), t.constant(hv))
            p, o = par.value, orth.value
            assert np.abs(p + o - hv).max() <= 1e-10 * (np.linalg.norm(hv) + 1)
            assert abs(o @ tv) <= 1e-8 * (np.linalg.norm(o) * np.linalg.norm(tv) + 1)
            minors = np.abs(np.outer(p, tv) - np.outer(tv, p))
            assert minors.max() <= 1e-8 * np.linalg.norm(hv) * np.linalg.norm(tv)

    def test_rowwise_matches_vector_calls(self):
        rng = np.random.default_rng(12)
        tv = rng.normal(size=(6, 4))
        hv = rng.normal(size=(6, 4))
        tv[2] = 0.0  # one singular row inside a batch
        t = Tape()
        par, orth = project_decompose(t.constant(tv), t.constant(hv))
        for r in range(6):
            t2 = Tape()
            pr, orr = project_decompose(t2.constant(tv[r]), t2.constant(hv[r]))
            np.testing.assert_array_equal(par.value[r], pr.value)
            np.testing.assert_array_equal(orth.value[r], orr.value)

    def test_length_mismatch_rejected(self):
        t = Tape()
        with pytest.raises(ShapeMismatch):
            project_decompose(t.constant([1.0, 2.0]), t.constant([1.0, 2.0, 3.0]))


class TestBackward:
    def test_sigmoid_gradient_at_zero(self):
        t = Tape()
        x = Parameter("x", 0.0)
        loss = sigmoid(t.watch(x))
        t.backward(loss)
        assert float(x.grad) == pytest.approx(0.25, abs=1e-15)

    def test_dot_self_gradient(self):
        t = Tape()
        x = Parameter("x", [1.0, 2.0])
        node = t.watch(x)
        t.backward(dot(node, node))
        np.testing.assert_allclose(x.grad, [2.0, 4.0], atol=1e-15)

    def test_empty_record_backward(self):
        t = Tape()
        p = Parameter("p", [1.0, 2.0])
        t.backward(None)
        np.testing.assert_array_equal(p.grad, [0.0, 0.0])

    def test_backward_twice_rejected(self):
        t = Tape()
        x = Parameter("x", 1.0)
        loss = sigmoid(t.watch(x))
        t.backward(loss)
        with pytest.raises(RuntimeError):
            t.backward(loss)

    def test_take_rows_scatter_adds(self):
        t = Tape()
        x = Parameter("x", [[1.0, 2.0], [3.0, 4.0]])
        gathered = take_rows(t.watch(x), [0, 0, 1])
        t.backward(sum_all(gathered))
        np.testing.assert_array_equal(x.grad, [[2.0, 2.0], [1.0, 1.0]])

    def test_matmul_const_gradient(self):
        t = Tape()
        m = np.array([[1.0, 2.0], [0.0, 1.0]])
        x = Parameter("x", [[1.0], [1.0]])
        t.backward(sum_all(matmul_const(m, t.watch(x))))
        np.testing.assert_array_equal(x.grad, [[1.0], [3.0]])

    def test_projection_gradient_vs_finite_differences(self):
        rng = np.random.default_rng(21)
        tv = Parameter("t", rng.normal(size=5))
        hv = Parameter("h", rng.normal(size=5))
        v = rng.normal(scale=0.01, size=5)

        def closure():
            t = Tape()
            par, orth = project_decompose(t.watch(tv), t.watch(hv))
            return t, dot(t.constant(v), mul(par, orth))

        report = grad_check(closure, [tv, hv], step=1e-5, tol=1e-6)
        assert report.ok, report

    def test_singular_branch_gradients(self):
        # identity through h, zero through t
        tv = Parameter("t", [0.0, 0.0, 0.0])
        hv = Parameter("h", [1.0, -2.0, 3.0])
        t = Tape()
        par, orth = project_decompose(t.watch(tv), t.watch(hv))
        t.backward(sum_all(concat([par, orth])))
        np.testing.assert_array_equal(tv.grad, [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(hv.grad, [1.0, 1.0, 1.0])


class TestGradCheck:
    def test_affine_layer_seed7(self):
        rng = np.random.default_rng(7)
        w = Parameter("w", rng.uniform(-0.5, 0.5, size=(6, 9)))
        b = Parameter("b", rng.uniform(-0.5, 0.5, size=6))
        x = rng.normal(size=9)
        v = rng.normal(scale=3e-4, size=6)

        def closure():
            t = Tape()
            return t, dot(t.constant(v), affine(t.watch(w), t.watch(b), t.constant(x)))

        report = grad_check(closure, [w, b], step=1e-5, tol=1e-6)
        assert report.worst < 1e-6, report

    def test_cdgm_block_isolation_seed7(self):
        from evcoref.pair_model import cdgm, init_ffnn, PairModelParams

        rng = np.random.default_rng(7)
        p = 6
        gate = init_ffnn("gate", 2 * p, p, rng, out_sigmoid=True)
        tv = rng.normal(size=p)
        hv = rng.normal(size=p)
        v = rng.normal(scale=0.02, size=p)
        pm = PairModelParams(mode="cdgm", ffnn_t=None, ffnn_u=[None], ffnn_g=[gate], ffnn_a=None)

        def closure():
            t = Tape()
            out = cdgm(t.constant(tv), t.constant(hv), pm, 0)
            return t, dot(t.constant(v), out)

        report = grad_check(closure, gate.params(), step=1e-5, tol=1e-4)
        assert report.worst < 1e-4, report

    def test_constant_closure(self):
        p = Parameter("unused", [1.0, 2.0])

        def closure():
            t = Tape()
            t.watch(p)
            return t, t.constant(3.5)

        report = grad_check(closure, [p], step=1e-5, tol=1e-6)
        assert report.worst == 0.0

    def test_nondeterministic_closure_rejected(self):
        state = {"n": 0}
        p = Parameter("p", 1.0)

        def closure():
            state["n"] += 1
            t = Tape()
            return t, mul(sigmoid(t.watch(p)), t.constant(float(state["n"])))

        with pytest.raises(NonDeterministicClosure):
            grad_check(closure, [p])

    def test_corrupt_hook_reports_failure(self):
        rng = np.random.default_rng(5)
        w = Parameter("w", rng.uniform(-0.5, 0.5, size=(3, 3)))

        def closure():
            t = Tape()
            x = affine(t.watch(w), t.constant(np.zeros(3)), t.constant(rng.standard_normal(3) * 0 + 1.0))
            return t, dot(x, x)

        report = grad_check(closure, [w], step=1e-5, tol=1e-4, corrupt="w")
        assert not report.ok

    def test_reshape_round_trip_gradient(self):
        p = Parameter("p", [[1.0, 2.0], [3.0, 4.0]])
        t = Tape()
        flat = reshape(t.watch(p), (4,))
        t.backward(dot(flat, t.constant([1.0, 0.0, 0.0, 2.0])))
        np.testing.assert_array_equal(p.grad, [[1.0, 0.0], [0.0, 2.0]])
