"""Reverse-mode automatic differentiation over dense float64 arrays.

Model code builds values through the primitives below; every call appends
one entry to a :class:`Tape` (the computation record).  ``Tape.backward``
replays the record once in reverse, accumulating gradients into the
:class:`Parameter` leaves registered through ``Tape.watch``.

All primitives accept both single vectors (1-D) and row-batched matrices
(2-D), so a whole document's mention pairs can be pushed through the model
as one short record.  Everything is float64 and deterministic: identical
inputs give bit-identical outputs.
"""
from __future__ import annotations

import numpy as np

# ||t||^2 below this threshold makes the projection return (0, h).
PROJECTION_EPS = 1e-12


class ShapeMismatch(ValueError):
    """Operand shapes do not conform for a primitive operation."""


class NonDeterministicClosure(RuntimeError):
    """Two baseline evaluations of a grad-check closure disagreed."""


class Parameter:
    """A named trainable array with a persistent gradient accumulator.

    ``group`` tags the parameter for the two-rate optimizer: "lower" for
    the encoder and feature embedders, "upper" for the pair-model FFNNs.
    """

    __slots__ = ("name", "value", "grad", "group")

    def __init__(self, name, value, group="upper"):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.group = group

    @property
    def size(self):
        return self.value.size

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape}, group={self.group!r})"


class Node:
    """One recorded value; ``grad`` is filled lazily during backward."""

    __slots__ = ("value", "grad", "tape", "_backward")

    def __init__(self, value, tape):
        self.value = value
        self.grad = None
        self.tape = tape
        self._backward = None

    @property
    def shape(self):
        return self.value.shape

    # Operator sugar so model code reads like the math it implements.
    def __add__(self, other):
        return add(self, _as_node(other, self.tape))

    def __radd__(self, other):
        return add(_as_node(other, self.tape), self)

    def __sub__(self, other):
        return sub(self, _as_node(other, self.tape))

    def __rsub__(self, other):
        return sub(_as_node(other, self.tape), self)

    def __mul__(self, other):
        return mul(self, _as_node(other, self.tape))

    def __rmul__(self, other):
        return mul(_as_node(other, self.tape), self)

    def __neg__(self):
        return scale(-1.0, self)

    def __repr__(self):
        return f"Node(shape={self.value.shape})"


class Tape:
    """Ordered record of primitive operations, replayed once in reverse.

    Single-writer: do not record onto or backward the same tape from two
    threads.  A tape is consumed by ``backward`` and cannot be reused.
    """

    def __init__(self):
        self._record = []
        self._watched = {}
        self.params = []
        self._consumed = False

    def constant(self, value):
        """A leaf that takes no gradient."""
        return self._append(np.asarray(value, dtype=np.float64), None)

    def watch(self, param):
        """Register a Parameter; repeated watches return the same leaf."""
        node = self._watched.get(id(param))
        if node is None:
            node = self._append(param.value, lambda g, p=param: np.add(p.grad, g, out=p.grad))
            self._watched[id(param)] = node
            self.params.append(param)
        return node

    def _append(self, value, backward):
        node = Node(value, self)
        node._backward = backward
        self._record.append(node)
        return node

    def backward(self, loss):
        """Accumulate d(loss)/d(param) into every watched parameter.

        ``loss`` must be a scalar node of this tape; ``None`` is accepted
        only for an empty record and leaves all gradients untouched.
        """
        if self._consumed:
            raise RuntimeError("tape already consumed by a backward pass")
        self._consumed = True
        if loss is None:
            if self._record:
                raise ValueError("backward(None) is only valid on an empty record")
            return
        if loss.tape is not self:
            raise ValueError("loss node belongs to a different tape")
        if loss.value.shape != ():
            raise ShapeMismatch(f"backward: loss must be scalar, got shape {loss.value.shape}")
        loss.grad = np.ones((), dtype=np.float64)
        for node in reversed(self._record):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)


def _as_node(x, tape):
    if isinstance(x, Node):
        if x.tape is not tape:
            raise ValueError("operands recorded on different tapes")
        return x
    return tape.constant(x)


def _accum(node, g):
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += g


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.value.shape, b.value.shape)
    except ValueError:
        raise ShapeMismatch(f"{op}: shapes {a.value.shape} and {b.value.shape} do not align") from None


def affine(w, b, x):
    """w @ x + b for 1-D x, or x @ w.T + b row-wise for 2-D x.

    ``w`` has shape (out, in) and ``b`` shape (out,).
    """
    wv, bv, xv = w.value, b.value, x.value
    if wv.ndim != 2 or bv.shape != (wv.shape[0],):
        raise ShapeMismatch(f"affine: weight {wv.shape} and bias {bv.shape} do not align")
    if xv.ndim not in (1, 2) or xv.shape[-1] != wv.shape[1]:
        raise ShapeMismatch(f"affine: weight {wv.shape} cannot act on input {xv.shape}")
    if xv.ndim == 1:
        out = wv @ xv + bv

        def backward(g):
            _accum(w, np.outer(g, xv))
            _accum(b, g)
            _accum(x, g @ wv)
    else:
        out = xv @ wv.T + bv

        def backward(g):
            _accum(w, g.T @ xv)
            _accum(b, g.sum(axis=0))
            _accum(x, g @ wv)

    return x.tape._append(out, backward)


def relu(x):
    """Elementwise max(x, 0)."""
    xv = x.value
    out = np.maximum(xv, 0.0)

    def backward(g):
        _accum(x, g * (xv > 0.0))

    return x.tape._append(out, backward)


def sigmoid(x):
    """Numerically stable elementwise logistic function."""
    xv = x.value
    e = np.exp(-np.abs(xv))
    s = np.where(xv >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))

    def backward(g):
        _accum(x, g * s * (1.0 - s))

    return x.tape._append(s, backward)


def add(a, b):
    _broadcast_shape("add", a, b)
    out = a.value + b.value

    def backward(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    return a.tape._append(out, backward)


def sub(a, b):
    _broadcast_shape("sub", a, b)
    out = a.value - b.value

    def backward(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, -_unbroadcast(g, b.value.shape))

    return a.tape._append(out, backward)


def mul(a, b):
    """Elementwise (Hadamard) product; broadcasts like numpy."""
    _broadcast_shape("mul", a, b)
    av, bv = a.value, b.value
    out = av * bv

    def backward(g):
        _accum(a, _unbroadcast(g * bv, av.shape))
        _accum(b, _unbroadcast(g * av, bv.shape))

    return a.tape._append(out, backward)


def div(a, b):
    _broadcast_shape("div", a, b)
    av, bv = a.value, b.value
    out = av / bv

    def backward(g):
        _accum(a, _unbroadcast(g / bv, av.shape))
        _accum(b, _unbroadcast(-g * av / (bv * bv), bv.shape))

    return a.tape._append(out, backward)


def scale(alpha, x):
    """Multiply by a plain python scalar (not a recorded value)."""
    alpha = float(alpha)
    out = alpha * x.value

    def backward(g):
        _accum(x, alpha * g)

    return x.tape._append(out, backward)


def dot(a, b):
    """Inner product of two 1-D vectors, returned as a scalar node."""
    av, bv = a.value, b.value
    if av.ndim != 1 or av.shape != bv.shape:
        raise ShapeMismatch(f"dot: shapes {av.shape} and {bv.shape} do not align")
    out = np.asarray(av @ bv)

    def backward(g):
        _accum(a, g * bv)
        _accum(b, g * av)

    return a.tape._append(out, backward)


def concat(parts):
    """Concatenate nodes along the last axis."""
    if not parts:
        raise ValueError("concat: empty part list")
    tape = parts[0].tape
    vals = [p.value for p in parts]
    lead = vals[0].shape[:-1]
    for v in vals[1:]:
        if v.ndim != vals[0].ndim or v.shape[:-1] != lead:
            raise ShapeMismatch(
                f"concat: shapes {vals[0].shape} and {v.shape} do not align"
            )
    out = np.concatenate(vals, axis=-1)
    splits = np.cumsum([v.shape[-1] for v in vals])[:-1]

    def backward(g):
        for part, piece in zip(parts, np.split(g, splits, axis=-1)):
            _accum(part, piece)

    return tape._append(out, backward)


def take_rows(x, indices):
    """Gather rows (2-D) or elements (1-D) by integer index."""
    idx = np.asarray(indices, dtype=np.intp)
    xv = x.value
    out = xv[idx]

    def backward(g):
        if x.grad is None:
            x.grad = np.zeros_like(xv)
        np.add.at(x.grad, idx, g)

    return x.tape._append(out, backward)


def matmul_const(m, x):
    """Apply a fixed (non-trainable) matrix on the left: m @ x."""
    m = np.asarray(m, dtype=np.float64)
    xv = x.value
    if m.ndim != 2 or xv.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"matmul_const: matrix {m.shape} cannot act on {xv.shape}")
    out = m @ xv

    def backward(g):
        _accum(x, m.T @ g)

    return x.tape._append(out, backward)


def reshape(x, shape):
    xv = x.value
    out = xv.reshape(shape)

    def backward(g):
        _accum(x, g.reshape(xv.shape))

    return x.tape._append(out, backward)


def sum_all(x):
    """Sum of all entries, as a scalar node."""
    xv = x.value
    out = np.asarray(xv.sum())

    def backward(g):
        _accum(x, np.broadcast_to(g, xv.shape))

    return x.tape._append(out, backward)


def logsumexp(x):
    """Stable log(sum(exp(x))) of a 1-D vector, as a scalar node.

    The max term (exactly exp(0) after shifting) is kept out of the sum
    and folded back through log1p, so the result stays fully accurate
    even when the remaining mass is many orders of magnitude smaller.
    """
    xv = x.value
    if xv.ndim != 1 or xv.size == 0:
        raise ShapeMismatch(f"logsumexp: need a non-empty vector, got shape {xv.shape}")
    star = int(np.argmax(xv))
    m = xv[star]
    ex = np.exp(xv - m)
    ex_star = ex[star]
    ex[star] = 0.0
    rest = ex.sum()
    ex[star] = ex_star
    out = np.asarray(m + np.log1p(rest))
    soft = ex / (1.0 + rest)

    def backward(g):
        _accum(x, g * soft)

    return x.tape._append(out, backward)


def project_decompose(t, h, eps=PROJECTION_EPS):
    """Split h into components parallel and orthogonal to t, row-wise.

    parallel = ((h.t)/(t.t)) t and orthogonal = h - parallel.  Rows where
    ||t||^2 < eps return (0, h) exactly; on that branch the gradient is
    the identity through h and zero through t.
    """
    tv, hv = t.value, h.value
    if tv.shape != hv.shape:
        raise ShapeMismatch(f"project_decompose: shapes {tv.shape} and {hv.shape} differ")
    tt = np.sum(tv * tv, axis=-1, keepdims=True)
    ok = tt >= eps
    denom = np.where(ok, tt, 1.0)
    coef = np.where(ok, np.sum(hv * tv, axis=-1, keepdims=True) / denom, 0.0)
    par_v = coef * tv
    orth_v = hv - par_v

    def through_projection(q):
        # Gradient of (q . parallel) w.r.t. h and t on the regular branch.
        qt = np.sum(q * tv, axis=-1, keepdims=True)
        dh = np.where(ok, qt / denom, 0.0) * tv
        dt = np.where(ok, coef * q + (qt / denom) * (hv - 2.0 * coef * tv), 0.0)
        return dh, dt

    def backward_par(g):
        dh, dt = through_projection(g)
        _accum(h, dh)
        _accum(t, dt)

    def backward_orth(g):
        dh, dt = through_projection(g)
        _accum(h, g - dh)
        _accum(t, -dt)

    tape = t.tape
    par = tape._append(par_v, backward_par)
    orth = tape._append(orth_v, backward_orth)
    return par, orth


class GradCheckReport:
    """Worst relative error per parameter block, from central differences."""

    def __init__(self, errors, tol):
        self.errors = errors
        self.tol = tol

    @property
    def worst(self):
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def ok(self):
        return self.worst < self.tol

    def __repr__(self):
        lines = [f"{name}: {err:.3e}" for name, err in self.errors.items()]
        return "GradCheckReport(\n  " + "\n  ".join(lines) + f"\n) worst={self.worst:.3e} tol={self.tol:g}"


def grad_check(closure, params, step=1e-5, tol=1e-4, corrupt=None):
    """Compare analytic gradients against central finite differences.

    ``closure`` must be a deterministic zero-argument callable returning
    ``(tape, loss_node)`` built fresh on each call.  For every scalar in
    every parameter the numeric gradient (f(p+step)-f(p-step))/(2 step) is
    compared to the recorded one; the report keeps the worst relative
    error |a-n|/max(|a|,|n|,1e-8) per block.

    ``corrupt`` names a block whose analytic gradient is deliberately
    shifted before comparison -- a fault-injection hook for tests.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    _, first = closure()
    tape, loss = closure()
    if float(first.value) != float(loss.value):
        raise NonDeterministicClosure(
            f"baseline evaluations differ: {float(first.value)!r} vs {float(loss.value)!r}"
        )
    stashed = [(p, p.grad.copy()) for p in params]
    for p in params:
        p.zero_grad()
    tape.backward(loss)
    analytic = {p.name: p.grad.copy() for p in params}
    for p, g in stashed:
        p.grad = g
    if corrupt is not None:
        if corrupt not in analytic:
            raise KeyError(f"no parameter block named {corrupt!r}")
        analytic[corrupt] = analytic[corrupt] + 1.0

    errors = {}
    for p in params:
        flat = p.value.reshape(-1)
        aflat = analytic[p.name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            _, up = closure()
            flat[i] = orig - step
            _, down = closure()
            flat[i] = orig
            numeric = (float(up.value) - float(down.value)) / (2.0 * step)
            err = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), 1e-8)
            worst = max(worst, err)
        errors[p.name] = worst
    return GradCheckReport(errors, tol)
