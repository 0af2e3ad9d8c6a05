"""A tour of the tape-based autodiff core.

Every model quantity is built from a handful of primitives recorded on a
Tape; one reverse sweep fills the gradients of all watched parameters.
The projection primitive at the heart of the gated module splits a
vector into the parts parallel and orthogonal to a context vector.
"""

import numpy as np

from evcoref.autodiff import (
    Parameter,
    Tape,
    affine,
    dot,
    grad_check,
    project_decompose,
    relu,
    sigmoid,
)

rng = np.random.default_rng(0)

print("== forward + backward through a tiny computation ==")
w = Parameter("w", rng.uniform(-0.5, 0.5, size=(3, 4)))
b = Parameter("b", np.zeros(3))
x = rng.normal(size=4)

tape = Tape()
hidden = relu(affine(tape.watch(w), tape.watch(b), tape.constant(x)))
loss = dot(hidden, sigmoid(hidden))
tape.backward(loss)
print("loss:", float(loss.value))
print("||dL/dw||:", np.linalg.norm(w.grad))

print()
print("== the projection split used by the gated module ==")
t = np.array([1.0, 0.0])
h = np.array([3.0, 4.0])
tape = Tape()
par, orth = project_decompose(tape.constant(t), tape.constant(h))
print(f"t={t}, h={h}")
print(f"parallel component:   {par.value}   (what t already knows)")
print(f"orthogonal component: {orth.value}   (new information)")
print("sum reconstructs h:", par.value + orth.value)

tape = Tape()
par, orth = project_decompose(tape.constant([0.0, 0.0]), tape.constant(h))
print(f"degenerate t=0 keeps everything orthogonal: {orth.value}")

print()
print("== gradients vs central finite differences ==")


def closure():
    tape = Tape()
    hidden = relu(affine(tape.watch(w), tape.watch(b), tape.constant(x)))
    return tape, dot(hidden, sigmoid(hidden))


report = grad_check(closure, [w, b], step=1e-5, tol=1e-4)
for name, err in report.errors.items():
    print(f"block {name}: worst relative error {err:.2e}")
print("all blocks under tolerance:", report.ok)
