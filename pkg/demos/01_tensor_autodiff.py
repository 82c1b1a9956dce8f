"""Tour of the tensor core: forward ops, reverse-mode gradients, and the
finite-difference oracle that keeps the analytic gradients honest."""

import numpy as np

from minimtl.tensor import (
    Rng,
    Tensor,
    backward,
    finite_difference_grad,
    matmul,
    mean_all,
    mul,
    sigmoid,
    sum_all,
    zero_grad,
)

# A tiny computation: loss = mean(sigmoid(x @ w)) with a known input.
rng = Rng(7)
x = Tensor(rng.uniform(-1.0, 1.0, (4, 3)))
w = Tensor(rng.uniform(-1.0, 1.0, (3, 2)), requires_grad=True)

loss = mean_all(sigmoid(matmul(x, w)))
print("loss value:", loss.item())

backward(loss)
print("analytic gradient dloss/dw:\n", w.grad)

# The same gradient via central differences (the tape never gets to cheat).
numeric = finite_difference_grad(
    lambda p: mean_all(sigmoid(matmul(x, p["w"]))).item(), {"w": w}, eps=1e-5)
print("max |analytic - numeric|:", np.abs(w.grad - numeric["w"]).max())

# Classic sanity identities.
w2 = Tensor([3.0], requires_grad=True)
backward(sum_all(mul(w2, w2)))
print("d(w^2)/dw at w=3:", w2.grad[0], "(expect 6)")

w3 = Tensor([0.0], requires_grad=True)
backward(sum_all(sigmoid(w3)))
print("sigmoid'(0):", w3.grad[0], "(expect 0.25)")

# Gradients accumulate until cleared, mirroring minibatch training loops.
zero_grad([w2])
print("after zero_grad:", w2.grad)
