"""The sharing mechanism itself: task factors, per-layer factors, the exact
identity reduction, and the algebra the tests pin down."""

import numpy as np

from minimtl.sharing import cotask_share, init_layer_factors, init_task_factors
from minimtl.tensor import Rng, Tensor

rng = Rng(3)
h_primary = Tensor(rng.uniform(-1, 1, (5,)))
h_aux = Tensor(rng.uniform(-1, 1, (5,)))

# Learnable mixing state: a 2x2 task matrix plus one 2x2 refinement per
# tapped layer. Defaults start near the no-sharing corner.
task_factors = init_task_factors(2)
layer_factors = init_layer_factors(3, 2)
print("task factors at init:\n", task_factors.data)

r_p, r_a = cotask_share(h_primary, h_aux, task_factors, layer_factors, layer_index=0)
print("primary mix = 0.9*own + 0.1*other:",
      np.allclose(r_p.data, 0.9 * h_primary.data + 0.1 * h_aux.data))

# Identity corner: with the task matrix at I and layer factors at 1 the mix
# is exactly a pass-through; the model collapses to single-task towers.
task_factors.data[:] = np.eye(2)
r_p, r_a = cotask_share(h_primary, h_aux, task_factors, layer_factors, 0)
print("identity reduction exact:",
      np.array_equal(r_p.data, h_primary.data) and np.array_equal(r_a.data, h_aux.data))

# Only the product of the two factor collections matters: scaling one up and
# the other down is a no-op.
task_factors.data[:] = [[0.8, 0.4], [0.2, 0.6]]
before, _ = cotask_share(h_primary, h_aux, task_factors, layer_factors, 1)
task_factors.data[0, 1] *= 5.0
layer_factors.data[:, 0, 1] /= 5.0
after, _ = cotask_share(h_primary, h_aux, task_factors, layer_factors, 1)
print("scale commutation drift:", np.abs(before.data - after.data).max())

# The published pairing variant is available for comparison; it feeds the
# second task's self term from the other task's features.
_, crossed = cotask_share(h_primary, h_aux, task_factors, layer_factors, 1, form="crossed")
_, symmetric = cotask_share(h_primary, h_aux, task_factors, layer_factors, 1)
print("crossed vs symmetric aux mix differ:",
      not np.allclose(crossed.data, symmetric.data))
