"""Layer primitives and the finite-difference harness.

Every layer in this library carries a hand-derived backward pass. This
script runs one conv forward/backward by hand, then lets the bundled
gradient suite verify every op against central finite differences.
"""

import numpy as np

from bandopt import gradient_suite
from bandopt.layers import conv2d_backward, conv2d_forward

rng = np.random.default_rng(0)

# one convolution, by hand
x = rng.standard_normal((1, 6, 6, 3)).astype(np.float32)
w = rng.standard_normal((3, 3, 3, 4)).astype(np.float32)
b = np.zeros(4, dtype=np.float32)
out = conv2d_forward(x, w, b)
print(f"conv2d: input {x.shape} -> output {out.shape}")

d_out = np.ones_like(out)
d_x, d_w, d_b = conv2d_backward(x, w, d_out)
print(f"backward gradients: d_input {d_x.shape}, d_weights {d_w.shape}, "
      f"d_bias {d_b.shape} (sum loss => d_bias = {d_b[0]:.0f} = h*w)")

# now the whole suite
print("\nfinite-difference suite (64-bit, central differences):")
for result in gradient_suite(seed=0):
    print(f"  {result}")
