"""Differentiable layer primitives on (n, h, w, c) float arrays.

Every forward op has an explicit, hand-derived backward partner. Tensors are
plain numpy arrays in row-major (batch, height, width, channels) order;
training code uses float32 while the gradient-check harness re-runs the same
ops at float64. All functions are pure: no internal state, bit-identical
outputs for identical inputs.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def check_tensor4(x, name="input"):
    """Validate the (n, h, w, c) layout; returns the array unchanged."""
    x = np.asarray(x)
    if x.ndim != 4:
        raise ValueError(f"{name} must have 4 dims (n, h, w, c), got shape {x.shape}")
    if min(x.shape) < 1:
        raise ValueError(f"{name} has an empty dimension: shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# convolution (same padding, stride 1, square 1x1 or 3x3 kernels)
# ---------------------------------------------------------------------------

def _check_conv_args(x, weights, bias):
    x = check_tensor4(x)
    if weights.ndim != 4 or weights.shape[0] != weights.shape[1]:
        raise ValueError(f"weights must be (k, k, c_in, c_out), got {weights.shape}")
    k = weights.shape[0]
    if k not in (1, 3):
        raise ValueError(f"kernel size must be 1 or 3, got {k}")
    if weights.shape[2] != x.shape[3]:
        raise ValueError(
            f"channel mismatch: input has {x.shape[3]} channels, "
            f"weights expect {weights.shape[2]}"
        )
    if bias.shape != (weights.shape[3],):
        raise ValueError(f"bias must be ({weights.shape[3]},), got {bias.shape}")
    return x, k


def conv2d_cols(x, k):
    """Patch matrix for the conv matmul: (n*h*w, k*k*c), zero same-padding.

    For k=1 this is just a flat view; for k=3 each row holds the 3x3
    neighborhood in (ki, kj, channel) order, matching the kernel's native
    memory layout. Forward callers may cache the result and hand it back to
    conv2d_backward to avoid recomputing it.
    """
    n, h, w, c = x.shape
    if k == 1:
        return x.reshape(n * h * w, c)
    xp = np.zeros((n, h + 2, w + 2, c), dtype=x.dtype)
    xp[:, 1:-1, 1:-1, :] = x
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (n, h, w, c, 3, 3)
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * h * w, 9 * c)


def _weight_matrix(weights):
    # (k, k, c_in, c_out) -> (k*k*c_in, c_out); a free view of the kernel
    k, _, c_in, c_out = weights.shape
    return weights.reshape(k * k * c_in, c_out)


def conv2d_forward(x, weights, bias, cols=None):
    """Same-padding stride-1 cross-correlation.

    x: (n, h, w, c_in); weights: (k, k, c_in, c_out) with k in {1, 3};
    bias: (c_out,). Returns (n, h, w, c_out).
    """
    x, k = _check_conv_args(x, weights, bias)
    n, h, w, c_in = x.shape
    c_out = weights.shape[3]
    if cols is None:
        cols = conv2d_cols(x, k)
    out = cols @ _weight_matrix(weights)
    out += bias
    return out.reshape(n, h, w, c_out)


def conv2d_backward(x, weights, d_output, cols=None):
    """Gradients of a same-padding conv for upstream gradient d_output.

    Returns (d_input, d_weights, d_bias). Pass the cols cached from the
    forward pass to skip rebuilding the patch matrix.
    """
    x, k = _check_conv_args(x, weights, np.zeros(weights.shape[3], weights.dtype))
    n, h, w, c_in = x.shape
    c_out = weights.shape[3]
    d_output = np.asarray(d_output)
    if d_output.shape != (n, h, w, c_out):
        raise ValueError(
            f"d_output shape {d_output.shape} does not match forward output "
            f"{(n, h, w, c_out)}"
        )
    d_flat = d_output.reshape(-1, c_out)
    d_bias = d_flat.sum(axis=0)
    if cols is None:
        cols = conv2d_cols(x, k)
    d_wmat = cols.T @ d_flat                    # (k*k*c_in, c_out)
    d_weights = d_wmat.reshape(weights.shape)
    if k == 1:
        d_input = (d_flat @ weights.reshape(c_in, c_out).T).reshape(x.shape)
    else:
        # d_input is the correlation of d_output with the kernel flipped in
        # both spatial axes and transposed in its channel axes
        w_flip = np.ascontiguousarray(weights[::-1, ::-1].transpose(0, 1, 3, 2))
        d_input = conv2d_forward(d_output, w_flip, np.zeros(c_in, d_output.dtype))
    return d_input, d_weights, d_bias


# ---------------------------------------------------------------------------
# 2x2 max pooling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoolIndices:
    """Argmax record from maxpool2_forward; routes the backward gradient."""

    input_shape: tuple
    argmax: np.ndarray  # (n, h/2, w/2, c), values in 0..3 row-major per window


def maxpool2_forward(x):
    """2x2 max pool with stride 2. Returns (output, PoolIndices).

    Ties break toward the first (row-major) maximal element of the window.
    """
    x = check_tensor4(x)
    n, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"spatial dims must be even for 2x2 pooling, got {h}x{w}")
    win = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4)
    win = win.reshape(n, h // 2, w // 2, c, 4)
    idx = win.argmax(axis=4).astype(np.uint8)
    out = np.take_along_axis(win, idx[..., None], axis=4)[..., 0]
    return out, PoolIndices((n, h, w, c), idx)


def maxpool2_backward(indices, d_output):
    """Route d_output entries to the argmax positions recorded at forward time."""
    if not isinstance(indices, PoolIndices):
        raise ValueError("indices must be the PoolIndices record from maxpool2_forward")
    d_output = np.asarray(d_output)
    if d_output.shape != indices.argmax.shape:
        raise ValueError(
            f"d_output shape {d_output.shape} does not match pooled shape "
            f"{indices.argmax.shape}; stale index record?"
        )
    n, h, w, c = indices.input_shape
    win = np.zeros((n, h // 2, w // 2, c, 4), dtype=d_output.dtype)
    np.put_along_axis(win, indices.argmax[..., None].astype(np.intp),
                      d_output[..., None], axis=4)
    return (win.reshape(n, h // 2, w // 2, c, 2, 2)
               .transpose(0, 1, 4, 2, 5, 3)
               .reshape(n, h, w, c))


# ---------------------------------------------------------------------------
# 2x nearest-neighbor upsampling
# ---------------------------------------------------------------------------

def upsample2_forward(x):
    """Nearest-neighbor 2x spatial repeat: (n, h, w, c) -> (n, 2h, 2w, c)."""
    x = check_tensor4(x)
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def upsample2_backward(d_output):
    """Sum each 2x2 block of replicated gradients back onto its source pixel."""
    d = check_tensor4(d_output, "d_output")
    n, h2, w2, c = d.shape
    if h2 % 2 or w2 % 2:
        raise ValueError(f"d_output spatial dims must be even, got {h2}x{w2}")
    return d.reshape(n, h2 // 2, 2, w2 // 2, 2, c).sum(axis=(2, 4))


# ---------------------------------------------------------------------------
# elementwise activations
# ---------------------------------------------------------------------------

def relu_forward(x):
    return np.maximum(np.asarray(x), 0)


def relu_backward(out, d_output):
    """Backward from the stored forward output; subgradient at 0 is 0."""
    return d_output * (out > 0)


def sigmoid_forward(x):
    """Numerically stable logistic function 1 / (1 + exp(-x))."""
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(out, d_output):
    """Backward from the stored forward output: sigma' = out * (1 - out)."""
    return d_output * out * (1.0 - out)


# ---------------------------------------------------------------------------
# channel concat / split
# ---------------------------------------------------------------------------

def concat_channels(a, b):
    """Stack channels a-then-b; a and b must agree on (n, h, w)."""
    a = check_tensor4(a, "a")
    b = check_tensor4(b, "b")
    if a.shape[:3] != b.shape[:3]:
        raise ValueError(f"spatial mismatch: {a.shape} vs {b.shape}")
    return np.concatenate([a, b], axis=3)


def split_channels(d_output, c_a):
    """Backward of concat_channels: slices d_output at the channel boundary."""
    d = check_tensor4(d_output, "d_output")
    if not 0 < c_a < d.shape[3]:
        raise ValueError(f"split point {c_a} out of range for {d.shape[3]} channels")
    return d[..., :c_a], d[..., c_a:]


# ---------------------------------------------------------------------------
# global average pooling
# ---------------------------------------------------------------------------

def global_avg_pool(x):
    """Spatial mean per channel: (n, h, w, c) -> (n, 1, 1, c)."""
    x = check_tensor4(x)
    return x.mean(axis=(1, 2), keepdims=True)


def global_avg_pool_backward(d_output, input_shape):
    """Spread d_output / (h*w) uniformly over the spatial grid."""
    n, h, w, c = input_shape
    d = np.asarray(d_output)
    if d.shape != (n, 1, 1, c):
        raise ValueError(f"d_output shape {d.shape} does not match (n,1,1,c)={(n, 1, 1, c)}")
    return np.broadcast_to(d / (h * w), input_shape).copy()


# ---------------------------------------------------------------------------
# dense (fully connected)
# ---------------------------------------------------------------------------

def dense_forward(x, weights, bias):
    """Affine map: (n, d_in) @ (d_in, d_out) + bias."""
    x = np.asarray(x)
    if x.ndim != 2 or weights.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise ValueError(f"shape mismatch: x {x.shape} vs weights {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise ValueError(f"bias must be ({weights.shape[1]},), got {bias.shape}")
    return x @ weights + bias


def dense_backward(x, weights, d_output):
    """Returns (d_input, d_weights, d_bias)."""
    d_output = np.asarray(d_output)
    if d_output.shape != (x.shape[0], weights.shape[1]):
        raise ValueError(
            f"d_output shape {d_output.shape} does not match {(x.shape[0], weights.shape[1])}"
        )
    return d_output @ weights.T, x.T @ d_output, d_output.sum(axis=0)
