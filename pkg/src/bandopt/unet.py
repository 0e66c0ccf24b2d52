"""Tiny encoder-decoder segmentation network with explicit backprop.

Architecture: optional squeeze-excite block on the input image, then per
level [conv3x3+relu, conv3x3+relu, maxpool2], a two-conv bottleneck, and the
mirrored decoder [upsample2, concat skip, conv3x3+relu, conv3x3+relu],
finished by a 1x1 conv + sigmoid head producing per-pixel probabilities.
Filter count doubles per level from base_filters.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import layers


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int
    base_filters: int = 8
    depth: int = 2
    use_input_attention: bool = False
    se_reduction: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.in_channels < 1:
            raise ValueError(f"in_channels must be >= 1, got {self.in_channels}")
        if self.base_filters < 1 or self.depth < 1 or self.se_reduction < 1:
            raise ValueError("base_filters, depth and se_reduction must all be >= 1")

    @property
    def se_hidden(self):
        return max(1, self.in_channels // self.se_reduction)


# ---------------------------------------------------------------------------
# squeeze-excite attention over channels
# ---------------------------------------------------------------------------

def se_attention_forward(x, w1, b1, w2, b2):
    """Channel attention: pool -> bottleneck MLP -> sigmoid weights -> rescale.

    x: (n, h, w, c); w1: (c, hidden); w2: (hidden, c). Returns
    (output, weights, cache) where weights has shape (n, 1, 1, c) with every
    component in (0, 1) and output = x * weights.
    """
    x = layers.check_tensor4(x)
    n, _, _, c = x.shape
    if w1.shape[0] != c or w2.shape[1] != c or w1.shape[1] != w2.shape[0]:
        raise ValueError(
            f"attention params sized for {w1.shape[0]} channels (hidden {w1.shape[1]}) "
            f"do not fit input with {c} channels"
        )
    u = layers.global_avg_pool(x).reshape(n, c)
    a1 = layers.relu_forward(layers.dense_forward(u, w1, b1))
    hvec = layers.sigmoid_forward(layers.dense_forward(a1, w2, b2))
    h = hvec.reshape(n, 1, 1, c)
    cache = (x, u, a1, hvec, w1, w2)
    return x * h, h, cache


def se_attention_backward(cache, d_output):
    """Returns (d_input, grads) with grads keyed se.w1/se.b1/se.w2/se.b2."""
    x, u, a1, hvec, w1, w2 = cache
    n, hh, ww, c = x.shape
    h = hvec.reshape(n, 1, 1, c)
    d_x = d_output * h
    d_h = (d_output * x).sum(axis=(1, 2))            # dL/dh, shape (n, c)
    d_z2 = layers.sigmoid_backward(hvec, d_h)
    d_a1, d_w2, d_b2 = layers.dense_backward(a1, w2, d_z2)
    d_z1 = layers.relu_backward(a1, d_a1)
    d_u, d_w1, d_b1 = layers.dense_backward(u, w1, d_z1)
    d_x += layers.global_avg_pool_backward(d_u.reshape(n, 1, 1, c), x.shape)
    return d_x, {"se.w1": d_w1, "se.b1": d_b1, "se.w2": d_w2, "se.b2": d_b2}


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

class UNet:
    """Parameter container plus forward/backward passes.

    Parameters live in an ordered name -> array dict; shapes are a pure
    function of the config and the creation order is fixed, so two models
    built from equal configs are bit-identical. ``band_mask`` and
    ``norm_stats`` are attached by the training harness so a trained model
    can be applied (and checkpointed) self-contained.
    """

    def __init__(self, config, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        self.params = self._init_params()
        self.band_mask = None
        self.norm_stats = None

    # -- construction ------------------------------------------------------

    def _level_channels(self):
        cfg = self.config
        enc = []
        c_in = cfg.in_channels
        for level in range(cfg.depth):
            c_out = cfg.base_filters * (2 ** level)
            enc.append((c_in, c_out))
            c_in = c_out
        return enc

    def _init_params(self):
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        params = {}

        def he_uniform(shape, fan_in):
            limit = math.sqrt(6.0 / fan_in)
            return rng.uniform(-limit, limit, size=shape).astype(self.dtype)

        def conv(name, k, c_in, c_out, zero=False):
            # the sigmoid head starts at zero so every pixel begins at p=0.5;
            # a randomly-initialized head can start saturated and the
            # IoU-style loss then drives the whole net into an irrecoverable
            # all-positive collapse on narrow desk-scale configurations
            weights = np.zeros((k, k, c_in, c_out), dtype=self.dtype) if zero \
                else he_uniform((k, k, c_in, c_out), k * k * c_in)
            params[f"{name}.w"] = weights
            params[f"{name}.b"] = np.zeros(c_out, dtype=self.dtype)

        if cfg.use_input_attention:
            c, hid = cfg.in_channels, cfg.se_hidden
            params["se.w1"] = he_uniform((c, hid), c)
            params["se.b1"] = np.zeros(hid, dtype=self.dtype)
            params["se.w2"] = he_uniform((hid, c), hid)
            params["se.b2"] = np.zeros(c, dtype=self.dtype)

        enc = self._level_channels()
        for level, (c_in, c_out) in enumerate(enc):
            conv(f"enc{level}.c0", 3, c_in, c_out)
            conv(f"enc{level}.c1", 3, c_out, c_out)
        c_mid_in = enc[-1][1]
        c_mid = c_mid_in * 2
        conv("mid.c0", 3, c_mid_in, c_mid)
        conv("mid.c1", 3, c_mid, c_mid)
        c_up = c_mid
        for level in reversed(range(cfg.depth)):
            c_skip = enc[level][1]
            conv(f"dec{level}.c0", 3, c_up + c_skip, c_skip)
            conv(f"dec{level}.c1", 3, c_skip, c_skip)
            c_up = c_skip
        conv("head", 1, c_up, 1, zero=True)
        return params

    def parameter_count(self):
        return sum(int(v.size) for v in self.params.values())

    # -- forward / backward -------------------------------------------------

    def _conv_relu(self, name, x, convs):
        w = self.params[f"{name}.w"]
        cols = layers.conv2d_cols(x, w.shape[0])
        y = layers.relu_forward(
            layers.conv2d_forward(x, w, self.params[f"{name}.b"], cols=cols)
        )
        convs[name] = (x, cols, y)
        return y

    def forward(self, x):
        """Run the network on a (n, h, w, in_channels) batch.

        Returns (prediction, cache): per-pixel probabilities of shape
        (n, h, w, 1) plus the activation cache consumed by backward().
        """
        cfg = self.config
        x = layers.check_tensor4(x)
        n, h, w, c = x.shape
        if c != cfg.in_channels:
            raise ValueError(f"expected {cfg.in_channels} input channels, got {c}")
        div = 1 << cfg.depth
        if h % div or w % div:
            raise ValueError(
                f"spatial dims must be divisible by {div} for depth {cfg.depth}, got {h}x{w}"
            )
        cache = {"convs": {}, "pools": [], "splits": []}
        convs = cache["convs"]
        cur = x
        if cfg.use_input_attention:
            cur, _, se_cache = se_attention_forward(
                x, self.params["se.w1"], self.params["se.b1"],
                self.params["se.w2"], self.params["se.b2"])
            cache["se"] = se_cache
        skips = []
        for level in range(cfg.depth):
            cur = self._conv_relu(f"enc{level}.c0", cur, convs)
            cur = self._conv_relu(f"enc{level}.c1", cur, convs)
            skips.append(cur)
            cur, rec = layers.maxpool2_forward(cur)
            cache["pools"].append(rec)
        cur = self._conv_relu("mid.c0", cur, convs)
        cur = self._conv_relu("mid.c1", cur, convs)
        for level in reversed(range(cfg.depth)):
            cur = layers.upsample2_forward(cur)
            cache["splits"].append(cur.shape[3])
            cur = layers.concat_channels(cur, skips[level])
            cur = self._conv_relu(f"dec{level}.c0", cur, convs)
            cur = self._conv_relu(f"dec{level}.c1", cur, convs)
        cache["head_in"] = cur
        z = layers.conv2d_forward(cur, self.params["head.w"], self.params["head.b"])
        pred = layers.sigmoid_forward(z)
        cache["pred"] = pred
        return pred, cache

    def _conv_relu_backward(self, name, d, convs, grads):
        x_in, cols, y = convs[name]
        d = layers.relu_backward(y, d)
        d_x, g_w, g_b = layers.conv2d_backward(x_in, self.params[f"{name}.w"], d,
                                               cols=cols)
        grads[f"{name}.w"] = g_w
        grads[f"{name}.b"] = g_b
        return d_x

    def backward(self, cache, d_pred):
        """Backprop the loss gradient d_pred through the cached forward pass.

        Returns (grads, d_input) where grads mirrors self.params.
        """
        cfg = self.config
        convs = cache["convs"]
        grads = {}
        d = layers.sigmoid_backward(cache["pred"], d_pred)
        d, g_w, g_b = layers.conv2d_backward(cache["head_in"], self.params["head.w"], d)
        grads["head.w"] = g_w
        grads["head.b"] = g_b
        # decoder ran level = depth-1 .. 0, so unwind it in ascending order
        d_skips = [None] * cfg.depth
        for level in range(cfg.depth):
            d = self._conv_relu_backward(f"dec{level}.c1", d, convs, grads)
            d = self._conv_relu_backward(f"dec{level}.c0", d, convs, grads)
            split = cache["splits"][cfg.depth - 1 - level]
            d, d_skips[level] = layers.split_channels(d, split)
            d = layers.upsample2_backward(d)
        d = self._conv_relu_backward("mid.c1", d, convs, grads)
        d = self._conv_relu_backward("mid.c0", d, convs, grads)
        for level in reversed(range(cfg.depth)):
            d = layers.maxpool2_backward(cache["pools"][level], d)
            d = d + d_skips[level]
            d = self._conv_relu_backward(f"enc{level}.c1", d, convs, grads)
            d = self._conv_relu_backward(f"enc{level}.c0", d, convs, grads)
        if cfg.use_input_attention:
            d, se_grads = se_attention_backward(cache["se"], d)
            grads.update(se_grads)
        return grads, d
