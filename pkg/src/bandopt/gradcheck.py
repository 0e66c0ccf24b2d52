"""Central finite-difference verification of analytic gradients.

The harness perturbs one coordinate at a time at float64 precision and
compares (f(x+h) - f(x-h)) / 2h against the hand-derived gradient. Relative
error uses |a - g| / max(|a|, |g|, 1e-8) so that near-zero gradients do not
blow the ratio up.
"""

from dataclasses import dataclass

import numpy as np

from . import layers
from .losses import soft_iou_loss
from .unet import UNet, UNetConfig, se_attention_backward, se_attention_forward


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    tolerance: float
    n_checked: int

    @property
    def passed(self):
        return np.isfinite(self.max_rel_error) and self.max_rel_error < self.tolerance

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.name:<28s} max_rel_err={self.max_rel_error:.3e} "
                f"tol={self.tolerance:.0e} n={self.n_checked:<4d} {status}")


def relative_error(analytic, numeric):
    a = float(analytic)
    f = float(numeric)
    return abs(a - f) / max(abs(a), abs(f), 1e-8)


def central_difference(f, x, step=1e-5, coords=None):
    """Numeric gradient of scalar-valued f at x by central differences.

    coords optionally restricts evaluation to a list of flat indices; the
    returned array then holds one entry per requested coordinate.
    """
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1).copy()
    coords = list(range(flat.size)) if coords is None else list(coords)
    grads = np.empty(len(coords))
    for j, i in enumerate(coords):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(flat.reshape(x.shape))
        flat[i] = orig - step
        fm = f(flat.reshape(x.shape))
        flat[i] = orig
        grads[j] = (fp - fm) / (2.0 * step)
    return grads


def finite_difference_check(f, analytic_grad, x, step=1e-5, tolerance=1e-4,
                            sample=None, rng=None, name="op"):
    """Compare analytic_grad against central differences of f at x.

    f maps an array like x to a float; analytic_grad has x's shape. With
    sample=k only k randomly chosen coordinates are probed (for expensive
    ops). Non-finite values anywhere are reported as failure (inf error).
    """
    x = np.asarray(x, dtype=np.float64)
    analytic = np.asarray(analytic_grad, dtype=np.float64).reshape(-1)
    if analytic.size != x.size:
        raise ValueError(f"analytic gradient size {analytic.size} != input size {x.size}")
    if sample is not None and sample < x.size:
        rng = rng or np.random.default_rng(0)
        coords = sorted(rng.choice(x.size, size=sample, replace=False).tolist())
    else:
        coords = list(range(x.size))
    numeric = central_difference(f, x, step=step, coords=coords)
    if not (np.all(np.isfinite(numeric)) and np.all(np.isfinite(analytic))):
        return GradCheckResult(name, float("inf"), tolerance, len(coords))
    errs = [relative_error(analytic[i], numeric[j]) for j, i in enumerate(coords)]
    return GradCheckResult(name, max(errs) if errs else 0.0, tolerance, len(coords))


# ---------------------------------------------------------------------------
# the standard suite: every layer op plus the composed network
# ---------------------------------------------------------------------------

def _distinct_values(rng, shape, gap=0.05):
    """Array whose entries are pairwise separated by >= gap (safe for max/relu)."""
    n = int(np.prod(shape))
    vals = (rng.permutation(n) - n / 2) * gap
    return vals.reshape(shape)


def randomize_biases(model, seed=0, scale=0.05):
    """Move the model off its zero-init point before finite differencing.

    With all-zero biases a fully dead relu patch drives the next conv output
    to exactly 0.0, parking the evaluation point on the relu kink where
    central differences see the branch average instead of the subgradient;
    and the zero-initialized head blocks gradient flow to everything above
    it. Small random offsets on the biases and the head make the evaluation
    point generic.
    """
    rng = np.random.default_rng(seed)
    for pname, arr in model.params.items():
        if pname.endswith(".b") or pname.startswith("head.") or \
                pname.endswith("b1") or pname.endswith("b2"):
            arr += scale * rng.standard_normal(arr.shape)
    return model


def unet_param_spot_check(model, x, target, n_coords=24, seed=0, step=1e-6,
                          tolerance=1e-3, name="unet.params"):
    """End-to-end check of d(loss)/d(param) on n_coords sampled coordinates.

    Touches every parameter tensor at least once when n_coords >= the number
    of tensors. The loss is the soft-IoU training loss, so this exercises
    the full forward/backward composition. The model should sit at a
    differentiable point; see randomize_biases.
    """
    rng = np.random.default_rng(seed)
    pred, cache = model.forward(x)
    loss, d_pred = soft_iou_loss(pred, target)
    grads, _ = model.backward(cache, d_pred)
    names = list(model.params)
    rng.shuffle(names)
    errs = []
    for i in range(n_coords):
        pname = names[i % len(names)]
        flat = model.params[pname].reshape(-1)
        idx = int(rng.integers(flat.size))
        orig = flat[idx]
        flat[idx] = orig + step
        fp = soft_iou_loss(model.forward(x)[0], target)[0]
        flat[idx] = orig - step
        fm = soft_iou_loss(model.forward(x)[0], target)[0]
        flat[idx] = orig
        numeric = (fp - fm) / (2.0 * step)
        errs.append(relative_error(grads[pname].reshape(-1)[idx], numeric))
    return GradCheckResult(name, max(errs), tolerance, n_coords)


def gradient_suite(seed=0):
    """Central finite-difference checks for all ops; returns result list.

    Layer checks run at float64 with tolerance 1e-4; the two end-to-end
    network checks (with and without input attention) use tolerance 1e-3 on
    >= 24 sampled parameter coordinates each.
    """
    rng = np.random.default_rng(seed)
    results = []

    def check(name, f, analytic, x, **kw):
        results.append(finite_difference_check(f, analytic, x, name=name, **kw))

    # conv 3x3 and 1x1
    for k in (3, 1):
        x = rng.standard_normal((2, 4, 6, 3))
        w = rng.standard_normal((k, k, 3, 4))
        b = rng.standard_normal(4)
        r = rng.standard_normal((2, 4, 6, 4))
        d_in, d_w, d_b = layers.conv2d_backward(x, w, r)
        check(f"conv{k}x{k}.d_input", lambda t, w=w, b=b, r=r: (layers.conv2d_forward(t, w, b) * r).sum(), d_in, x)
        check(f"conv{k}x{k}.d_weights", lambda t, x=x, b=b, r=r: (layers.conv2d_forward(x, t, b) * r).sum(), d_w, w)
        check(f"conv{k}x{k}.d_bias", lambda t, x=x, w=w, r=r: (layers.conv2d_forward(x, w, t) * r).sum(), d_b, b)

    # maxpool (distinct entries keep the argmax stable under perturbation)
    x = _distinct_values(rng, (2, 4, 6, 2))
    out, rec = layers.maxpool2_forward(x)
    r = rng.standard_normal(out.shape)
    check("maxpool2.d_input",
          lambda t: (layers.maxpool2_forward(t)[0] * r).sum(),
          layers.maxpool2_backward(rec, r), x)

    # upsample
    x = rng.standard_normal((2, 3, 4, 2))
    r = rng.standard_normal((2, 6, 8, 2))
    check("upsample2.d_input",
          lambda t: (layers.upsample2_forward(t) * r).sum(),
          layers.upsample2_backward(r), x)

    # relu (sampled away from the kink) and sigmoid
    x = rng.uniform(0.1, 1.0, (2, 3, 3, 2)) * rng.choice([-1.0, 1.0], (2, 3, 3, 2))
    r = rng.standard_normal(x.shape)
    check("relu.d_input",
          lambda t: (layers.relu_forward(t) * r).sum(),
          layers.relu_backward(layers.relu_forward(x), r), x)
    x = rng.uniform(-3.0, 3.0, (2, 3, 3, 2))
    r = rng.standard_normal(x.shape)
    check("sigmoid.d_input",
          lambda t: (layers.sigmoid_forward(t) * r).sum(),
          layers.sigmoid_backward(layers.sigmoid_forward(x), r), x)

    # concat
    a = rng.standard_normal((2, 3, 4, 2))
    b = rng.standard_normal((2, 3, 4, 3))
    r = rng.standard_normal((2, 3, 4, 5))
    d_a, d_b = layers.split_channels(r, 2)
    check("concat.d_a", lambda t: (layers.concat_channels(t, b) * r).sum(), d_a, a)
    check("concat.d_b", lambda t: (layers.concat_channels(a, t) * r).sum(), d_b, b)

    # global average pool
    x = rng.standard_normal((2, 4, 6, 3))
    r = rng.standard_normal((2, 1, 1, 3))
    check("global_avg_pool.d_input",
          lambda t: (layers.global_avg_pool(t) * r).sum(),
          layers.global_avg_pool_backward(r, x.shape), x)

    # dense
    x = rng.standard_normal((3, 5))
    w = rng.standard_normal((5, 4))
    b = rng.standard_normal(4)
    r = rng.standard_normal((3, 4))
    d_in, d_w, d_b = layers.dense_backward(x, w, r)
    check("dense.d_input", lambda t: (layers.dense_forward(t, w, b) * r).sum(), d_in, x)
    check("dense.d_weights", lambda t: (layers.dense_forward(x, t, b) * r).sum(), d_w, w)
    check("dense.d_bias", lambda t: (layers.dense_forward(x, w, t) * r).sum(), d_b, b)

    # squeeze-excite block
    x = rng.standard_normal((2, 4, 4, 6))
    w1 = rng.standard_normal((6, 2))
    b1 = rng.standard_normal(2)
    w2 = rng.standard_normal((2, 6))
    b2 = rng.standard_normal(6)
    r = rng.standard_normal(x.shape)
    _, _, cache = se_attention_forward(x, w1, b1, w2, b2)
    d_x, se_grads = se_attention_backward(cache, r)
    check("se_attention.d_input",
          lambda t: (se_attention_forward(t, w1, b1, w2, b2)[0] * r).sum(), d_x, x)
    se_args = {"se.w1": w1, "se.b1": b1, "se.w2": w2, "se.b2": b2}
    for key, arr in se_args.items():
        def loss_wrt(t, key=key):
            args = dict(se_args, **{key: t})
            y = se_attention_forward(x, args["se.w1"], args["se.b1"],
                                     args["se.w2"], args["se.b2"])[0]
            return (y * r).sum()
        check(f"se_attention.d_{key.split('.')[1]}", loss_wrt, se_grads[key], arr)

    # soft-IoU loss gradient
    p = rng.uniform(0.05, 0.95, (2, 4, 4, 1))
    t = (rng.uniform(0, 1, (2, 4, 4, 1)) > 0.6).astype(np.float64)
    check("soft_iou_loss.d_pred",
          lambda q: soft_iou_loss(q, t)[0], soft_iou_loss(p, t)[1], p)

    # end-to-end network, with and without the attention block
    target = (rng.uniform(0, 1, (2, 8, 8, 1)) > 0.5).astype(np.float64)
    xin = rng.standard_normal((2, 8, 8, 3))
    for attention, name in ((False, "unet.params"), (True, "unet_se.params")):
        model = UNet(UNetConfig(in_channels=3, base_filters=4, depth=2,
                                use_input_attention=attention, seed=seed),
                     dtype=np.float64)
        randomize_biases(model, seed=seed + 1)
        results.append(unet_param_spot_check(model, xin, target, n_coords=24,
                                             seed=seed, name=name))
    return results
