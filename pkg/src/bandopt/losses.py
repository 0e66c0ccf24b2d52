"""Training loss and evaluation metric for binary segmentation.

The network trains against a smoothed soft intersection-over-union loss and
is scored with the Dice coefficient on thresholded predictions.
"""

import numpy as np


def soft_iou_loss(prediction, target, smooth=1.0):
    """Soft IoU loss summed over the whole batch, with analytic gradient.

    loss = 1 - (sum(p*t) + s) / (sum(p) + sum(t) - sum(p*t) + s)

    prediction holds probabilities in (0, 1), target holds {0, 1} values of
    the same shape. The smoothing constant keeps empty-mask batches finite
    (0/0 -> ratio 1 -> loss 0). Returns (loss, d_prediction).
    """
    p = np.asarray(prediction)
    t = np.asarray(target)
    if p.shape != t.shape:
        raise ValueError(f"prediction shape {p.shape} != target shape {t.shape}")
    inter = float((p * t).sum()) + smooth
    union = float(p.sum()) + float(t.sum()) - (inter - smooth) + smooth
    loss = 1.0 - inter / union
    # d/dp_i [1 - I/U] with dI/dp_i = t_i, dU/dp_i = 1 - t_i
    d_pred = -(t * union - inter * (1.0 - t)) / (union * union)
    return loss, d_pred.astype(p.dtype, copy=False)


def dice_coefficient(prediction, target, threshold=0.5):
    """Dice overlap 2|P∩T| / (|P| + |T|) of the thresholded prediction.

    Defined as 1.0 when both masks are empty. Symmetric in its arguments
    once both are binarized.
    """
    p = np.asarray(prediction)
    t = np.asarray(target)
    if p.shape != t.shape:
        raise ValueError(f"prediction shape {p.shape} != target shape {t.shape}")
    pb = p > threshold
    tb = t > threshold
    total = int(pb.sum()) + int(tb.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((pb & tb).sum()) / total
