"""Mini-batch training loop and tiled whole-raster inference.

Training is a deterministic function of (dataset, config, seed): tile order
is shuffled each epoch with a seed-derived permutation and every numeric op
is deterministic, so equal inputs give bit-identical trained parameters.
"""

import time
from dataclasses import dataclass

import numpy as np

from .losses import dice_coefficient, soft_iou_loss
from .masks import as_band_mask, full_mask, popcount
from .optim import AdamState, adam_step
from .raster import reconstruct, tile
from .synth import normalize_array


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss/gradient); message carries epoch/batch."""


@dataclass
class TrainReport:
    epoch_losses: np.ndarray
    final_test_dice: float
    seconds: float
    seed: int


def _selected_indices(model, n_bands):
    mask = model.band_mask if model.band_mask is not None else full_mask(n_bands)
    mask = as_band_mask(mask, n_bands=n_bands)
    idx = np.flatnonzero(mask)
    if len(idx) != model.config.in_channels:
        raise ValueError(
            f"model expects {model.config.in_channels} channels but the band "
            f"mask selects {len(idx)}"
        )
    return idx


def train(model, dataset, epochs=25, batch_size=32, seed=0, lr=0.01):
    """Train the model in place on the dataset's tiles.

    Returns (model, TrainReport). The report's final_test_dice is the mean
    Dice over the dataset's test rasters (NaN when there are none).
    """
    if epochs < 1 or batch_size < 1:
        raise ValueError("epochs and batch_size must be >= 1")
    tiles = dataset.train_tiles
    if not tiles:
        raise ValueError("dataset has no training tiles")
    model.norm_stats = dataset.stats
    sel = _selected_indices(model, dataset.bands)
    x_all = np.stack([t for t, _ in tiles]).astype(np.float32)[..., sel]
    y_all = np.stack([m for _, m in tiles]).astype(np.float32)[..., None]

    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    state = AdamState(model.params, lr=lr)
    n = x_all.shape[0]
    epoch_losses = np.zeros(epochs)
    for epoch in range(epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            pred, cache = model.forward(x_all[idx])
            loss, d_pred = soft_iou_loss(pred, y_all[idx])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss!r} at epoch {epoch} batch {start // batch_size}"
                )
            grads, _ = model.backward(cache, d_pred)
            try:
                adam_step(state, model.params, grads)
            except RuntimeError as exc:
                raise TrainingError(
                    f"{exc} (epoch {epoch} batch {start // batch_size})"
                ) from exc
            batch_losses.append(loss)
        epoch_losses[epoch] = float(np.mean(batch_losses))
    test_dice = (evaluate_on_rasters(model, dataset.test_rasters, dataset.tile_size)
                 if dataset.test_rasters else float("nan"))
    report = TrainReport(epoch_losses=epoch_losses, final_test_dice=test_dice,
                         seconds=time.perf_counter() - t0, seed=seed)
    return model, report


def predict_raster(model, raster, tile_size=None, band_mask=None, stats=None,
                   batch_size=64):
    """Full-raster probability map via masked, normalized, tiled inference.

    Applies the band mask, normalizes with the stored training stats, pads
    to a tile_size multiple, predicts per tile, reconstructs and crops.
    band_mask/stats default to the ones attached to the model at train time.
    Output shape equals the raster's (height, width).
    """
    mask = band_mask if band_mask is not None else model.band_mask
    if mask is None:
        mask = full_mask(raster.bands)
    mask = as_band_mask(mask, n_bands=raster.bands)
    if popcount(mask) != model.config.in_channels:
        raise ValueError(
            f"band mask selects {popcount(mask)} bands but the model expects "
            f"{model.config.in_channels}"
        )
    stats = stats if stats is not None else model.norm_stats
    if stats is None:
        raise ValueError("no normalization stats: train the model or pass stats=")
    if tile_size is None:
        tile_size = 32
    div = 1 << model.config.depth
    if tile_size % div:
        raise ValueError(f"tile_size must be divisible by {div} for depth {model.config.depth}")
    idx = np.flatnonzero(mask)
    data = normalize_array(raster.data[:, :, idx], stats, band_indices=idx)
    tiles, layout = tile(data, tile_size)
    preds = np.empty(tiles.shape[:3], dtype=np.float32)
    for start in range(0, tiles.shape[0], batch_size):
        batch = tiles[start:start + batch_size]
        out, _ = model.forward(batch)
        preds[start:start + batch.shape[0]] = out[..., 0]
    return reconstruct(preds, layout)


def evaluate_on_rasters(model, rasters, tile_size=None, threshold=0.5):
    """Mean Dice of thresholded predictions over a list of masked rasters."""
    if not rasters:
        raise ValueError("no rasters to evaluate")
    scores = []
    for r in rasters:
        if r.mask is None:
            raise ValueError("evaluation rasters need a target mask")
        prob = predict_raster(model, r, tile_size=tile_size)
        scores.append(dice_coefficient(prob > threshold, r.mask, threshold=0.5))
    return float(np.mean(scores))
