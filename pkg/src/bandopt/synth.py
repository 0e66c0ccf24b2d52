"""Synthetic multi-spectral scenes with a planted informative band subset.

Each scene carries a binary target mask (a union of random elliptical
blobs). Bands listed in ``informative`` contain the mask scaled by a random
per-band amplitude plus a smooth background texture and white noise; the
remaining bands contain equally-structured distractor blobs that are
independent of the target, so only the planted subset carries signal. That
makes band-selection quality objectively checkable: a selector should find
exactly the informative set.
"""

from dataclasses import dataclass, field

import numpy as np

from .masks import as_band_mask, popcount
from .raster import Raster, tile


@dataclass(frozen=True)
class SceneSpec:
    height: int
    width: int
    bands: int
    informative: tuple
    noise_sigma: float = 0.3
    n_blobs: int = 4
    seed: int = 0
    signal_range: tuple = (0.8, 1.2)
    background_amplitude: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "informative", tuple(sorted(int(i) for i in self.informative)))
        if self.height < 4 or self.width < 4 or self.bands < 1:
            raise ValueError(f"bad scene dimensions {self.height}x{self.width}x{self.bands}")
        if not self.informative:
            raise ValueError("informative band set must be nonempty")
        if any(i < 0 or i >= self.bands for i in self.informative):
            raise ValueError(f"informative bands {self.informative} out of range 0..{self.bands - 1}")
        if self.noise_sigma < 0 or self.background_amplitude < 0:
            raise ValueError("noise_sigma and background_amplitude must be >= 0")
        if self.n_blobs < 1:
            raise ValueError("n_blobs must be >= 1")


def _ellipse(rng, height, width):
    """One random rotated elliptical blob as a boolean field.

    Centers range slightly outside the frame so the per-pixel coverage
    probability is near-uniform; otherwise two independent blob unions would
    correlate through their shared center bias.
    """
    cy = rng.uniform(-0.10, 1.10) * height
    cx = rng.uniform(-0.10, 1.10) * width
    scale = min(height, width)
    a = rng.uniform(0.10, 0.28) * scale
    b = rng.uniform(0.10, 0.28) * scale
    theta = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:height, 0:width]
    dy, dx = yy - cy, xx - cx
    ct, st = np.cos(theta), np.sin(theta)
    u = (dx * ct + dy * st) / a
    v = (-dx * st + dy * ct) / b
    return (u * u + v * v) <= 1.0


def _target_mask(rng, height, width, n_blobs):
    mask = np.zeros((height, width), dtype=bool)
    for _ in range(n_blobs):
        mask |= _ellipse(rng, height, width)
    return mask


def _smooth_field(rng, height, width, n_waves=6):
    """Smooth random texture (sum of low-frequency plane waves), unit std."""
    yy, xx = np.mgrid[0:height, 0:width]
    ynorm = yy / height
    xnorm = xx / width
    field = np.zeros((height, width))
    for _ in range(n_waves):
        freq = rng.uniform(1.5, 6.0)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        field += np.cos(2.0 * np.pi * freq * (np.cos(angle) * xnorm + np.sin(angle) * ynorm)
                        + phase)
    std = field.std()
    if std > 1e-12:
        field /= std
    return field


def generate_scene(spec):
    """Deterministically render the scene described by spec as a Raster."""
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    target = _target_mask(rng, h, w, spec.n_blobs)
    informative = set(spec.informative)
    bands = []
    for b in range(spec.bands):
        amp = rng.uniform(*spec.signal_range)
        if b in informative:
            structure = amp * target.astype(np.float64)
        else:
            structure = amp * _target_mask(rng, h, w, spec.n_blobs).astype(np.float64)
        texture = spec.background_amplitude * _smooth_field(rng, h, w)
        noise = spec.noise_sigma * rng.standard_normal((h, w))
        bands.append(structure + texture + noise)
    data = np.stack(bands, axis=-1).astype(np.float32)
    return Raster(data=data, mask=target.astype(np.uint8))


# ---------------------------------------------------------------------------
# per-band normalization
# ---------------------------------------------------------------------------

@dataclass
class NormStats:
    """Per-band mean and std over the training pixels; std floored at 1e-6."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float32)
        self.std = np.asarray(self.std, dtype=np.float32)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean/std must be matching 1-D arrays")
        if np.any(self.std <= 0):
            raise ValueError("std must be positive (floored at 1e-6)")


def compute_norm_stats(train_rasters):
    """Per-band mean/std pooled over all pixels of the training rasters."""
    if not train_rasters:
        raise ValueError("at least one training raster required")
    d = train_rasters[0].bands
    for r in train_rasters:
        if r.bands != d:
            raise ValueError(f"band count mismatch: {r.bands} vs {d}")
    flat = np.concatenate([r.data.reshape(-1, d).astype(np.float64) for r in train_rasters])
    mean = flat.mean(axis=0)
    std = np.maximum(flat.std(axis=0), 1e-6)
    return NormStats(mean=mean, std=std)


def normalize_array(data, stats, band_indices=None):
    """(x - mean) / std per band; band_indices selects a stats subset."""
    mean, std = stats.mean, stats.std
    if band_indices is not None:
        mean, std = mean[band_indices], std[band_indices]
    if data.shape[-1] != mean.shape[0]:
        raise ValueError(f"data has {data.shape[-1]} bands, stats cover {mean.shape[0]}")
    return ((data - mean) / std).astype(np.float32)


def apply_norm(raster, stats):
    """Normalized copy of a raster using (train-set) stats."""
    return Raster(data=normalize_array(raster.data, stats), mask=raster.mask)


def select_bands(raster, band_mask):
    """Keep only the channels flagged in band_mask, ascending index order."""
    mask = as_band_mask(band_mask, n_bands=raster.bands)
    if popcount(mask) < 1:
        raise ValueError("band mask selects no bands: invalid model input")
    idx = np.flatnonzero(mask)
    return Raster(data=raster.data[:, :, idx], mask=raster.mask)


# ---------------------------------------------------------------------------
# training dataset
# ---------------------------------------------------------------------------

@dataclass
class RasterDataset:
    """Normalized full-band training tiles plus raw test rasters.

    train_tiles holds (tile, mask_tile) pairs, every tile shaped
    (tile_size, tile_size, bands) float32 already normalized by ``stats``
    (which were computed from the training rasters only). Test rasters stay
    raw; prediction-time code normalizes them with the stored stats.
    """

    train_tiles: list = field(default_factory=list)
    test_rasters: list = field(default_factory=list)
    stats: NormStats = None
    tile_size: int = 32

    @property
    def bands(self):
        return self.stats.mean.shape[0]


def build_dataset(train_rasters, test_rasters, tile_size):
    """Compute train-set stats, normalize and tile the training rasters."""
    stats = compute_norm_stats(train_rasters)
    pairs = []
    for r in train_rasters:
        if r.mask is None:
            raise ValueError("training rasters need a target mask")
        data_tiles, _ = tile(normalize_array(r.data, stats), tile_size)
        mask_tiles, _ = tile(r.mask, tile_size)
        pairs.extend(zip(data_tiles, mask_tiles))
    return RasterDataset(train_tiles=pairs, test_rasters=list(test_rasters),
                         stats=stats, tile_size=tile_size)
