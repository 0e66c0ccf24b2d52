"""Multi-band raster container, bit-exact file I/O, and tiling.

File format: one ASCII header line
    raster height=H width=W bands=D dtype=f32 order=HWC has_mask=0|1\\n
followed by H*W*D little-endian float32 values in (row, col, band) order and,
if has_mask=1, H*W mask bytes each 0 or 1. Round trips are bit-exact.
"""

from dataclasses import dataclass

import numpy as np

MAX_ELEMENTS = 1 << 34  # refuse absurd headers before allocating


class RasterFormatError(Exception):
    """Malformed raster file (bad header, truncated or oversized payload)."""


@dataclass
class Raster:
    """A single H x W x D image with an optional binary target mask."""

    data: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"raster data must be (h, w, bands), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("raster data must be finite")
        self.data = data
        if self.mask is not None:
            mask = np.asarray(self.mask)
            if mask.shape != data.shape[:2]:
                raise ValueError(
                    f"mask shape {mask.shape} does not match raster {data.shape[:2]}"
                )
            if not np.isin(mask, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")
            self.mask = mask.astype(np.uint8)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def bands(self):
        return self.data.shape[2]


def save_raster(raster, path):
    header = (f"raster height={raster.height} width={raster.width} "
              f"bands={raster.bands} dtype=f32 order=HWC "
              f"has_mask={0 if raster.mask is None else 1}\n")
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(np.ascontiguousarray(raster.data, dtype="<f4").tobytes())
        if raster.mask is not None:
            f.write(raster.mask.astype(np.uint8).tobytes())


def _parse_header(line):
    parts = line.split()
    if not parts or parts[0] != "raster":
        raise RasterFormatError(f"bad magic: expected 'raster', got {line[:40]!r}")
    fields = {}
    for token in parts[1:]:
        if "=" not in token:
            raise RasterFormatError(f"malformed header token {token!r}")
        key, value = token.split("=", 1)
        fields[key] = value
    expected = {"height", "width", "bands", "dtype", "order", "has_mask"}
    if set(fields) != expected:
        raise RasterFormatError(
            f"header fields {sorted(fields)} != expected {sorted(expected)}"
        )
    if fields["dtype"] != "f32" or fields["order"] != "HWC":
        raise RasterFormatError(
            f"unsupported dtype/order {fields['dtype']}/{fields['order']}"
        )
    try:
        h, w, d = int(fields["height"]), int(fields["width"]), int(fields["bands"])
        has_mask = int(fields["has_mask"])
    except ValueError as exc:
        raise RasterFormatError(f"non-integer header value: {exc}") from None
    if has_mask not in (0, 1):
        raise RasterFormatError(f"has_mask must be 0 or 1, got {has_mask}")
    if min(h, w, d) < 1:
        raise RasterFormatError(f"dimensions must be positive, got {h}x{w}x{d}")
    if h * w * d > MAX_ELEMENTS:
        raise RasterFormatError(f"dimension overflow: {h}x{w}x{d} elements")
    return h, w, d, bool(has_mask)


def load_raster(path):
    """Parse a raster file; raises RasterFormatError on any defect."""
    with open(path, "rb") as f:
        blob = f.read()
    newline = blob.find(b"\n")
    if newline < 0:
        raise RasterFormatError("missing header line")
    try:
        header = blob[:newline].decode("ascii")
    except UnicodeDecodeError:
        raise RasterFormatError("header is not ASCII") from None
    h, w, d, has_mask = _parse_header(header)
    payload = blob[newline + 1:]
    expected = h * w * d * 4 + (h * w if has_mask else 0)
    if len(payload) != expected:
        raise RasterFormatError(
            f"payload length mismatch: expected {expected} bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload[:h * w * d * 4], dtype="<f4").reshape(h, w, d)
    mask = None
    if has_mask:
        mask = np.frombuffer(payload[h * w * d * 4:], dtype=np.uint8).reshape(h, w)
        if not np.isin(mask, (0, 1)).all():
            raise RasterFormatError("mask bytes must be 0 or 1")
        mask = mask.copy()
    return Raster(data=data.copy(), mask=mask)


# ---------------------------------------------------------------------------
# tiling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TileLayout:
    """Grid record from tile(); reconstruct() needs it to invert exactly."""

    height: int
    width: int
    rows: int
    cols: int
    tile_size: int


def tile(array, tile_size):
    """Cut an (H, W) or (H, W, C) array into a non-overlapping tile grid.

    The array is zero-padded on the bottom/right to multiples of tile_size.
    Returns (tiles, layout) with tiles shaped (k, t, t[, C]) in row-major
    grid order.
    """
    arr = np.asarray(array)
    if arr.ndim not in (2, 3):
        raise ValueError(f"array must be 2-D or 3-D, got shape {arr.shape}")
    if tile_size < 2:
        raise ValueError(f"tile_size must be >= 2, got {tile_size}")
    h, w = arr.shape[:2]
    rows = -(-h // tile_size)
    cols = -(-w // tile_size)
    pad = [(0, rows * tile_size - h), (0, cols * tile_size - w)]
    pad += [(0, 0)] * (arr.ndim - 2)
    padded = np.pad(arr, pad)
    t = tile_size
    if arr.ndim == 2:
        tiles = (padded.reshape(rows, t, cols, t)
                       .transpose(0, 2, 1, 3)
                       .reshape(rows * cols, t, t))
    else:
        c = arr.shape[2]
        tiles = (padded.reshape(rows, t, cols, t, c)
                       .transpose(0, 2, 1, 3, 4)
                       .reshape(rows * cols, t, t, c))
    return tiles, TileLayout(h, w, rows, cols, tile_size)


def reconstruct(tiles, layout):
    """Invert tile(): reassemble the grid and crop the padding."""
    tiles = np.asarray(tiles)
    t = layout.tile_size
    k = layout.rows * layout.cols
    if tiles.shape[0] != k or tiles.shape[1:3] != (t, t):
        raise ValueError(
            f"tiles shaped {tiles.shape} do not match layout "
            f"({k} tiles of {t}x{t})"
        )
    if tiles.ndim == 3:
        full = (tiles.reshape(layout.rows, layout.cols, t, t)
                     .transpose(0, 2, 1, 3)
                     .reshape(layout.rows * t, layout.cols * t))
    elif tiles.ndim == 4:
        c = tiles.shape[3]
        full = (tiles.reshape(layout.rows, layout.cols, t, t, c)
                     .transpose(0, 2, 1, 3, 4)
                     .reshape(layout.rows * t, layout.cols * t, c))
    else:
        raise ValueError(f"tiles must be 3-D or 4-D, got shape {tiles.shape}")
    return full[:layout.height, :layout.width].copy()


# ---------------------------------------------------------------------------
# dataset manifests: one "role<TAB>path" line per raster, role in train|test
# ---------------------------------------------------------------------------

def write_manifest(entries, path):
    with open(path, "w", encoding="utf-8") as f:
        for role, raster_path in entries:
            if role not in ("train", "test"):
                raise ValueError(f"role must be train|test, got {role!r}")
            f.write(f"{role}\t{raster_path}\n")


def read_manifest(path):
    entries = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[0] not in ("train", "test"):
                raise ValueError(f"{path}:{lineno}: malformed manifest line {line!r}")
            entries.append((parts[0], parts[1]))
    return entries
