"""Binary band-mask helpers.

A band mask is a length-D vector of {0, 1} flagging which spectral bands
feed the network. Masks are stored as int8 numpy arrays; bit 0 is band 0.
The canonical string form writes bits in band order ("10110" = bands 0, 2, 3).
Integer keys treat bit 0 as the most significant digit, so ascending integer
order equals lexicographic order on the bit vector.
"""

import numpy as np


def as_band_mask(bits, n_bands=None):
    """Coerce a sequence / array / bitstring to a validated int8 mask."""
    if isinstance(bits, str):
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"mask bitstring must be nonempty 0/1, got {bits!r}")
        arr = np.array([int(ch) for ch in bits], dtype=np.int8)
    else:
        arr = np.asarray(bits)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"band mask must be a nonempty vector, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("band mask entries must be 0 or 1")
        arr = arr.astype(np.int8)
    if n_bands is not None and arr.size != n_bands:
        raise ValueError(f"band mask has length {arr.size}, expected {n_bands}")
    return arr


def mask_to_bits(mask):
    return "".join(str(int(b)) for b in mask)


def bits_to_mask(bits):
    return as_band_mask(bits)


def mask_key(mask):
    """Integer key with band 0 as the most significant bit."""
    key = 0
    for b in mask:
        key = (key << 1) | int(b)
    return key


def popcount(mask):
    return int(np.sum(np.asarray(mask) != 0))


def full_mask(n_bands):
    return np.ones(n_bands, dtype=np.int8)


def mask_from_indices(indices, n_bands):
    """Mask with the given band indices set."""
    mask = np.zeros(n_bands, dtype=np.int8)
    for i in indices:
        if not 0 <= int(i) < n_bands:
            raise ValueError(f"band index {i} out of range for {n_bands} bands")
        mask[int(i)] = 1
    return mask


def enumerate_masks(n_bands):
    """All 2^D - 1 nonzero masks as a (2^D - 1, D) int8 matrix.

    Rows are in ascending integer-key order, which is lexicographic order on
    the bit vectors.
    """
    if n_bands > 24:
        raise ValueError(f"refusing to enumerate 2^{n_bands} masks")
    values = np.arange(1, 2 ** n_bands, dtype=np.int64)
    shifts = np.arange(n_bands - 1, -1, -1, dtype=np.int64)
    return ((values[:, None] >> shifts) & 1).astype(np.int8)
