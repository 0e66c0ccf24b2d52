"""Model checkpoints: readable manifest + one raw little-endian f32 blob.

Layout:
    unet-checkpoint v1
    in_channels 5
    base_filters 8
    depth 2
    use_input_attention 0
    se_reduction 4
    seed 42
    band_mask 10110          (or "-" when unset)
    tensor enc0.c0.w 3 3 5 8 0
    tensor enc0.c0.b 8 1440
    ...
    end
    <raw float32 payload, little endian, offsets as listed>

Normalization stats ride along as tensors named norm.mean / norm.std, so a
checkpoint is self-contained for inference. Round trips are bit-exact.
"""

import numpy as np

from .masks import as_band_mask, mask_to_bits
from .synth import NormStats
from .unet import UNet, UNetConfig

MAGIC = "unet-checkpoint v1"
_CONFIG_FIELDS = ("in_channels", "base_filters", "depth",
                  "use_input_attention", "se_reduction", "seed")


class CheckpointError(Exception):
    """Malformed or truncated checkpoint file."""


def save_checkpoint(model, path):
    cfg = model.config
    tensors = dict(model.params)
    if model.norm_stats is not None:
        tensors["norm.mean"] = model.norm_stats.mean
        tensors["norm.std"] = model.norm_stats.std
    lines = [MAGIC]
    for name in _CONFIG_FIELDS:
        lines.append(f"{name} {int(getattr(cfg, name))}")
    bits = "-" if model.band_mask is None else mask_to_bits(model.band_mask)
    lines.append(f"band_mask {bits}")
    offset = 0
    blobs = []
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"tensor {name} {dims} {offset}")
        blobs.append(arr.tobytes())
        offset += len(blobs[-1])
    lines.append("end")
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("utf-8"))
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Rebuild the model (params, band mask, norm stats) from a checkpoint."""
    with open(path, "rb") as f:
        blob = f.read()
    end_marker = b"\nend\n"
    split = blob.find(end_marker)
    if split < 0:
        raise CheckpointError("missing 'end' marker; truncated manifest?")
    try:
        manifest = blob[:split].decode("utf-8").splitlines()
    except UnicodeDecodeError:
        raise CheckpointError("manifest is not valid UTF-8") from None
    payload = blob[split + len(end_marker):]
    if not manifest or manifest[0] != MAGIC:
        raise CheckpointError(f"bad magic line {manifest[:1]!r}")

    config_vals = {}
    band_bits = None
    specs = []
    for line in manifest[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] in _CONFIG_FIELDS:
            if len(parts) != 2:
                raise CheckpointError(f"malformed config line {line!r}")
            config_vals[parts[0]] = int(parts[1])
        elif parts[0] == "band_mask":
            band_bits = parts[1]
        elif parts[0] == "tensor":
            if len(parts) < 4:
                raise CheckpointError(f"malformed tensor line {line!r}")
            name = parts[1]
            try:
                *dims, offset = (int(p) for p in parts[2:])
            except ValueError:
                raise CheckpointError(f"malformed tensor line {line!r}") from None
            specs.append((name, tuple(dims), offset))
        else:
            raise CheckpointError(f"unknown manifest record {parts[0]!r}")
    missing = [f for f in _CONFIG_FIELDS if f not in config_vals]
    if missing:
        raise CheckpointError(f"manifest missing config fields {missing}")

    tensors = {}
    for name, dims, offset in specs:
        count = int(np.prod(dims)) if dims else 1
        nbytes = count * 4
        if offset < 0 or offset + nbytes > len(payload):
            raise CheckpointError(
                f"tensor {name} spans bytes {offset}..{offset + nbytes} but "
                f"payload has {len(payload)}"
            )
        tensors[name] = np.frombuffer(
            payload[offset:offset + nbytes], dtype="<f4").reshape(dims).copy()

    config = UNetConfig(
        in_channels=config_vals["in_channels"],
        base_filters=config_vals["base_filters"],
        depth=config_vals["depth"],
        use_input_attention=bool(config_vals["use_input_attention"]),
        se_reduction=config_vals["se_reduction"],
        seed=config_vals["seed"],
    )
    model = UNet(config)
    for name in model.params:
        if name not in tensors:
            raise CheckpointError(f"checkpoint missing parameter {name}")
        if tensors[name].shape != model.params[name].shape:
            raise CheckpointError(
                f"parameter {name} has shape {tensors[name].shape}, "
                f"expected {model.params[name].shape}"
            )
        model.params[name] = tensors[name]
    if band_bits not in (None, "-"):
        model.band_mask = as_band_mask(band_bits)
    if "norm.mean" in tensors and "norm.std" in tensors:
        model.norm_stats = NormStats(mean=tensors["norm.mean"], std=tensors["norm.std"])
    return model
