"""Experiment orchestration: the four band-selection strategies, side by side.

Methods:
    expert     - train on a fixed caller-chosen band subset, once per seed
    all_bands  - train on every band, once per seed
    attention  - train on every band with the squeeze-excite input block
    bayes_opt  - surrogate-driven mask search; each evaluation trains a model
                 on the candidate subset with one fixed inner seed

Results are persisted as a versioned tab-separated file; the report renders
per-method mean +/- sample std of the Dice score in percent.
"""

import hashlib
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .bayesopt import bayes_opt_loop
from .checkpoint import save_checkpoint
from .masks import full_mask, mask_from_indices, mask_to_bits, popcount
from .raster import load_raster, read_manifest
from .synth import SceneSpec, build_dataset, generate_scene
from .train import train
from .unet import UNet, UNetConfig

METHODS = ("expert", "all_bands", "attention", "bayes_opt")
METHOD_LABELS = {
    "expert": "Expert bands",
    "all_bands": "All bands",
    "attention": "Channel attention",
    "bayes_opt": "Bayesian optimisation",
}
RESULTS_MAGIC = "# bandopt-results v1"


class ConfigError(ValueError):
    """Invalid experiment configuration or config file."""


@dataclass
class ExperimentConfig:
    # synthetic data (ignored when data_manifest is set)
    bands: int = 8
    informative: tuple = (1, 3, 6)
    height: int = 256
    width: int = 256
    n_train_scenes: int = 3
    n_test_scenes: int = 2
    noise_sigma: float = 0.3
    background_amplitude: float = 0.5
    n_blobs: int = 4
    data_seed: int = 7
    data_manifest: str = ""
    tile_size: int = 32
    # model / training
    method: str = "all_bands"
    expert_bands: tuple = ()
    seeds: tuple = tuple(range(10))
    epochs: int = 25
    batch_size: int = 32
    lr: float = 0.01
    base_filters: int = 8
    depth: int = 2
    se_reduction: int = 4
    # Bayesian optimisation
    n_warm: int = 5
    n_iters: int = 35
    top_k: int = 10
    bo_seed: int = 0
    bo_train_seed: int = 0
    gp_length_scale: float = 1.0
    gp_signal_variance: float = 1.0
    gp_noise_variance: float = 1e-4

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method == "expert" and not self.expert_bands:
            raise ConfigError("method=expert requires a nonempty expert_bands list")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        for name in ("bands", "epochs", "batch_size", "base_filters", "depth",
                     "se_reduction", "n_warm", "top_k", "n_train_scenes",
                     "n_test_scenes", "n_blobs", "tile_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_iters < 0:
            raise ConfigError("n_iters must be >= 0")
        if not self.data_manifest:
            if not self.informative:
                raise ConfigError("informative band list must be nonempty")
            bad = [i for i in self.informative if not 0 <= i < self.bands]
            if bad:
                raise ConfigError(f"informative bands {bad} out of range 0..{self.bands - 1}")
        bad = [i for i in self.expert_bands if not 0 <= i < self.bands]
        if bad:
            raise ConfigError(f"expert bands {bad} out of range 0..{self.bands - 1}")
        return self


_INT_TUPLES = {"informative", "expert_bands", "seeds"}


def parse_config(text):
    """Parse ``key = value`` lines into an ExperimentConfig."""
    by_name = {f.name: f for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in by_name:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            if key in _INT_TUPLES:
                values[key] = tuple(int(v) for v in value.split(",") if v.strip())
            elif by_name[key].type is int or isinstance(by_name[key].default, int):
                values[key] = int(value)
            elif isinstance(by_name[key].default, float):
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return ExperimentConfig(**values).validate()


def load_config(path):
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


# ---------------------------------------------------------------------------
# dataset assembly
# ---------------------------------------------------------------------------

def scene_specs(cfg):
    """Deterministic per-scene specs: train seeds offset 0.., test 10000.."""
    common = dict(height=cfg.height, width=cfg.width, bands=cfg.bands,
                  informative=cfg.informative, noise_sigma=cfg.noise_sigma,
                  n_blobs=cfg.n_blobs,
                  background_amplitude=cfg.background_amplitude)
    trains = [SceneSpec(seed=cfg.data_seed + i, **common)
              for i in range(cfg.n_train_scenes)]
    tests = [SceneSpec(seed=cfg.data_seed + 10000 + j, **common)
             for j in range(cfg.n_test_scenes)]
    return trains, tests


def build_experiment_dataset(cfg):
    """Materialize the RasterDataset from a manifest or synthetic scenes."""
    if cfg.data_manifest:
        base = os.path.dirname(os.path.abspath(cfg.data_manifest))
        entries = read_manifest(cfg.data_manifest)
        rasters = {"train": [], "test": []}
        for role, rel in entries:
            path = rel if os.path.isabs(rel) else os.path.join(base, rel)
            rasters[role].append(load_raster(path))
        if not rasters["train"]:
            raise ConfigError(f"manifest {cfg.data_manifest} lists no training rasters")
        return build_dataset(rasters["train"], rasters["test"], cfg.tile_size)
    trains, tests = scene_specs(cfg)
    return build_dataset([generate_scene(s) for s in trains],
                         [generate_scene(s) for s in tests], cfg.tile_size)


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

@dataclass
class ResultRow:
    method: str
    seed_or_rank: int
    mask_bits: str
    dice: float
    seconds: float


def _method_mask(cfg, dataset, method):
    d = dataset.bands
    if method == "expert":
        return mask_from_indices(cfg.expert_bands, d)
    return full_mask(d)


def train_candidate(cfg, dataset, band_mask, use_attention, seed):
    """Train one model for a band subset; returns (model, dice, seconds)."""
    model = UNet(UNetConfig(in_channels=popcount(band_mask),
                            base_filters=cfg.base_filters, depth=cfg.depth,
                            use_input_attention=use_attention,
                            se_reduction=cfg.se_reduction, seed=seed))
    model.band_mask = band_mask
    model, report = train(model, dataset, epochs=cfg.epochs,
                          batch_size=cfg.batch_size, seed=seed, lr=cfg.lr)
    return model, report.final_test_dice, report.seconds


def _checkpoint_dir(out_dir):
    path = os.path.join(out_dir, "checkpoints")
    os.makedirs(path, exist_ok=True)
    return path


def checkpoint_path_for_row(out_dir, row):
    """Where run_method persisted the model behind a result row."""
    if row.method == "bayes_opt":
        name = f"bayes_opt-{row.mask_bits}.ckpt"
    else:
        name = f"{row.method}-seed{row.seed_or_rank}.ckpt"
    return os.path.join(out_dir, "checkpoints", name)


def run_method(cfg, dataset, method=None, out_dir=None, threads=1, resume=False):
    """Run one strategy; returns its ResultRow list (seed or rank order).

    With out_dir set, every trained model is checkpointed under
    out_dir/checkpoints and a BO run writes its trace to out_dir/bo-trace.tsv
    (resume=True continues a truncated trace).
    """
    method = method or cfg.method
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    if method == "expert" and not cfg.expert_bands:
        raise ConfigError("method=expert requires expert_bands")
    if dataset.train_tiles and dataset.train_tiles[0][0].shape[2] != dataset.bands:
        raise ConfigError("dataset tiles disagree with stats band count")

    if method == "bayes_opt":
        return _run_bayes_opt(cfg, dataset, out_dir, resume=resume)

    band_mask = _method_mask(cfg, dataset, method)
    use_attention = method == "attention"
    bits = mask_to_bits(band_mask)

    def one(seed):
        model, dice, secs = train_candidate(cfg, dataset, band_mask, use_attention, seed)
        if out_dir:
            save_checkpoint(model, os.path.join(
                _checkpoint_dir(out_dir), f"{method}-seed{seed}.ckpt"))
        return ResultRow(method=method, seed_or_rank=seed, mask_bits=bits,
                         dice=dice, seconds=secs)

    if threads > 1 and len(cfg.seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, cfg.seeds))
    else:
        rows = [one(seed) for seed in cfg.seeds]
    return rows


def _run_bayes_opt(cfg, dataset, out_dir, resume=False):
    evaluated = {}

    def objective(mask):
        model, dice, secs = train_candidate(cfg, dataset, mask, False, cfg.bo_train_seed)
        bits = mask_to_bits(mask)
        evaluated[bits] = (dice, secs)
        if out_dir:
            save_checkpoint(model, os.path.join(
                _checkpoint_dir(out_dir), f"bayes_opt-{bits}.ckpt"))
        return 1.0 - dice

    trace_path = os.path.join(out_dir, "bo-trace.tsv") if out_dir else None
    result = bayes_opt_loop(objective, dataset.bands, n_warm=cfg.n_warm,
                            n_iters=cfg.n_iters, seed=cfg.bo_seed,
                            length_scale=cfg.gp_length_scale,
                            signal_variance=cfg.gp_signal_variance,
                            noise_variance=cfg.gp_noise_variance,
                            trace_path=trace_path, resume=resume)
    rows = []
    for rank, obs in enumerate(result.observations[:cfg.top_k], start=1):
        bits = mask_to_bits(obs.mask)
        dice, secs = evaluated.get(bits, (1.0 - obs.y, float("nan")))
        rows.append(ResultRow(method="bayes_opt", seed_or_rank=rank,
                              mask_bits=bits, dice=dice, seconds=secs))
    return rows


def run_compare(cfg, dataset, out_dir=None, threads=1):
    """All four methods in report order; expert is skipped when no
    expert_bands are configured (with a warning)."""
    rows = []
    for method in METHODS:
        if method == "expert" and not cfg.expert_bands:
            warnings.warn("no expert_bands configured; skipping the expert method")
            continue
        rows.extend(run_method(cfg, dataset, method=method, out_dir=out_dir,
                               threads=threads))
    return rows


# ---------------------------------------------------------------------------
# results persistence and report
# ---------------------------------------------------------------------------

def write_results(rows, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(RESULTS_MAGIC + "\n")
        f.write("method\tseed_or_rank\tmask_bits\tdice\tseconds\n")
        for r in rows:
            f.write(f"{r.method}\t{r.seed_or_rank}\t{r.mask_bits}\t"
                    f"{r.dice!r}\t{r.seconds:.3f}\n")


def read_results(path):
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != RESULTS_MAGIC:
        raise ValueError(f"{path} is not a results file (missing {RESULTS_MAGIC!r})")
    rows = []
    for line in lines[2:]:
        if not line:
            continue
        method, seed_or_rank, bits, dice, seconds = line.split("\t")
        rows.append(ResultRow(method=method, seed_or_rank=int(seed_or_rank),
                              mask_bits=bits, dice=float(dice),
                              seconds=float(seconds)))
    return rows


def results_checksum(path):
    """SHA-256 of the results content with the timing column canonicalized.

    Wall-clock seconds are inherently run-to-run noise; zeroing that column
    makes the checksum compare the reproducible content (methods, seeds,
    masks, Dice values) only.
    """
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    canon = []
    for line in lines:
        parts = line.split("\t")
        if len(parts) == 5 and not line.startswith("#") and parts[0] != "method":
            parts[4] = "0"
        canon.append("\t".join(parts))
    return hashlib.sha256("\n".join(canon).encode("utf-8")).hexdigest()


def summarize(rows):
    """Per-method (mean, sample std, count) of Dice, in report order."""
    stats = {}
    for method in METHODS:
        dices = [r.dice for r in rows if r.method == method]
        if not dices:
            continue
        if len(dices) == 1:
            warnings.warn(f"method {method!r} has a single row; std reported as 0")
            std = 0.0
        else:
            std = float(np.std(dices, ddof=1))
        stats[method] = (float(np.mean(dices)), std, len(dices))
    return stats


def format_table(stats):
    """Aligned text table of mean +/- std Dice in percent (2 decimals).

    stats maps method -> (mean_fraction, std_fraction, n). Methods appear in
    canonical order; configured-but-absent methods get a notice line.
    """
    label_width = max(len(v) for v in METHOD_LABELS.values()) + 2
    lines = [f"{'Method':<{label_width}}Dice (%)", "-" * (label_width + 14)]
    for method in METHODS:
        if method not in stats:
            continue
        mean, std, n = stats[method]
        lines.append(f"{METHOD_LABELS[method]:<{label_width}}"
                     f"{100 * mean:.2f} ± {100 * std:.2f}  (n={n})")
    missing = [m for m in METHODS if m not in stats]
    if stats and missing:
        lines.append(f"(no rows for: {', '.join(missing)})")
    return "\n".join(lines) + "\n"


def report(rows):
    """Summary table for a result-row list."""
    return format_table(summarize(rows))
