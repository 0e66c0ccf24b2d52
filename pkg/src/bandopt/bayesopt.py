"""The surrogate-driven band-search loop.

Protocol: evaluate n_warm seeded uniform-random distinct nonzero masks, then
n_iters rounds of fit-surrogate -> maximize expected improvement -> evaluate.
The objective maps a mask to a value in [0, 1] (1 - test Dice; lower is
better). Every evaluation is appended to a tab-separated trace file as it
finishes, so an interrupted run can resume from its truncated trace.
"""

import logging
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from .acquisition import propose_next
from .gp import gp_fit
from .masks import as_band_mask, mask_key, mask_to_bits

log = logging.getLogger(__name__)

TRACE_MAGIC = "# bo-trace v1"


@dataclass(frozen=True)
class Observation:
    mask: np.ndarray
    y: float


@dataclass(frozen=True)
class TraceRecord:
    index: int
    bits: str
    y: float        # NaN marks a failed evaluation
    seconds: float

    @property
    def failed(self):
        return math.isnan(self.y)


@dataclass
class BOResult:
    observations: list   # successes sorted ascending by objective value
    records: list        # full evaluation trace, in order
    n_failures: int

    @property
    def best(self):
        if not self.observations:
            raise ValueError("no successful observations")
        return self.observations[0]


# ---------------------------------------------------------------------------
# trace file
# ---------------------------------------------------------------------------

def _header_line(n_bands, n_warm, n_iters, seed):
    return f"{TRACE_MAGIC}\tbands={n_bands}\tn_warm={n_warm}\tn_iters={n_iters}\tseed={seed}\n"


def read_trace(path):
    """Parse a (possibly truncated) trace file.

    Returns (header dict, records). A malformed final line — the signature
    of an interrupted write — is dropped with a warning; a malformed line
    anywhere else raises.
    """
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith(TRACE_MAGIC):
        raise ValueError(f"{path} is not a bo-trace file")
    header = {}
    for token in lines[0].split("\t")[1:]:
        key, value = token.split("=", 1)
        header[key] = int(value)
    records = []
    body = [ln for ln in lines[1:] if ln and not ln.startswith("#")]
    for i, line in enumerate(body):
        parts = line.split("\t")
        try:
            if len(parts) != 4:
                raise ValueError(f"expected 4 fields, got {len(parts)}")
            rec = TraceRecord(index=int(parts[0]), bits=parts[1],
                              y=float(parts[2]), seconds=float(parts[3]))
        except ValueError as exc:
            if i == len(body) - 1:
                log.warning("dropping truncated trace line %r: %s", line, exc)
                break
            raise ValueError(f"{path}: malformed trace line {line!r}") from None
        records.append(rec)
    return header, records


def _record_line(rec):
    return f"{rec.index}\t{rec.bits}\t{rec.y!r}\t{rec.seconds:.3f}\n"


def _append_record(path, rec):
    with open(path, "a", encoding="utf-8") as f:
        f.write(_record_line(rec))
        f.flush()


def _rewrite_trace(path, header_line, records):
    # a truncated file may end mid-line; rewrite it clean before appending
    with open(path, "w", encoding="utf-8") as f:
        f.write(header_line)
        for rec in records:
            f.write(_record_line(rec))


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------

def _warm_masks(rng, n_bands, n_warm):
    """n_warm distinct nonzero masks, uniform over the nonzero domain."""
    if n_warm > 2 ** n_bands - 1:
        raise ValueError(f"n_warm={n_warm} exceeds the {2 ** n_bands - 1}-mask domain")
    seen = set()
    masks = []
    while len(masks) < n_warm:
        m = rng.integers(0, 2, size=n_bands).astype(np.int8)
        key = mask_key(m)
        if key == 0 or key in seen:
            continue
        seen.add(key)
        masks.append(m)
    return masks


def bayes_opt_loop(objective, n_bands, n_warm=5, n_iters=35, seed=0,
                   length_scale=1.0, signal_variance=1.0, noise_variance=1e-4,
                   propose_method="auto", trace_path=None, resume=False):
    """Run warm start + EI-guided rounds; returns a BOResult.

    objective(mask) must return a finite value in [0, 1] and should be
    deterministic given its own seed discipline. A raising or out-of-range
    objective counts as a failed evaluation: the mask is excluded and the
    loop continues, aborting once failures exceed 25% of the evaluation
    budget. With trace_path set, each evaluation is appended as it
    completes; resume=True continues a truncated trace instead of starting
    over (the call arguments must match the trace header).
    """
    if n_warm < 1 or n_iters < 0:
        raise ValueError("need n_warm >= 1 and n_iters >= 0")
    total = n_warm + n_iters
    max_failures = int(0.25 * total)
    rng = np.random.default_rng(seed)
    warm = _warm_masks(rng, n_bands, n_warm)
    proposal_seeds = [int(rng.integers(2 ** 31)) for _ in range(n_iters)]

    records = []
    if resume:
        if trace_path is None:
            raise ValueError("resume=True requires trace_path")
        if os.path.exists(trace_path):
            header, records = read_trace(trace_path)
            expect = {"bands": n_bands, "n_warm": n_warm, "n_iters": n_iters, "seed": seed}
            if header != expect:
                raise ValueError(f"trace header {header} does not match run {expect}")
            if len(records) > total:
                raise ValueError(f"trace has {len(records)} records for a budget of {total}")
    if trace_path is not None:
        _rewrite_trace(trace_path, _header_line(n_bands, n_warm, n_iters, seed), records)

    observations = []
    attempted = []
    n_failures = 0
    for rec in records:
        mask = as_band_mask(rec.bits, n_bands=n_bands)
        if rec.index < n_warm and mask_key(mask) != mask_key(warm[rec.index]):
            raise ValueError(
                f"trace warm-start mask #{rec.index} does not match seed {seed}"
            )
        attempted.append(mask)
        if rec.failed:
            n_failures += 1
        else:
            observations.append(Observation(mask=mask, y=rec.y))

    for index in range(len(records), total):
        if index < n_warm:
            mask = warm[index]
        else:
            prop_seed = proposal_seeds[index - n_warm]
            if observations:
                model = gp_fit([o.mask for o in observations],
                               [o.y for o in observations],
                               length_scale=length_scale,
                               signal_variance=signal_variance,
                               noise_variance=noise_variance)
                mask = propose_next(model, excluded=attempted, seed=prop_seed,
                                    method=propose_method)
            else:
                # every warm evaluation failed: no surrogate to fit yet
                keys = {mask_key(m) for m in attempted}
                mask = _random_unobserved(prop_seed, n_bands, keys)
        t0 = time.perf_counter()
        y = None
        try:
            value = float(objective(mask))
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ValueError(f"objective value {value!r} outside [0, 1]")
            y = value
        except Exception as exc:
            log.warning("objective failed for mask %s: %s", mask_to_bits(mask), exc)
        seconds = time.perf_counter() - t0
        rec = TraceRecord(index=index, bits=mask_to_bits(mask),
                          y=float("nan") if y is None else y, seconds=seconds)
        records.append(rec)
        if trace_path is not None:
            _append_record(trace_path, rec)
        attempted.append(mask)
        if y is None:
            n_failures += 1
            if n_failures > max_failures:
                raise RuntimeError(
                    f"aborting: {n_failures} of {total} evaluations failed "
                    f"(limit {max_failures})"
                )
        else:
            observations.append(Observation(mask=mask, y=y))

    ranked = sorted(observations, key=lambda o: o.y)
    return BOResult(observations=ranked, records=records, n_failures=n_failures)


def _random_unobserved(seed, n_bands, excluded_keys, max_tries=10000):
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        m = rng.integers(0, 2, size=n_bands).astype(np.int8)
        if m.any() and mask_key(m) not in excluded_keys:
            return m
    raise RuntimeError("could not sample an unobserved nonzero mask")
