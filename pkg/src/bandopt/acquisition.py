"""Expected-improvement acquisition over the binary mask domain.

Improvement is measured for minimization: EI(x) = E[max(0, f_best - f(x))]
under the GP posterior. The closed form is exact for a Gaussian posterior;
the Monte Carlo estimator is kept as an independent cross-check. The next
mask is the EI argmax over all 2^D - 1 nonzero masks (exhaustive for
D <= 16, multi-restart single-bit-flip hill climbing above that).
"""

import math

import numpy as np

from . import gp
from .masks import as_band_mask, enumerate_masks, mask_key

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Abramowitz & Stegun 7.1.26 rational approximation, |error| <= 1.5e-7
_ERF_P = 0.3275911
_ERF_A1 = 0.254829592
_ERF_A2 = -0.284496736
_ERF_A3 = 1.421413741
_ERF_A4 = -1.453152027
_ERF_A5 = 1.061405429


def erf_approx(x):
    """Rational-polynomial erf with absolute error below 1.5e-7."""
    x = np.asarray(x, dtype=np.float64)
    sign = np.sign(x)
    ax = np.abs(x)
    t = 1.0 / (1.0 + _ERF_P * ax)
    poly = ((((_ERF_A5 * t + _ERF_A4) * t + _ERF_A3) * t + _ERF_A2) * t + _ERF_A1) * t
    return sign * (1.0 - poly * np.exp(-ax * ax))


def norm_cdf(z):
    """Standard normal CDF via the rational erf approximation."""
    return 0.5 * (1.0 + erf_approx(np.asarray(z, dtype=np.float64) / SQRT2))


def norm_pdf(z):
    z = np.asarray(z, dtype=np.float64)
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)


def ei_closed_form(mean, std, f_best):
    """EI for minimization: (f_best - mu) Phi(z) + sigma phi(z), z=(f_best-mu)/sigma.

    At sigma = 0 this degenerates to max(0, f_best - mean). Accepts scalars
    or arrays; the result is clamped at 0 against rounding.
    """
    mu = np.asarray(mean, dtype=np.float64)
    sigma = np.asarray(std, dtype=np.float64)
    if np.any(sigma < 0):
        raise ValueError("std must be >= 0")
    scalar = mu.ndim == 0 and sigma.ndim == 0
    mu, sigma = np.atleast_1d(mu), np.atleast_1d(sigma)
    mu, sigma = np.broadcast_arrays(mu, sigma)
    imp = f_best - mu
    ei = np.maximum(imp, 0.0)
    pos = sigma > 0
    if np.any(pos):
        z = imp[pos] / sigma[pos]
        ei = ei.copy()
        ei[pos] = imp[pos] * norm_cdf(z) + sigma[pos] * norm_pdf(z)
    ei = np.maximum(ei, 0.0)
    return float(ei[0]) if scalar else ei


def ei_monte_carlo(mean, std, f_best, n_samples, seed=0):
    """Monte Carlo EI estimate from seeded N(mean, std^2) draws.

    Returns (estimate, standard_error); the standard error is 0 when fewer
    than two samples were drawn.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if std < 0:
        raise ValueError("std must be >= 0")
    rng = np.random.default_rng(seed)
    draws = rng.normal(loc=mean, scale=std, size=n_samples)
    imp = np.maximum(f_best - draws, 0.0)
    estimate = float(imp.mean())
    stderr = float(imp.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return estimate, stderr


class DomainExhausted(RuntimeError):
    """Every nonzero mask has been observed; the BO loop is complete."""


def _excluded_keys(model, excluded):
    keys = {mask_key(row) for row in model.X}
    for m in excluded:
        keys.add(mask_key(as_band_mask(m, n_bands=model.n_bands)))
    return keys


def ei_over_masks(model, mask_rows, f_best=None):
    """EI of each row of a (m, D) mask stack under the fitted model."""
    f_best = model.f_best if f_best is None else f_best
    mu, var = gp.gp_posterior_batch(model, mask_rows)
    return ei_closed_form(mu, np.sqrt(var), f_best)


def _lex_less(a, b):
    return tuple(a.tolist()) < tuple(b.tolist())


def _propose_exhaustive(model, excluded_keys):
    masks = enumerate_masks(model.n_bands)
    keys = np.array([mask_key(row) for row in masks])
    keep = ~np.isin(keys, list(excluded_keys))
    if not keep.any():
        raise DomainExhausted("all nonzero masks have been evaluated")
    candidates = masks[keep]
    ei = ei_over_masks(model, candidates)
    # rows are in lexicographic order, argmax takes the first maximizer
    return candidates[int(np.argmax(ei))].copy()


def _random_nonzero_mask(rng, d, excluded_keys, max_tries=10000):
    for _ in range(max_tries):
        mask = rng.integers(0, 2, size=d).astype(np.int8)
        if mask.any() and mask_key(mask) not in excluded_keys:
            return mask
    raise DomainExhausted(f"could not sample an unobserved nonzero mask in {max_tries} tries")


def _propose_hillclimb(model, excluded_keys, seed, n_restarts):
    d = model.n_bands
    rng = np.random.default_rng(seed)
    best_mask, best_ei = None, -np.inf

    def better(ei_a, mask_a, ei_b, mask_b):
        if ei_a != ei_b:
            return ei_a > ei_b
        return mask_b is None or _lex_less(mask_a, mask_b)

    for _ in range(n_restarts):
        try:
            cur = _random_nonzero_mask(rng, d, excluded_keys)
        except DomainExhausted:
            if best_mask is None:
                raise
            break
        cur_ei = float(ei_over_masks(model, cur[None, :])[0])
        while True:
            flips = np.repeat(cur[None, :], d, axis=0)
            flips[np.arange(d), np.arange(d)] ^= 1
            valid = [i for i in range(d)
                     if flips[i].any() and mask_key(flips[i]) not in excluded_keys]
            if not valid:
                break
            ei = ei_over_masks(model, flips[valid])
            step_mask, step_ei = None, -np.inf
            for idx, e in zip(valid, ei):
                if better(float(e), flips[idx], step_ei, step_mask):
                    step_mask, step_ei = flips[idx], float(e)
            if step_mask is not None and better(step_ei, step_mask, cur_ei, cur):
                cur, cur_ei = step_mask, step_ei
            else:
                break
        if better(cur_ei, cur, best_ei, best_mask):
            best_mask, best_ei = cur, cur_ei
    return best_mask.copy()


def propose_next(model, excluded=(), seed=0, method="auto", n_restarts=16):
    """Pick the unobserved nonzero mask maximizing expected improvement.

    f_best is the smallest observed objective value. Masks already observed
    by the model, listed in ``excluded``, and the all-zero mask are out of
    the running. Ties break toward the lexicographically smallest mask.
    method: "auto" (exhaustive for D <= 16, else hill climbing),
    "exhaustive", or "hillclimb".
    """
    if method not in ("auto", "exhaustive", "hillclimb"):
        raise ValueError(f"unknown method {method!r}")
    excluded_keys = _excluded_keys(model, excluded)
    if method == "auto":
        method = "exhaustive" if model.n_bands <= 16 else "hillclimb"
    if method == "exhaustive":
        return _propose_exhaustive(model, excluded_keys)
    return _propose_hillclimb(model, excluded_keys, seed, n_restarts)
