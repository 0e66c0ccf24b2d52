"""Gaussian-process regression over binary band masks.

The surrogate maps a mask x in {0,1}^D to an objective value (1 - test Dice;
lower is better). Distances are Hamming counts normalized by D, the kernel
is Matern 5/2, the mean function is zero on standardized targets, and the
posterior is computed through a cached Cholesky factor of K + (noise+jitter)I.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .masks import as_band_mask

SQRT5 = math.sqrt(5.0)


class CholeskyError(RuntimeError):
    """Kernel matrix not factorizable even after jitter escalation."""


def _sq_distance(a_rows, b_rows):
    """Normalized squared distance r^2 = Hamming(a, b) / D for 0/1 rows."""
    diff = a_rows[:, None, :] != b_rows[None, :, :]
    return diff.sum(axis=2) / a_rows.shape[1]


def _matern52_from_r2(r2, length_scale, signal_variance):
    r = np.sqrt(r2)
    s = SQRT5 * r / length_scale
    return signal_variance * (1.0 + s + 5.0 * r2 / (3.0 * length_scale ** 2)) * np.exp(-s)


def kernel_matern52(a, b, length_scale=1.0, signal_variance=1.0):
    """Matern 5/2 covariance between two masks of equal length."""
    a = as_band_mask(a)
    b = as_band_mask(b, n_bands=a.size)
    r2 = float(np.sum(a != b)) / a.size
    return float(_matern52_from_r2(np.array(r2), length_scale, signal_variance))


def kernel_matrix(a_masks, b_masks, length_scale=1.0, signal_variance=1.0):
    """Covariance matrix between two stacks of masks, shape (n, m)."""
    A = np.atleast_2d(np.asarray(a_masks, dtype=np.int8))
    B = np.atleast_2d(np.asarray(b_masks, dtype=np.int8))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"mask length mismatch: {A.shape[1]} vs {B.shape[1]}")
    return _matern52_from_r2(_sq_distance(A, B), length_scale, signal_variance)


@dataclass
class GPModel:
    """Fitted surrogate: observations, hyper-parameters and Cholesky cache."""

    X: np.ndarray              # (n, D) observed masks
    y: np.ndarray              # (n,) raw objective values
    length_scale: float
    signal_variance: float
    noise_variance: float
    jitter: float              # jitter actually used for the factorization
    L: np.ndarray              # cholesky of K + (noise_variance + jitter) I
    alpha: np.ndarray          # (K + noise I)^-1 y_standardized
    y_mean: float              # target standardization offset
    y_scale: float             # target standardization scale

    @property
    def n_bands(self):
        return self.X.shape[1]

    @property
    def f_best(self):
        return float(self.y.min())


def gp_fit(masks_seq, values, length_scale=1.0, signal_variance=1.0,
           noise_variance=1e-4, standardize=True, jitter=1e-8, max_jitter=1e-4):
    """Fit the GP to (mask, value) observations.

    Targets are standardized to zero mean / unit scale (scale forced to 1
    when their spread is < 1e-8, e.g. a single observation). The Cholesky
    jitter escalates by x10 up to max_jitter before giving up.
    """
    X = np.stack([as_band_mask(m) for m in masks_seq]).astype(np.int8)
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1 or y.size != X.shape[0]:
        raise ValueError(f"got {X.shape[0]} masks but {y.size} values")
    if y.size < 1:
        raise ValueError("at least one observation required")
    if not np.all(np.isfinite(y)):
        raise ValueError("observation values must be finite")
    if standardize:
        y_mean = float(y.mean())
        spread = float(y.std())
        y_scale = spread if spread >= 1e-8 else 1.0
    else:
        y_mean, y_scale = 0.0, 1.0
    y_std = (y - y_mean) / y_scale

    K = kernel_matrix(X, X, length_scale, signal_variance)
    n = X.shape[0]
    j = jitter
    while True:
        try:
            L = np.linalg.cholesky(K + (noise_variance + j) * np.eye(n))
            break
        except np.linalg.LinAlgError:
            j *= 10.0
            if j > max_jitter:
                raise CholeskyError(
                    f"kernel matrix not positive definite with jitter up to {max_jitter:g}"
                ) from None
    alpha = solve_triangular(L.T, solve_triangular(L, y_std, lower=True), lower=False)
    return GPModel(X=X, y=y, length_scale=length_scale,
                   signal_variance=signal_variance, noise_variance=noise_variance,
                   jitter=j, L=L, alpha=alpha, y_mean=y_mean, y_scale=y_scale)


def gp_posterior_batch(model, query_masks):
    """Posterior (mean, variance) arrays at a (m, D) stack of query masks.

    mean = k*^T (K + noise I)^-1 y ; var = k(q,q) - k*^T (K + noise I)^-1 k*,
    both mapped back to the raw target scale. Variance is clamped at 0 to
    absorb ~1e-10 negative numerical dips.
    """
    Q = np.atleast_2d(np.asarray(query_masks, dtype=np.int8))
    k_star = kernel_matrix(model.X, Q, model.length_scale, model.signal_variance)
    mu_std = k_star.T @ model.alpha
    v = solve_triangular(model.L, k_star, lower=True)
    var_std = model.signal_variance - np.einsum("ij,ij->j", v, v)
    var_std = np.maximum(var_std, 0.0)
    mu = model.y_mean + model.y_scale * mu_std
    var = (model.y_scale ** 2) * var_std
    return mu, var


def gp_posterior(model, query):
    """Posterior (mean, variance) at a single query mask."""
    mask = as_band_mask(query, n_bands=model.n_bands)
    mu, var = gp_posterior_batch(model, mask[None, :])
    return float(mu[0]), float(var[0])
