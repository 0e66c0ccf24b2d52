import numpy as np
import pytest
from threadpoolctl import threadpool_limits

# BLAS pools hurt the skinny matmuls this suite runs; one thread is faster.
_BLAS_LIMIT = threadpool_limits(limits=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def balanced_probe_accuracy(features, labels, seed=0, n_per_class=1500,
                            steps=300, lr=0.5):
    """Logistic-regression probe accuracy on an equal-class pixel sample.

    features: (n_pixels, n_features); labels: (n_pixels,) in {0, 1}. The
    sample is class-balanced, so plain accuracy equals balanced accuracy.
    """
    labels = labels.astype(np.int64)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    k = min(n_per_class, pos.size, neg.size)
    if k == 0:
        raise ValueError("need pixels of both classes")
    sample_rng = np.random.default_rng(seed)
    idx = np.concatenate([sample_rng.choice(pos, k, replace=False),
                          sample_rng.choice(neg, k, replace=False)])
    x = np.asarray(features, dtype=np.float64)[idx]
    y = labels[idx].astype(np.float64)
    x = (x - x.mean(axis=0)) / np.maximum(x.std(axis=0), 1e-9)
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(steps):
        p = 1.0 / (1.0 + np.exp(-(x @ w + b)))
        g = p - y
        w -= lr * (x.T @ g) / y.size
        b -= lr * g.mean()
    pred = (x @ w + b) > 0
    return float((pred == (y > 0.5)).mean())
