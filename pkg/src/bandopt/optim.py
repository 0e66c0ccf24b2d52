"""Adam optimizer with bias correction, operating on named parameter dicts."""

import numpy as np


class NonFiniteGradientError(RuntimeError):
    """Raised when a gradient contains NaN or Inf; training must abort."""


class AdamState:
    """Per-parameter first/second moment accumulators and the step counter.

    Update rule (bias-corrected):
        m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
        m_hat = m / (1 - b1^t)      v_hat = v / (1 - b2^t)
        p <- p - lr * m_hat / (sqrt(v_hat) + eps)
    """

    def __init__(self, params, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}


def adam_step(state, params, grads):
    """One in-place Adam update. Returns (params, state) for chaining.

    Raises NonFiniteGradientError if any gradient entry is NaN/Inf, naming
    the offending parameter.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(
                f"non-finite gradient for parameter '{name}' at step {state.t}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
