"""Shared test oracles: central finite differences for gradient checks."""

import numpy as np

from shortsent.tensor import Tape, backward


def numeric_gradient(forward, tensor, step=1e-5):
    """Central-difference gradient of `forward()` w.r.t. one tensor's values."""
    grad = np.zeros_like(tensor.values)
    flat_v = tensor.values.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_v.size):
        orig = flat_v[i]
        flat_v[i] = orig + step
        fp = forward()
        flat_v[i] = orig - step
        fm = forward()
        flat_v[i] = orig
        flat_g[i] = (fp - fm) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    rel = np.abs(analytic - numeric) / denom
    return float(rel.max()) if rel.size else 0.0


def check_gradients(build, params, step=1e-5, tol=1e-4):
    """Compare tape gradients of build()'s scalar output against central
    differences for every parameter; build() must be deterministic."""
    for p in params:
        p.zero_grad()
    with Tape():
        loss = build()
        backward(loss)
    analytic = [p.grad.copy() for p in params]

    def forward():
        return float(build().values)

    worst = 0.0
    for p, a in zip(params, analytic):
        n = numeric_gradient(forward, p, step)
        worst = max(worst, max_relative_error(a, n))
    assert worst < tol, f"max relative gradient error {worst:.3e} >= {tol}"
    return worst
