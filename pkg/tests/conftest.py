import numpy as np
import pytest


def randomize_biases(nets, rng, scale=0.1):
    """Move zero-initialised biases off the relu kink so central differences
    stay valid (the loss is non-differentiable exactly at zero pre-activations,
    which zero biases can hit when a whole input column is dead)."""
    for net in nets:
        for layer in net.layers:
            layer.bias[...] = (rng.normal(size=layer.bias.shape) * scale).astype(
                layer.bias.dtype
            )


def finite_diff_check(params, grads, loss_fn, rng, per_param=3, h=1e-6, tol=1e-4):
    """Compare analytic grads against central differences on sampled entries.

    Returns the worst relative error seen; asserts it stays under tol."""
    worst = 0.0
    for pi, p in enumerate(params):
        flat = p.reshape(-1)
        picks = rng.choice(p.size, size=min(per_param, p.size), replace=False)
        for k in picks:
            old = flat[k]
            flat[k] = old + h
            f1 = loss_fn()
            flat[k] = old - h
            f2 = loss_fn()
            flat[k] = old
            fd = (f1 - f2) / (2.0 * h)
            an = float(grads[pi].reshape(-1)[k])
            denom = max(1e-8, abs(fd) + abs(an))
            rel = abs(fd - an) / denom
            worst = max(worst, rel)
    assert worst < tol, f"finite-difference mismatch: {worst}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(0)
