"""Numerical verification of backpropagated gradients.

Analytic gradients are compared against central finite differences
computed from fresh forward passes. This is meaningful only in float64:
the check perturbs parameters by ~1e-5 and float32 rounding would drown
the signal, so callers are expected to build the model being checked
with 64-bit parameters and inputs.
"""

import numpy as np


def relative_error(analytic, numeric, floor=1e-8):
    """|a - n| / max(|a|, |n|, floor), elementwise maximum over an array."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def gradient_check(build_loss, params, eps=1e-5, max_entries=None, rng=None):
    """Compare backprop gradients with central differences.

    Args:
        build_loss: zero-argument callable running a full forward pass and
            returning the scalar loss Tensor. It is called repeatedly, so
            any randomness inside (dropout, sampling) must be frozen.
        params: tensors to check, float64, requires_grad=True.
        eps: central-difference step.
        max_entries: if set, check at most this many randomly chosen
            entries per parameter instead of every entry.
        rng: numpy Generator used when sampling entries.

    Returns:
        dict mapping parameter name to its maximum relative error.
    """
    params = list(params)
    for p in params:
        if p.data.dtype != np.float64:
            raise ValueError(
                f"gradient_check needs float64 parameters, {p.name} is "
                f"{p.data.dtype}"
            )
        p.grad = None

    loss = build_loss()
    loss.backward()
    analytic = {id(p): np.array(p.grad, copy=True) for p in params}

    rng = rng or np.random.default_rng()
    report = {}
    for p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        if max_entries is not None and n > max_entries:
            indices = rng.choice(n, size=max_entries, replace=False)
        else:
            indices = np.arange(n)

        worst = 0.0
        a_flat = analytic[id(p)].reshape(-1)
        for i in indices:
            saved = flat[i]
            flat[i] = saved + eps
            up = float(build_loss().data)
            flat[i] = saved - eps
            down = float(build_loss().data)
            flat[i] = saved
            numeric = (up - down) / (2.0 * eps)
            worst = max(worst, relative_error(a_flat[i], numeric))
        report[p.name or f"param{len(report)}"] = worst
    return report
