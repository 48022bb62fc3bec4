"""Shared test oracles.

The finite-difference and naive-loop implementations here are deliberately
independent of the library's vectorized code paths: plain Python loops, one
perturbed evaluation per coordinate.
"""

import numpy as np

from codistill.nn import Parameters, forward


def rel_err(a, b, floor=1e-6):
    """Elementwise relative error with a floor for near-zero denominators."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / denom


def fd_logit_grad(loss_fn, logits, h=1e-5):
    """Central finite differences of a scalar loss with respect to the logits."""
    logits = np.asarray(logits, dtype=float)
    g = np.zeros_like(logits)
    for idx in np.ndindex(*logits.shape):
        zp = logits.copy()
        zp[idx] += h
        zm = logits.copy()
        zm[idx] -= h
        g[idx] = (loss_fn(zp) - loss_fn(zm)) / (2 * h)
    return g


def fd_param_grad(params, batch, loss_of_logits, h=1e-5):
    """Central finite differences of loss_of_logits(forward(...)) per parameter."""
    base = params.values
    g = np.zeros_like(base)
    for j in range(base.size):
        vp = base.copy()
        vp[j] += h
        vm = base.copy()
        vm[j] -= h
        lp = loss_of_logits(forward(Parameters(params.arch, vp), batch))
        lm = loss_of_logits(forward(Parameters(params.arch, vm), batch))
        g[j] = (lp - lm) / (2 * h)
    return g


def naive_mlp_forward(params, x):
    """Loop-based re-implementation of the classifier forward pass."""
    arch = params.arch
    dims = (arch.input_dim,) + arch.hidden_dims + (arch.output_dim,)
    weights, biases = [], []
    off = 0
    for i in range(len(dims) - 1):
        w = params.values[off:off + dims[i] * dims[i + 1]].reshape(dims[i], dims[i + 1])
        off += dims[i] * dims[i + 1]
        b = params.values[off:off + dims[i + 1]]
        off += dims[i + 1]
        weights.append(w)
        biases.append(b)
    out = np.zeros((x.shape[0], arch.output_dim))
    for r in range(x.shape[0]):
        a = x[r]
        for layer, (w, b) in enumerate(zip(weights, biases)):
            z = np.zeros(w.shape[1])
            for j in range(w.shape[1]):
                s = 0.0
                for i in range(w.shape[0]):
                    s += a[i] * w[i, j]
                z[j] = s + b[j]
            a = np.maximum(z, 0.0) if layer < len(weights) - 1 else z
        out[r] = a
    return out
