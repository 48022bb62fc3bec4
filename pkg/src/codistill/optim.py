"""Per-replica optimizers: plain SGD, Adam, Adagrad.

``step`` is pure: it returns fresh arrays and never mutates its inputs, so
identical inputs give bit-identical outputs. Optimizer state stays with its
worker group; checkpoints exchanged between groups carry parameters only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMIZER_KINDS = ("sgd", "adam", "adagrad")


class NonFiniteGradientError(ValueError):
    """Raised instead of silently producing NaN parameters."""


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    adagrad_eps: float = 1e-10

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")


@dataclass(frozen=True)
class OptimizerState:
    """Kind-specific accumulators, laid out like the flat parameter vector."""

    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    acc: np.ndarray | None = None


def init_state(config: OptimizerConfig, n_params: int) -> OptimizerState:
    if config.kind == "adam":
        return OptimizerState(t=0, m=np.zeros(n_params), v=np.zeros(n_params))
    if config.kind == "adagrad":
        return OptimizerState(acc=np.zeros(n_params))
    return OptimizerState()


def step(config: OptimizerConfig, state: OptimizerState, values: np.ndarray,
         grad: np.ndarray):
    """Apply one update; returns (new_values, new_state)."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != values.shape:
        raise ValueError(f"gradient shape {g.shape} does not match parameters {values.shape}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradientError("gradient contains NaN or Inf")
    lr = config.learning_rate
    if config.kind == "sgd":
        return values - lr * g, state
    if config.kind == "adam":
        t = state.t + 1
        m = config.beta1 * state.m + (1.0 - config.beta1) * g
        v = config.beta2 * state.v + (1.0 - config.beta2) * (g * g)
        m_hat = m / (1.0 - config.beta1 ** t)
        v_hat = v / (1.0 - config.beta2 ** t)
        return values - lr * m_hat / (np.sqrt(v_hat) + config.eps), OptimizerState(t=t, m=m, v=v)
    acc = state.acc + g * g
    return values - lr * g / (np.sqrt(acc) + config.adagrad_eps), OptimizerState(acc=acc)
