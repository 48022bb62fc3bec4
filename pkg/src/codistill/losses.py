"""Training losses.

Every loss returns ``(loss, grad)``: the scalar mean over the batch and the
gradient of that mean with respect to the logits, shaped like the logits.
Gradients therefore already carry the 1/B factor and the network backward
pass consumes them unchanged.

The hard-label loss is always cross entropy; the auxiliary term is either a
distillation loss against a teacher signal (soft-target cross entropy, mean
squared logit error, or KL divergence) or a label-smoothing term against a
fixed target distribution. Smoothing and distillation are mutually exclusive
within one run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DISTILL_KINDS = ("soft_cross_entropy", "logit_mse", "kl_divergence", "none")
SMOOTHING_KINDS = ("uniform", "unigram")

# probabilities are clamped here before any explicit log
_LOG_FLOOR = 1e-12


def _softmax_parts(logits: np.ndarray):
    """(probabilities, log-probabilities), both via max subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    se = e.sum(axis=1, keepdims=True)
    return e / se, z - np.log(se)


def _check_teacher_probs(t: np.ndarray, logits: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.shape != logits.shape:
        raise ValueError(f"teacher shape {t.shape} does not match logits {logits.shape}")
    if t.min() < 0.0 or np.abs(t.sum(axis=1) - 1.0).max() > 1e-6:
        raise ValueError("teacher rows are not probability vectors (normalized within 1e-6)")
    return t


def hard_ce(labels: np.ndarray, logits: np.ndarray):
    """Mean cross entropy against integer labels.

    loss = mean_b -log softmax(z_b)[y_b], grad = (softmax(z) - onehot(y)) / B.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    B, K = logits.shape
    if labels.shape != (B,):
        raise ValueError(f"labels shape {labels.shape} does not match batch size {B}")
    if labels.min() < 0 or labels.max() >= K:
        raise ValueError("label out of range")
    p, log_p = _softmax_parts(logits)
    rows = np.arange(B)
    loss = float(-log_p[rows, labels].mean())
    grad = p.copy()
    grad[rows, labels] -= 1.0
    grad /= B
    return loss, grad


def soft_ce(teacher_probs: np.ndarray, logits: np.ndarray):
    """Cross entropy treating the teacher distribution as soft targets.

    loss = mean_b -sum_k t_k log softmax(z)_k, grad = (softmax(z) - t) / B.
    With a one-hot teacher this coincides exactly with hard_ce.
    """
    logits = np.asarray(logits, dtype=np.float64)
    t = _check_teacher_probs(teacher_probs, logits)
    p, log_p = _softmax_parts(logits)
    loss = float(-(t * log_p).sum(axis=1).mean())
    grad = (p - t) / logits.shape[0]
    return loss, grad


def logit_mse(teacher_logits: np.ndarray, logits: np.ndarray):
    """Mean over batch and classes of the squared logit difference."""
    logits = np.asarray(logits, dtype=np.float64)
    t = np.asarray(teacher_logits, dtype=np.float64)
    if t.shape != logits.shape:
        raise ValueError(f"teacher shape {t.shape} does not match logits {logits.shape}")
    d = logits - t
    loss = float((d * d).mean())
    grad = 2.0 * d / d.size
    return loss, grad


def kl_div(teacher_probs: np.ndarray, logits: np.ndarray):
    """KL(teacher || softmax(logits)), with 0 log 0 = 0.

    The gradient is identical to soft_ce; the loss differs from it by the
    teacher entropy. Rounding can push the exact-zero case a hair negative,
    so the loss is clamped at 0.
    """
    logits = np.asarray(logits, dtype=np.float64)
    t = _check_teacher_probs(teacher_probs, logits)
    p, log_p = _softmax_parts(logits)
    t_log_t = np.where(t > 0.0, t * np.log(np.maximum(t, _LOG_FLOOR)), 0.0)
    loss = max(float((t_log_t - t * log_p).sum(axis=1).mean()), 0.0)
    grad = (p - t) / logits.shape[0]
    return loss, grad


@dataclass(frozen=True)
class SmoothingKind:
    """Fixed target distribution for the label-smoothing baselines."""

    kind: str
    unigram_probs: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in SMOOTHING_KINDS:
            raise ValueError(f"unknown smoothing kind {self.kind!r}")
        if self.kind == "unigram":
            if self.unigram_probs is None:
                raise ValueError("unigram smoothing requires unigram_probs")
            probs = np.asarray(self.unigram_probs, dtype=np.float64)
            if probs.ndim != 1 or probs.min() < 0.0 or abs(probs.sum() - 1.0) > 1e-9:
                raise ValueError("unigram_probs must be a probability vector (sum 1 within 1e-9)")
            object.__setattr__(self, "unigram_probs", probs)


def smoothing_target(kind: SmoothingKind, n_classes: int) -> np.ndarray:
    """Target distribution a smoothing baseline matches instead of a teacher."""
    if kind.kind == "uniform":
        return np.full(n_classes, 1.0 / n_classes)
    if len(kind.unigram_probs) != n_classes:
        raise ValueError(f"unigram_probs has {len(kind.unigram_probs)} entries, expected {n_classes}")
    return kind.unigram_probs.copy()


@dataclass(frozen=True)
class CombinedLossSpec:
    """Hard-label loss plus one optional auxiliary term.

    ``distill_weight`` scales the distillation term; the smoothing baselines
    carry their own hand-tuned weight. A spec may enable at most one of the
    two (baseline runs vs codistillation runs).
    """

    distill: str = "none"
    distill_weight: float = 1.0
    smoothing: SmoothingKind | None = None
    smoothing_weight: float = 0.1

    def __post_init__(self):
        if self.distill not in DISTILL_KINDS:
            raise ValueError(f"unknown distillation loss {self.distill!r}")
        if self.distill_weight < 0.0:
            raise ValueError("distill_weight must be nonnegative")
        if self.smoothing is not None and self.distill != "none":
            raise ValueError("smoothing and distillation are mutually exclusive in one run")


_DISTILL_FNS = {
    "soft_cross_entropy": soft_ce,
    "kl_divergence": kl_div,
    "logit_mse": logit_mse,
}


def combined_loss(spec: CombinedLossSpec, labels: np.ndarray, logits: np.ndarray,
                  teacher_signal: np.ndarray | None = None):
    """Full training objective for one batch.

    ``teacher_signal`` must be supplied exactly when ``spec.distill`` is
    active: mean teacher probabilities for soft_cross_entropy / kl_divergence,
    mean teacher logits for logit_mse. With weight 0 (or no auxiliary term at
    all) the result is bit-identical to hard_ce.
    """
    loss, grad = hard_ce(labels, logits)
    if spec.distill != "none":
        if teacher_signal is None:
            raise ValueError("missing teacher signal for distillation loss")
        if spec.distill_weight == 0.0:
            return loss, grad
        dloss, dgrad = _DISTILL_FNS[spec.distill](teacher_signal, logits)
        return loss + spec.distill_weight * dloss, grad + spec.distill_weight * dgrad
    if teacher_signal is not None:
        raise ValueError("teacher signal supplied but distillation is disabled")
    if spec.smoothing is not None and spec.smoothing_weight != 0.0:
        target = smoothing_target(spec.smoothing, logits.shape[1])
        t = np.broadcast_to(target, logits.shape)
        sloss, sgrad = soft_ce(t, logits)
        return loss + spec.smoothing_weight * sloss, grad + spec.smoothing_weight * sgrad
    return loss, grad
