"""Training objectives for disentangled emotional conversion.

Losses accept numpy arrays or torch tensors and return scalar torch tensors,
so the same functions serve hand-checked unit fixtures and the differentiable
training graph.  Classifier-facing losses take row-stochastic posteriors;
cross entropy uses the natural log with probabilities clamped at 1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import TYPE_CHECKING

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ValidationError

if TYPE_CHECKING:  # circular at runtime: model imports nothing from here
    from .model import DecoderOutput, EmotionEmbedding, ModelState

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Scalar weights applied in the weighted total."""

    recon: float = 1.0
    stop: float = 1.0
    consist: float = 1.0
    classifier: float = 1.0
    adversarial: float = 0.02
    emotion: float = 1.0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value < 0:
                raise ValidationError(f"weight {f.name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term values and their weighted sum, as reported per step."""

    recon: float
    stop: float
    consist: float
    classifier: float
    adversarial: float
    emotion: float
    weighted_total: float


def _as_tensor(x: np.ndarray | torch.Tensor, name: str, ndim: int) -> torch.Tensor:
    t = x if isinstance(x, torch.Tensor) else torch.as_tensor(np.asarray(x, dtype=np.float32))
    if t.ndim != ndim:
        raise ValidationError(f"{name} must have {ndim} dimension(s), got shape {tuple(t.shape)}")
    if t.numel() == 0:
        raise ValidationError(f"{name} must be non-empty")
    return t.float() if not t.is_floating_point() else t


def _check_label(label: int, n_labels: int) -> int:
    label = int(label)
    if not (0 <= label < n_labels):
        raise ValidationError(f"label {label} out of range for {n_labels} classes")
    return label


def _check_posterior(posterior: np.ndarray | torch.Tensor) -> torch.Tensor:
    t = _as_tensor(posterior, "posterior", 2)
    with torch.no_grad():
        if bool((t < -1e-7).any()):
            raise ValidationError("posterior entries must be non-negative")
        rows = t.sum(dim=-1)
        if bool(((rows - 1.0).abs() > 1e-5).any()):
            raise ValidationError("posterior rows must each sum to 1 within 1e-5")
    return t


def classifier_loss(posterior: np.ndarray | torch.Tensor, label: int) -> torch.Tensor:
    """Cross-entropy of the utterance label against every position's posterior
    row, averaged over positions."""
    t = _check_posterior(posterior)
    label = _check_label(label, t.shape[1])
    return -torch.log(t[:, label].clamp(min=PROB_FLOOR)).mean()


def adversarial_uniform_loss(posterior: np.ndarray | torch.Tensor) -> torch.Tensor:
    """Squared distance from each posterior row to the uniform vector,
    averaged over positions.

    Minimised by rows that reveal nothing about the label; the maximum over
    the simplex is (R - 1) / R at any one-hot row.
    """
    t = _check_posterior(posterior)
    uniform = 1.0 / t.shape[1]
    return ((t - uniform) ** 2).sum(dim=-1).mean()


def emotion_supervision_loss(
    embedding: "EmotionEmbedding | np.ndarray | torch.Tensor",
    label: int,
    head: "ModelState | np.ndarray | torch.Tensor",
) -> torch.Tensor:
    """Cross-entropy of the utterance label against softmax(V h), where V is
    the bias-free label projection.

    ``head`` may be the projection matrix itself or a model state holding it.
    """
    vec = getattr(embedding, "vector", embedding)
    h = _as_tensor(vec, "embedding", 1)
    matrix = head.arrays["style_head.weight"] if hasattr(head, "arrays") else head
    v = _as_tensor(matrix, "head", 2)
    if v.shape[1] != h.shape[0]:
        raise ValidationError(f"head width {v.shape[1]} != embedding width {h.shape[0]}")
    label = _check_label(label, v.shape[0])
    posterior = torch.softmax(v.to(h.dtype) @ h, dim=-1)
    return -torch.log(posterior[label].clamp(min=PROB_FLOOR))


def recon_loss(pred: np.ndarray | torch.Tensor, target: np.ndarray | torch.Tensor) -> torch.Tensor:
    """Mean absolute error over all entries of two equal-shape mel blocks."""
    p = _as_tensor(pred, "pred", 2)
    t = _as_tensor(target, "target", 2)
    if p.shape != t.shape:
        raise ValidationError(f"pred shape {tuple(p.shape)} != target shape {tuple(t.shape)}")
    return (p - t).abs().mean()


def stop_loss(
    logits: np.ndarray | torch.Tensor,
    targets: np.ndarray | torch.Tensor,
    pos_weight: float = 1.0,
) -> torch.Tensor:
    """Binary cross-entropy of the stop head's logits over decoder steps.

    ``pos_weight`` scales the single stop step against the many continue
    steps; 1.0 is the plain mean.
    """
    lg = _as_tensor(logits, "logits", 1)
    tg = _as_tensor(targets, "targets", 1)
    if lg.shape != tg.shape:
        raise ValidationError(f"logits shape {tuple(lg.shape)} != targets shape {tuple(tg.shape)}")
    if bool(((tg != 0.0) & (tg != 1.0)).any()):
        raise ValidationError("stop targets must be 0 or 1")
    if pos_weight <= 0:
        raise ValidationError(f"pos_weight must be positive, got {pos_weight}")
    return F.binary_cross_entropy_with_logits(lg, tg, pos_weight=lg.new_tensor(pos_weight))


def _stop_probs_loss(probs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    # float64 so the clamp at 1 - 1e-12 survives (it rounds to 1.0 in float32)
    p = probs.to(torch.float64).clamp(min=PROB_FLOOR, max=1.0 - PROB_FLOOR)
    t = targets.to(torch.float64)
    value = -(t * torch.log(p) + (1.0 - t) * torch.log1p(-p)).mean()
    return value.to(probs.dtype)


def reconstruction_loss(
    predicted: "DecoderOutput",
    target: np.ndarray | torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Frame reconstruction and stop losses of a teacher-forced decode.

    The decoder emits whole frame groups, so up to reduction_factor - 1
    trailing frames are padding and excluded; the stop target is 1 at the
    final step and 0 elsewhere.
    """
    pred = _as_tensor(predicted.mel, "predicted mel", 2)
    probs = _as_tensor(predicted.stop_probs, "stop_probs", 1)
    tgt = _as_tensor(target, "target", 2)
    steps = probs.shape[0]
    if pred.shape[0] % steps != 0:
        raise ValidationError(
            f"predicted frames {pred.shape[0]} not a whole number of groups over {steps} steps"
        )
    r = pred.shape[0] // steps
    frames = tgt.shape[0]
    if not (steps - 1) * r < frames <= steps * r:
        raise ValidationError(
            f"target of {frames} frames does not teacher-force {steps} steps of {r} frames"
        )
    stop_targets = torch.zeros(steps, dtype=probs.dtype)
    stop_targets[-1] = 1.0
    return recon_loss(pred[:frames], tgt), _stop_probs_loss(probs, stop_targets)


def soft_alignment(
    text_seq: np.ndarray | torch.Tensor,
    audio_seq: np.ndarray | torch.Tensor,
    detach: bool = True,
) -> torch.Tensor:
    """Similarity-based soft alignment of text positions onto audio positions.

    Rows are softmax over the audio axis of scaled dot products, so each text
    position selects a convex combination of audio positions.  Detached by
    default: the alignment routes the consistency loss without itself being
    an optimisation target.
    """
    t = _as_tensor(text_seq, "text_seq", 2)
    a = _as_tensor(audio_seq, "audio_seq", 2)
    if t.shape[1] != a.shape[1]:
        raise ValidationError(f"embedding widths differ: {t.shape[1]} != {a.shape[1]}")
    scores = (t @ a.T) / float(np.sqrt(t.shape[1]))
    weights = torch.softmax(scores, dim=-1)
    return weights.detach() if detach else weights


def consistency_loss(
    text_seq: np.ndarray | torch.Tensor,
    audio_seq: np.ndarray | torch.Tensor,
    alignment: np.ndarray | torch.Tensor,
) -> torch.Tensor:
    """Mean squared error between text vectors and aligned audio vectors.

    ``alignment`` has one row per text position, each a distribution over
    audio positions.
    """
    t = _as_tensor(text_seq, "text_seq", 2)
    a = _as_tensor(audio_seq, "audio_seq", 2)
    w = _as_tensor(alignment, "alignment", 2)
    if t.shape[1] != a.shape[1]:
        raise ValidationError(f"embedding widths differ: {t.shape[1]} != {a.shape[1]}")
    if w.shape != (t.shape[0], a.shape[0]):
        raise ValidationError(
            f"alignment must have shape ({t.shape[0]}, {a.shape[0]}), got {tuple(w.shape)}"
        )
    rows = w.detach().sum(dim=-1)
    if not bool(torch.all((rows - 1.0).abs() < 1e-4)):
        raise ValidationError("alignment rows must each sum to 1")
    return ((t - w @ a) ** 2).mean()


def total_loss(
    *,
    recon: float,
    stop: float,
    consist: float,
    classifier: float,
    adversarial: float,
    emotion: float,
    weights: LossWeights = LossWeights(),
    stage: int,
) -> LossBreakdown:
    """Combine per-term values into the reported breakdown.

    Both stages optimise the same six terms; only the label inventory behind
    the classifier and style projection differs.
    """
    if stage not in (1, 2):
        raise ValidationError(f"stage must be 1 or 2, got {stage}")
    values = dict(
        recon=float(recon),
        stop=float(stop),
        consist=float(consist),
        classifier=float(classifier),
        adversarial=float(adversarial),
        emotion=float(emotion),
    )
    for name, value in values.items():
        if not np.isfinite(value) or value < 0:
            raise ValidationError(f"loss term {name} must be finite and >= 0, got {value}")
    total = sum(values[name] * getattr(weights, name) for name in values)
    return LossBreakdown(weighted_total=float(total), **values)
