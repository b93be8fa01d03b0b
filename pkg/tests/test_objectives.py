"""Loss definitions against hand-computed values and simplex bounds."""

from __future__ import annotations

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from evc.errors import ValidationError
from evc.model import DecoderOutput
from evc.objectives import (
    LossBreakdown,
    LossWeights,
    adversarial_uniform_loss,
    classifier_loss,
    consistency_loss,
    emotion_supervision_loss,
    recon_loss,
    reconstruction_loss,
    soft_alignment,
    stop_loss,
    total_loss,
)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return (e / e.sum(axis=-1, keepdims=True)).astype(np.float32)


def test_classifier_loss_uniform_posterior_is_log_r() -> None:
    # -log(1/4) = ln 4 = 1.3862944
    posterior = np.full((3, 4), 0.25, dtype=np.float32)
    assert float(classifier_loss(posterior, 2)) == pytest.approx(1.3862944, abs=1e-6)


def test_classifier_loss_peaked_posteriors() -> None:
    # softmax([10,0,0,0]) puts 1/(1 + 3e^-10) on class 0: CE = ln(1 + 3e^-10) = 1.36214e-4
    right = softmax_rows(np.array([[10.0, 0.0, 0.0, 0.0]]))
    assert float(classifier_loss(right, 0)) == pytest.approx(1.362e-4, rel=1e-3)
    # same rows but the truth is elsewhere: CE = 10 + ln(1 + 3e^-10)
    wrong = softmax_rows(np.array([[0.0, 10.0, 0.0, 0.0]]))
    assert float(classifier_loss(wrong, 0)) == pytest.approx(10.000136, abs=1e-4)


def test_classifier_loss_averages_positions() -> None:
    posterior = softmax_rows(np.array([[10.0, 0.0, 0.0, 0.0], [0.0, 10.0, 0.0, 0.0]]))
    # positions contribute 1.362e-4 and 10.000136; mean = 5.000136
    assert float(classifier_loss(posterior, 0)) == pytest.approx(5.000136, abs=1e-4)
    with pytest.raises(ValidationError):
        classifier_loss(posterior, 4)
    with pytest.raises(ValidationError):
        classifier_loss(np.zeros((0, 4), dtype=np.float32), 0)


def test_posterior_rows_must_be_stochastic() -> None:
    with pytest.raises(ValidationError):
        classifier_loss(np.full((2, 4), 0.3, dtype=np.float32), 0)
    with pytest.raises(ValidationError):
        adversarial_uniform_loss(np.array([[1.5, -0.5]], dtype=np.float32))


def test_adversarial_uniform_loss_oracles() -> None:
    # exactly uniform posterior: distance 0
    uniform = np.full((5, 4), 0.25, dtype=np.float32)
    assert float(adversarial_uniform_loss(uniform)) == pytest.approx(0.0, abs=1e-9)
    # one-hot posterior: (3/4)^2 + 3*(1/4)^2 = 0.75
    one_hot = np.array([[1.0, 0.0, 0.0, 0.0]], dtype=np.float32)
    assert float(adversarial_uniform_loss(one_hot)) == pytest.approx(0.75, abs=1e-6)
    # mean over a uniform row and a one-hot row: 0.375
    both = np.array([[0.25, 0.25, 0.25, 0.25], [1.0, 0.0, 0.0, 0.0]], dtype=np.float32)
    assert float(adversarial_uniform_loss(both)) == pytest.approx(0.375, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(
    n_labels=st.integers(min_value=2, max_value=8),
    n_positions=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_adversarial_uniform_loss_is_bounded_on_the_simplex(
    n_labels: int, n_positions: int, seed: int
) -> None:
    rng = np.random.default_rng(seed)
    posterior = softmax_rows(10.0 * rng.standard_normal((n_positions, n_labels)))
    value = float(adversarial_uniform_loss(posterior))
    assert 0.0 <= value <= (n_labels - 1) / n_labels + 1e-6


def test_adversarial_maximum_is_attained_at_one_hot_rows() -> None:
    for n_labels in range(2, 9):
        vertices = np.eye(n_labels, dtype=np.float32)
        value = float(adversarial_uniform_loss(vertices))
        assert value == pytest.approx((n_labels - 1) / n_labels, abs=1e-6)


def test_emotion_supervision_loss_matches_classifier_arithmetic() -> None:
    head = np.zeros((5, 3), dtype=np.float32)
    h = np.ones(3, dtype=np.float32)
    # zero logits over 5 classes: ln 5
    assert float(emotion_supervision_loss(h, 3, head)) == pytest.approx(np.log(5.0), abs=1e-6)
    # identity head with h = [10,0,0,0]: logits [10,0,0,0], CE = 1.362e-4
    eye = np.eye(4, dtype=np.float32)
    h10 = np.array([10.0, 0.0, 0.0, 0.0], dtype=np.float32)
    assert float(emotion_supervision_loss(h10, 0, eye)) == pytest.approx(1.362e-4, rel=1e-3)
    assert float(emotion_supervision_loss(h10, 1, eye)) == pytest.approx(10.000136, abs=1e-4)
    with pytest.raises(ValidationError):
        emotion_supervision_loss(h10, 4, eye)
    with pytest.raises(ValidationError):
        emotion_supervision_loss(np.ones(3, dtype=np.float32), 0, eye)


def test_recon_loss_is_mean_absolute_error() -> None:
    pred = np.array([[0.0, 2.0]], dtype=np.float32)
    target = np.array([[1.0, 0.0]], dtype=np.float32)
    assert float(recon_loss(pred, target)) == pytest.approx(1.5, abs=1e-7)
    with pytest.raises(ValidationError):
        recon_loss(pred, target.T)


def test_stop_loss_oracles() -> None:
    # logit 0 costs ln 2 whatever the target
    zeros = np.zeros(4, dtype=np.float32)
    targets = np.array([0.0, 1.0, 0.0, 1.0], dtype=np.float32)
    assert float(stop_loss(zeros, targets)) == pytest.approx(np.log(2.0), abs=1e-6)
    # confident continue + uncertain stop: (softplus(8) - 8 + ln 2) / 2 = 0.346741
    logits = np.array([8.0, 0.0], dtype=np.float32)
    targets = np.array([1.0, 0.0], dtype=np.float32)
    assert float(stop_loss(logits, targets)) == pytest.approx(0.346741, abs=1e-5)
    with pytest.raises(ValidationError):
        stop_loss(logits, np.array([0.5, 0.0], dtype=np.float32))
    with pytest.raises(ValidationError):
        stop_loss(logits, np.array([0.0], dtype=np.float32))


def make_decode(mel: np.ndarray, stop_probs: np.ndarray) -> DecoderOutput:
    steps = stop_probs.shape[0]
    return DecoderOutput(
        mel=mel,
        stop_probs=stop_probs,
        attention=np.full((steps, 3), 1.0 / 3.0, dtype=np.float32),
    )


def test_reconstruction_loss_identity_and_offset() -> None:
    rng = np.random.default_rng(7)
    target = rng.standard_normal((5, 2)).astype(np.float32)
    padded = np.concatenate([target, target[-1:]], axis=0)  # 6 = 3 groups of 2
    stop_probs = np.array([0.0, 0.0, 1.0], dtype=np.float32)
    l_recon, l_stop = reconstruction_loss(make_decode(padded, stop_probs), target)
    assert float(l_recon) == pytest.approx(0.0, abs=1e-7)
    assert float(l_stop) == pytest.approx(0.0, abs=1e-6)

    l_recon, _ = reconstruction_loss(make_decode(padded + 1.0, stop_probs), target)
    assert float(l_recon) == pytest.approx(1.0, abs=1e-6)


def test_reconstruction_loss_rejects_misaligned_shapes() -> None:
    mel = np.zeros((6, 2), dtype=np.float32)
    stop_probs = np.zeros(3, dtype=np.float32)
    # 3 steps of 2 frames teacher-force targets of 5 or 6 frames only
    with pytest.raises(ValidationError):
        reconstruction_loss(make_decode(mel, stop_probs), np.zeros((4, 2), dtype=np.float32))
    with pytest.raises(ValidationError):
        reconstruction_loss(make_decode(mel, stop_probs), np.zeros((7, 2), dtype=np.float32))
    with pytest.raises(ValidationError):
        reconstruction_loss(make_decode(np.zeros((7, 2), dtype=np.float32), stop_probs), mel)


def test_consistency_loss_hand_value() -> None:
    text = np.array([[1.0], [2.0]], dtype=np.float32)
    audio = np.array([[0.0], [4.0]], dtype=np.float32)
    alignment = np.array([[1.0, 0.0], [0.5, 0.5]], dtype=np.float32)
    # aligned audio = [0, 2]; squared errors (1, 0); mean 0.5
    assert float(consistency_loss(text, audio, alignment)) == pytest.approx(0.5, abs=1e-7)
    with pytest.raises(ValidationError):
        consistency_loss(text, audio, np.array([[0.9, 0.0], [0.5, 0.5]], dtype=np.float32))
    with pytest.raises(ValidationError):
        consistency_loss(text, audio, alignment.T)


def test_consistency_loss_zero_when_aligned_exactly() -> None:
    audio = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    alignment = np.eye(2, dtype=np.float32)
    assert float(consistency_loss(audio, audio, alignment)) == pytest.approx(0.0, abs=1e-9)


def test_consistency_loss_is_quadratic_in_scale() -> None:
    rng = np.random.default_rng(3)
    text = rng.standard_normal((4, 6)).astype(np.float32)
    audio = rng.standard_normal((5, 6)).astype(np.float32)
    alignment = soft_alignment(text, audio).numpy()
    base = float(consistency_loss(text, audio, alignment))
    scaled = float(consistency_loss(2.0 * text, 2.0 * audio, alignment))
    assert scaled == pytest.approx(4.0 * base, rel=1e-5)


def test_soft_alignment_rows_are_distributions() -> None:
    rng = np.random.default_rng(0)
    text = rng.standard_normal((5, 8)).astype(np.float32)
    audio = rng.standard_normal((3, 8)).astype(np.float32)
    align = soft_alignment(text, audio)
    assert align.shape == (5, 3)
    assert align.sum(dim=-1).numpy() == pytest.approx(np.ones(5), abs=1e-5)
    assert not align.requires_grad

    t = torch.tensor(text, requires_grad=True)
    attached = soft_alignment(t, torch.tensor(audio), detach=False)
    assert attached.requires_grad


def test_total_loss_weighted_sum() -> None:
    breakdown = total_loss(
        recon=1.0, stop=2.0, consist=3.0, classifier=4.0, adversarial=5.0, emotion=6.0, stage=2
    )
    assert isinstance(breakdown, LossBreakdown)
    # defaults weight adversarial at 0.02: 1 + 2 + 3 + 4 + 0.1 + 6
    assert breakdown.weighted_total == pytest.approx(16.1, abs=1e-9)
    assert breakdown.recon == 1.0

    heavy = total_loss(
        recon=1.0, stop=2.0, consist=3.0, classifier=4.0, adversarial=5.0, emotion=6.0,
        weights=LossWeights(adversarial=1.0), stage=1,
    )
    assert heavy.weighted_total == pytest.approx(21.0, abs=1e-9)

    with pytest.raises(ValidationError):
        total_loss(recon=np.nan, stop=0, consist=0, classifier=0, adversarial=0, emotion=0, stage=1)
    with pytest.raises(ValidationError):
        total_loss(recon=-1, stop=0, consist=0, classifier=0, adversarial=0, emotion=0, stage=1)
    with pytest.raises(ValidationError):
        total_loss(recon=0, stop=0, consist=0, classifier=0, adversarial=0, emotion=0, stage=3)
    with pytest.raises(ValidationError):
        LossWeights(recon=-1.0)


def test_losses_are_differentiable() -> None:
    logits = torch.randn(3, 4, requires_grad=True)
    posterior = torch.softmax(logits, dim=-1)
    value = classifier_loss(posterior, 1) + adversarial_uniform_loss(posterior)
    value.backward()
    assert logits.grad is not None
    assert bool(torch.isfinite(logits.grad).all())
