"""Network contracts: shapes, determinism, state handling, head re-init."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from evc.errors import ValidationError
from evc.model import (
    DecoderOutput,
    ModelConfig,
    asr_encode,
    classify_linguistic,
    decode,
    downsampled_length,
    emotion_encode,
    emotion_logits,
    load_state,
    new_state,
    reinit_for_stage2,
    save_state,
    text_encode,
)
from support import random_mel, tiny_model_config

CFG = tiny_model_config()
STATE = new_state(CFG, stage=1, seed=0)
RNG = np.random.default_rng(0)


def test_config_validation() -> None:
    with pytest.raises(ValidationError):
        tiny_model_config(n_labels=1)
    with pytest.raises(ValidationError):
        tiny_model_config(d_encoder=7)
    with pytest.raises(ValidationError):
        tiny_model_config(reduction_factor=0)
    with pytest.raises(ValidationError):
        tiny_model_config(stop_threshold=1.5)
    with pytest.raises(ValidationError):
        tiny_model_config(phoneme_vocab=2)


def test_new_state_is_seed_deterministic() -> None:
    a = new_state(CFG, seed=7)
    b = new_state(CFG, seed=7)
    c = new_state(CFG, seed=8)
    assert a.arrays.keys() == b.arrays.keys()
    assert all(np.array_equal(a.arrays[k], b.arrays[k]) for k in a.arrays)
    assert any(not np.array_equal(a.arrays[k], c.arrays[k]) for k in a.arrays)
    assert a.stage == 1
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()


def test_text_encode_shape_and_validation() -> None:
    ids = np.array([3, 4, 5, 1, 6, 2], dtype=np.int64)
    out = text_encode(STATE, ids)
    assert out.vectors.shape == (6, CFG.d_linguistic)
    assert text_encode(STATE, np.array([3])).vectors.shape == (1, CFG.d_linguistic)
    with pytest.raises(ValidationError):
        text_encode(STATE, np.array([], dtype=np.int64))
    with pytest.raises(ValidationError):
        text_encode(STATE, np.array([CFG.phoneme_vocab]))
    with pytest.raises(ValidationError):
        text_encode(STATE, np.array([-1]))


def test_asr_encode_downsamples_by_four() -> None:
    for frames in (1, 2, 3, 4, 5, 17, 40):
        out = asr_encode(STATE, random_mel(RNG, frames, CFG.n_mels))
        expected = math.ceil(frames / 4)
        assert downsampled_length(frames) == expected
        assert out.vectors.shape == (expected, CFG.d_linguistic)
        assert 1 <= expected <= frames
    with pytest.raises(ValidationError):
        asr_encode(STATE, random_mel(RNG, 5, CFG.n_mels + 1))


def test_emotion_encode_is_bounded() -> None:
    out = emotion_encode(STATE, random_mel(RNG, 23, CFG.n_mels))
    assert out.vector.shape == (CFG.d_style,)
    assert np.all(np.abs(out.vector) < 1.0)


def test_emotion_logits_are_exactly_the_projection() -> None:
    style = emotion_encode(STATE, random_mel(RNG, 23, CFG.n_mels))
    logits = emotion_logits(STATE, style)
    assert logits.shape == (CFG.n_labels,)
    manual = STATE.arrays["style_head.weight"] @ style.vector
    assert np.array_equal(logits, manual)


def test_classifier_rows_are_posteriors() -> None:
    seq = text_encode(STATE, np.array([3, 4, 5, 2]))
    post = classify_linguistic(STATE, seq)
    assert post.shape == (4, CFG.n_labels)
    assert np.all(post >= 0.0)
    assert post.sum(axis=1) == pytest.approx(np.ones(4), abs=1e-5)


def test_teacher_decode_matches_target_grouping() -> None:
    seq = text_encode(STATE, np.array([3, 4, 5, 1, 6, 2]))
    style = emotion_encode(STATE, random_mel(RNG, 23, CFG.n_mels))
    for frames in (1, 2, 7, 8, 23):
        target = random_mel(RNG, frames, CFG.n_mels)
        out = decode(STATE, seq, style, teacher=target)
        steps = math.ceil(frames / CFG.reduction_factor)
        assert not out.truncated
        assert out.mel.shape == (steps * CFG.reduction_factor, CFG.n_mels)
        assert out.stop_probs.shape == (steps,)
        assert np.all((out.stop_probs >= 0.0) & (out.stop_probs <= 1.0))
        assert out.attention.shape == (steps, 6)
        assert out.attention.sum(axis=1) == pytest.approx(np.ones(steps), abs=1e-5)
        assert np.all(out.attention >= 0.0)


def test_free_decode_respects_cap_and_grouping() -> None:
    seq = text_encode(STATE, np.array([3, 4, 5, 2]))
    style = emotion_encode(STATE, random_mel(RNG, 23, CFG.n_mels))
    out = decode(STATE, seq, style, max_steps=5)
    assert isinstance(out, DecoderOutput)
    steps = out.stop_probs.shape[0]
    assert 1 <= steps <= 5
    assert out.mel.shape == (steps * CFG.reduction_factor, CFG.n_mels)
    assert out.attention.shape == (steps, 4)
    assert out.attention.sum(axis=1) == pytest.approx(np.ones(steps), abs=1e-5)
    assert np.all((out.stop_probs >= 0.0) & (out.stop_probs <= 1.0))
    if steps < 5:
        assert not out.truncated
        assert out.stop_probs[-1] > CFG.stop_threshold
        assert np.all(out.stop_probs[:-1] <= CFG.stop_threshold)
    else:
        assert out.truncated == (out.stop_probs[-1] <= CFG.stop_threshold)
    with pytest.raises(ValidationError):
        decode(STATE, seq, style, max_steps=0)


def test_free_decode_is_deterministic() -> None:
    seq = text_encode(STATE, np.array([3, 4, 5, 2]))
    style = emotion_encode(STATE, random_mel(RNG, 23, CFG.n_mels))
    a = decode(STATE, seq, style, max_steps=6)
    b = decode(STATE, seq, style, max_steps=6)
    assert np.array_equal(a.mel, b.mel)
    assert np.array_equal(a.attention, b.attention)


def test_reinit_for_stage2_replaces_only_heads() -> None:
    state1 = new_state(tiny_model_config(n_labels=3), stage=1, seed=1)
    state2 = reinit_for_stage2(state1, n_labels=5, seed=2)
    assert state2.stage == 2
    assert state2.config.n_labels == 5
    assert state2.arrays["style_head.weight"].shape == (5, CFG.d_style)
    assert state2.arrays["classifier.out.weight"].shape == (5, CFG.classifier_hidden)
    assert state2.arrays["classifier.out.bias"].shape == (5,)
    heads = {"style_head.weight", "classifier.out.weight", "classifier.out.bias"}
    for name in state1.arrays:
        if name not in heads:
            assert np.array_equal(state1.arrays[name], state2.arrays[name]), name

    again = reinit_for_stage2(state1, n_labels=5, seed=2)
    assert all(np.array_equal(state2.arrays[k], again.arrays[k]) for k in state2.arrays)
    other = reinit_for_stage2(state1, n_labels=5, seed=3)
    assert any(not np.array_equal(state2.arrays[k], other.arrays[k]) for k in heads)

    with pytest.raises(ValidationError):
        reinit_for_stage2(state2, n_labels=5)
    with pytest.raises(ValidationError):
        reinit_for_stage2(state1, n_labels=1)


def test_state_roundtrip(tmp_path: Path) -> None:
    path = tmp_path / "model.npz"
    save_state(STATE, path)
    back = load_state(path)
    assert back.config == CFG
    assert back.stage == STATE.stage
    assert back.arrays.keys() == STATE.arrays.keys()
    assert all(np.array_equal(back.arrays[k], STATE.arrays[k]) for k in STATE.arrays)
    assert back.fingerprint() == STATE.fingerprint()


def test_load_state_rejects_other_archives(tmp_path: Path) -> None:
    from evc.store import save_archive

    path = tmp_path / "other.npz"
    save_archive(path, {"x": np.zeros(3)}, {"kind": "mel"})
    with pytest.raises(ValidationError):
        load_state(path)
