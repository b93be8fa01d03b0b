"""Mu-law companding, vocoder training provenance, and sampling contracts."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from evc.audio import LOG_FLOOR, AudioConfig, extract_mel
from evc.errors import ValidationError
from evc.vocoder import (
    GRIFFIN_LIM,
    VocoderConfig,
    VocoderExample,
    VocoderState,
    VocoderTrainConfig,
    fine_tune_vocoder,
    load_vocoder,
    mu_law_decode,
    mu_law_encode,
    new_vocoder,
    pretrain_vocoder,
    save_vocoder,
    synthesize,
    vocoder_nll,
)

# small framing so sample-level training and sampling stay fast
AUDIO = AudioConfig(
    sample_rate=4000, n_fft=256, win_length=200, hop_length=50, n_mels=16, fmax=2000.0
)
CONFIG = VocoderConfig.from_audio(AUDIO, d_embed=16, d_hidden=48)


def tone(freq: float, seconds: float, amplitude: float = 0.4) -> np.ndarray:
    t = np.arange(int(seconds * AUDIO.sample_rate)) / AUDIO.sample_rate
    wave = amplitude * np.sin(2.0 * np.pi * freq * t)
    fade = min(80, wave.size // 4)
    ramp = np.linspace(0.0, 1.0, fade)
    wave[:fade] *= ramp
    wave[-fade:] *= ramp[::-1]
    return wave.astype(np.float32)


def silence(seconds: float) -> np.ndarray:
    return np.zeros(int(seconds * AUDIO.sample_rate), dtype=np.float32)


def test_mu_law_code_identity() -> None:
    codes = np.arange(256)
    assert np.array_equal(mu_law_encode(mu_law_decode(codes)), codes)


def test_mu_law_round_trip_is_within_a_half_step() -> None:
    grid = np.linspace(-1.0, 1.0, 1000)
    err = np.abs(mu_law_decode(mu_law_encode(grid)) - grid)
    assert float(err.max()) <= 1.0 / 128.0


def test_mu_law_is_odd_and_validates() -> None:
    codes = np.arange(256)
    assert np.array_equal(mu_law_decode(255 - codes), -mu_law_decode(codes))
    # encode mirrors except exactly at 0, where the midpoint 127.5 must round
    x = np.linspace(1.0 / 64.0, 1.0, 64)
    assert np.array_equal(mu_law_encode(-x), 255 - mu_law_encode(x))
    with pytest.raises(ValidationError):
        mu_law_encode(np.array([1.5]))
    with pytest.raises(ValidationError):
        mu_law_encode(np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        mu_law_decode(np.array([256]))
    with pytest.raises(ValidationError):
        mu_law_encode(np.zeros(4), mu=0.0)


def test_vocoder_config_carries_the_audio_fingerprint() -> None:
    assert CONFIG.audio_fingerprint == AUDIO.fingerprint()
    assert CONFIG.n_mels == AUDIO.n_mels
    assert CONFIG.hop_length == AUDIO.hop_length
    with pytest.raises(ValidationError):
        VocoderConfig(n_mels=0, hop_length=50, audio_fingerprint="x")
    with pytest.raises(ValidationError):
        VocoderTrainConfig(max_steps=-1)


def test_new_vocoder_is_scratch_and_seeded() -> None:
    a = new_vocoder(CONFIG, seed=3)
    b = new_vocoder(CONFIG, seed=3)
    c = new_vocoder(CONFIG, seed=4)
    assert a.provenance == "scratch"
    assert all(np.array_equal(a.arrays[k], b.arrays[k]) for k in a.arrays)
    assert any(not np.array_equal(a.arrays[k], c.arrays[k]) for k in a.arrays)


@pytest.fixture(scope="module")
def corpus() -> list[VocoderExample]:
    waves = [
        np.concatenate([silence(0.08), tone(200.0, 0.5), silence(0.08)]),
        np.concatenate([silence(0.08), tone(350.0, 0.5), silence(0.08)]),
        silence(0.5),
    ]
    return [VocoderExample.from_wave(w, AUDIO) for w in waves]


@pytest.fixture(scope="module")
def trained(corpus: list[VocoderExample]) -> VocoderState:
    train = VocoderTrainConfig(max_steps=800, batch_size=4, crop_frames=8, seed=0)
    return pretrain_vocoder(corpus, CONFIG, train)


def test_pretrain_provenance_rules(corpus: list[VocoderExample]) -> None:
    zero = pretrain_vocoder(corpus, CONFIG, VocoderTrainConfig(max_steps=0, seed=1))
    assert zero.provenance == "scratch"
    fresh = new_vocoder(CONFIG, seed=1)
    assert all(np.array_equal(zero.arrays[k], fresh.arrays[k]) for k in fresh.arrays)

    short = pretrain_vocoder(
        corpus, CONFIG, VocoderTrainConfig(max_steps=2, batch_size=2, crop_frames=4, seed=1)
    )
    assert short.provenance == "pretrained"
    assert any(not np.array_equal(short.arrays[k], fresh.arrays[k]) for k in fresh.arrays)


def test_pretrain_is_deterministic(corpus: list[VocoderExample]) -> None:
    cfg = VocoderTrainConfig(max_steps=3, batch_size=2, crop_frames=4, seed=5)
    a = pretrain_vocoder(corpus, CONFIG, cfg)
    b = pretrain_vocoder(corpus, CONFIG, cfg)
    assert all(np.array_equal(a.arrays[k], b.arrays[k]) for k in a.arrays)
    assert a.fingerprint() == b.fingerprint()


def test_pretrain_rejects_mismatched_examples(corpus: list[VocoderExample]) -> None:
    other = AudioConfig(
        sample_rate=4000, n_fft=256, win_length=200, hop_length=50, n_mels=20, fmax=2000.0
    )
    bad = VocoderExample.from_wave(tone(200.0, 0.2), other)
    with pytest.raises(ValidationError):
        pretrain_vocoder([bad], CONFIG, VocoderTrainConfig(max_steps=1))
    with pytest.raises(ValidationError):
        pretrain_vocoder([], CONFIG, VocoderTrainConfig(max_steps=1))


def test_fine_tune_requires_pretraining(corpus: list[VocoderExample]) -> None:
    scratch = new_vocoder(CONFIG, seed=0)
    with pytest.raises(ValidationError):
        fine_tune_vocoder(scratch, corpus, VocoderTrainConfig(max_steps=1))


def test_fine_tune_zero_steps_changes_nothing(trained: VocoderState, corpus) -> None:
    out = fine_tune_vocoder(trained, corpus, VocoderTrainConfig(max_steps=0))
    assert out.provenance == trained.provenance == "pretrained"
    assert all(np.array_equal(out.arrays[k], trained.arrays[k]) for k in trained.arrays)


def test_fine_tune_updates_provenance_and_lowers_nll(trained: VocoderState) -> None:
    emotional = [
        VocoderExample.from_wave(
            np.concatenate([silence(0.08), tone(500.0, 0.5), silence(0.08)]), AUDIO
        )
    ]
    held_out = [VocoderExample.from_wave(tone(500.0, 0.3), AUDIO)]
    tuned = fine_tune_vocoder(
        trained, emotional, VocoderTrainConfig(max_steps=300, batch_size=4, crop_frames=8, seed=2)
    )
    assert tuned.provenance == "fine-tuned"
    assert vocoder_nll(tuned, held_out) < vocoder_nll(trained, held_out)

    again = fine_tune_vocoder(
        tuned, emotional, VocoderTrainConfig(max_steps=1, batch_size=2, crop_frames=4, seed=3)
    )
    assert again.provenance == "fine-tuned"


def test_training_longer_lowers_held_out_nll(corpus: list[VocoderExample], trained) -> None:
    held_out = [VocoderExample.from_wave(tone(200.0, 0.25), AUDIO)]
    short = pretrain_vocoder(
        corpus, CONFIG, VocoderTrainConfig(max_steps=20, batch_size=4, crop_frames=8, seed=0)
    )
    assert vocoder_nll(trained, held_out) < vocoder_nll(short, held_out)


def test_synthesize_length_contract_and_range(trained: VocoderState) -> None:
    mel = extract_mel(tone(200.0, 0.2), AUDIO)
    wave = synthesize(mel, trained, AUDIO, seed=0)
    assert wave.shape == (mel.shape[0] * AUDIO.hop_length,)
    assert float(np.abs(wave).max()) <= 1.0

    again = synthesize(mel, trained, AUDIO, seed=0)
    assert np.array_equal(wave, again)
    other = synthesize(mel, trained, AUDIO, seed=1)
    assert not np.array_equal(wave, other)


def test_synthesize_griffin_lim_path() -> None:
    full = AudioConfig()
    mel = np.full((81, full.n_mels), LOG_FLOOR, dtype=np.float32)
    wave = synthesize(mel, GRIFFIN_LIM, full, seed=0)
    assert wave.shape == (81 * full.hop_length,)
    with pytest.raises(ValidationError):
        synthesize(mel, "wavenet", full)


def test_synthesize_rejects_fingerprint_mismatch(trained: VocoderState) -> None:
    full = AudioConfig()
    mel = np.zeros((4, full.n_mels), dtype=np.float32)
    with pytest.raises(ValidationError):
        synthesize(mel, trained, full)


def test_trained_vocoder_keeps_silence_quiet(trained: VocoderState) -> None:
    mel = extract_mel(silence(0.25), AUDIO)
    wave = synthesize(mel, trained, AUDIO, seed=0)
    assert float(np.sqrt(np.mean(wave**2))) < 0.05


def dominant_frequency(wave: np.ndarray) -> float:
    spectrum = np.abs(np.fft.rfft(wave * np.hanning(wave.size)))
    spectrum[0] = 0.0
    return float(np.fft.rfftfreq(wave.size, 1.0 / AUDIO.sample_rate)[int(np.argmax(spectrum))])


def test_trained_vocoder_follows_conditioning(trained: VocoderState) -> None:
    low = synthesize(extract_mel(tone(200.0, 0.3), AUDIO), trained, AUDIO, seed=0)
    high = synthesize(extract_mel(tone(350.0, 0.3), AUDIO), trained, AUDIO, seed=0)
    f_low = dominant_frequency(low)
    f_high = dominant_frequency(high)
    assert f_low < 400.0
    assert f_high > f_low


def test_vocoder_roundtrip(tmp_path: Path, trained: VocoderState) -> None:
    path = tmp_path / "vocoder.npz"
    save_vocoder(trained, path)
    back = load_vocoder(path)
    assert back.config == trained.config
    assert back.provenance == trained.provenance
    assert all(np.array_equal(back.arrays[k], trained.arrays[k]) for k in trained.arrays)
    assert back.fingerprint() == trained.fingerprint()

    from evc.store import save_archive

    other = tmp_path / "other.npz"
    save_archive(other, {"x": np.zeros(2)}, {"kind": "mel"})
    with pytest.raises(ValidationError):
        load_vocoder(other)
