"""Helpers shared across test modules."""

from __future__ import annotations

import numpy as np

from evc.corpus import PreparedUtterance, TrainingSet, UtteranceRecord
from evc.model import ModelConfig


def tiny_model_config(**overrides) -> ModelConfig:
    """A model small enough for fast forwards and finite differences."""
    params = dict(
        phoneme_vocab=10,
        n_labels=4,
        n_mels=8,
        d_linguistic=8,
        d_style=4,
        d_encoder=8,
        d_decoder=12,
        d_prenet=6,
        d_attention=8,
        classifier_hidden=8,
        reduction_factor=2,
        max_decode_steps=40,
    )
    params.update(overrides)
    return ModelConfig(**params)


def random_model_config(rng: np.random.Generator) -> ModelConfig:
    """Sample a structurally valid configuration for invariant sweeps."""
    return ModelConfig(
        phoneme_vocab=int(rng.integers(4, 40)),
        n_labels=int(rng.integers(2, 9)),
        n_mels=int(rng.integers(4, 24)),
        d_linguistic=int(rng.integers(2, 24)),
        d_style=int(rng.integers(2, 16)),
        d_encoder=2 * int(rng.integers(1, 12)),
        d_decoder=int(rng.integers(4, 24)),
        d_prenet=int(rng.integers(2, 12)),
        d_attention=int(rng.integers(2, 16)),
        classifier_hidden=int(rng.integers(2, 16)),
        reduction_factor=int(rng.integers(1, 4)),
        max_decode_steps=int(rng.integers(8, 30)),
    )


def random_mel(rng: np.random.Generator, frames: int, n_mels: int) -> np.ndarray:
    """Mel-like values spanning the silence floor to loudish speech."""
    return (-6.0 + 2.5 * rng.standard_normal((frames, n_mels))).astype(np.float32)


def toy_training_set(
    config: ModelConfig,
    n_items: int = 8,
    label_kind: str = "speaker",
    seed: int = 0,
) -> TrainingSet:
    """Random short utterances; enough structure to drive the training loop."""
    rng = np.random.default_rng(seed)
    names = tuple(f"label{j}" for j in range(config.n_labels))
    items = []
    for i in range(n_items):
        label = i % config.n_labels
        phonemes = rng.integers(3, config.phoneme_vocab, size=int(rng.integers(3, 7)))
        mel = random_mel(rng, int(rng.integers(9, 21)), config.n_mels)
        record = UtteranceRecord(
            id=f"utt{i:03d}",
            audio_path=f"wav/utt{i:03d}.wav",
            text="aa uw",
            speaker=names[label] if label_kind == "speaker" else "spk0",
            duration_s=mel.shape[0] * 200 / 16000,
            emotion=names[label] if label_kind == "emotion" else None,
        )
        items.append(
            PreparedUtterance(record=record, phonemes=phonemes.astype(np.int64), mel=mel, label=label)
        )
    return TrainingSet(
        items=items,
        label_names=names,
        label_kind=label_kind,
        phoneme_vocab=config.phoneme_vocab,
        n_mels=config.n_mels,
    )
