"""Shared plumbing for the demo scripts.

Every demo renders audio at 4 kHz with a 20-band mel so nothing here takes
more than about a minute.  Corpora and trained checkpoints are cached under
``demos/output/`` and reused by later scripts, so the demos can be run in
order (01 -> 05) or individually; each one rebuilds whatever it is missing.
"""

from __future__ import annotations

import time
from pathlib import Path

from evc.audio import AudioConfig
from evc.corpus import (
    EMOTIONS,
    SyntheticCorpusSpec,
    UtteranceRecord,
    build_synthetic_corpus,
    default_lexicon,
    load_manifest,
    make_splits,
    prepare_training_set,
)
from evc.model import ModelConfig
from evc.training import (
    Checkpoint,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train_stage1,
    train_stage2,
)

OUTPUT = Path(__file__).resolve().parent / "output"

AUDIO = AudioConfig(
    sample_rate=4000, n_fft=256, win_length=200, hop_length=50, n_mels=20, fmax=2000.0
)


def toy_corpora() -> tuple[list[UtteranceRecord], list[UtteranceRecord]]:
    """A neutral 2-speaker corpus and an emotional single-speaker corpus.

    The neutral corpus feeds style initialization; the emotional one holds
    20 utterances per emotion from a speaker the first stage never saw.
    """
    neutral_dir = OUTPUT / "corpus" / "neutral"
    emotional_dir = OUTPUT / "corpus" / "emotional"
    if (neutral_dir / "manifest.jsonl").exists() and (emotional_dir / "manifest.jsonl").exists():
        return (
            load_manifest(neutral_dir / "manifest.jsonl"),
            load_manifest(emotional_dir / "manifest.jsonl"),
        )
    print("rendering synthetic corpora (first run only) ...")
    neutral = build_synthetic_corpus(
        SyntheticCorpusSpec(
            n_speakers=2, emotions=None, utterances_per_cell=40, sample_rate=4000, seed=11
        ),
        neutral_dir,
    )
    emotional = build_synthetic_corpus(
        SyntheticCorpusSpec(
            n_speakers=1,
            emotions=EMOTIONS,
            utterances_per_cell=20,
            sample_rate=4000,
            seed=13,
            first_speaker=2,
        ),
        emotional_dir,
    )
    return neutral, emotional


def emotional_splits(records: list[UtteranceRecord]) -> list[UtteranceRecord]:
    """12 train / 4 reference / 4 evaluation utterances per emotion."""
    return make_splits(records, 12, 4, 4, seed=5)


def trained_models() -> tuple[Checkpoint, Checkpoint]:
    """Both training stages, cached under output/models after the first run."""
    stage1_path = OUTPUT / "models" / "stage1.npz"
    stage2_path = OUTPUT / "models" / "stage2.npz"
    if stage1_path.exists() and stage2_path.exists():
        return load_checkpoint(stage1_path), load_checkpoint(stage2_path)

    neutral, emotional = toy_corpora()
    lexicon = default_lexicon()
    set1 = prepare_training_set(neutral, lexicon, AUDIO, label_kind="speaker")
    split = emotional_splits(emotional)
    set2 = prepare_training_set(
        [r for r in split if r.split == "train"], lexicon, AUDIO, label_kind="emotion"
    )
    model = ModelConfig(
        phoneme_vocab=set1.phoneme_vocab, n_labels=len(set1.label_names), n_mels=20,
        d_linguistic=24, d_style=16, d_encoder=32, d_decoder=48, d_prenet=16,
        d_attention=24, classifier_hidden=32, reduction_factor=2, max_decode_steps=120,
    )

    t0 = time.monotonic()
    print(f"stage 1: style initialization on {len(set1.items)} neutral utterances ...")
    stage1 = train_stage1(
        set1,
        TrainConfig(stage=1, max_steps=400, batch_size=8, learning_rate=1e-3,
                    warmup_steps=40, seed=0, validation_every=100),
        model,
    )
    print(f"  done in {time.monotonic() - t0:.0f}s "
          f"(final weighted loss {stage1.history[-1]['weighted_total']:.3f})")

    t0 = time.monotonic()
    print(f"stage 2: emotion training on {len(set2.items)} labelled utterances ...")
    stage2 = train_stage2(
        stage1.state,
        set2,
        TrainConfig(stage=2, max_steps=300, batch_size=8, learning_rate=1e-3,
                    warmup_steps=30, seed=1, validation_every=100),
    )
    print(f"  done in {time.monotonic() - t0:.0f}s "
          f"(final weighted loss {stage2.history[-1]['weighted_total']:.3f})")

    save_checkpoint(stage1, stage1_path)
    save_checkpoint(stage2, stage2_path)
    print(f"checkpoints cached under {stage1_path.parent}")
    return stage1, stage2
