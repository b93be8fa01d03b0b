"""Corpus-layer contracts: transcription, manifests, splits, synthesis."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evc.audio import AudioConfig, detect_voicing, extract_mel, load_waveform
from evc.corpus import (
    EMOTIONS,
    SyntheticCorpusSpec,
    build_synthetic_corpus,
    default_lexicon,
    load_manifest,
    make_splits,
    prepare_features,
    prepare_training_set,
    write_manifest,
    UtteranceRecord,
)
from evc.errors import ManifestError, QuotaError, ValidationError

CFG = AudioConfig()


def test_transcribe_words_boundaries_and_eos() -> None:
    lex = default_lexicon()
    ids = lex.transcribe("aa uw")
    assert ids.dtype == np.int64
    assert ids[-1] == lex.eos_id
    assert lex.boundary_id in ids.tolist()
    # words map through the lexicon: one unit per vowel word
    assert len(ids) == 1 + 1 + 1 + 1  # aa, <sp>, uw, <eos>


def test_transcribe_falls_back_to_characters() -> None:
    lex = default_lexicon()
    ids = lex.transcribe("Hi")
    # 'hi' is not a lexicon word: spelled as h, i + <eos>
    assert len(ids) == 3
    assert lex.transcribe("HI").tolist() == ids.tolist()


def test_transcribe_rejects_empty_and_unknown() -> None:
    lex = default_lexicon()
    with pytest.raises(ValidationError):
        lex.transcribe("   ")
    with pytest.raises(ValidationError):
        lex.transcribe("München")


@settings(max_examples=50, deadline=None)
@given(
    words=st.lists(
        st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=6),
        min_size=1,
        max_size=5,
    ),
    extra=st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=6),
)
def test_transcribe_appending_a_word_extends_the_sequence(words: list[str], extra: str) -> None:
    lex = default_lexicon()
    base = lex.transcribe(" ".join(words))
    longer = lex.transcribe(" ".join(words + [extra]))
    assert len(longer) >= len(base) + 2  # at least boundary + one unit


def make_records(n: int, speaker: str = "spk0", emotion: str | None = "neutral") -> list[UtteranceRecord]:
    return [
        UtteranceRecord(
            id=f"{speaker}_{emotion}_{i:03d}",
            audio_path=f"wav/{i}.wav",
            text="aa uw",
            speaker=speaker,
            duration_s=1.0,
            emotion=emotion,
        )
        for i in range(n)
    ]


def test_manifest_roundtrip(tmp_path: Path) -> None:
    records = make_records(3)
    path = tmp_path / "manifest.jsonl"
    write_manifest(records, path)
    back = load_manifest(path)
    assert [r.id for r in back] == [r.id for r in records]
    assert all(Path(r.audio_path).is_absolute() for r in back)
    assert back[0].emotion == "neutral"
    assert back[0].split is None


def test_manifest_errors_name_the_line(tmp_path: Path) -> None:
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "audio_path": "x.wav", "text": "aa", "speaker": "s", "duration_s": 1.0}\nnot json\n')
    with pytest.raises(ManifestError, match=r":2"):
        load_manifest(path)

    path.write_text('{"id": "a", "text": "aa"}\n')
    with pytest.raises(ManifestError, match="missing fields"):
        load_manifest(path)

    row = {"id": "a", "audio_path": "x.wav", "text": "aa", "speaker": "s", "duration_s": 1.0}
    path.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
    with pytest.raises(ManifestError, match="duplicate id"):
        load_manifest(path)

    row["emotion"] = "bored"
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(ManifestError, match="bored"):
        load_manifest(path)

    row["emotion"] = "sad"
    row["duration_s"] = 0.0
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(ManifestError, match="duration"):
        load_manifest(path)

    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path / "nope.jsonl")


def test_make_splits_quotas_and_determinism() -> None:
    records = make_records(10, emotion="sad") + make_records(10, emotion="happy")
    out = make_splits(records, train=5, reference=2, evaluation=1, seed=3)
    for emotion in ("sad", "happy"):
        group = [r for r in out if r.emotion == emotion]
        counts = {name: sum(r.split == name for r in group) for name in ("train", "reference", "evaluation")}
        assert counts == {"train": 5, "reference": 2, "evaluation": 1}
        assert sum(r.split is None for r in group) == 2

    # Stratum shuffling keys on (seed, speaker, emotion): record order is irrelevant.
    flipped = make_splits(records[::-1], train=5, reference=2, evaluation=1, seed=3)
    by_id = {r.id: r.split for r in flipped}
    assert all(by_id[r.id] == r.split for r in out)
    other = make_splits(records, train=5, reference=2, evaluation=1, seed=4)
    assert any(a.split != b.split for a, b in zip(out, other))


def test_make_splits_quota_error_names_stratum() -> None:
    records = make_records(4, emotion="sad")
    with pytest.raises(QuotaError, match="sad"):
        make_splits(records, train=4, reference=1, evaluation=0)


@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory: pytest.TempPathFactory) -> tuple[Path, list[UtteranceRecord]]:
    out = tmp_path_factory.mktemp("corpus")
    spec = SyntheticCorpusSpec(n_speakers=2, emotions=EMOTIONS, utterances_per_cell=2, seed=11)
    return out, build_synthetic_corpus(spec, out)


def test_synthetic_corpus_layout(tiny_corpus: tuple[Path, list[UtteranceRecord]]) -> None:
    out, records = tiny_corpus
    assert len(records) == 2 * 5 * 2
    assert (out / "manifest.jsonl").exists()
    assert (out / "generation.json").exists()
    back = load_manifest(out / "manifest.jsonl")
    assert [r.id for r in back] == [r.id for r in records]
    wave = load_waveform(records[0].audio_path, CFG)
    assert wave.size == pytest.approx(records[0].duration_s * 16000, abs=1)


def test_synthetic_corpus_is_parallel_across_emotions(
    tiny_corpus: tuple[Path, list[UtteranceRecord]]
) -> None:
    _, records = tiny_corpus
    by_id = {r.id: r for r in records}
    neutral = by_id["spk0_neutral_000"]
    sad = by_id["spk0_sad_000"]
    angry = by_id["spk0_angry_000"]
    assert neutral.text == sad.text == angry.text
    # sad stretches durations, angry compresses them
    assert sad.duration_s > neutral.duration_s > angry.duration_s


def test_synthetic_corpus_metadata_shares_prosody_per_emotion(
    tiny_corpus: tuple[Path, list[UtteranceRecord]]
) -> None:
    out, records = tiny_corpus
    meta = json.loads((out / "generation.json").read_text())
    sad = [v for v in meta["records"].values() if v["emotion"] == "sad"]
    assert len(sad) == 4
    assert all(v["prosody"] == sad[0]["prosody"] for v in sad)
    assert meta["prosody_table"]["sad"]["duration_scale"] > 1.0


def test_synthetic_corpus_is_bit_deterministic(tmp_path: Path) -> None:
    spec = SyntheticCorpusSpec(n_speakers=1, emotions=("neutral", "sad"), utterances_per_cell=1, seed=5)
    a = tmp_path / "a"
    b = tmp_path / "b"
    ra = build_synthetic_corpus(spec, a)
    rb = build_synthetic_corpus(spec, b)
    assert [r.id for r in ra] == [r.id for r in rb]
    for rec_a, rec_b in zip(ra, rb):
        ha = hashlib.sha256(Path(rec_a.audio_path).read_bytes()).hexdigest()
        hb = hashlib.sha256(Path(rec_b.audio_path).read_bytes()).hexdigest()
        assert ha == hb
    assert (a / "generation.json").read_text() == (b / "generation.json").read_text()


def test_synthetic_speech_is_mostly_voiced(tiny_corpus: tuple[Path, list[UtteranceRecord]]) -> None:
    _, records = tiny_corpus
    rec = next(r for r in records if r.emotion == "neutral")
    wave = load_waveform(rec.audio_path, CFG)
    track = detect_voicing(wave, CFG)
    # 120 ms of the file is head/tail silence by construction
    speech_frames = (rec.duration_s - 0.12) * 16000 / 200
    assert track.voiced.sum() >= 0.6 * speech_frames


def test_unlabelled_corpus_has_no_emotions(tmp_path: Path) -> None:
    spec = SyntheticCorpusSpec(n_speakers=2, emotions=None, utterances_per_cell=1, seed=2)
    records = build_synthetic_corpus(spec, tmp_path)
    assert len(records) == 2
    assert all(r.emotion is None for r in records)
    assert {r.speaker for r in records} == {"spk0", "spk1"}


def test_corpus_spec_validation() -> None:
    with pytest.raises(ValidationError):
        SyntheticCorpusSpec(n_speakers=0)
    with pytest.raises(ValidationError):
        SyntheticCorpusSpec(emotions=("bored",))
    with pytest.raises(ValidationError):
        SyntheticCorpusSpec(emotions=())


def test_prepare_training_set_speaker_and_emotion_labels(
    tiny_corpus: tuple[Path, list[UtteranceRecord]], tmp_path: Path
) -> None:
    _, records = tiny_corpus
    lex = default_lexicon()
    spk = prepare_training_set(records, lex, CFG, "speaker")
    assert spk.label_names == ("spk0", "spk1")
    assert spk.phoneme_vocab == lex.vocab_size
    first = spk.items[0]
    assert first.mel.shape[1] == 80
    assert first.label == spk.label_names.index(first.record.speaker)

    emo = prepare_training_set(records, lex, CFG, "emotion")
    assert emo.label_names == EMOTIONS
    assert all(it.label == EMOTIONS.index(it.record.emotion) for it in emo.items)

    with pytest.raises(ValidationError):
        prepare_training_set(records, lex, CFG, "both")


def test_prepare_training_set_requires_emotions_when_labelling_by_them(tmp_path: Path) -> None:
    spec = SyntheticCorpusSpec(n_speakers=1, emotions=None, utterances_per_cell=1)
    records = build_synthetic_corpus(spec, tmp_path)
    with pytest.raises(ValidationError):
        prepare_training_set(records, default_lexicon(), CFG, "emotion")


def test_prepared_features_match_direct_extraction(
    tiny_corpus: tuple[Path, list[UtteranceRecord]], tmp_path: Path
) -> None:
    _, records = tiny_corpus
    subset = records[:3]
    paths = prepare_features(subset, CFG, tmp_path / "feats")
    assert set(paths) == {r.id for r in subset}
    cached = prepare_training_set(subset, default_lexicon(), CFG, "speaker", features_dir=tmp_path / "feats")
    direct = prepare_training_set(subset, default_lexicon(), CFG, "speaker")
    for a, b in zip(cached.items, direct.items):
        assert np.array_equal(a.mel, b.mel)
        mel = extract_mel(load_waveform(a.record.audio_path, CFG), CFG)
        assert np.array_equal(a.mel, mel)
