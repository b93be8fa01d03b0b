"""Corpus records, transcription, splits, and a synthetic speech generator.

The synthetic generator renders formant-like vowel sequences through a
source-filter recipe.  Speakers differ by pitch register and formant shift;
emotions are deterministic prosody transforms (pitch scale and contour,
duration scale, energy scale) applied to content that is shared across
emotions within a speaker, so every emotional rendering has a parallel
counterpart in every other emotion.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioConfig, extract_mel, load_waveform, save_mel, load_mel, save_waveform
from .errors import ManifestError, QuotaError, ValidationError

EMOTIONS: tuple[str, ...] = ("neutral", "angry", "happy", "sad", "surprise")
SPLITS: tuple[str, ...] = ("train", "reference", "evaluation")

PAD = "<pad>"
BOUNDARY = "<sp>"
EOS = "<eos>"


@dataclass(frozen=True)
class UtteranceRecord:
    """One corpus row: where the audio lives and how it is labelled."""

    id: str
    audio_path: str
    text: str
    speaker: str
    duration_s: float
    emotion: str | None = None
    split: str | None = None


@dataclass(frozen=True)
class Lexicon:
    """Word-to-phoneme mapping with a per-character fallback.

    Id 0 pads batches, id 1 separates words, id 2 closes every sequence.
    """

    entries: tuple[tuple[str, tuple[str, ...]], ...]
    fallback_chars: tuple[str, ...]

    def __post_init__(self) -> None:
        units: list[str] = [PAD, BOUNDARY, EOS]
        for _, phones in self.entries:
            for p in phones:
                if p not in units:
                    units.append(p)
        for c in self.fallback_chars:
            if c not in units:
                units.append(c)
        object.__setattr__(self, "_symbols", tuple(units))
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(units)})
        object.__setattr__(self, "_words", {w: tuple(p) for w, p in self.entries})

    @property
    def symbols(self) -> tuple[str, ...]:
        return self._symbols  # type: ignore[attr-defined]

    @property
    def vocab_size(self) -> int:
        return len(self.symbols)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def boundary_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    def transcribe(self, text: str) -> np.ndarray:
        """Map text to phoneme ids: lowercase, split on whitespace, look each
        word up in the lexicon, spell unknown words character by character.
        Words are separated by the boundary id and the sequence always ends
        with the end id."""
        words = text.lower().split()
        if not words:
            raise ValidationError(f"text {text!r} is empty after normalisation")
        index: dict[str, int] = self._index  # type: ignore[attr-defined]
        table: dict[str, tuple[str, ...]] = self._words  # type: ignore[attr-defined]
        ids: list[int] = []
        for w, word in enumerate(words):
            if w > 0:
                ids.append(self.boundary_id)
            units = table.get(word)
            if units is None:
                units = tuple(word)
            for unit in units:
                if unit not in index:
                    raise ValidationError(f"no symbol for unit {unit!r} in word {word!r}")
                ids.append(index[unit])
        ids.append(self.eos_id)
        return np.asarray(ids, dtype=np.int64)


# Vowel formants (F1, F2) in Hz for the synthetic voice.
_VOWELS: dict[str, tuple[float, float]] = {
    "aa": (730.0, 1090.0),
    "eh": (530.0, 1840.0),
    "iy": (270.0, 2290.0),
    "ow": (570.0, 840.0),
    "uw": (300.0, 870.0),
}


def default_lexicon() -> Lexicon:
    """Lexicon covering the synthetic vowel vocabulary plus letter fallback."""
    letters = tuple("abcdefghijklmnopqrstuvwxyz'")
    entries = tuple((name, (name,)) for name in sorted(_VOWELS))
    return Lexicon(entries=entries, fallback_chars=letters)


def write_manifest(records: list[UtteranceRecord], path: str | Path) -> None:
    """Write records as JSON lines; audio paths are stored relative to the
    manifest's directory when they fall under it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    lines = []
    for rec in records:
        audio = Path(rec.audio_path)
        if not audio.is_absolute():
            audio = Path.cwd() / audio
        try:
            audio = audio.resolve().relative_to(base)
        except ValueError:
            audio = audio.resolve()
        row = dataclasses.asdict(rec)
        row["audio_path"] = str(audio)
        lines.append(json.dumps(row, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path: str | Path, emotions: tuple[str, ...] = EMOTIONS) -> list[UtteranceRecord]:
    """Parse a JSONL manifest, resolving audio paths against its directory."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    base = path.parent.resolve()
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(row, dict):
            raise ManifestError(f"{path}:{lineno}: expected an object, got {type(row).__name__}")
        missing = {"id", "audio_path", "text", "speaker", "duration_s"} - row.keys()
        if missing:
            raise ManifestError(f"{path}:{lineno}: missing fields {sorted(missing)}")
        if row["id"] in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate id {row['id']!r}")
        seen.add(row["id"])
        emotion = row.get("emotion")
        if emotion is not None and emotion not in emotions:
            raise ManifestError(
                f"{path}:{lineno}: emotion {emotion!r} not in inventory {list(emotions)}"
            )
        split = row.get("split")
        if split is not None and split not in SPLITS:
            raise ManifestError(f"{path}:{lineno}: unknown split {split!r}")
        duration = float(row["duration_s"])
        if duration <= 0:
            raise ManifestError(f"{path}:{lineno}: duration_s must be positive, got {duration}")
        audio = Path(row["audio_path"])
        if not audio.is_absolute():
            audio = base / audio
        records.append(
            UtteranceRecord(
                id=str(row["id"]),
                audio_path=str(audio),
                text=str(row["text"]),
                speaker=str(row["speaker"]),
                duration_s=duration,
                emotion=emotion,
                split=split,
            )
        )
    return records


def make_splits(
    records: list[UtteranceRecord],
    train: int,
    reference: int,
    evaluation: int,
    seed: int = 0,
) -> list[UtteranceRecord]:
    """Assign train/reference/evaluation splits per (speaker, emotion) stratum.

    Assignment shuffles each stratum with a seed derived from the stratum key,
    so the outcome does not depend on record order.  Records beyond the quotas
    keep ``split=None``.
    """
    for count, name in ((train, "train"), (reference, "reference"), (evaluation, "evaluation")):
        if count < 0:
            raise ValidationError(f"{name} quota must be >= 0, got {count}")
    strata: dict[tuple[str, str | None], list[int]] = {}
    for i, rec in enumerate(records):
        strata.setdefault((rec.speaker, rec.emotion), []).append(i)
    out = list(records)
    need = train + reference + evaluation
    for (speaker, emotion), idxs in sorted(strata.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        if len(idxs) < need:
            raise QuotaError(
                f"stratum speaker={speaker!r} emotion={emotion!r} has {len(idxs)} records, "
                f"needs {need} for splits {train}/{reference}/{evaluation}"
            )
        key = f"{seed}|{speaker}|{emotion}".encode("utf-8")
        stratum_seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "little")
        by_id = sorted(idxs, key=lambda j: records[j].id)
        order = np.random.default_rng(stratum_seed).permutation(len(by_id))
        shuffled = [by_id[j] for j in order]
        for j in shuffled[:train]:
            out[j] = dataclasses.replace(records[j], split="train")
        for j in shuffled[train : train + reference]:
            out[j] = dataclasses.replace(records[j], split="reference")
        for j in shuffled[train + reference : need]:
            out[j] = dataclasses.replace(records[j], split="evaluation")
    return out


@dataclass(frozen=True)
class ProsodyTransform:
    """Deterministic per-emotion prosody recipe."""

    pitch_scale: float
    duration_scale: float
    energy_scale: float
    contour: str  # flat | fall | rise | late_rise
    contour_depth: float


PROSODY: dict[str, ProsodyTransform] = {
    "neutral": ProsodyTransform(1.00, 1.00, 1.00, "flat", 0.0),
    "angry": ProsodyTransform(1.22, 0.82, 1.30, "fall", 0.30),
    "happy": ProsodyTransform(1.15, 0.94, 1.15, "rise", 0.25),
    "sad": ProsodyTransform(0.80, 1.38, 0.78, "fall", 0.15),
    "surprise": ProsodyTransform(1.28, 1.06, 1.10, "late_rise", 0.50),
}


def _contour(shape: str, depth: float, tau: np.ndarray) -> np.ndarray:
    if shape == "flat":
        return np.ones_like(tau)
    if shape == "fall":
        return 1.0 + depth * (0.5 - tau)
    if shape == "rise":
        return 1.0 + depth * (tau - 0.5)
    if shape == "late_rise":
        return 1.0 + depth * np.clip((tau - 0.6) / 0.4, 0.0, 1.0)
    raise ValidationError(f"unknown contour shape {shape!r}")


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    """Size and identity of a generated corpus.

    ``emotions=None`` produces an unlabelled multi-speaker corpus for style
    pretraining; otherwise each content item is rendered once per emotion.
    """

    n_speakers: int = 2
    emotions: tuple[str, ...] | None = EMOTIONS
    utterances_per_cell: int = 10
    sample_rate: int = 16000
    seed: int = 0
    first_speaker: int = 0
    min_vowels: int = 2
    max_vowels: int = 4

    def __post_init__(self) -> None:
        if self.n_speakers < 1:
            raise ValidationError(f"n_speakers must be >= 1, got {self.n_speakers}")
        if self.utterances_per_cell < 1:
            raise ValidationError(f"utterances_per_cell must be >= 1, got {self.utterances_per_cell}")
        if self.emotions is not None:
            if not self.emotions:
                raise ValidationError("emotions must be None or a non-empty tuple")
            unknown = [e for e in self.emotions if e not in PROSODY]
            if unknown:
                raise ValidationError(f"no prosody recipe for emotions {unknown}")
        if not (1 <= self.min_vowels <= self.max_vowels):
            raise ValidationError(
                f"need 1 <= min_vowels <= max_vowels, got {self.min_vowels}, {self.max_vowels}"
            )


def _speaker_voice(index: int) -> tuple[str, float, float]:
    """Name, base f0, and formant shift for speaker ``index``."""
    return f"spk{index}", 115.0 * (1.35**index), 0.92 + 0.10 * index


def _content_rng(seed: int, speaker_index: int, utt_index: int) -> np.random.Generator:
    key = f"content|{seed}|{speaker_index}|{utt_index}".encode("utf-8")
    return np.random.default_rng(int.from_bytes(hashlib.sha256(key).digest()[:8], "little"))


def _render_rng(seed: int, speaker_index: int, utt_index: int, emotion: str) -> np.random.Generator:
    key = f"render|{seed}|{speaker_index}|{utt_index}|{emotion}".encode("utf-8")
    return np.random.default_rng(int.from_bytes(hashlib.sha256(key).digest()[:8], "little"))


def _render_utterance(
    vowels: list[str],
    base_durations: np.ndarray,
    base_f0: float,
    formant_shift: float,
    f0_jitter: float,
    gain: float,
    transform: ProsodyTransform,
    sample_rate: int,
    noise_rng: np.random.Generator,
) -> np.ndarray:
    durations = base_durations * transform.duration_scale
    lengths = np.maximum((durations * sample_rate).round().astype(int), 1)
    total = int(lengths.sum())
    tau = np.arange(total) / max(total - 1, 1)

    f1 = np.empty(total)
    f2 = np.empty(total)
    pos = 0
    for vowel, n in zip(vowels, lengths):
        lo, hi = _VOWELS[vowel]
        f1[pos : pos + n] = lo * formant_shift
        f2[pos : pos + n] = hi * formant_shift
        pos += n

    declination = 1.0 + 0.04 * (0.5 - tau)
    f0 = base_f0 * f0_jitter * transform.pitch_scale * declination
    f0 = f0 * _contour(transform.contour, transform.contour_depth, tau)
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate

    wave = np.zeros(total)
    n_harmonics = min(26, int(7400.0 / float(f0.max())))
    for k in range(1, n_harmonics + 1):
        fk = k * f0
        envelope = (
            1.0 / (1.0 + ((fk - f1) / 90.0) ** 2)
            + 0.7 / (1.0 + ((fk - f2) / 120.0) ** 2)
            + 0.08
        )
        wave += (envelope / k) * np.sin(k * phase)

    # Articulation dips between vowels and fades at the utterance edges.
    energy = np.ones(total)
    ramp = max(int(0.008 * sample_rate), 1)
    edges = np.cumsum(lengths)[:-1]
    for e in edges:
        lo, hi = max(e - ramp, 0), min(e + ramp, total)
        energy[lo:hi] *= 1.0 - 0.35 * np.hanning(hi - lo)
    fade = max(int(0.010 * sample_rate), 2)
    energy[:fade] *= np.linspace(0.0, 1.0, fade)
    energy[-fade:] *= np.linspace(1.0, 0.0, fade)

    wave = wave / max(np.max(np.abs(wave)), 1e-9)
    wave = wave * energy * 0.38 * gain * transform.energy_scale

    pad = int(0.06 * sample_rate)
    wave = np.concatenate([np.zeros(pad), wave, np.zeros(pad)])
    wave = wave + 1.5e-4 * noise_rng.standard_normal(wave.size)
    return np.clip(wave, -0.99, 0.99).astype(np.float32)


def build_synthetic_corpus(spec: SyntheticCorpusSpec, out_dir: str | Path) -> list[UtteranceRecord]:
    """Generate waveforms, a manifest, and generation metadata under ``out_dir``.

    Output is bit-deterministic given the spec.  Within a speaker, utterance
    ``i`` shares vowel content and base durations across all emotions.
    """
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)
    audio_cfg = AudioConfig(sample_rate=spec.sample_rate, fmax=min(8000.0, spec.sample_rate / 2))
    emotions: tuple[str | None, ...] = spec.emotions if spec.emotions is not None else (None,)
    vowel_names = sorted(_VOWELS)

    records: list[UtteranceRecord] = []
    meta_records: dict[str, dict] = {}
    for s in range(spec.first_speaker, spec.first_speaker + spec.n_speakers):
        speaker, base_f0, formant_shift = _speaker_voice(s)
        for i in range(spec.utterances_per_cell):
            rng = _content_rng(spec.seed, s, i)
            n_vowels = int(rng.integers(spec.min_vowels, spec.max_vowels + 1))
            vowels = [vowel_names[j] for j in rng.integers(0, len(vowel_names), n_vowels)]
            base_durations = rng.uniform(0.13, 0.22, n_vowels)
            f0_jitter = float(rng.uniform(0.96, 1.04))
            gain = float(rng.uniform(0.8, 1.0))
            text = " ".join(vowels)
            for emotion in emotions:
                transform = PROSODY[emotion] if emotion is not None else PROSODY["neutral"]
                noise_rng = _render_rng(spec.seed, s, i, emotion or "none")
                wave = _render_utterance(
                    vowels,
                    base_durations,
                    base_f0,
                    formant_shift,
                    f0_jitter,
                    gain,
                    transform,
                    spec.sample_rate,
                    noise_rng,
                )
                utt_id = f"{speaker}_{emotion or 'none'}_{i:03d}"
                path = wav_dir / f"{utt_id}.wav"
                save_waveform(path, wave, audio_cfg)
                records.append(
                    UtteranceRecord(
                        id=utt_id,
                        audio_path=str(path),
                        text=text,
                        speaker=speaker,
                        duration_s=wave.size / spec.sample_rate,
                        emotion=emotion,
                    )
                )
                meta_records[utt_id] = {
                    "vowels": vowels,
                    "base_durations": [round(float(d), 6) for d in base_durations],
                    "f0_jitter": round(f0_jitter, 6),
                    "gain": round(gain, 6),
                    "emotion": emotion,
                    "prosody": dataclasses.asdict(transform) if emotion is not None else None,
                }

    write_manifest(records, out_dir / "manifest.jsonl")
    meta = {
        "spec": dataclasses.asdict(spec),
        "prosody_table": {name: dataclasses.asdict(t) for name, t in PROSODY.items()},
        "speakers": {
            _speaker_voice(s)[0]: {"base_f0": _speaker_voice(s)[1], "formant_shift": _speaker_voice(s)[2]}
            for s in range(spec.first_speaker, spec.first_speaker + spec.n_speakers)
        },
        "records": meta_records,
    }
    (out_dir / "generation.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return records


@dataclass
class PreparedUtterance:
    """A record with everything training needs already materialised."""

    record: UtteranceRecord
    phonemes: np.ndarray  # int64 (L,)
    mel: np.ndarray  # float32 (T, n_mels)
    label: int


@dataclass
class TrainingSet:
    """Prepared utterances plus the label space they were encoded against."""

    items: list[PreparedUtterance]
    label_names: tuple[str, ...]
    label_kind: str  # "speaker" or "emotion"
    phoneme_vocab: int
    n_mels: int


def prepare_features(
    records: list[UtteranceRecord], config: AudioConfig, features_dir: str | Path
) -> dict[str, Path]:
    """Extract and persist one mel file per record; returns id -> path."""
    features_dir = Path(features_dir)
    features_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for rec in records:
        wave = load_waveform(rec.audio_path, config)
        mel = extract_mel(wave, config)
        path = features_dir / f"{rec.id}.mel.npz"
        save_mel(path, mel, config)
        paths[rec.id] = path
    return paths


def prepare_training_set(
    records: list[UtteranceRecord],
    lexicon: Lexicon,
    config: AudioConfig,
    label_kind: str,
    features_dir: str | Path | None = None,
    emotions: tuple[str, ...] = EMOTIONS,
) -> TrainingSet:
    """Assemble (phonemes, mel, label) triples for one training stage.

    ``label_kind="speaker"`` labels by speaker (style pretraining);
    ``label_kind="emotion"`` labels by emotion and requires every record to
    carry one.
    """
    if label_kind not in ("speaker", "emotion"):
        raise ValidationError(f"label_kind must be 'speaker' or 'emotion', got {label_kind!r}")
    if not records:
        raise ValidationError("no records to prepare")
    if label_kind == "speaker":
        names = tuple(sorted({r.speaker for r in records}))
        label_of = {r.id: names.index(r.speaker) for r in records}
    else:
        for r in records:
            if r.emotion is None:
                raise ValidationError(f"record {r.id!r} has no emotion label")
        present = {r.emotion for r in records}
        names = tuple(e for e in emotions if e in present)
        label_of = {r.id: names.index(r.emotion) for r in records}

    items: list[PreparedUtterance] = []
    for rec in records:
        if features_dir is not None:
            mel = load_mel(Path(features_dir) / f"{rec.id}.mel.npz", config)
        else:
            mel = extract_mel(load_waveform(rec.audio_path, config), config)
        items.append(
            PreparedUtterance(
                record=rec,
                phonemes=lexicon.transcribe(rec.text),
                mel=mel,
                label=label_of[rec.id],
            )
        )
    return TrainingSet(
        items=items,
        label_names=names,
        label_kind=label_kind,
        phoneme_vocab=lexicon.vocab_size,
        n_mels=config.n_mels,
    )
