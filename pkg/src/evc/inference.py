"""Applying a trained model: reference embeddings and emotion conversion.

Conversion re-renders a source utterance with a different emotional style.
The linguistic content comes from the recognition encoder, so no transcript
is needed; the target emotion enters only as an embedding, either given
directly or averaged from a per-emotion reference set.  Target-side audio is
never an input: the operation's signature admits no target waveform.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioConfig, extract_mel, load_waveform, save_waveform
from .corpus import UtteranceRecord
from .errors import EvcError, ValidationError
from .model import (
    DecoderOutput,
    EmotionEmbedding,
    ModelState,
    asr_encode,
    decode,
    emotion_encode,
    save_decoder_output,
)
from .vocoder import GRIFFIN_LIM, VocoderState, synthesize

__all__ = [
    "REPORT_NAME",
    "ConversionResult",
    "average_emotion_embedding",
    "batch_convert",
    "convert",
    "reference_embeddings",
]

REPORT_NAME = "report.jsonl"


def average_emotion_embedding(
    references: Sequence[np.ndarray], state: ModelState
) -> EmotionEmbedding:
    """Arithmetic mean of the emotion embeddings of all reference mels.

    Accumulates in float64 so the result does not depend on reference order.
    """
    if len(references) == 0:
        raise ValidationError("need at least one reference mel")
    total = np.zeros(state.config.d_style, dtype=np.float64)
    for mel in references:
        total += emotion_encode(state, mel).vector.astype(np.float64)
    return EmotionEmbedding(vector=(total / len(references)).astype(np.float32))


def _reference_hash(references: Mapping[str, Sequence[np.ndarray]]) -> str:
    h = hashlib.sha256()
    for emotion in sorted(references):
        h.update(emotion.encode())
        for mel in references[emotion]:
            arr = np.ascontiguousarray(mel, dtype=np.float32)
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
    return h.hexdigest()[:16]


_BANK_CACHE: dict[tuple[str, str], dict[str, EmotionEmbedding]] = {}


def reference_embeddings(
    state: ModelState, references: Mapping[str, Sequence[np.ndarray]]
) -> dict[str, EmotionEmbedding]:
    """Average embedding per emotion, memoised on (model fingerprint,
    reference-set hash) so repeated conversions encode each reference once."""
    key = (state.fingerprint(), _reference_hash(references))
    bank = _BANK_CACHE.get(key)
    if bank is None:
        bank = {
            emotion: average_emotion_embedding(list(mels), state)
            for emotion, mels in references.items()
        }
        _BANK_CACHE[key] = bank
    return {e: EmotionEmbedding(vector=emb.vector.copy()) for e, emb in bank.items()}


@dataclass
class ConversionResult:
    """Converted audio together with the decode that produced it."""

    wave: np.ndarray  # float32 samples, output_frames * hop_length of them
    decoded: DecoderOutput
    emotion: str | None  # target label when one was given, else None
    source_frames: int
    output_frames: int

    @property
    def truncated(self) -> bool:
        return self.decoded.truncated


def convert(
    source: np.ndarray,
    target: str | EmotionEmbedding,
    state: ModelState,
    audio: AudioConfig,
    *,
    vocoder: VocoderState | str = GRIFFIN_LIM,
    references: Mapping[str, Sequence[np.ndarray]] | None = None,
    seed: int = 0,
    max_steps: int | None = None,
) -> ConversionResult:
    """Re-render a source waveform with the target emotion.

    Runs extraction, recognition encoding, free-running decoding with the
    target embedding, and synthesis.  A decode that hits the step cap is
    reported through the ``truncated`` flag, not as an error.
    """
    if state.stage != 2:
        raise ValidationError(f"conversion needs a stage-2 model, got stage {state.stage}")
    label: str | None = None
    if isinstance(target, EmotionEmbedding):
        embedding = target
    elif isinstance(target, str):
        label = target
        if references is None:
            raise ValidationError(f"no reference set given to resolve emotion {target!r}")
        bank = reference_embeddings(state, references)
        if target not in bank:
            raise ValidationError(
                f"no embedding available for emotion {target!r} (have {sorted(bank)})"
            )
        embedding = bank[target]
    else:
        raise ValidationError(
            f"target must be an emotion name or an embedding, got {type(target).__name__}"
        )
    mel = extract_mel(np.asarray(source, dtype=np.float32), audio)
    linguistic = asr_encode(state, mel)
    decoded = decode(state, linguistic, embedding, max_steps=max_steps)
    wave = synthesize(decoded.mel, vocoder, audio, seed=seed)
    return ConversionResult(
        wave=wave,
        decoded=decoded,
        emotion=label,
        source_frames=int(mel.shape[0]),
        output_frames=int(decoded.mel.shape[0]),
    )


def batch_convert(
    records: Sequence[UtteranceRecord],
    emotions: Sequence[str],
    state: ModelState,
    audio: AudioConfig,
    out_dir: str | Path,
    *,
    vocoder: VocoderState | str = GRIFFIN_LIM,
    references: Mapping[str, Sequence[np.ndarray]] | None = None,
    seed: int = 0,
    max_steps: int | None = None,
) -> list[dict[str, object]]:
    """Convert every record into every target emotion under ``out_dir``.

    Each attempted pair contributes exactly one report row; a failing pair is
    recorded with its error and the batch moves on.  Successful pairs write a
    wav plus a decode artifact, and the full report lands in
    ``out_dir/report.jsonl`` as one JSON object per line.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[dict[str, object]] = []
    for record in records:
        for emotion in emotions:
            row: dict[str, object] = {
                "source_id": record.id,
                "target_emotion": emotion,
                "output_path": None,
                "source_frames": None,
                "output_frames": None,
                "truncated": None,
                "error": None,
            }
            try:
                wave = load_waveform(record.audio_path, audio)
                result = convert(
                    wave,
                    emotion,
                    state,
                    audio,
                    vocoder=vocoder,
                    references=references,
                    seed=seed,
                    max_steps=max_steps,
                )
                stem = f"{record.id}__{emotion}"
                save_waveform(out_dir / f"{stem}.wav", result.wave, audio)
                save_decoder_output(
                    out_dir / f"{stem}.decode.npz",
                    result.decoded,
                    note={"utterance": record.id, "emotion": emotion},
                )
                row.update(
                    output_path=f"{stem}.wav",
                    source_frames=result.source_frames,
                    output_frames=result.output_frames,
                    truncated=result.decoded.truncated,
                )
            except (EvcError, OSError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    report = out_dir / REPORT_NAME
    report.write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8"
    )
    return rows
