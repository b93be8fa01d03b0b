"""Command-line entry point: every pipeline stage behind one program.

Each subcommand resolves its parameters in four layers — built-in defaults,
the ``EVC_SEED`` environment variable (seed only), an optional JSON config
file (``--config``), then explicit flags — with later layers winning.  The
resolved values are written next to the outputs as
``<command>.resolved.json``; running the same subcommand again with only
``--config <that file>`` reproduces the run bit-identically on the same
platform.  All paths are explicit: nothing is read from hidden state.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioConfig, extract_mel, load_waveform, save_waveform
from .corpus import (
    EMOTIONS,
    SPLITS,
    SyntheticCorpusSpec,
    UtteranceRecord,
    build_synthetic_corpus,
    default_lexicon,
    load_manifest,
    make_splits,
    prepare_features,
    prepare_training_set,
    write_manifest,
)
from .errors import EvcError, ValidationError
from .evaluation import evaluate_conversions, plot_attention, plot_embedding_map, silhouette
from .inference import batch_convert, convert
from .model import (
    ModelConfig,
    ModelState,
    emotion_encode,
    load_decoder_output,
    load_state,
    new_state,
    save_decoder_output,
)
from .objectives import LossWeights
from .training import (
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train_stage1,
    train_stage2,
)
from .vocoder import (
    GRIFFIN_LIM,
    VocoderConfig,
    VocoderExample,
    VocoderTrainConfig,
    fine_tune_vocoder,
    load_vocoder,
    pretrain_vocoder,
    save_vocoder,
    vocoder_nll,
)

__all__ = ["dispatch", "main"]


@dataclass(frozen=True)
class _Param:
    """One resolvable parameter: flag name, type, default, and usage text."""

    name: str
    type: type
    default: object = None
    help: str = ""
    required: bool = False

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


_AUDIO = [
    _Param("sample_rate", int, 16000, "audio sample rate in Hz"),
    _Param("n_fft", int, 1024, "FFT size in samples"),
    _Param("win_length", int, 800, "analysis window in samples"),
    _Param("hop_length", int, 200, "frame hop in samples"),
    _Param("n_mels", int, 80, "mel filterbank size"),
    _Param("fmin", float, 0.0, "lowest filterbank frequency in Hz"),
    _Param("fmax", float, 8000.0, "highest filterbank frequency in Hz"),
]

_MODEL = [
    _Param("d_linguistic", int, 64, "linguistic embedding size"),
    _Param("d_style", int, 32, "emotion embedding size"),
    _Param("d_encoder", int, 64, "encoder recurrent size (even)"),
    _Param("d_decoder", int, 128, "decoder recurrent size"),
    _Param("d_prenet", int, 32, "decoder prenet size"),
    _Param("d_attention", int, 64, "attention key size"),
    _Param("classifier_hidden", int, 64, "adversarial classifier hidden size"),
    _Param("reduction_factor", int, 2, "mel frames per decoder step"),
    _Param("max_decode_steps", int, 400, "free-running decode step cap"),
]

_TRAIN = [
    _Param("max_steps", int, 2000, "optimisation steps"),
    _Param("batch_size", int, 8, "utterances per step"),
    _Param("learning_rate", float, 1e-3, "main learning rate"),
    _Param("adversary_learning_rate", float, 1e-3, "classifier learning rate"),
    _Param("warmup_steps", int, 100, "linear warmup steps"),
    _Param("seed", int, 0, "training seed"),
    _Param("validation_every", int, 50, "steps between validation passes"),
    _Param("validation_fraction", float, 0.1, "held-out fraction for validation"),
    _Param("stop_pos_weight", float, 6.0, "positive-class weight of the stop loss"),
    _Param("feedback_noise", float, 0.05, "teacher-forcing feedback noise"),
    _Param("weight_recon", float, 1.0, "reconstruction loss weight"),
    _Param("weight_stop", float, 1.0, "stop loss weight"),
    _Param("weight_consist", float, 1.0, "text/audio consistency loss weight"),
    _Param("weight_classifier", float, 1.0, "classifier loss weight"),
    _Param("weight_adversarial", float, 0.02, "adversarial uniformity loss weight"),
    _Param("weight_emotion", float, 1.0, "emotion supervision loss weight"),
]

_VOCODER_TRAIN = [
    _Param("max_steps", int, 2000, "optimisation steps"),
    _Param("batch_size", int, 8, "crops per step"),
    _Param("crop_frames", int, 16, "mel frames per training crop"),
    _Param("learning_rate", float, 1e-3, "learning rate"),
    _Param("seed", int, 0, "training seed"),
]

_SCHEMAS: dict[str, list[_Param]] = {
    "synth-corpus": [
        _Param("out", str, help="output corpus directory", required=True),
        _Param("speakers", int, 2, "number of synthetic speakers"),
        _Param("utterances_per_cell", int, 10, "utterances per speaker and emotion"),
        _Param("emotions", str, "all", "'all', 'none' (unlabelled), or a comma list"),
        _Param("first_speaker", int, 0, "index of the first speaker voice"),
        _Param("sample_rate", int, 16000, "audio sample rate in Hz"),
        _Param("seed", int, 0, "corpus generation seed"),
    ],
    "prepare": [
        _Param("manifest", str, help="input manifest (JSON lines)", required=True),
        _Param("out", str, help="output directory", required=True),
        _Param("train_quota", int, 8, "train records per (speaker, emotion)"),
        _Param("reference_quota", int, 4, "reference records per (speaker, emotion)"),
        _Param("evaluation_quota", int, 4, "evaluation records per (speaker, emotion)"),
        _Param("seed", int, 0, "split assignment seed"),
        *_AUDIO,
    ],
    "train-stage1": [
        _Param("data", str, help="manifest of the multi-speaker corpus", required=True),
        _Param("out", str, help="output directory", required=True),
        _Param("split", str, "all", "train on this split ('all' keeps every record)"),
        _Param("features_dir", str, None, "directory of precomputed features"),
        *_AUDIO,
        *_MODEL,
        *_TRAIN,
    ],
    "train-stage2": [
        _Param("data", str, help="manifest of the emotion-labelled corpus", required=True),
        _Param("out", str, help="output directory", required=True),
        _Param("init", str, None, "stage-1 checkpoint to start from (omit: from scratch)"),
        _Param("split", str, "all", "train on this split ('all' keeps every record)"),
        _Param("features_dir", str, None, "directory of precomputed features"),
        *_AUDIO,
        *_MODEL,
        *_TRAIN,
    ],
    "vocoder-pretrain": [
        _Param("data", str, help="manifest of the pretraining corpus", required=True),
        _Param("out", str, help="output directory", required=True),
        _Param("split", str, "all", "train on this split ('all' keeps every record)"),
        _Param("d_embed", int, 32, "sample code embedding size"),
        _Param("d_hidden", int, 96, "recurrent size"),
        _Param("mu", float, 3.0, "companding strength"),
        *_VOCODER_TRAIN,
        *_AUDIO,
    ],
    "vocoder-finetune": [
        _Param("init", str, help="pretrained vocoder file", required=True),
        _Param("data", str, help="manifest of the emotional corpus", required=True),
        _Param("out", str, help="output directory", required=True),
        _Param("split", str, "all", "train on this split ('all' keeps every record)"),
        *_VOCODER_TRAIN,
        *_AUDIO,
    ],
    "convert": [
        _Param("model", str, help="stage-2 checkpoint or model state", required=True),
        _Param("out", str, help="output directory", required=True),
        _Param("references", str, help="manifest of reference utterances", required=True),
        _Param("reference_split", str, "all", "split filter for the references"),
        _Param("source", str, None, "single source wav (needs --emotion)"),
        _Param("emotion", str, None, "target emotion for --source"),
        _Param("sources", str, None, "manifest of source utterances (batch mode)"),
        _Param("split", str, "all", "split filter for --sources"),
        _Param("emotions", str, "all", "'all' or comma list of batch target emotions"),
        _Param("vocoder", str, GRIFFIN_LIM, "'griffin-lim' or 'neural'"),
        _Param("vocoder_state", str, None, "trained vocoder file for --vocoder neural"),
        _Param("max_steps", int, 0, "decode step cap (0 keeps the model default)"),
        _Param("seed", int, 0, "synthesis sampling seed"),
        *_AUDIO,
    ],
    "evaluate": [
        _Param("conversions", str, help="directory written by convert", required=True),
        _Param("sources", str, help="manifest of the original sources", required=True),
        _Param("targets", str, help="manifest of parallel target recordings", required=True),
        _Param("mcep_order", int, 13, "mel-cepstral order for distortion"),
        *_AUDIO,
    ],
    "visualize-embeddings": [
        _Param("model", str, help="checkpoint or model state", required=True),
        _Param("data", str, help="manifest of emotion-labelled utterances", required=True),
        _Param("out", str, help="output directory", required=True),
        _Param("split", str, "all", "split filter for the utterances"),
        _Param("seed", int, 0, "projection seed"),
        _Param("overwrite", bool, False, "replace existing figures"),
        *_AUDIO,
    ],
    "visualize-attention": [
        _Param("decode", str, help="decode artifact (.decode.npz)", required=True),
        _Param("out", str, help="output directory", required=True),
        _Param("overwrite", bool, False, "replace an existing figure"),
    ],
}

_COMMAND_HELP = {
    "synth-corpus": "generate a synthetic test corpus",
    "prepare": "assign corpus splits and extract features",
    "train-stage1": "style initialisation on a multi-speaker corpus",
    "train-stage2": "emotion training on labelled data",
    "vocoder-pretrain": "train the neural vocoder from scratch",
    "vocoder-finetune": "continue vocoder training on emotional audio",
    "convert": "re-render source utterances with a target emotion",
    "evaluate": "score conversions against parallel targets",
    "visualize": "render embedding maps or attention plots",
}


def _add_params(parser: argparse.ArgumentParser, schema: list[_Param]) -> None:
    parser.add_argument(
        "--config", default=None, help="JSON config file or a resolved-config snapshot"
    )
    for param in schema:
        text = param.help + (" (required)" if param.required else "")
        if param.type is bool:
            parser.add_argument(
                param.flag, dest=param.name, action="store_true", default=None, help=text
            )
        else:
            parser.add_argument(
                param.flag, dest=param.name, type=param.type, default=None, help=text
            )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evc", description="Two-stage emotional voice conversion toolkit."
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    for command, schema in _SCHEMAS.items():
        if command.startswith("visualize-"):
            continue
        sub = subparsers.add_parser(
            command, help=_COMMAND_HELP[command], description=_COMMAND_HELP[command]
        )
        _add_params(sub, schema)
    vis = subparsers.add_parser(
        "visualize", help=_COMMAND_HELP["visualize"], description=_COMMAND_HELP["visualize"]
    )
    modes = vis.add_subparsers(dest="what", metavar="what")
    for mode, text in (("embeddings", "t-SNE map of emotion embeddings"), ("attention", "attention heatmap of one decode")):
        sub = modes.add_parser(mode, help=text, description=text)
        _add_params(sub, _SCHEMAS[f"visualize-{mode}"])
    return parser


def _load_config(path: str | None, command: str) -> dict[str, object]:
    if path is None:
        return {}
    file = Path(path)
    if not file.exists():
        raise ValidationError(f"config file not found: {file}")
    try:
        data = json.loads(file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{file} is not valid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"{file} must hold a JSON object")
    if "command" in data or "parameters" in data:
        if data.get("command") != command:
            raise ValidationError(
                f"config snapshot is for {data.get('command')!r}, not {command!r}"
            )
        params = data.get("parameters", {})
        if not isinstance(params, dict):
            raise ValidationError(f"{file} parameters must be an object")
        return dict(params)
    return dict(data)


def _coerce(param: _Param, value: object) -> object:
    if param.type is bool:
        if isinstance(value, bool):
            return value
        raise ValidationError(f"parameter {param.name} must be a boolean, got {value!r}")
    try:
        return param.type(value)  # type: ignore[call-arg]
    except (TypeError, ValueError) as exc:
        raise ValidationError(
            f"parameter {param.name} expects {param.type.__name__}, got {value!r}"
        ) from exc


def _resolve(argv: list[str]) -> tuple[str, dict[str, object]]:
    args = _build_parser().parse_args(argv)
    command = args.command
    if command == "visualize":
        if getattr(args, "what", None) is None:
            raise ValidationError("visualize needs a mode: embeddings or attention")
        command = f"visualize-{args.what}"
    schema = _SCHEMAS[command]
    config_values = _load_config(args.config, command)
    params: dict[str, object] = {}
    missing = object()
    for param in schema:
        value = getattr(args, param.name)
        config_value = config_values.pop(param.name, missing)
        if value is None and config_value is not missing and config_value is not None:
            value = config_value
        if value is None and param.name == "seed" and os.environ.get("EVC_SEED"):
            value = os.environ["EVC_SEED"]
        if value is None:
            value = param.default
        if value is None:
            if param.required:
                raise ValidationError(f"missing required parameter {param.flag}")
            params[param.name] = None
        else:
            params[param.name] = _coerce(param, value)
    if config_values:
        raise ValidationError(
            f"unknown config keys for {command}: {', '.join(sorted(config_values))}"
        )
    return command, params


def _snapshot(out_dir: Path, command: str, params: dict[str, object]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, "parameters": params}
    (out_dir / f"{command}.resolved.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8")


def _audio(p: dict) -> AudioConfig:
    return AudioConfig(
        sample_rate=p["sample_rate"],
        n_fft=p["n_fft"],
        win_length=p["win_length"],
        hop_length=p["hop_length"],
        n_mels=p["n_mels"],
        fmin=p["fmin"],
        fmax=p["fmax"],
    )


def _filter_split(records: list[UtteranceRecord], split: str) -> list[UtteranceRecord]:
    if split == "all":
        return records
    if split not in SPLITS:
        raise ValidationError(f"unknown split {split!r}; use one of {list(SPLITS)} or 'all'")
    kept = [r for r in records if r.split == split]
    if not kept:
        raise ValidationError(f"no records in split {split!r}")
    return kept


def _parse_emotions(raw: str) -> tuple[str, ...] | None:
    if raw == "all":
        return EMOTIONS
    if raw == "none":
        return None
    names = tuple(name.strip() for name in raw.split(",") if name.strip())
    if not names:
        raise ValidationError(f"no emotion names in {raw!r}")
    return names


def _model_config(p: dict, phoneme_vocab: int, n_labels: int, n_mels: int) -> ModelConfig:
    return ModelConfig(
        phoneme_vocab=phoneme_vocab,
        n_labels=n_labels,
        n_mels=n_mels,
        d_linguistic=p["d_linguistic"],
        d_style=p["d_style"],
        d_encoder=p["d_encoder"],
        d_decoder=p["d_decoder"],
        d_prenet=p["d_prenet"],
        d_attention=p["d_attention"],
        classifier_hidden=p["classifier_hidden"],
        reduction_factor=p["reduction_factor"],
        max_decode_steps=p["max_decode_steps"],
    )


def _train_config(p: dict, stage: int) -> TrainConfig:
    weights = LossWeights(
        recon=p["weight_recon"],
        stop=p["weight_stop"],
        consist=p["weight_consist"],
        classifier=p["weight_classifier"],
        adversarial=p["weight_adversarial"],
        emotion=p["weight_emotion"],
    )
    return TrainConfig(
        stage=stage,
        max_steps=p["max_steps"],
        batch_size=p["batch_size"],
        learning_rate=p["learning_rate"],
        adversary_learning_rate=p["adversary_learning_rate"],
        warmup_steps=p["warmup_steps"],
        weights=weights,
        seed=p["seed"],
        validation_every=p["validation_every"],
        validation_fraction=p["validation_fraction"],
        stop_pos_weight=p["stop_pos_weight"],
        feedback_noise=p["feedback_noise"],
    )


def _load_model(path: str) -> ModelState:
    try:
        return load_checkpoint(path).state
    except ValidationError:
        return load_state(path)


def _cmd_synth_corpus(command: str, p: dict) -> None:
    out = Path(p["out"])
    _snapshot(out, command, p)
    spec = SyntheticCorpusSpec(
        n_speakers=p["speakers"],
        emotions=_parse_emotions(p["emotions"]),
        utterances_per_cell=p["utterances_per_cell"],
        sample_rate=p["sample_rate"],
        seed=p["seed"],
        first_speaker=p["first_speaker"],
    )
    records = build_synthetic_corpus(spec, out)
    print(f"wrote {len(records)} utterances under {out}")


def _cmd_prepare(command: str, p: dict) -> None:
    out = Path(p["out"])
    _snapshot(out, command, p)
    records = load_manifest(p["manifest"])
    assigned = make_splits(
        records, p["train_quota"], p["reference_quota"], p["evaluation_quota"], seed=p["seed"]
    )
    write_manifest(assigned, out / "manifest.jsonl")
    for name in SPLITS:
        write_manifest([r for r in assigned if r.split == name], out / f"{name}.jsonl")
    prepare_features(assigned, _audio(p), out / "features")
    print(f"prepared {len(assigned)} records into {out}")


def _cmd_train_stage1(command: str, p: dict) -> None:
    out = Path(p["out"])
    _snapshot(out, command, p)
    records = _filter_split(load_manifest(p["data"]), p["split"])
    training_set = prepare_training_set(
        records, default_lexicon(), _audio(p), label_kind="speaker", features_dir=p["features_dir"]
    )
    model_config = _model_config(
        p, training_set.phoneme_vocab, len(training_set.label_names), training_set.n_mels
    )
    checkpoint = train_stage1(training_set, _train_config(p, stage=1), model_config)
    save_checkpoint(checkpoint, out / "checkpoint.npz")
    _write_jsonl(out / "metrics.jsonl", checkpoint.history)
    print(f"stage-1 checkpoint at {out / 'checkpoint.npz'} (best step {checkpoint.best_step})")


def _cmd_train_stage2(command: str, p: dict) -> None:
    out = Path(p["out"])
    _snapshot(out, command, p)
    records = _filter_split(load_manifest(p["data"]), p["split"])
    training_set = prepare_training_set(
        records, default_lexicon(), _audio(p), label_kind="emotion", features_dir=p["features_dir"]
    )
    if p["init"] is not None:
        base = _load_model(p["init"])
    else:
        base = new_state(
            _model_config(
                p, training_set.phoneme_vocab, len(training_set.label_names), training_set.n_mels
            ),
            stage=1,
            seed=p["seed"],
        )
    checkpoint = train_stage2(base, training_set, _train_config(p, stage=2))
    save_checkpoint(checkpoint, out / "checkpoint.npz")
    _write_jsonl(out / "metrics.jsonl", checkpoint.history)
    print(f"stage-2 checkpoint at {out / 'checkpoint.npz'} (best step {checkpoint.best_step})")


def _vocoder_examples(records: list[UtteranceRecord], audio: AudioConfig) -> list[VocoderExample]:
    return [
        VocoderExample.from_wave(load_waveform(rec.audio_path, audio), audio) for rec in records
    ]


def _vocoder_train_config(p: dict) -> VocoderTrainConfig:
    return VocoderTrainConfig(
        max_steps=p["max_steps"],
        batch_size=p["batch_size"],
        crop_frames=p["crop_frames"],
        learning_rate=p["learning_rate"],
        seed=p["seed"],
    )


def _cmd_vocoder_pretrain(command: str, p: dict) -> None:
    out = Path(p["out"])
    _snapshot(out, command, p)
    audio = _audio(p)
    records = _filter_split(load_manifest(p["data"]), p["split"])
    examples = _vocoder_examples(records, audio)
    config = VocoderConfig.from_audio(audio, d_embed=p["d_embed"], d_hidden=p["d_hidden"], mu=p["mu"])
    state = pretrain_vocoder(examples, config, _vocoder_train_config(p))
    save_vocoder(state, out / "vocoder.npz")
    nll = vocoder_nll(state, examples)
    _write_jsonl(
        out / "metrics.jsonl",
        [{"step": p["max_steps"], "nll": nll, "provenance": state.provenance}],
    )
    print(f"vocoder at {out / 'vocoder.npz'} (training-set nll {nll:.4f})")


def _cmd_vocoder_finetune(command: str, p: dict) -> None:
    out = Path(p["out"])
    _snapshot(out, command, p)
    audio = _audio(p)
    records = _filter_split(load_manifest(p["data"]), p["split"])
    examples = _vocoder_examples(records, audio)
    state = fine_tune_vocoder(load_vocoder(p["init"]), examples, _vocoder_train_config(p))
    save_vocoder(state, out / "vocoder.npz")
    nll = vocoder_nll(state, examples)
    _write_jsonl(
        out / "metrics.jsonl",
        [{"step": p["max_steps"], "nll": nll, "provenance": state.provenance}],
    )
    print(f"vocoder at {out / 'vocoder.npz'} (training-set nll {nll:.4f})")


def _select_vocoder(p: dict):
    kind = p["vocoder"]
    if kind == GRIFFIN_LIM:
        return GRIFFIN_LIM
    if kind == "neural":
        if p["vocoder_state"] is None:
            raise ValidationError("--vocoder neural needs --vocoder-state")
        return load_vocoder(p["vocoder_state"])
    raise ValidationError(f"vocoder must be 'griffin-lim' or 'neural', got {kind!r}")


def _cmd_convert(command: str, p: dict) -> None:
    out = Path(p["out"])
    _snapshot(out, command, p)
    audio = _audio(p)
    if (p["source"] is None) == (p["sources"] is None):
        raise ValidationError("pass exactly one of --source or --sources")
    state = _load_model(p["model"])
    voc = _select_vocoder(p)
    references: dict[str, list[np.ndarray]] = {}
    for rec in _filter_split(load_manifest(p["references"]), p["reference_split"]):
        if rec.emotion is None:
            continue
        mel = extract_mel(load_waveform(rec.audio_path, audio), audio)
        references.setdefault(rec.emotion, []).append(mel)
    if not references:
        raise ValidationError("the reference manifest holds no emotion-labelled records")
    max_steps = p["max_steps"] or None
    if p["source"] is not None:
        if p["emotion"] is None:
            raise ValidationError("--source needs --emotion")
        wave = load_waveform(p["source"], audio)
        result = convert(
            wave,
            p["emotion"],
            state,
            audio,
            vocoder=voc,
            references=references,
            seed=p["seed"],
            max_steps=max_steps,
        )
        save_waveform(out / "converted.wav", result.wave, audio)
        save_decoder_output(
            out / "converted.decode.npz",
            result.decoded,
            note={"utterance": Path(p["source"]).stem, "emotion": p["emotion"]},
        )
        print(
            f"converted {p['source']} -> {out / 'converted.wav'} "
            f"({result.output_frames} frames, truncated={result.truncated})"
        )
    else:
        source_records = _filter_split(load_manifest(p["sources"]), p["split"])
        if p["emotions"] == "all":
            emotions = sorted(references)
        else:
            emotions = list(_parse_emotions(p["emotions"]) or ())
        rows = batch_convert(
            source_records,
            emotions,
            state,
            audio,
            out,
            vocoder=voc,
            references=references,
            seed=p["seed"],
            max_steps=max_steps,
        )
        failures = sum(1 for row in rows if row["error"] is not None)
        print(f"converted {len(rows) - failures}/{len(rows)} pairs into {out}")


def _cmd_evaluate(command: str, p: dict) -> None:
    conversions = Path(p["conversions"])
    _snapshot(conversions, command, p)
    rows = evaluate_conversions(
        conversions,
        load_manifest(p["sources"]),
        load_manifest(p["targets"]),
        _audio(p),
        mcep_order=p["mcep_order"],
    )
    for row in rows:
        if row["kind"] == "aggregate":
            print(json.dumps(row, sort_keys=True))


def _cmd_visualize_embeddings(command: str, p: dict) -> None:
    out = Path(p["out"])
    _snapshot(out, command, p)
    audio = _audio(p)
    state = _load_model(p["model"])
    records = [
        rec
        for rec in _filter_split(load_manifest(p["data"]), p["split"])
        if rec.emotion is not None
    ]
    if not records:
        raise ValidationError("no emotion-labelled records to embed")
    vectors, labels = [], []
    for rec in records:
        mel = extract_mel(load_waveform(rec.audio_path, audio), audio)
        vectors.append(emotion_encode(state, mel).vector)
        labels.append(rec.emotion)
    points = np.stack(vectors)
    figure, _ = plot_embedding_map(
        points, labels, out / "embeddings.png", seed=p["seed"], overwrite=bool(p["overwrite"])
    )
    score = silhouette(points, labels)
    (out / "embeddings-silhouette.json").write_text(
        json.dumps({"points": len(labels), "silhouette": score}, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"embedding map at {figure} (silhouette {score:.3f})")


def _cmd_visualize_attention(command: str, p: dict) -> None:
    out = Path(p["out"])
    _snapshot(out, command, p)
    output, meta = load_decoder_output(p["decode"])
    utterance = str(meta.get("utterance", Path(p["decode"]).stem))
    emotion = meta.get("emotion")
    name = f"attention-{utterance}" + (f"__{emotion}" if emotion else "") + ".png"
    label = utterance + (f" -> {emotion}" if emotion else "")
    path = plot_attention(output, out / name, label, overwrite=bool(p["overwrite"]))
    print(f"attention plot at {path}")


_HANDLERS: dict[str, Callable[[str, dict], None]] = {
    "synth-corpus": _cmd_synth_corpus,
    "prepare": _cmd_prepare,
    "train-stage1": _cmd_train_stage1,
    "train-stage2": _cmd_train_stage2,
    "vocoder-pretrain": _cmd_vocoder_pretrain,
    "vocoder-finetune": _cmd_vocoder_finetune,
    "convert": _cmd_convert,
    "evaluate": _cmd_evaluate,
    "visualize-embeddings": _cmd_visualize_embeddings,
    "visualize-attention": _cmd_visualize_attention,
}


def dispatch(argv: Sequence[str]) -> int:
    """Run one subcommand: 0 on success, 1 on invalid input, 2 on failure."""
    try:
        command, params = _resolve(list(argv))
    except SystemExit as exc:  # argparse already printed usage or help
        code = exc.code if isinstance(exc.code, int) else 0
        return 0 if code == 0 else 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        _HANDLERS[command](command, params)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EvcError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> int:
    return dispatch(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
