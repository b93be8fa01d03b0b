"""Sequence-to-sequence conversion network and its serialisable state.

Five components share one embedding space: a text encoder and a downsampling
audio encoder both produce linguistic sequences, a style encoder pools a mel
spectrogram into a bounded style vector with a bias-free projection to label
logits, a per-position classifier predicts the label from linguistic vectors,
and an attention decoder autoregressively emits mel frames in groups of
``reduction_factor`` with a stop head.

Parameters live in a plain ``ModelState`` of named float32 arrays; the torch
module is an internal execution detail.  All public operations take and
return numpy arrays for single utterances; batched differentiable forwards
are built by the training loop on top of the same module.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .audio import LOG_FLOOR
from .errors import ValidationError
from .store import load_archive, save_archive


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and decoding limits for the conversion network."""

    phoneme_vocab: int
    n_labels: int
    n_mels: int = 80
    d_linguistic: int = 64
    d_style: int = 32
    d_encoder: int = 64
    d_decoder: int = 128
    d_prenet: int = 32
    d_attention: int = 64
    classifier_hidden: int = 64
    reduction_factor: int = 2
    max_decode_steps: int = 400
    stop_threshold: float = 0.5
    mel_center: float = -5.75
    mel_scale: float = 3.0

    def __post_init__(self) -> None:
        if self.phoneme_vocab < 4:
            raise ValidationError(f"phoneme_vocab must be >= 4, got {self.phoneme_vocab}")
        if self.n_labels < 2:
            raise ValidationError(f"n_labels must be >= 2, got {self.n_labels}")
        for name in ("n_mels", "d_linguistic", "d_style", "d_decoder", "d_prenet", "d_attention", "classifier_hidden"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d_encoder < 2 or self.d_encoder % 2 != 0:
            raise ValidationError(f"d_encoder must be even and >= 2, got {self.d_encoder}")
        if self.reduction_factor < 1:
            raise ValidationError(f"reduction_factor must be >= 1, got {self.reduction_factor}")
        if self.max_decode_steps < 1:
            raise ValidationError(f"max_decode_steps must be >= 1, got {self.max_decode_steps}")
        if not (0.0 < self.stop_threshold < 1.0):
            raise ValidationError(f"stop_threshold must be in (0, 1), got {self.stop_threshold}")
        if self.mel_scale <= 0:
            raise ValidationError(f"mel_scale must be positive, got {self.mel_scale}")

    @property
    def d_memory(self) -> int:
        return self.d_linguistic + self.d_style

    @property
    def go_value(self) -> float:
        """Decoder start frame: the silence floor in normalised mel units."""
        return (LOG_FLOOR - self.mel_center) / self.mel_scale


@dataclass
class LinguisticSequence:
    """Per-position linguistic vectors, shape (length, d_linguistic)."""

    vectors: np.ndarray
    source: str = "text"  # "text" | "audio"


@dataclass
class EmotionEmbedding:
    """Utterance-level style/emotion embedding, shape (d_style,)."""

    vector: np.ndarray


@dataclass
class DecoderOutput:
    """One decode: frame groups, per-step stop probabilities, attention.

    Teacher-forced decodes align with the target frame count and are never
    truncated; free-running decodes set ``truncated`` when the step cap fired
    before the stop head did.
    """

    mel: np.ndarray  # (steps * reduction_factor, n_mels)
    stop_probs: np.ndarray  # (steps,) in [0, 1]
    attention: np.ndarray  # (steps, memory_length)
    truncated: bool = False


class _TextEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.embedding = nn.Embedding(cfg.phoneme_vocab, cfg.d_encoder, padding_idx=0)
        self.rnn = nn.GRU(cfg.d_encoder, cfg.d_encoder // 2, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(cfg.d_encoder, cfg.d_linguistic)

    def forward(self, phonemes: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        x = self.embedding(phonemes)
        packed = nn.utils.rnn.pack_padded_sequence(
            x, lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        out, _ = self.rnn(packed)
        out, _ = nn.utils.rnn.pad_packed_sequence(out, batch_first=True, total_length=phonemes.shape[1])
        return self.proj(out)


def downsampled_length(n_frames: int) -> int:
    """Audio-encoder output length for an input of ``n_frames`` mel frames."""
    return math.ceil(math.ceil(n_frames / 2) / 2)


class _AudioEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.conv1 = nn.Conv1d(cfg.n_mels, cfg.d_encoder, 5, stride=2, padding=2)
        self.conv2 = nn.Conv1d(cfg.d_encoder, cfg.d_encoder, 5, stride=2, padding=2)
        self.rnn = nn.GRU(cfg.d_encoder, cfg.d_encoder // 2, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(cfg.d_encoder, cfg.d_linguistic)

    def forward(self, mel: torch.Tensor, lengths: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        x = torch.relu(self.conv1(mel.transpose(1, 2)))
        x = torch.relu(self.conv2(x)).transpose(1, 2)
        out_lengths = torch.div(torch.div(lengths + 1, 2, rounding_mode="floor") + 1, 2, rounding_mode="floor")
        out_lengths = torch.clamp(out_lengths, min=1)
        packed = nn.utils.rnn.pack_padded_sequence(
            x, out_lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        out, _ = self.rnn(packed)
        out, _ = nn.utils.rnn.pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
        return self.proj(out), out_lengths


class _StyleEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.conv1 = nn.Conv1d(cfg.n_mels, cfg.d_encoder, 5, stride=2, padding=2)
        self.conv2 = nn.Conv1d(cfg.d_encoder, cfg.d_encoder, 5, stride=2, padding=2)
        self.rnn = nn.GRU(cfg.d_encoder, cfg.d_encoder, batch_first=True)
        self.proj = nn.Linear(cfg.d_encoder, cfg.d_style)

    def forward(self, mel: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        x = torch.relu(self.conv1(mel.transpose(1, 2)))
        x = torch.relu(self.conv2(x)).transpose(1, 2)
        out_lengths = torch.div(torch.div(lengths + 1, 2, rounding_mode="floor") + 1, 2, rounding_mode="floor")
        out_lengths = torch.clamp(out_lengths, min=1)
        packed = nn.utils.rnn.pack_padded_sequence(
            x, out_lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        out, _ = self.rnn(packed)
        out, _ = nn.utils.rnn.pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
        mask = _length_mask(out_lengths, out.shape[1]).unsqueeze(-1)
        pooled = (out * mask).sum(dim=1) / mask.sum(dim=1)
        return torch.tanh(self.proj(pooled))


class _Classifier(nn.Module):
    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.hidden = nn.Linear(cfg.d_linguistic, cfg.classifier_hidden)
        self.out = nn.Linear(cfg.classifier_hidden, cfg.n_labels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.out(torch.relu(self.hidden(x)))


class _Decoder(nn.Module):
    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.cfg = cfg
        self.prenet = nn.Sequential(
            nn.Linear(cfg.n_mels, cfg.d_prenet), nn.ReLU(), nn.Linear(cfg.d_prenet, cfg.d_prenet), nn.ReLU()
        )
        self.rnn = nn.GRUCell(cfg.d_prenet + cfg.d_memory, cfg.d_decoder)
        self.query = nn.Linear(cfg.d_decoder, cfg.d_attention, bias=False)
        self.memory_layer = nn.Linear(cfg.d_memory, cfg.d_attention)
        self.score = nn.Linear(cfg.d_attention, 1, bias=False)
        self.proj_mel = nn.Linear(cfg.d_decoder + cfg.d_memory, cfg.n_mels * cfg.reduction_factor)
        self.proj_stop = nn.Linear(cfg.d_decoder + cfg.d_memory, 1)

    def step(
        self,
        prev_frame: torch.Tensor,  # (B, n_mels) normalised
        context: torch.Tensor,  # (B, d_memory)
        hidden: torch.Tensor,  # (B, d_decoder)
        memory: torch.Tensor,  # (B, L, d_memory)
        memory_keys: torch.Tensor,  # (B, L, d_attention)
        memory_mask: torch.Tensor,  # (B, L) bool, True where valid
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        x = torch.cat([self.prenet(prev_frame), context], dim=-1)
        hidden = self.rnn(x, hidden)
        scores = self.score(torch.tanh(self.query(hidden).unsqueeze(1) + memory_keys)).squeeze(-1)
        scores = scores.masked_fill(~memory_mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        context = torch.bmm(weights.unsqueeze(1), memory).squeeze(1)
        features = torch.cat([hidden, context], dim=-1)
        frames = self.proj_mel(features).view(-1, self.cfg.reduction_factor, self.cfg.n_mels)
        stop_logit = self.proj_stop(features).squeeze(-1)
        return frames, stop_logit, weights, context, hidden


class ConversionNet(nn.Module):
    """The full network; submodules are reached through named attributes."""

    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.cfg = cfg
        self.text_encoder = _TextEncoder(cfg)
        self.audio_encoder = _AudioEncoder(cfg)
        self.style_encoder = _StyleEncoder(cfg)
        self.style_head = nn.Linear(cfg.d_style, cfg.n_labels, bias=False)
        self.classifier = _Classifier(cfg)
        self.decoder = _Decoder(cfg)

    def normalise_mel(self, mel: torch.Tensor) -> torch.Tensor:
        return (mel - self.cfg.mel_center) / self.cfg.mel_scale

    def denormalise_mel(self, mel: torch.Tensor) -> torch.Tensor:
        return mel * self.cfg.mel_scale + self.cfg.mel_center

    def build_memory(
        self, linguistic: torch.Tensor, style: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Concatenate the style vector onto every linguistic position."""
        expanded = style.unsqueeze(1).expand(-1, linguistic.shape[1], -1)
        memory = torch.cat([linguistic, expanded], dim=-1)
        return memory, self.decoder.memory_layer(memory)

    def decode_teacher(
        self,
        memory: torch.Tensor,
        memory_keys: torch.Tensor,
        memory_mask: torch.Tensor,
        target_mel: torch.Tensor,  # (B, T, n_mels) raw mel domain
        feedback_noise: tuple[float, torch.Generator] | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        cfg = self.cfg
        batch, frames = target_mel.shape[0], target_mel.shape[1]
        steps = math.ceil(frames / cfg.reduction_factor)
        padded = frames if frames == steps * cfg.reduction_factor else steps * cfg.reduction_factor
        target = self.normalise_mel(target_mel)
        if padded != frames:
            pad = target.new_full((batch, padded - frames, cfg.n_mels), cfg.go_value)
            target = torch.cat([target, pad], dim=1)
        groups = target.view(batch, steps, cfg.reduction_factor, cfg.n_mels)

        prev = target.new_full((batch, cfg.n_mels), cfg.go_value)
        context = memory.new_zeros(batch, cfg.d_memory)
        hidden = memory.new_zeros(batch, cfg.d_decoder)
        out_frames, out_stops, out_weights = [], [], []
        for s in range(steps):
            frames_s, stop_s, weights_s, context, hidden = self.decoder.step(
                prev, context, hidden, memory, memory_keys, memory_mask
            )
            out_frames.append(frames_s)
            out_stops.append(stop_s)
            out_weights.append(weights_s)
            prev = groups[:, s, -1, :]
            if feedback_noise is not None:
                # Blur the teacher frame slightly so free-running decodes
                # tolerate their own imperfect feedback.
                std, generator = feedback_noise
                prev = prev + std * torch.randn(prev.shape, generator=generator)
        mel = self.denormalise_mel(torch.cat(out_frames, dim=1))
        return mel, torch.stack(out_stops, dim=1), torch.stack(out_weights, dim=1)

    def decode_free(
        self,
        memory: torch.Tensor,
        memory_keys: torch.Tensor,
        memory_mask: torch.Tensor,
        max_steps: int | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, bool]:
        cfg = self.cfg
        if memory.shape[0] != 1:
            raise ValidationError("free-running decode operates on a single utterance")
        limit = cfg.max_decode_steps if max_steps is None else max_steps
        prev = memory.new_full((1, cfg.n_mels), cfg.go_value)
        context = memory.new_zeros(1, cfg.d_memory)
        hidden = memory.new_zeros(1, cfg.d_decoder)
        out_frames, out_stops, out_weights = [], [], []
        stopped = False
        for _ in range(limit):
            frames_s, stop_s, weights_s, context, hidden = self.decoder.step(
                prev, context, hidden, memory, memory_keys, memory_mask
            )
            out_frames.append(frames_s)
            out_stops.append(torch.sigmoid(stop_s))
            out_weights.append(weights_s)
            prev = frames_s[:, -1, :]
            if out_stops[-1].item() > cfg.stop_threshold:
                stopped = True
                break
        mel = self.denormalise_mel(torch.cat(out_frames, dim=1))
        return mel, torch.cat(out_stops, dim=0), torch.cat(out_weights, dim=0), stopped


def _length_mask(lengths: torch.Tensor, max_length: int) -> torch.Tensor:
    return torch.arange(max_length, device=lengths.device)[None, :] < lengths[:, None]


@dataclass
class ModelState:
    """Configuration, training stage, and every parameter as a named array."""

    config: ModelConfig
    stage: int
    arrays: dict[str, np.ndarray]

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(dataclasses.asdict(self.config), sort_keys=True).encode())
        h.update(str(self.stage).encode())
        for name in sorted(self.arrays):
            h.update(name.encode())
            h.update(self.arrays[name].tobytes())
        return h.hexdigest()[:16]


def _state_arrays(module: nn.Module) -> dict[str, np.ndarray]:
    return {
        name: tensor.detach().cpu().numpy().astype(np.float32).copy()
        for name, tensor in module.state_dict().items()
    }


def new_state(config: ModelConfig, stage: int = 1, seed: int = 0) -> ModelState:
    """Freshly initialised parameters, reproducible from ``seed``."""
    if stage not in (1, 2):
        raise ValidationError(f"stage must be 1 or 2, got {stage}")
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        module = ConversionNet(config)
    return ModelState(config=config, stage=stage, arrays=_state_arrays(module))


def module_from_state(state: ModelState) -> ConversionNet:
    """Materialise the torch module; results are cached on the state."""
    cached = getattr(state, "_module", None)
    if cached is not None:
        return cached
    module = ConversionNet(state.config)
    tensors = {name: torch.from_numpy(arr.copy()) for name, arr in state.arrays.items()}
    module.load_state_dict(tensors)
    module.eval()
    object.__setattr__(state, "_module", module)
    return module


def state_from_module(module: ConversionNet, stage: int) -> ModelState:
    return ModelState(config=module.cfg, stage=stage, arrays=_state_arrays(module))


_HEAD_ARRAYS = ("style_head.weight", "classifier.out.weight", "classifier.out.bias")


def reinit_for_stage2(state: ModelState, n_labels: int, seed: int = 0) -> ModelState:
    """Start emotion training: keep every weight except the two label heads.

    The style-space projection and the classifier output layer are freshly
    initialised at the new label count; everything else is copied bit for bit.
    """
    if state.stage != 1:
        raise ValidationError(f"expected a stage-1 state, got stage {state.stage}")
    if n_labels < 2:
        raise ValidationError(f"n_labels must be >= 2, got {n_labels}")
    new_config = dataclasses.replace(state.config, n_labels=n_labels)
    fresh = new_state(new_config, stage=2, seed=seed)
    arrays = {name: arr.copy() for name, arr in state.arrays.items()}
    for name in _HEAD_ARRAYS:
        arrays[name] = fresh.arrays[name]
    return ModelState(config=new_config, stage=2, arrays=arrays)


def save_state(state: ModelState, path: str | Path) -> None:
    meta = {
        "kind": "model",
        "config": dataclasses.asdict(state.config),
        "stage": state.stage,
    }
    save_archive(path, state.arrays, meta)


def load_state(path: str | Path) -> ModelState:
    arrays, meta = load_archive(path)
    if meta.get("kind") != "model":
        raise ValidationError(f"{path} is not a model state file")
    config = ModelConfig(**meta["config"])
    return ModelState(config=config, stage=int(meta["stage"]), arrays=arrays)


def save_decoder_output(
    path: str | Path, output: DecoderOutput, note: dict[str, str] | None = None
) -> None:
    """Persist one decode (mel, stop probabilities, attention) for later
    inspection; ``note`` adds free-form strings such as the utterance id."""
    meta: dict[str, object] = {"kind": "decode", "truncated": bool(output.truncated)}
    for key, value in (note or {}).items():
        if key in meta:
            raise ValidationError(f"note key {key!r} is reserved")
        meta[key] = str(value)
    arrays = {
        "mel": np.asarray(output.mel, dtype=np.float32),
        "stop_probs": np.asarray(output.stop_probs, dtype=np.float32),
        "attention": np.asarray(output.attention, dtype=np.float32),
    }
    save_archive(path, arrays, meta)


def load_decoder_output(path: str | Path) -> tuple[DecoderOutput, dict[str, object]]:
    arrays, meta = load_archive(path)
    if meta.get("kind") != "decode":
        raise ValidationError(f"{path} is not a decode artifact")
    output = DecoderOutput(
        mel=arrays["mel"],
        stop_probs=arrays["stop_probs"],
        attention=arrays["attention"],
        truncated=bool(meta.get("truncated", False)),
    )
    return output, meta


def _check_mel(mel: np.ndarray, config: ModelConfig) -> np.ndarray:
    mel = np.asarray(mel, dtype=np.float32)
    if mel.ndim != 2 or mel.shape[1] != config.n_mels or mel.shape[0] < 1:
        raise ValidationError(f"expected mel of shape (frames, {config.n_mels}), got {mel.shape}")
    return mel


def text_encode(state: ModelState, phonemes: np.ndarray) -> LinguisticSequence:
    """Encode phoneme ids to a linguistic sequence of the same length."""
    ids = np.asarray(phonemes, dtype=np.int64)
    if ids.ndim != 1 or ids.size < 1:
        raise ValidationError(f"expected a non-empty 1-D id sequence, got shape {ids.shape}")
    if ids.min() < 0 or ids.max() >= state.config.phoneme_vocab:
        raise ValidationError(
            f"phoneme ids must lie in [0, {state.config.phoneme_vocab}), got range "
            f"[{ids.min()}, {ids.max()}]"
        )
    module = module_from_state(state)
    with torch.no_grad():
        out = module.text_encoder(torch.from_numpy(ids).unsqueeze(0), torch.tensor([ids.size]))
    return LinguisticSequence(vectors=out.squeeze(0).numpy(), source="text")


def asr_encode(state: ModelState, mel: np.ndarray) -> LinguisticSequence:
    """Encode a mel spectrogram to a downsampled linguistic sequence."""
    mel = _check_mel(mel, state.config)
    module = module_from_state(state)
    with torch.no_grad():
        out, _ = module.audio_encoder(
            torch.from_numpy(mel).unsqueeze(0), torch.tensor([mel.shape[0]])
        )
    return LinguisticSequence(
        vectors=out.squeeze(0).numpy()[: downsampled_length(mel.shape[0])], source="audio"
    )


def emotion_encode(state: ModelState, mel: np.ndarray) -> EmotionEmbedding:
    """Pool a mel spectrogram into the utterance-level style/emotion vector."""
    mel = _check_mel(mel, state.config)
    module = module_from_state(state)
    with torch.no_grad():
        out = module.style_encoder(torch.from_numpy(mel).unsqueeze(0), torch.tensor([mel.shape[0]]))
    return EmotionEmbedding(vector=out.squeeze(0).numpy())


def emotion_logits(state: ModelState, embedding: EmotionEmbedding) -> np.ndarray:
    """Label logits as the bias-free projection of the style/emotion vector."""
    vec = np.asarray(embedding.vector, dtype=np.float32)
    if vec.shape != (state.config.d_style,):
        raise ValidationError(f"expected embedding of shape ({state.config.d_style},), got {vec.shape}")
    return state.arrays["style_head.weight"] @ vec


def classify_linguistic(state: ModelState, linguistic: LinguisticSequence) -> np.ndarray:
    """Per-position label posteriors, shape (length, n_labels); rows sum to 1."""
    vecs = np.asarray(linguistic.vectors, dtype=np.float32)
    if vecs.ndim != 2 or vecs.shape[1] != state.config.d_linguistic or vecs.shape[0] < 1:
        raise ValidationError(
            f"expected linguistic sequence of shape (length, {state.config.d_linguistic}), got {vecs.shape}"
        )
    module = module_from_state(state)
    with torch.no_grad():
        logits = module.classifier(torch.from_numpy(vecs))
        return torch.softmax(logits, dim=-1).numpy()


def _single_memory(
    state: ModelState, linguistic: LinguisticSequence, style: EmotionEmbedding
) -> tuple[ConversionNet, torch.Tensor, torch.Tensor, torch.Tensor]:
    vecs = np.asarray(linguistic.vectors, dtype=np.float32)
    if vecs.ndim != 2 or vecs.shape[1] != state.config.d_linguistic or vecs.shape[0] < 1:
        raise ValidationError(
            f"expected linguistic sequence of shape (length, {state.config.d_linguistic}), got {vecs.shape}"
        )
    vec = np.asarray(style.vector, dtype=np.float32)
    if vec.shape != (state.config.d_style,):
        raise ValidationError(f"expected style vector of shape ({state.config.d_style},), got {vec.shape}")
    module = module_from_state(state)
    memory, keys = module.build_memory(
        torch.from_numpy(vecs).unsqueeze(0), torch.from_numpy(vec).unsqueeze(0)
    )
    mask = torch.ones(1, vecs.shape[0], dtype=torch.bool)
    return module, memory, keys, mask


def decode(
    state: ModelState,
    linguistic: LinguisticSequence,
    embedding: EmotionEmbedding,
    teacher: np.ndarray | None = None,
    max_steps: int | None = None,
) -> DecoderOutput:
    """Decode frame groups from a linguistic sequence and an emotion embedding.

    With ``teacher`` the decode is forced against it: a target of T frames
    takes ceil(T / reduction_factor) steps.  Without, the decoder free-runs
    until its stop probability crosses the threshold or the step cap fires
    (reported as ``truncated``).  Predictions are in the raw mel domain.
    """
    if max_steps is not None and max_steps < 1:
        raise ValidationError(f"max_steps must be >= 1, got {max_steps}")
    module, memory, keys, mask = _single_memory(state, linguistic, embedding)
    if teacher is not None:
        target = _check_mel(teacher, state.config)
        with torch.no_grad():
            mel, stops, weights = module.decode_teacher(
                memory, keys, mask, torch.from_numpy(target).unsqueeze(0)
            )
        return DecoderOutput(
            mel=mel.squeeze(0).numpy(),
            stop_probs=torch.sigmoid(stops.squeeze(0)).numpy(),
            attention=weights.squeeze(0).numpy(),
            truncated=False,
        )
    with torch.no_grad():
        mel, stops, weights, stopped = module.decode_free(memory, keys, mask, max_steps)
    return DecoderOutput(
        mel=mel.squeeze(0).numpy(),
        stop_probs=stops.numpy(),
        attention=weights.numpy(),
        truncated=not stopped,
    )
