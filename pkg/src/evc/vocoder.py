"""Waveform generation: a toy sample-level neural vocoder plus Griffin-Lim.

The neural path is an autoregressive GRU over 8-bit mu-law codes conditioned
on mel frames (nearest-frame upsampling).  It supports the same two-phase
recipe as the conversion model: pretrain on plentiful neutral speech, then
fine-tune on the small emotional corpus.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .audio import LOG_FLOOR, AudioConfig, extract_mel, griffin_lim_invert
from .errors import TrainingDivergedError, ValidationError
from .store import load_archive, save_archive

GRIFFIN_LIM = "griffin-lim"
N_CODES = 256
PROVENANCES = ("scratch", "pretrained", "fine-tuned")

# mu chosen so that 8-bit quantisation stays within the 1/128 round-trip
# bound on [-1, 1]: the worst-case error ln(1+mu)(1+mu)/(255 mu) is 0.00725
# at mu=3 but 0.0218 at the telephony mu=255.
MU_DEFAULT = 3.0


def mu_law_encode(wave: np.ndarray, mu: float = MU_DEFAULT) -> np.ndarray:
    """Compress samples in [-1, 1] to integer codes in [0, 255]."""
    x = np.asarray(wave, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"expected a 1-D waveform, got shape {x.shape}")
    if mu <= 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    if x.size and (np.abs(x) > 1.0 + 1e-6).any():
        raise ValidationError("waveform samples must lie in [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    y = np.sign(x) * np.log1p(mu * np.abs(x)) / np.log1p(mu)
    return np.round((y + 1.0) * 0.5 * (N_CODES - 1)).astype(np.int64)


def mu_law_decode(codes: np.ndarray, mu: float = MU_DEFAULT) -> np.ndarray:
    """Expand integer codes back to samples in [-1, 1]."""
    c = np.asarray(codes)
    if c.ndim != 1:
        raise ValidationError(f"expected a 1-D code sequence, got shape {c.shape}")
    if mu <= 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    if c.size and (c.min() < 0 or c.max() >= N_CODES):
        raise ValidationError(f"codes must lie in [0, {N_CODES})")
    y = 2.0 * c.astype(np.float64) / (N_CODES - 1) - 1.0
    x = np.sign(y) * (np.power(1.0 + mu, np.abs(y)) - 1.0) / mu
    return x.astype(np.float32)


@dataclass(frozen=True)
class VocoderConfig:
    """Architecture and feature contract of one vocoder."""

    n_mels: int
    hop_length: int
    audio_fingerprint: str
    d_embed: int = 32
    d_hidden: int = 96
    mu: float = MU_DEFAULT
    mel_center: float = -5.75
    mel_scale: float = 3.0

    def __post_init__(self) -> None:
        if self.n_mels < 1 or self.hop_length < 1 or self.d_embed < 1 or self.d_hidden < 1:
            raise ValidationError("vocoder dimensions must be >= 1")
        if self.mu <= 0 or self.mel_scale <= 0:
            raise ValidationError("mu and mel_scale must be positive")
        if not self.audio_fingerprint:
            raise ValidationError("audio_fingerprint must be non-empty")

    @classmethod
    def from_audio(cls, audio: AudioConfig, **overrides) -> "VocoderConfig":
        return cls(
            n_mels=audio.n_mels,
            hop_length=audio.hop_length,
            audio_fingerprint=audio.fingerprint(),
            **overrides,
        )


@dataclass(frozen=True)
class VocoderTrainConfig:
    """Optimisation settings for pretraining or fine-tuning."""

    max_steps: int = 2000
    batch_size: int = 8
    crop_frames: int = 16
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_steps < 0:
            raise ValidationError(f"max_steps must be >= 0, got {self.max_steps}")
        if self.batch_size < 1 or self.crop_frames < 1:
            raise ValidationError("batch_size and crop_frames must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")


@dataclass(frozen=True)
class VocoderExample:
    """One training pair: waveform padded to a whole number of mel frames."""

    wave: np.ndarray
    mel: np.ndarray
    audio_fingerprint: str

    @classmethod
    def from_wave(cls, wave: np.ndarray, audio: AudioConfig) -> "VocoderExample":
        wave = np.asarray(wave, dtype=np.float32)
        if wave.ndim != 1 or wave.size < 1:
            raise ValidationError(f"expected a non-empty 1-D waveform, got shape {wave.shape}")
        mel = extract_mel(wave, audio)
        total = mel.shape[0] * audio.hop_length
        padded = np.zeros(total, dtype=np.float32)
        padded[: min(wave.size, total)] = wave[:total]
        return cls(wave=padded, mel=mel, audio_fingerprint=audio.fingerprint())


class _SampleRnn(nn.Module):
    """Embedding -> GRU -> code logits, one step per audio sample."""

    def __init__(self, cfg: VocoderConfig) -> None:
        super().__init__()
        self.cfg = cfg
        self.embed = nn.Embedding(N_CODES, cfg.d_embed)
        self.rnn = nn.GRU(cfg.d_embed + cfg.n_mels, cfg.d_hidden, batch_first=True)
        self.out = nn.Linear(cfg.d_hidden, N_CODES)

    def normalise_mel(self, mel: torch.Tensor) -> torch.Tensor:
        return (mel - self.cfg.mel_center) / self.cfg.mel_scale

    def forward(
        self, prev_codes: torch.Tensor, cond: torch.Tensor, hidden: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        x = torch.cat([self.embed(prev_codes), cond], dim=-1)
        out, hidden = self.rnn(x, hidden)
        return self.out(out), hidden


@dataclass
class VocoderState:
    """Named parameter arrays plus the training provenance tag."""

    config: VocoderConfig
    provenance: str
    arrays: dict[str, np.ndarray]

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(json.dumps(dataclasses.asdict(self.config), sort_keys=True).encode())
        digest.update(self.provenance.encode())
        for name in sorted(self.arrays):
            digest.update(name.encode())
            digest.update(self.arrays[name].tobytes())
        return digest.hexdigest()[:16]


def _module_from_state(state: VocoderState) -> _SampleRnn:
    module = _SampleRnn(state.config)
    module.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in state.arrays.items()})
    return module


def _state_from_module(module: _SampleRnn, provenance: str) -> VocoderState:
    arrays = {
        k: v.detach().cpu().numpy().astype(np.float32).copy()
        for k, v in module.state_dict().items()
    }
    return VocoderState(config=module.cfg, provenance=provenance, arrays=arrays)


def new_vocoder(config: VocoderConfig, seed: int = 0) -> VocoderState:
    """A freshly initialised, untrained vocoder."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        module = _SampleRnn(config)
    return _state_from_module(module, "scratch")


def _check_examples(examples: list[VocoderExample], config: VocoderConfig) -> None:
    if not examples:
        raise ValidationError("need at least one training example")
    for i, ex in enumerate(examples):
        if ex.audio_fingerprint != config.audio_fingerprint:
            raise ValidationError(
                f"example {i} was extracted under a different audio config "
                f"({ex.audio_fingerprint} != {config.audio_fingerprint})"
            )
        if ex.mel.shape[1] != config.n_mels:
            raise ValidationError(f"example {i} has {ex.mel.shape[1]} mel bins, expected {config.n_mels}")


def _crop_batch(
    examples: list[VocoderExample],
    config: VocoderConfig,
    train: VocoderTrainConfig,
    rng: np.random.Generator,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    hop = config.hop_length
    frames = train.crop_frames
    samples = frames * hop
    prev_list, code_list, cond_list = [], [], []
    for _ in range(train.batch_size):
        ex = examples[int(rng.integers(len(examples)))]
        mel = ex.mel
        if mel.shape[0] < frames:
            pad = np.full((frames - mel.shape[0], mel.shape[1]), LOG_FLOOR, dtype=np.float32)
            mel = np.concatenate([mel, pad], axis=0)
            wave = np.concatenate(
                [ex.wave, np.zeros(samples - ex.wave.size, dtype=np.float32)]
            )
            start = 0
        else:
            wave = ex.wave
            start = int(rng.integers(mel.shape[0] - frames + 1))
        crop_wave = wave[start * hop : start * hop + samples]
        lead = wave[start * hop - 1] if start > 0 else 0.0
        codes = mu_law_encode(crop_wave, config.mu)
        prev = np.concatenate([mu_law_encode(np.array([lead]), config.mu), codes[:-1]])
        cond = np.repeat(mel[start : start + frames], hop, axis=0)
        prev_list.append(prev)
        code_list.append(codes)
        cond_list.append(cond)
    return (
        torch.from_numpy(np.stack(prev_list)),
        torch.from_numpy(np.stack(code_list)),
        torch.from_numpy(np.stack(cond_list).astype(np.float32)),
    )


def _train(
    module: _SampleRnn,
    examples: list[VocoderExample],
    train: VocoderTrainConfig,
) -> None:
    optimiser = torch.optim.Adam(module.parameters(), lr=train.learning_rate)
    rng = np.random.default_rng(train.seed)
    module.train()
    for step in range(train.max_steps):
        prev, codes, cond = _crop_batch(examples, module.cfg, train, rng)
        logits, _ = module(prev, module.normalise_mel(cond))
        loss = nn.functional.cross_entropy(logits.reshape(-1, N_CODES), codes.reshape(-1))
        if not torch.isfinite(loss):
            raise TrainingDivergedError(f"non-finite vocoder loss at step {step + 1}")
        optimiser.zero_grad()
        loss.backward()
        optimiser.step()


def pretrain_vocoder(
    examples: list[VocoderExample],
    config: VocoderConfig,
    train: VocoderTrainConfig,
) -> VocoderState:
    """Train a fresh vocoder on a (neutral, plentiful) corpus."""
    _check_examples(examples, config)
    state = new_vocoder(config, seed=train.seed)
    if train.max_steps == 0:
        return state
    module = _module_from_state(state)
    _train(module, examples, train)
    return _state_from_module(module, "pretrained")


def fine_tune_vocoder(
    state: VocoderState,
    examples: list[VocoderExample],
    train: VocoderTrainConfig,
) -> VocoderState:
    """Continue training an already-pretrained vocoder on emotional audio."""
    if state.provenance not in ("pretrained", "fine-tuned"):
        raise ValidationError(
            f"fine-tuning requires a pretrained vocoder, got provenance {state.provenance!r}"
        )
    _check_examples(examples, state.config)
    if train.max_steps == 0:
        return VocoderState(
            config=state.config,
            provenance=state.provenance,
            arrays={k: v.copy() for k, v in state.arrays.items()},
        )
    module = _module_from_state(state)
    _train(module, examples, train)
    return _state_from_module(module, "fine-tuned")


def vocoder_nll(state: VocoderState, examples: list[VocoderExample]) -> float:
    """Mean teacher-forced negative log likelihood per sample, in nats."""
    _check_examples(examples, state.config)
    module = _module_from_state(state)
    module.eval()
    hop = state.config.hop_length
    total, count = 0.0, 0
    with torch.no_grad():
        for ex in examples:
            codes = mu_law_encode(ex.wave, state.config.mu)
            prev = np.concatenate([mu_law_encode(np.zeros(1), state.config.mu), codes[:-1]])
            cond = np.repeat(ex.mel, hop, axis=0).astype(np.float32)
            logits, _ = module(
                torch.from_numpy(prev).unsqueeze(0),
                module.normalise_mel(torch.from_numpy(cond).unsqueeze(0)),
            )
            nll = nn.functional.cross_entropy(
                logits.squeeze(0), torch.from_numpy(codes), reduction="sum"
            )
            total += float(nll)
            count += codes.size
    return total / count


def synthesize(
    mel: np.ndarray,
    vocoder: VocoderState | str,
    audio: AudioConfig,
    seed: int = 0,
    griffin_lim_iterations: int = 60,
) -> np.ndarray:
    """Waveform of exactly frames x hop_length samples from a mel spectrogram.

    ``vocoder`` is either a trained VocoderState or the "griffin-lim" marker;
    the neural path samples from the categorical output at temperature 1.0
    with a generator seeded by ``seed``.
    """
    mel = np.asarray(mel, dtype=np.float32)
    if mel.ndim != 2 or mel.shape[0] < 1 or mel.shape[1] != audio.n_mels:
        raise ValidationError(f"expected mel of shape (frames, {audio.n_mels}), got {mel.shape}")
    if isinstance(vocoder, str):
        if vocoder != GRIFFIN_LIM:
            raise ValidationError(f"unknown vocoder marker {vocoder!r}; use {GRIFFIN_LIM!r}")
        return griffin_lim_invert(mel, audio, n_iter=griffin_lim_iterations, seed=seed)
    if vocoder.config.audio_fingerprint != audio.fingerprint():
        raise ValidationError(
            "vocoder was trained under a different audio config "
            f"({vocoder.config.audio_fingerprint} != {audio.fingerprint()})"
        )
    module = _module_from_state(vocoder)
    module.eval()
    hop = vocoder.config.hop_length
    n_samples = mel.shape[0] * hop
    cond = module.normalise_mel(torch.from_numpy(np.repeat(mel, hop, axis=0)))
    generator = torch.Generator().manual_seed(seed)
    codes = np.empty(n_samples, dtype=np.int64)
    prev = torch.from_numpy(mu_law_encode(np.zeros(1), vocoder.config.mu))
    hidden: torch.Tensor | None = None
    with torch.no_grad():
        for t in range(n_samples):
            logits, hidden = module(
                prev.view(1, 1), cond[t].view(1, 1, -1), hidden
            )
            probs = torch.softmax(logits.view(-1), dim=-1)
            code = torch.multinomial(probs, 1, generator=generator)
            codes[t] = int(code)
            prev = code
    return mu_law_decode(codes, vocoder.config.mu)


def save_vocoder(state: VocoderState, path: str | Path) -> None:
    meta = {
        "kind": "vocoder",
        "config": dataclasses.asdict(state.config),
        "provenance": state.provenance,
    }
    save_archive(path, state.arrays, meta)


def load_vocoder(path: str | Path) -> VocoderState:
    arrays, meta = load_archive(path)
    if meta.get("kind") != "vocoder":
        raise ValidationError(f"{path} is not a vocoder file")
    if meta.get("provenance") not in PROVENANCES:
        raise ValidationError(f"unknown vocoder provenance {meta.get('provenance')!r}")
    return VocoderState(
        config=VocoderConfig(**meta["config"]),
        provenance=meta["provenance"],
        arrays=arrays,
    )
