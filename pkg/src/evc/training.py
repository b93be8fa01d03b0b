"""Two-stage training with alternating adversarial updates.

Each step runs two phases on the same batch: first the classifier alone is
fitted to predict the label from detached linguistic embeddings, then every
other parameter is updated to reconstruct speech while pushing the (fresh)
classifier's posterior towards uniform.  Stage 1 labels are speakers on a
multi-speaker corpus; stage 2 re-initialises the two label heads and trains
the whole network on emotion labels.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .audio import LOG_FLOOR
from .corpus import PreparedUtterance, TrainingSet
from .errors import TrainingDivergedError, ValidationError
from .model import (
    ConversionNet,
    ModelConfig,
    ModelState,
    _length_mask,
    new_state,
    reinit_for_stage2,
    state_from_module,
)
from .objectives import (
    LossBreakdown,
    LossWeights,
    adversarial_uniform_loss,
    classifier_loss,
    consistency_loss,
    emotion_supervision_loss,
    recon_loss,
    soft_alignment,
    stop_loss,
    total_loss,
)
from .store import load_archive, save_archive


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation settings for one training stage."""

    stage: int
    max_steps: int = 2000
    batch_size: int = 8
    learning_rate: float = 1e-3
    adversary_learning_rate: float = 1e-3
    warmup_steps: int = 100
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    validation_every: int = 50
    validation_fraction: float = 0.1
    stop_pos_weight: float = 6.0
    feedback_noise: float = 0.05

    def __post_init__(self) -> None:
        if self.stage not in (1, 2):
            raise ValidationError(f"stage must be 1 or 2, got {self.stage}")
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0 or self.adversary_learning_rate <= 0:
            raise ValidationError("learning rates must be positive")
        if self.warmup_steps < 0:
            raise ValidationError(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        if not (0.0 <= self.validation_fraction <= 0.5):
            raise ValidationError(
                f"validation_fraction must be in [0, 0.5], got {self.validation_fraction}"
            )
        if self.validation_every < 1:
            raise ValidationError(f"validation_every must be >= 1, got {self.validation_every}")
        if self.stop_pos_weight <= 0:
            raise ValidationError(f"stop_pos_weight must be positive, got {self.stop_pos_weight}")
        if self.feedback_noise < 0:
            raise ValidationError(f"feedback_noise must be >= 0, got {self.feedback_noise}")


@dataclass
class Checkpoint:
    """A trained model plus everything needed to interpret and reproduce it."""

    state: ModelState
    train_config: TrainConfig
    label_names: tuple[str, ...]
    label_kind: str
    step: int
    best_step: int
    best_validation: float | None
    history: list[dict]


def _pad_batch(items: list[PreparedUtterance], cfg: ModelConfig) -> dict[str, torch.Tensor]:
    phoneme_lengths = torch.tensor([it.phonemes.size for it in items], dtype=torch.long)
    mel_lengths = torch.tensor([it.mel.shape[0] for it in items], dtype=torch.long)
    max_ph = int(phoneme_lengths.max())
    max_mel = int(mel_lengths.max())
    phonemes = torch.zeros(len(items), max_ph, dtype=torch.long)
    mel = torch.full((len(items), max_mel, cfg.n_mels), LOG_FLOOR, dtype=torch.float32)
    for i, it in enumerate(items):
        phonemes[i, : it.phonemes.size] = torch.from_numpy(it.phonemes)
        mel[i, : it.mel.shape[0]] = torch.from_numpy(it.mel)
    labels = torch.tensor([it.label for it in items], dtype=torch.long)
    return {
        "phonemes": phonemes,
        "phoneme_lengths": phoneme_lengths,
        "mel": mel,
        "mel_lengths": mel_lengths,
        "labels": labels,
    }


class Trainer:
    """Owns the live module, the two optimisers, and the step counter."""

    def __init__(self, state: ModelState, config: TrainConfig, training_set: TrainingSet) -> None:
        if len(training_set.label_names) != state.config.n_labels:
            raise ValidationError(
                f"model expects {state.config.n_labels} labels, training set has "
                f"{len(training_set.label_names)}"
            )
        if training_set.phoneme_vocab > state.config.phoneme_vocab:
            raise ValidationError(
                f"training set vocabulary {training_set.phoneme_vocab} exceeds model "
                f"capacity {state.config.phoneme_vocab}"
            )
        if training_set.n_mels != state.config.n_mels:
            raise ValidationError(
                f"training set has {training_set.n_mels} mel bins, model expects {state.config.n_mels}"
            )
        self.config = config
        self.stage = state.stage
        self.module = ConversionNet(state.config)
        self.module.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in state.arrays.items()})
        self.module.train()
        adversary = set()
        for name, _ in self.module.classifier.named_parameters():
            adversary.add(f"classifier.{name}")
        self._adversary_names = adversary
        main_params = [p for n, p in self.module.named_parameters() if n not in adversary]
        adv_params = [p for n, p in self.module.named_parameters() if n in adversary]
        self.opt_main = torch.optim.Adam(main_params, lr=config.learning_rate)
        self.opt_adversary = torch.optim.Adam(adv_params, lr=config.adversary_learning_rate)
        self.step = 0
        self.noise = torch.Generator().manual_seed(config.seed ^ 0x5EED)

    def _apply_warmup(self) -> float:
        scale = min(1.0, (self.step + 1) / max(self.config.warmup_steps, 1))
        if self.config.warmup_steps == 0:
            scale = 1.0
        for group in self.opt_main.param_groups:
            group["lr"] = self.config.learning_rate * scale
        for group in self.opt_adversary.param_groups:
            group["lr"] = self.config.adversary_learning_rate * scale
        return scale

    def _forward_losses(
        self, batch: dict[str, torch.Tensor]
    ) -> tuple[dict[str, torch.Tensor], list[torch.Tensor]]:
        module = self.module
        cfg = module.cfg
        e_text = module.text_encoder(batch["phonemes"], batch["phoneme_lengths"])
        e_audio, audio_lengths = module.audio_encoder(batch["mel"], batch["mel_lengths"])
        style = module.style_encoder(batch["mel"], batch["mel_lengths"])
        memory, keys = module.build_memory(e_text, style)
        memory_mask = _length_mask(batch["phoneme_lengths"], e_text.shape[1])
        noise = None
        if self.config.feedback_noise > 0:
            noise = (self.config.feedback_noise, self.noise)
        pred, stops, _ = module.decode_teacher(
            memory, keys, memory_mask, batch["mel"], feedback_noise=noise
        )
        pred_n = module.normalise_mel(pred)
        target_n = module.normalise_mel(batch["mel"])

        r = cfg.reduction_factor
        batch_size = batch["mel"].shape[0]
        recon_terms, stop_terms, consist_terms, emotion_terms = [], [], [], []
        embedding_rows: list[torch.Tensor] = []
        for b in range(batch_size):
            frames = int(batch["mel_lengths"][b])
            steps = math.ceil(frames / r)
            recon_terms.append(recon_loss(pred_n[b, :frames], target_n[b, :frames]))
            targets = torch.zeros(steps)
            targets[-1] = 1.0
            stop_terms.append(
                stop_loss(stops[b, :steps], targets, pos_weight=self.config.stop_pos_weight)
            )
            text_rows = e_text[b, : int(batch["phoneme_lengths"][b])]
            audio_rows = e_audio[b, : int(audio_lengths[b])]
            consist_terms.append(
                consistency_loss(text_rows, audio_rows, soft_alignment(text_rows, audio_rows))
            )
            embedding_rows.append(torch.cat([text_rows, audio_rows], dim=0))
            emotion_terms.append(
                emotion_supervision_loss(style[b], int(batch["labels"][b]), module.style_head.weight)
            )

        losses = {
            "recon": torch.stack(recon_terms).mean(),
            "stop": torch.stack(stop_terms).mean(),
            "consist": torch.stack(consist_terms).mean(),
            "emotion": torch.stack(emotion_terms).mean(),
        }
        return losses, embedding_rows


def adversarial_step(trainer: Trainer, items: list[PreparedUtterance]) -> LossBreakdown:
    """One alternating update: fit the classifier, then train everything else.

    Phase one updates only classifier parameters on detached embeddings;
    phase two updates every non-classifier parameter on the reconstruction,
    stop, consistency, and emotion terms plus the weighted uniformity term
    evaluated through the freshly updated classifier.
    """
    if not items:
        raise ValidationError("batch must be non-empty")
    cfg = trainer.config
    trainer._apply_warmup()
    batch = _pad_batch(items, trainer.module.cfg)

    losses, embedding_rows = trainer._forward_losses(batch)

    classifier_terms = []
    for b, rows in enumerate(embedding_rows):
        posterior = torch.softmax(trainer.module.classifier(rows.detach()), dim=-1)
        classifier_terms.append(classifier_loss(posterior, int(batch["labels"][b])))
    classifier_term = torch.stack(classifier_terms).mean()
    trainer.opt_adversary.zero_grad()
    classifier_term.backward()
    trainer.opt_adversary.step()

    live_logits = trainer.module.classifier(torch.cat(embedding_rows, dim=0))
    adversarial_term = adversarial_uniform_loss(torch.softmax(live_logits, dim=-1))
    w = cfg.weights
    main_total = (
        w.recon * losses["recon"]
        + w.stop * losses["stop"]
        + w.consist * losses["consist"]
        + w.emotion * losses["emotion"]
        + w.adversarial * adversarial_term
    )
    trainer.opt_main.zero_grad()
    trainer.opt_adversary.zero_grad()
    main_total.backward()
    trainer.opt_main.step()
    trainer.step += 1

    breakdown = total_loss(
        recon=float(losses["recon"].detach()),
        stop=float(losses["stop"].detach()),
        consist=float(losses["consist"].detach()),
        classifier=float(classifier_term.detach()),
        adversarial=float(adversarial_term.detach()),
        emotion=float(losses["emotion"].detach()),
        weights=w,
        stage=trainer.stage,
    )
    if not np.isfinite(breakdown.weighted_total):
        raise TrainingDivergedError(f"non-finite loss at step {trainer.step}")
    return breakdown


def evaluate_batch(trainer: Trainer, items: list[PreparedUtterance]) -> dict[str, float]:
    """Validation metrics (reconstruction, stop, their sum); no parameter updates."""
    if not items:
        raise ValidationError("validation batch must be non-empty")
    was_training = trainer.module.training
    trainer.module.eval()
    with torch.no_grad():
        batch = _pad_batch(items, trainer.module.cfg)
        module = trainer.module
        e_text = module.text_encoder(batch["phonemes"], batch["phoneme_lengths"])
        style = module.style_encoder(batch["mel"], batch["mel_lengths"])
        memory, keys = module.build_memory(e_text, style)
        memory_mask = _length_mask(batch["phoneme_lengths"], e_text.shape[1])
        pred, stops, _ = module.decode_teacher(memory, keys, memory_mask, batch["mel"])
        pred_n = module.normalise_mel(pred)
        target_n = module.normalise_mel(batch["mel"])
        r = module.cfg.reduction_factor
        recon_values, stop_values = [], []
        for b in range(batch["mel"].shape[0]):
            frames = int(batch["mel_lengths"][b])
            steps = math.ceil(frames / r)
            targets = torch.zeros(steps)
            targets[-1] = 1.0
            recon_values.append(float(recon_loss(pred_n[b, :frames], target_n[b, :frames])))
            stop_values.append(float(stop_loss(stops[b, :steps], targets)))
    if was_training:
        trainer.module.train()
    recon = float(np.mean(recon_values))
    stop = float(np.mean(stop_values))
    return {"recon": recon, "stop": stop, "total": recon + stop}


def _split_validation(
    items: list[PreparedUtterance], fraction: float, seed: int
) -> tuple[list[PreparedUtterance], list[PreparedUtterance]]:
    if fraction == 0.0 or len(items) < 2:
        return items, []
    order = np.random.default_rng(seed + 101).permutation(len(items))
    n_val = max(1, int(round(fraction * len(items))))
    val_idx = set(int(i) for i in order[:n_val])
    train = [it for i, it in enumerate(items) if i not in val_idx]
    val = [items[i] for i in sorted(val_idx)]
    if not train:
        raise ValidationError("validation split consumed every training item")
    return train, val


def _run_training(
    state: ModelState, training_set: TrainingSet, config: TrainConfig
) -> Checkpoint:
    trainer = Trainer(state, config, training_set)
    train_items, val_items = _split_validation(
        training_set.items, config.validation_fraction, config.seed
    )
    rng = np.random.default_rng(config.seed)
    order: list[int] = []
    history: list[dict] = []
    best_metric: float | None = None
    best_arrays: dict[str, np.ndarray] | None = None
    best_step = 0

    for step in range(1, config.max_steps + 1):
        if len(order) < config.batch_size:
            order = order + list(rng.permutation(len(train_items)))
        take, order = order[: config.batch_size], order[config.batch_size :]
        batch = [train_items[i] for i in take]
        breakdown = adversarial_step(trainer, batch)
        row = {"step": step, **dataclasses.asdict(breakdown)}
        if val_items and (step % config.validation_every == 0 or step == config.max_steps):
            metrics = evaluate_batch(trainer, val_items)
            metric = metrics["total"]
            row["validation"] = metric
            row["validation_recon"] = metrics["recon"]
            if best_metric is None or metric < best_metric:
                best_metric = metric
                best_step = step
                best_arrays = {
                    k: v.detach().cpu().numpy().astype(np.float32).copy()
                    for k, v in trainer.module.state_dict().items()
                }
        history.append(row)

    final = state_from_module(trainer.module, stage=state.stage)
    if best_arrays is not None:
        final = ModelState(config=state.config, stage=state.stage, arrays=best_arrays)
    else:
        best_step = config.max_steps
    return Checkpoint(
        state=final,
        train_config=config,
        label_names=training_set.label_names,
        label_kind=training_set.label_kind,
        step=config.max_steps,
        best_step=best_step,
        best_validation=best_metric,
        history=history,
    )


def _default_model_config(training_set: TrainingSet, **overrides) -> ModelConfig:
    params = dict(
        phoneme_vocab=training_set.phoneme_vocab,
        n_labels=len(training_set.label_names),
        n_mels=training_set.n_mels,
    )
    params.update(overrides)
    return ModelConfig(**params)


def train_stage1(
    training_set: TrainingSet,
    config: TrainConfig,
    model_config: ModelConfig | None = None,
) -> Checkpoint:
    """Style initialisation: label space is the speaker inventory."""
    if config.stage != 1:
        raise ValidationError(f"train_stage1 needs a stage-1 config, got stage {config.stage}")
    if training_set.label_kind != "speaker":
        raise ValidationError(f"stage 1 trains on speaker labels, got {training_set.label_kind!r}")
    if model_config is None:
        model_config = _default_model_config(training_set)
    state = new_state(model_config, stage=1, seed=config.seed)
    return _run_training(state, training_set, config)


def train_stage2(
    base: ModelState,
    training_set: TrainingSet,
    config: TrainConfig,
) -> Checkpoint:
    """Emotion training from a stage-1 state with freshly seeded label heads."""
    if config.stage != 2:
        raise ValidationError(f"train_stage2 needs a stage-2 config, got stage {config.stage}")
    if training_set.label_kind != "emotion":
        raise ValidationError(f"stage 2 trains on emotion labels, got {training_set.label_kind!r}")
    state = reinit_for_stage2(base, n_labels=len(training_set.label_names), seed=config.seed)
    return _run_training(state, training_set, config)


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    meta = {
        "kind": "checkpoint",
        "config": dataclasses.asdict(checkpoint.state.config),
        "stage": checkpoint.state.stage,
        "train_config": dataclasses.asdict(checkpoint.train_config),
        "label_names": list(checkpoint.label_names),
        "label_kind": checkpoint.label_kind,
        "step": checkpoint.step,
        "best_step": checkpoint.best_step,
        "best_validation": checkpoint.best_validation,
        "history": checkpoint.history,
    }
    save_archive(path, checkpoint.state.arrays, meta)


def load_checkpoint(path: str | Path) -> Checkpoint:
    arrays, meta = load_archive(path)
    if meta.get("kind") != "checkpoint":
        raise ValidationError(f"{path} is not a checkpoint file")
    model_config = ModelConfig(**meta["config"])
    weights = LossWeights(**meta["train_config"].pop("weights"))
    train_config = TrainConfig(weights=weights, **meta["train_config"])
    return Checkpoint(
        state=ModelState(config=model_config, stage=int(meta["stage"]), arrays=arrays),
        train_config=train_config,
        label_names=tuple(meta["label_names"]),
        label_kind=meta["label_kind"],
        step=int(meta["step"]),
        best_step=int(meta["best_step"]),
        best_validation=meta["best_validation"],
        history=list(meta["history"]),
    )
