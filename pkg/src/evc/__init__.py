"""Two-stage emotional voice conversion on limited labelled data.

A sequence-to-sequence model is first initialised as a multi-speaker style
system, then retrained on a small emotion-labelled corpus with an adversarial
classifier that strips emotion from the linguistic pathway.  Conversion
re-renders a source utterance with a reference-derived emotion embedding,
letting the attention decoder change durations freely; synthesis runs through
spectrogram inversion or a small neural vocoder, and objective evaluation
covers spectral distortion, duration error, and embedding-space structure.
"""

from .audio import (
    AudioConfig,
    VoicingTrack,
    detect_voicing,
    extract_mcep,
    extract_mel,
    griffin_lim_invert,
    load_waveform,
    save_waveform,
)
from .corpus import (
    EMOTIONS,
    SPLITS,
    Lexicon,
    SyntheticCorpusSpec,
    TrainingSet,
    UtteranceRecord,
    build_synthetic_corpus,
    default_lexicon,
    load_manifest,
    make_splits,
    prepare_features,
    prepare_training_set,
    write_manifest,
)
from .errors import (
    EvcError,
    ManifestError,
    QuotaError,
    TrainingDivergedError,
    ValidationError,
)
from .evaluation import (
    DtwPath,
    ddur_score,
    dtw_align,
    evaluate_conversions,
    mcd_score,
    plot_attention,
    plot_embedding_map,
    silhouette,
)
from .inference import (
    ConversionResult,
    average_emotion_embedding,
    batch_convert,
    convert,
    reference_embeddings,
)
from .model import (
    DecoderOutput,
    EmotionEmbedding,
    LinguisticSequence,
    ModelConfig,
    ModelState,
    asr_encode,
    classify_linguistic,
    decode,
    emotion_encode,
    emotion_logits,
    load_state,
    new_state,
    reinit_for_stage2,
    save_state,
    text_encode,
)
from .objectives import (
    LossBreakdown,
    LossWeights,
    adversarial_uniform_loss,
    classifier_loss,
    consistency_loss,
    emotion_supervision_loss,
    reconstruction_loss,
    total_loss,
)
from .training import (
    Checkpoint,
    TrainConfig,
    adversarial_step,
    load_checkpoint,
    save_checkpoint,
    train_stage1,
    train_stage2,
)
from .vocoder import (
    GRIFFIN_LIM,
    VocoderConfig,
    VocoderExample,
    VocoderState,
    VocoderTrainConfig,
    fine_tune_vocoder,
    load_vocoder,
    pretrain_vocoder,
    synthesize,
    vocoder_nll,
)

__version__ = "0.1.0"

__all__ = [
    "AudioConfig",
    "Checkpoint",
    "ConversionResult",
    "DecoderOutput",
    "DtwPath",
    "EMOTIONS",
    "EmotionEmbedding",
    "EvcError",
    "GRIFFIN_LIM",
    "Lexicon",
    "LinguisticSequence",
    "LossBreakdown",
    "LossWeights",
    "ManifestError",
    "ModelConfig",
    "ModelState",
    "QuotaError",
    "SPLITS",
    "SyntheticCorpusSpec",
    "TrainConfig",
    "TrainingDivergedError",
    "TrainingSet",
    "UtteranceRecord",
    "ValidationError",
    "VocoderConfig",
    "VocoderExample",
    "VocoderState",
    "VocoderTrainConfig",
    "VoicingTrack",
    "adversarial_step",
    "adversarial_uniform_loss",
    "asr_encode",
    "average_emotion_embedding",
    "batch_convert",
    "build_synthetic_corpus",
    "classifier_loss",
    "classify_linguistic",
    "consistency_loss",
    "convert",
    "ddur_score",
    "decode",
    "default_lexicon",
    "detect_voicing",
    "dtw_align",
    "emotion_encode",
    "emotion_logits",
    "emotion_supervision_loss",
    "evaluate_conversions",
    "extract_mcep",
    "extract_mel",
    "fine_tune_vocoder",
    "griffin_lim_invert",
    "load_checkpoint",
    "load_manifest",
    "load_state",
    "load_vocoder",
    "load_waveform",
    "make_splits",
    "mcd_score",
    "new_state",
    "plot_attention",
    "plot_embedding_map",
    "prepare_features",
    "prepare_training_set",
    "pretrain_vocoder",
    "reconstruction_loss",
    "reference_embeddings",
    "reinit_for_stage2",
    "save_checkpoint",
    "save_state",
    "save_waveform",
    "silhouette",
    "synthesize",
    "text_encode",
    "total_loss",
    "train_stage1",
    "train_stage2",
    "vocoder_nll",
    "write_manifest",
]
