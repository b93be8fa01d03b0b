"""Objective evaluation: aligned spectral distortion, voiced-duration
differences, emotion-embedding maps, and attention plots.

Converted speech rarely keeps the source frame count, so spectral scores are
computed over a dynamic-time-warping alignment; duration scores compare only
the voiced portions, making them robust to leading and trailing silence.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
import scipy.spatial.distance
from sklearn.manifold import TSNE
from sklearn.metrics import silhouette_score

from .audio import AudioConfig, detect_voicing, extract_mcep, load_waveform
from .corpus import UtteranceRecord
from .errors import EvcError, ValidationError
from .inference import REPORT_NAME
from .model import DecoderOutput

__all__ = [
    "MCD_CONSTANT",
    "SCORES_NAME",
    "DtwPath",
    "ddur_score",
    "dtw_align",
    "evaluate_conversions",
    "mcd_score",
    "plot_attention",
    "plot_embedding_map",
    "silhouette",
]

MCD_CONSTANT = 10.0 / math.log(10.0)
SCORES_NAME = "scores.jsonl"

_STEPS = ((1, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class DtwPath:
    """A monotone alignment between two sequences.

    Consecutive pairs advance by (1,0), (0,1), or (1,1); the path starts at
    (0, 0) and ``cost`` is the summed frame distance along it.
    """

    pairs: tuple[tuple[int, int], ...]
    cost: float

    def __post_init__(self) -> None:
        if not self.pairs or self.pairs[0] != (0, 0):
            raise ValidationError("alignment must start at (0, 0)")
        for (i0, j0), (i1, j1) in zip(self.pairs, self.pairs[1:]):
            if (i1 - i0, j1 - j0) not in _STEPS:
                raise ValidationError(f"illegal alignment step ({i1 - i0}, {j1 - j0})")


def dtw_align(a: np.ndarray, b: np.ndarray) -> DtwPath:
    """Minimal-cost monotone alignment under Euclidean frame distance.

    Cost ties are broken deterministically: prefer the diagonal step, then
    advancing the first sequence.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0 or b.shape[0] == 0:
        raise ValidationError("both sequences must be non-empty 2-D arrays")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"feature sizes differ: {a.shape[1]} != {b.shape[1]}")
    dist = scipy.spatial.distance.cdist(a, b, metric="euclidean")
    ta, tb = dist.shape
    acc = np.empty((ta, tb))
    move = np.zeros((ta, tb), dtype=np.int8)  # 0 diagonal, 1 from (i-1,j), 2 from (i,j-1)
    acc[0, 0] = dist[0, 0]
    for i in range(ta):
        for j in range(tb):
            if i == 0 and j == 0:
                continue
            best = math.inf
            arg = 0
            for k, (pi, pj) in enumerate(((i - 1, j - 1), (i - 1, j), (i, j - 1))):
                if pi >= 0 and pj >= 0 and acc[pi, pj] < best:
                    best = acc[pi, pj]
                    arg = k
            acc[i, j] = best + dist[i, j]
            move[i, j] = arg
    pairs = [(ta - 1, tb - 1)]
    while pairs[-1] != (0, 0):
        i, j = pairs[-1]
        di, dj = ((1, 1), (1, 0), (0, 1))[move[i, j]]
        pairs.append((i - di, j - dj))
    return DtwPath(pairs=tuple(reversed(pairs)), cost=float(acc[ta - 1, tb - 1]))


def mcd_score(a: np.ndarray, b: np.ndarray) -> float:
    """Mel-cepstral distortion in dB between two coefficient sequences.

    Frames are aligned by DTW over every coefficient except the gain (index
    0), which also never enters the score: each aligned pair contributes
    (10/ln 10) * sqrt(2 * sum_d (c_d - c'_d)^2) and the result is the mean.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] == 0 or b.shape[0] == 0:
        raise ValidationError("both sequences must be non-empty 2-D arrays")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"coefficient orders differ: {a.shape[1] - 1} != {b.shape[1] - 1}")
    if a.shape[1] < 2:
        raise ValidationError("need at least one coefficient beyond the gain term")
    path = dtw_align(a[:, 1:], b[:, 1:])
    rows = np.fromiter((p[0] for p in path.pairs), dtype=np.int64)
    cols = np.fromiter((p[1] for p in path.pairs), dtype=np.int64)
    diffs = a[rows, 1:] - b[cols, 1:]
    per_pair = MCD_CONSTANT * np.sqrt(2.0 * np.sum(diffs**2, axis=1))
    return float(per_pair.mean())


def ddur_score(
    a: np.ndarray, b: np.ndarray, config: AudioConfig, config_b: AudioConfig | None = None
) -> float:
    """Absolute difference of voiced duration in seconds.

    Both waveforms share ``config`` unless ``config_b`` is given, in which
    case the sample rates must agree; silence never counts as voiced, so
    padding either side leaves the score unchanged.
    """
    other = config if config_b is None else config_b
    if other.sample_rate != config.sample_rate:
        raise ValidationError(
            f"sample rates differ: {config.sample_rate} != {other.sample_rate}"
        )
    da = detect_voicing(np.asarray(a, dtype=np.float32), config).voiced_duration()
    db = detect_voicing(np.asarray(b, dtype=np.float32), other).voiced_duration()
    return abs(da - db)


def _class_counts(labels: Sequence[str]) -> Counter:
    return Counter(str(label) for label in labels)


def silhouette(points: np.ndarray, labels: Sequence[str]) -> float:
    """Silhouette score of labelled embeddings under cosine distance.

    Fully degenerate geometry (all distances zero) scores 0 by convention
    rather than failing.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise ValidationError(
            f"expected (n, d) points with one label each, got {x.shape} and {len(labels)} labels"
        )
    counts = _class_counts(labels)
    if len(counts) < 2:
        raise ValidationError(f"need at least two classes, got {sorted(counts)}")
    if min(counts.values()) < 2:
        raise ValidationError(f"need at least two points per class, got {dict(counts)}")
    value = float(silhouette_score(x, np.asarray([str(l) for l in labels]), metric="cosine"))
    return 0.0 if math.isnan(value) else value


def _refuse_overwrite(path: Path, overwrite: bool) -> None:
    if path.exists() and not overwrite:
        raise ValidationError(f"{path} already exists; pass overwrite=True to replace it")


def plot_embedding_map(
    points: np.ndarray,
    labels: Sequence[str],
    path: str | Path,
    seed: int = 0,
    overwrite: bool = False,
) -> tuple[Path, Path]:
    """Two-dimensional t-SNE map of labelled embeddings.

    Writes the figure to ``path`` (one colour per class, with a legend) and
    the projected coordinates to a ``.csv`` sidecar, one ``label,x,y`` row
    per point in input order.  The projection is deterministic in ``seed``.
    """
    x = np.asarray(points, dtype=np.float64)
    names = [str(label) for label in labels]
    if x.ndim != 2 or x.shape[0] != len(names):
        raise ValidationError(
            f"expected (n, d) points with one label each, got {x.shape} and {len(names)} labels"
        )
    counts = _class_counts(names)
    if len(counts) < 2 or min(counts.values()) < 3:
        raise ValidationError(
            f"need at least two classes with three points each, got {dict(counts)}"
        )
    path = Path(path)
    sidecar = path.with_suffix(".csv")
    _refuse_overwrite(path, overwrite)
    _refuse_overwrite(sidecar, overwrite)
    n = x.shape[0]
    # t-SNE needs perplexity < n; shrink it for small reference sets.
    perplexity = min(30.0, max(1.0, (n - 1) / 3.0))
    coords = TSNE(
        n_components=2, perplexity=perplexity, init="random", random_state=seed
    ).fit_transform(x)

    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    for name in sorted(counts):
        mask = np.asarray([label == name for label in names])
        ax.scatter(coords[mask, 0], coords[mask, 1], s=18.0, label=name)
    ax.set_xlabel("t-SNE dim 1")
    ax.set_ylabel("t-SNE dim 2")
    ax.set_title("emotion embedding map")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)

    lines = ["label,x,y"]
    lines += [f"{name},{float(cx)!r},{float(cy)!r}" for name, (cx, cy) in zip(names, coords)]
    sidecar.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path, sidecar


def plot_attention(
    output: DecoderOutput,
    path: str | Path,
    utterance_id: str,
    overwrite: bool = False,
) -> Path:
    """Heatmap of decoder steps against encoder positions.

    Weights are rendered exactly as produced (no renormalisation) on a fixed
    0..1 colour scale; an existing file is only replaced with ``overwrite``.
    """
    weights = np.asarray(output.attention, dtype=np.float32)
    if weights.ndim != 2 or weights.size == 0:
        raise ValidationError(f"attention must be a non-empty 2-D array, got {weights.shape}")
    path = Path(path)
    _refuse_overwrite(path, overwrite)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    image = ax.imshow(
        weights, origin="lower", aspect="auto", interpolation="nearest", vmin=0.0, vmax=1.0
    )
    ax.set_xlabel("encoder position")
    ax.set_ylabel("decoder step")
    title = f"attention: {utterance_id}"
    if output.truncated:
        title += " (truncated)"
    ax.set_title(title)
    fig.colorbar(image, ax=ax, label="weight")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _mean(rows: list[dict[str, object]], key: str) -> float:
    return float(np.mean([float(row[key]) for row in rows]))  # type: ignore[arg-type]


def evaluate_conversions(
    conversions_dir: str | Path,
    sources: Sequence[UtteranceRecord],
    targets: Sequence[UtteranceRecord],
    audio: AudioConfig,
    *,
    mcep_order: int = 13,
    scores_name: str = SCORES_NAME,
) -> list[dict[str, object]]:
    """Score a finished conversion batch against parallel target recordings.

    Each successful report row is paired with the target utterance that
    shares the source's speaker and text and carries the requested emotion.
    Two comparisons are reported per pair, explicitly labelled: converted
    audio against the target, and the untouched source against the target —
    the second is the floor any useful conversion must beat.  Per-pair rows
    are followed by per (source emotion, target emotion) aggregate means; all
    rows land in ``scores_name`` inside the conversion directory, one JSON
    object per line.  Pairs that cannot be scored are kept with an error.
    """
    conversions_dir = Path(conversions_dir)
    report_path = conversions_dir / REPORT_NAME
    if not report_path.exists():
        raise ValidationError(f"no conversion report at {report_path}")
    report_rows = [
        json.loads(line)
        for line in report_path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    source_by_id = {rec.id: rec for rec in sources}
    target_index: dict[tuple[str, str, str], UtteranceRecord] = {}
    for rec in targets:
        if rec.emotion is not None:
            target_index[(rec.speaker, rec.text, rec.emotion)] = rec

    cache: dict[str, tuple[np.ndarray, float]] = {}

    def features(path: str | Path) -> tuple[np.ndarray, float]:
        key = str(path)
        if key not in cache:
            wave = load_waveform(key, audio)
            cache[key] = (
                extract_mcep(wave, mcep_order, audio),
                detect_voicing(wave, audio).voiced_duration(),
            )
        return cache[key]

    pair_rows: list[dict[str, object]] = []
    for row in report_rows:
        entry: dict[str, object] = {
            "kind": "pair",
            "source_id": row.get("source_id"),
            "source_emotion": None,
            "target_emotion": row.get("target_emotion"),
            "target_id": None,
            "mcd_converted_target": None,
            "mcd_source_target": None,
            "ddur_converted_target": None,
            "ddur_source_target": None,
            "error": None,
        }
        try:
            if row.get("error"):
                raise ValidationError(f"conversion failed: {row['error']}")
            source = source_by_id.get(str(row["source_id"]))
            if source is None:
                raise ValidationError(f"source {row['source_id']!r} not in the source manifest")
            entry["source_emotion"] = source.emotion
            target = target_index.get((source.speaker, source.text, str(row["target_emotion"])))
            if target is None:
                raise ValidationError(
                    f"no parallel {row['target_emotion']!r} recording for {source.id!r}"
                )
            entry["target_id"] = target.id
            conv_mcep, conv_dur = features(conversions_dir / str(row["output_path"]))
            src_mcep, src_dur = features(source.audio_path)
            tgt_mcep, tgt_dur = features(target.audio_path)
            entry["mcd_converted_target"] = mcd_score(conv_mcep, tgt_mcep)
            entry["mcd_source_target"] = mcd_score(src_mcep, tgt_mcep)
            entry["ddur_converted_target"] = abs(conv_dur - tgt_dur)
            entry["ddur_source_target"] = abs(src_dur - tgt_dur)
        except (EvcError, OSError, KeyError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        pair_rows.append(entry)

    metric_keys = (
        "mcd_converted_target",
        "mcd_source_target",
        "ddur_converted_target",
        "ddur_source_target",
    )
    groups: dict[tuple[str, str], list[dict[str, object]]] = {}
    for entry in pair_rows:
        if entry["error"] is None:
            key = (str(entry["source_emotion"]), str(entry["target_emotion"]))
            groups.setdefault(key, []).append(entry)
    aggregate_rows: list[dict[str, object]] = []
    for source_emotion, target_emotion in sorted(groups):
        members = groups[(source_emotion, target_emotion)]
        aggregate: dict[str, object] = {
            "kind": "aggregate",
            "source_emotion": source_emotion,
            "target_emotion": target_emotion,
            "pairs": len(members),
        }
        for key in metric_keys:
            aggregate[key] = _mean(members, key)
        aggregate_rows.append(aggregate)

    rows = pair_rows + aggregate_rows
    scores_path = conversions_dir / scores_name
    scores_path.write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8"
    )
    return rows
