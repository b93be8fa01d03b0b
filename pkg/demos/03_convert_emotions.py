"""Emotion conversion with duration change, scored against real targets.

A sequence-to-sequence decoder is free to stop early or late, so converting
an utterance to a new emotion changes not just its spectra but its length.
This script takes the evaluation utterances of the toy emotional corpus,
converts each one to every emotion, and scores the results against the
parallel recordings of the target emotion: mel-cepstral distortion for
spectral distance and DDUR for voiced-duration distance, each next to the
do-nothing baseline (scoring the untouched source against the same target).

Conversions land under demos/output/conversions/ as playable wav files.
"""

from __future__ import annotations

import numpy as np

from evc.audio import extract_mel, load_waveform
from evc.corpus import EMOTIONS
from evc.evaluation import evaluate_conversions
from evc.inference import batch_convert

from _support import AUDIO, OUTPUT, emotional_splits, toy_corpora, trained_models


def main() -> None:
    _, stage2 = trained_models()
    _, emotional = toy_corpora()
    split = emotional_splits(emotional)
    sources = [r for r in split if r.split == "evaluation"]
    references = {}
    for record in split:
        if record.split == "reference":
            references.setdefault(record.emotion, []).append(
                extract_mel(load_waveform(record.audio_path, AUDIO), AUDIO)
            )

    out_dir = OUTPUT / "conversions"
    print(f"converting {len(sources)} evaluation utterances x {len(EMOTIONS)} emotions ...")
    rows = batch_convert(sources, EMOTIONS, stage2.state, AUDIO, out_dir,
                         references=references, seed=0)
    converted = [row for row in rows if row["error"] is None]
    print(f"{len(converted)}/{len(rows)} pairs converted into {out_dir}")

    frame_changes = [row for row in converted if row["output_frames"] != row["source_frames"]]
    print(f"{len(frame_changes)}/{len(converted)} conversions changed the frame count; "
          "a frame-locked converter could do none of them. examples:")
    for row in frame_changes[:4]:
        print(f"  {row['source_id']} -> {row['target_emotion']}: "
              f"{row['source_frames']} -> {row['output_frames']} frames")

    # Score against parallel targets (same speaker and text, target emotion).
    score_rows = evaluate_conversions(out_dir, sources, emotional, AUDIO, mcep_order=8)
    aggregates = [row for row in score_rows if row["kind"] == "aggregate"]
    print(f"\nwrote {out_dir / 'scores.jsonl'}")
    print("aggregate scores per (source emotion -> target emotion), converted vs "
          "untouched-source baseline:")
    for row in aggregates:
        print(f"  {row['source_emotion']:>8} -> {row['target_emotion']:<8} "
              f"({row['pairs']} pairs)  "
              f"MCD {row['mcd_converted_target']:.2f} vs {row['mcd_source_target']:.2f} dB   "
              f"DDUR {row['ddur_converted_target']:.3f} vs {row['ddur_source_target']:.3f} s")

    # Identity directions (angry -> angry, ...) keep the baseline at 0 by
    # construction; the interesting comparison is across emotions, and the
    # payoff concentrates where the tempo actually differs.
    cross = [row for row in aggregates if row["source_emotion"] != row["target_emotion"]]
    mean_conv = float(np.mean([row["ddur_converted_target"] for row in cross]))
    mean_src = float(np.mean([row["ddur_source_target"] for row in cross]))
    best = max(cross, key=lambda row: row["ddur_source_target"] - row["ddur_converted_target"])
    print(f"\nacross the {len(cross)} cross-emotion directions: "
          f"mean DDUR {mean_conv:.3f}s converted vs {mean_src:.3f}s untouched")
    print(f"largest gain: {best['source_emotion']} -> {best['target_emotion']} "
          f"({best['ddur_converted_target']:.3f}s vs {best['ddur_source_target']:.3f}s); "
          "directions into and out of 'sad', the slowest emotion, gain the most.")
    print("at this toy scale the conversions go through Griffin-Lim at 4 kHz, so "
          "they do not beat the source on MCD; the duration behaviour is the "
          "sequence-to-sequence payoff.")


if __name__ == "__main__":
    main()
