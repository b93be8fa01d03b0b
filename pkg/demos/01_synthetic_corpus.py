"""Synthetic speech corpora: labelled audio from nothing but a seed.

The corpus generator renders formant-synthesized vowel strings with
per-emotion prosody recipes (pitch contour, tempo, energy), so the rest of
the toolkit can be exercised end to end without any recorded speech.  This
script builds the two corpora the other demos share and pokes at what came
out: the manifest rows, the emotion-dependent durations, the mel features,
and the per-stratum train/reference/evaluation splits.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from evc.audio import extract_mel, load_waveform
from evc.corpus import default_lexicon

from _support import AUDIO, emotional_splits, toy_corpora


def main() -> None:
    neutral, emotional = toy_corpora()
    print(f"neutral corpus:   {len(neutral)} utterances, "
          f"speakers {sorted({r.speaker for r in neutral})}")
    print(f"emotional corpus: {len(emotional)} utterances, "
          f"speakers {sorted({r.speaker for r in emotional})}, "
          f"emotions {sorted({r.emotion for r in emotional})}")

    sample = emotional[0]
    print("\none manifest row:")
    print(f"  id={sample.id!r} speaker={sample.speaker!r} emotion={sample.emotion!r}")
    print(f"  text={sample.text!r}")
    print(f"  audio={sample.audio_path} ({sample.duration_s:.2f}s)")

    # The same content item is rendered once per emotion; the prosody
    # recipes stretch or compress it, so durations separate by label.
    durations = defaultdict(list)
    for record in emotional:
        durations[record.emotion].append(record.duration_s)
    print("\nmean duration per emotion (same 20 content items each):")
    for emotion in sorted(durations):
        values = durations[emotion]
        print(f"  {emotion:<9} {np.mean(values):.2f}s (min {min(values):.2f}, max {max(values):.2f})")

    wave = load_waveform(sample.audio_path, AUDIO)
    mel = extract_mel(wave, AUDIO)
    print(f"\nfeatures for {sample.id}: waveform {wave.shape[0]} samples -> "
          f"log-mel {mel.shape} in [{mel.min():.1f}, {mel.max():.1f}]")

    lexicon = default_lexicon()
    print(f"phoneme lexicon: {lexicon.vocab_size} symbols; "
          f"{sample.text!r} -> {lexicon.transcribe(sample.text).tolist()}")

    split = emotional_splits(emotional)
    counts = defaultdict(int)
    for record in split:
        counts[record.split] += 1
    print(f"\nsplits per (speaker, emotion) stratum: "
          f"{dict(sorted(counts.items(), key=lambda kv: str(kv[0])))}")


if __name__ == "__main__":
    main()
