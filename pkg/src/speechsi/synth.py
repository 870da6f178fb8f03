"""Synthetic labelled recordings and transcripts with a class-separability dial.

At separability 0 both classes come from the same generator. As it grows,
"suicidal" clips lose amplitude-modulation depth and rate (flatter, less
bursty) and gain breath noise, and transcripts draw more tokens from a
class-specific vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, encode_wav_pcm16
from .errors import IoFailure
from .manifest import DatasetManifest, ManifestRow

SHARED_WORDS = (
    "the i and to a of my it was in that is have been but with so for me this just "
    "week day night had some time about they on not be went feel felt health doctor "
    "morning home work family back again little bit think know today things going "
    "still much usually house wife kids appointment weather lunch dinner weekend"
).split()

SUICIDAL_WORDS = (
    "chronic severe migraine pain problems sleeping pills knees cpap certain "
    "certainly hurt tired worse exhausted headaches"
).split()

NON_SUICIDAL_WORDS = (
    "okay right helping appreciate function improve trying find noticed aware "
    "better good walking progress enjoy improving"
).split()


@dataclass
class SynthConfig:
    n_recordings: int = 70
    imbalance: float = 6.0
    separability: float = 0.5
    duration_range: tuple = (1.5, 2.5)
    sample_rate_hz: int = 16000
    min_tokens: int = 30
    max_tokens: int = 120
    recordings_per_subject: int = 5
    shared_words: tuple = tuple(SHARED_WORDS)
    class_words: dict = field(default_factory=lambda: {1: tuple(SUICIDAL_WORDS), 0: tuple(NON_SUICIDAL_WORDS)})
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.separability <= 1.0:
            raise ValueError("separability must lie in [0, 1]")
        if self.imbalance < 1:
            raise ValueError("imbalance must be >= 1")
        if self.n_recordings < 2:
            raise ValueError("need at least two recordings")


def class_counts(n: int, imbalance: float) -> tuple[int, int]:
    """(n_pos, n_neg) with n_pos = n / (1 + imbalance) rounded half-up, at least one of each."""
    n_pos = int(np.floor(n / (1.0 + imbalance) + 0.5))
    n_pos = min(max(n_pos, 1), n - 1)
    return n_pos, n - n_pos


def synth_audio(label: int, config: SynthConfig, rng: np.random.Generator, source_id: str = "") -> AudioClip:
    """Vibrato harmonic tone, amplitude-modulated in syllable-like bursts, plus breath noise."""
    eps = config.separability
    sr = config.sample_rate_hz
    lo, hi = config.duration_range
    duration = rng.uniform(lo, hi) if hi > lo else lo
    n = int(round(duration * sr))
    t = np.arange(n) / sr

    # every draw happens for both labels so that eps = 0 gives identical generators
    f0 = rng.uniform(100.0, 220.0)
    vib_rate = rng.uniform(4.0, 6.0)
    vib_depth = rng.uniform(0.005, 0.02)
    depth = rng.uniform(0.0, 1.0)
    rate = rng.uniform(2.0, 6.0)
    am_phase = rng.uniform(0.0, 2 * np.pi)
    noise_level = rng.uniform(0.0, 0.3)
    gain = rng.uniform(0.3, 0.9)
    white = rng.standard_normal(n)

    if label == 1:
        depth *= 1.0 - eps
        rate *= 1.0 - eps
        noise_level += 0.3 * eps

    inst_freq = f0 * (1.0 + vib_depth * np.sin(2 * np.pi * vib_rate * t))
    phase = 2 * np.pi * np.cumsum(inst_freq) / sr
    tone = sum(np.sin(h * phase) / h for h in range(1, 7))
    envelope = 1.0 - depth * (0.5 + 0.5 * np.cos(2 * np.pi * rate * t + am_phase))
    voiced = tone * envelope
    rms = np.sqrt(np.mean(voiced ** 2)) or 1.0
    x = voiced + noise_level * rms * white
    x *= gain / np.max(np.abs(x))
    return AudioClip(x, sr, source_id)


def synth_transcript(label: int, config: SynthConfig, rng: np.random.Generator) -> str:
    """Unigram transcript: each token comes from the label's vocabulary with probability eps."""
    n_tokens = int(rng.integers(config.min_tokens, config.max_tokens + 1))
    shared = config.shared_words
    zipf = 1.0 / np.arange(1, len(shared) + 1)
    zipf /= zipf.sum()
    own = config.class_words[int(label)]
    from_class = rng.random(n_tokens) < config.separability
    shared_pick = rng.choice(len(shared), size=n_tokens, p=zipf)
    class_pick = rng.integers(0, len(own), size=n_tokens)
    words = [own[c] if use else shared[s] for use, s, c in zip(from_class, shared_pick, class_pick)]
    text = " ".join(words)
    return text[0].upper() + text[1:] + "."


def synth_dataset(config: SynthConfig, out_dir) -> DatasetManifest:
    """Write ``audio/*.wav``, ``text/*.txt`` and ``manifest.csv`` under ``out_dir``."""
    out = Path(out_dir)
    try:
        (out / "audio").mkdir(parents=True, exist_ok=True)
        (out / "text").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from exc

    rng = np.random.default_rng(config.seed)
    n_pos, n_neg = class_counts(config.n_recordings, config.imbalance)
    labels = rng.permutation(np.r_[np.ones(n_pos, dtype=int), np.zeros(n_neg, dtype=int)])

    # subjects never mix labels, mirroring per-person questionnaire answers being stable
    seen = {0: 0, 1: 0}
    rows = []
    for i, label in enumerate(labels):
        label = int(label)
        sid = f"rec{i:04d}"
        subject = f"{'P' if label else 'N'}{seen[label] // config.recordings_per_subject:03d}"
        seen[label] += 1
        clip = synth_audio(label, config, rng, sid)
        text = synth_transcript(label, config, rng)
        audio_rel, text_rel = f"audio/{sid}.wav", f"text/{sid}.txt"
        try:
            (out / audio_rel).write_bytes(encode_wav_pcm16(clip.samples, clip.sample_rate_hz))
            (out / text_rel).write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write {sid}: {exc}") from exc
        rows.append(ManifestRow(sid, audio_rel, text_rel, label, subject))
    manifest = DatasetManifest(rows, out)
    manifest.write(out / "manifest.csv")
    return manifest
