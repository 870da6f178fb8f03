"""Short-term acoustic descriptors and their per-recording aggregation.

Each analysis frame yields 34 values (time-domain, spectral, MFCC and chroma
descriptors). A recording is summarised by the mean and population standard
deviation of every descriptor and of its first difference, giving a
136-dimensional vector with a fixed name order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from .audio_io import AudioClip, FrameSequence, frame_signal
from .errors import TooFewFrames

SILENCE_EPS = 1e-12
LOG_FLOOR = 1e-10
N_SUBFRAMES = 10
N_SPECTRAL_BANDS = 10
ROLLOFF_FRACTION = 0.90
N_MEL_FILTERS = 26
N_MFCC = 13
N_CHROMA = 12

SHORT_TERM_NAMES = (
    ["zcr", "energy", "energy_entropy", "spectral_centroid", "spectral_spread",
     "spectral_entropy", "spectral_flux", "spectral_rolloff"]
    + [f"mfcc_{i}" for i in range(1, N_MFCC + 1)]
    + [f"chroma_{i}" for i in range(1, N_CHROMA + 1)]
    + ["chroma_std"]
)
N_SHORT_TERM = len(SHORT_TERM_NAMES)  # 34

# means of raw, means of deltas, stds of raw, stds of deltas
FEATURE_NAMES = (
    [f"{n}_mean" for n in SHORT_TERM_NAMES]
    + [f"{n}_delta_mean" for n in SHORT_TERM_NAMES]
    + [f"{n}_std" for n in SHORT_TERM_NAMES]
    + [f"{n}_delta_std" for n in SHORT_TERM_NAMES]
)
N_FEATURES = len(FEATURE_NAMES)  # 136


@dataclass(frozen=True)
class ShortTermFeatures:
    values: np.ndarray  # (num_frames, 34)
    feature_names: tuple = tuple(SHORT_TERM_NAMES)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray  # (136,)
    names: tuple = tuple(FEATURE_NAMES)
    source_id: str = ""

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])


# ---------------------------------------------------------------- time domain

def zero_crossing_rate(frame) -> float:
    """Fraction of consecutive sample pairs whose sign differs (zero counts as positive)."""
    x = np.asarray(frame, dtype=float)
    if x.size < 2:
        raise ValueError("frame needs at least two samples")
    s = x >= 0
    return float(np.count_nonzero(s[1:] != s[:-1]) / (x.size - 1))


def energy(frame) -> float:
    x = np.asarray(frame, dtype=float)
    return float(np.mean(x * x))


def _entropy_rows(energies: np.ndarray) -> np.ndarray:
    """Base-2 entropy of each row of non-negative energies; 0 for all-zero rows."""
    total = energies.sum(axis=-1, keepdims=True)
    p = np.divide(energies, total, out=np.zeros_like(energies), where=total > 0)
    logs = np.log2(p, out=np.zeros_like(p), where=p > 0)
    return -(p * logs).sum(axis=-1)


def energy_entropy(frame, num_subframes: int = N_SUBFRAMES) -> float:
    x = np.asarray(frame, dtype=float)
    block = x.size // num_subframes
    if block == 0:
        raise ValueError("frame shorter than the number of sub-frames")
    e = (x[:block * num_subframes].reshape(num_subframes, block) ** 2).sum(axis=1)
    return float(_entropy_rows(e))


# ------------------------------------------------------------------- spectral

def magnitude_spectrum(frames: np.ndarray) -> np.ndarray:
    """|DFT| of Hamming-windowed frames, one-sided (N//2 + 1 bins), DFT length = frame length."""
    frames = np.atleast_2d(np.asarray(frames, dtype=float))
    window = np.hamming(frames.shape[-1])
    return np.abs(np.fft.rfft(frames * window, axis=-1))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


@lru_cache(maxsize=32)
def mel_filterbank(n_bins: int, n_fft: int, sample_rate_hz: int,
                   num_filters: int = N_MEL_FILTERS) -> np.ndarray:
    """Triangular filters equally spaced on the mel scale from 0 Hz to Nyquist.

    Returns a read-only ``(num_filters, n_bins)`` weight matrix.
    """
    edges_hz = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate_hz / 2.0), num_filters + 2))
    bin_hz = np.arange(n_bins) * sample_rate_hz / n_fft
    lo, mid, hi = edges_hz[:-2, None], edges_hz[1:-1, None], edges_hz[2:, None]
    rising = (bin_hz - lo) / (mid - lo)
    falling = (hi - bin_hz) / (hi - mid)
    fb = np.clip(np.minimum(rising, falling), 0.0, None)
    fb.setflags(write=False)
    return fb


def mfcc(magnitude, sample_rate_hz: int, num_filters: int = N_MEL_FILTERS,
         num_coeffs: int = N_MFCC, n_fft: int | None = None) -> np.ndarray:
    """Mel-frequency cepstral coefficients of one or more magnitude spectra.

    Parameters
    ----------
    magnitude : array, shape (n_bins,) or (n_frames, n_bins)
        One-sided magnitude spectrum.
    sample_rate_hz : int
    num_filters, num_coeffs : int
    n_fft : int, optional
        DFT length the spectrum came from. Defaults to ``2 * (n_bins - 1)``.

    Returns
    -------
    ndarray
        ``num_coeffs`` coefficients per spectrum: orthonormal DCT-II of the
        natural log of mel filterbank power, floored at 1e-10.
    """
    mag = np.asarray(magnitude, dtype=float)
    n_bins = mag.shape[-1]
    if n_fft is None:
        n_fft = 2 * (n_bins - 1)
    fb = mel_filterbank(n_bins, n_fft, int(sample_rate_hz), num_filters)
    mel_energy = (mag * mag) @ fb.T
    log_energy = np.log(np.maximum(mel_energy, LOG_FLOOR))
    return dct(log_energy, type=2, norm="ortho", axis=-1)[..., :num_coeffs]


def _chroma_map(n_bins: int, n_fft: int, sample_rate_hz: int) -> np.ndarray:
    freqs = np.arange(1, n_bins) * sample_rate_hz / n_fft
    # pitch class relative to A440; DC bin excluded
    return np.mod(np.round(12.0 * np.log2(freqs / 440.0)).astype(int), N_CHROMA)


def spectral_features(mag: np.ndarray, sample_rate_hz: int, n_fft: int) -> np.ndarray:
    """Centroid, spread, entropy, flux, rolloff, 13 MFCCs, 12 chroma and chroma std.

    ``mag`` is ``(num_frames, n_bins)``; returns ``(num_frames, 31)``. Silent
    frames (total magnitude below 1e-12) get zeros for everything except MFCCs.
    """
    n_frames, n_bins = mag.shape
    total_mag = mag.sum(axis=1)
    silent = total_mag < SILENCE_EPS
    safe_total = np.where(silent, 1.0, total_mag)
    power = mag * mag
    total_pow = power.sum(axis=1)
    safe_pow = np.where(silent | (total_pow <= 0), 1.0, total_pow)

    f = np.arange(n_bins) / (n_fft / 2.0)
    centroid = (mag @ f) / safe_total
    spread = np.sqrt(np.maximum((mag * (f[None, :] - centroid[:, None]) ** 2).sum(axis=1) / safe_total, 0.0))

    band = n_bins // N_SPECTRAL_BANDS
    band_energy = power[:, :band * N_SPECTRAL_BANDS].reshape(n_frames, N_SPECTRAL_BANDS, band).sum(axis=2)
    spec_entropy = _entropy_rows(band_energy)

    norm_mag = np.where(silent[:, None], 0.0, mag / safe_total[:, None])
    flux = np.zeros(n_frames)
    flux[1:] = ((norm_mag[1:] - norm_mag[:-1]) ** 2).sum(axis=1)

    cum = np.cumsum(power, axis=1)
    roll_idx = np.argmax(cum >= ROLLOFF_FRACTION * cum[:, -1:], axis=1)
    rolloff = f[roll_idx]

    cepstra = mfcc(mag, sample_rate_hz, n_fft=n_fft)

    pitch_class = _chroma_map(n_bins, n_fft, sample_rate_hz)
    chroma = np.zeros((n_frames, N_CHROMA))
    for c in range(N_CHROMA):
        chroma[:, c] = power[:, 1:][:, pitch_class == c].sum(axis=1)
    chroma_total = chroma.sum(axis=1, keepdims=True)
    chroma = np.divide(chroma, chroma_total, out=np.zeros_like(chroma), where=chroma_total > 0)
    chroma_std = chroma.std(axis=1)

    out = np.column_stack([centroid, spread, spec_entropy, flux, rolloff, cepstra, chroma, chroma_std])
    zero_cols = np.r_[0, 1, 2, 4, np.arange(18, 31)]
    out[np.ix_(silent, zero_cols)] = 0.0
    return out


def short_term_features(frames: FrameSequence) -> ShortTermFeatures:
    """Compute the 34 per-frame descriptors for every frame of a sequence."""
    x = frames.frames
    n_frames, n = x.shape
    if n_frames < 2:
        raise TooFewFrames(f"need at least 2 frames, got {n_frames}")
    if n < N_SUBFRAMES:
        raise ValueError("frames are shorter than the energy sub-frame count")

    s = x >= 0
    zcr = np.count_nonzero(s[:, 1:] != s[:, :-1], axis=1) / (n - 1)
    eng = np.mean(x * x, axis=1)
    block = n // N_SUBFRAMES
    sub = (x[:, :block * N_SUBFRAMES].reshape(n_frames, N_SUBFRAMES, block) ** 2).sum(axis=2)
    eng_entropy = _entropy_rows(sub)

    mag = magnitude_spectrum(x)
    spectral = spectral_features(mag, frames.sample_rate_hz, n)
    values = np.column_stack([zcr, eng, eng_entropy, spectral])
    return ShortTermFeatures(values)


def aggregate(st: ShortTermFeatures, source_id: str = "") -> FeatureVector:
    """Mean and population std of each descriptor and of its first difference."""
    v = st.values
    if v.shape[0] < 2:
        raise TooFewFrames(f"need at least 2 frames, got {v.shape[0]}")
    delta = np.zeros_like(v)
    delta[1:] = v[1:] - v[:-1]
    out = np.concatenate([v.mean(axis=0), delta.mean(axis=0), v.std(axis=0), delta.std(axis=0)])
    return FeatureVector(out, tuple(FEATURE_NAMES), source_id)


def extract_features(clip: AudioClip, frame_size_ms: float = 50.0,
                     frame_step_ms: float = 25.0) -> FeatureVector:
    frames = frame_signal(clip, frame_size_ms, frame_step_ms)
    return aggregate(short_term_features(frames), clip.source_id)
