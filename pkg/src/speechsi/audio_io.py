"""WAV decoding and short-term framing.

Only uncompressed RIFF/WAVE is handled: 16-bit PCM and 32-bit IEEE float,
mono or stereo. Stereo is mixed down by averaging the two channels and no
resampling is performed; downstream features normalise frequencies by the
native Nyquist rate.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ClipTooShort, MalformedContainer, UnsupportedEncoding

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int
    source_id: str = ""

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (num_frames, frame_len)
    frame_size_ms: float
    frame_step_ms: float
    sample_rate_hz: int
    step_len: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_len(self) -> int:
        return self.frames.shape[1]


def _chunks(data: bytes):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer("missing RIFF/WAVE magic")
    riff_size = struct.unpack("<I", data[4:8])[0]
    if riff_size + 8 > len(data):
        raise MalformedContainer(f"RIFF size {riff_size} exceeds file length {len(data)}")
    pos = 12
    end = riff_size + 8
    while pos + 8 <= end:
        cid = data[pos:pos + 4]
        size = struct.unpack("<I", data[pos + 4:pos + 8])[0]
        body_start = pos + 8
        if body_start + size > end:
            raise MalformedContainer(f"chunk {cid!r} overruns container")
        yield cid, data[body_start:body_start + size]
        pos = body_start + size + (size & 1)


def decode_wav(data: bytes, source_id: str = "") -> AudioClip:
    """Decode a PCM16 or float32 WAV byte string into a mono clip in [-1, 1]."""
    fmt = None
    payload = None
    for cid, body in _chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise MalformedContainer("fmt chunk too short")
            fmt = struct.unpack("<HHIIHH", body[:16])
            if fmt[0] == WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 26:
                    raise MalformedContainer("extensible fmt chunk too short")
                # sub-format GUID starts with the actual format code
                fmt = (struct.unpack("<H", body[24:26])[0],) + fmt[1:]
        elif cid == b"data":
            payload = body
    if fmt is None or payload is None:
        raise MalformedContainer("missing fmt or data chunk")

    tag, channels, rate, _, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{channels} channels")
    if tag == WAVE_FORMAT_PCM and bits == 16:
        dtype = np.dtype("<i2")
        scale = 1.0 / 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
        scale = 1.0
    else:
        raise UnsupportedEncoding(f"format tag {tag:#06x} with {bits} bits per sample")
    if rate <= 0:
        raise MalformedContainer("zero sample rate")
    if block_align != channels * dtype.itemsize:
        raise MalformedContainer(f"block_align {block_align} inconsistent with format")

    usable = len(payload) - len(payload) % block_align
    raw = np.frombuffer(payload[:usable], dtype=dtype).astype(np.float64) * scale
    if raw.size == 0:
        raise MalformedContainer("empty data chunk")
    if channels == 2:
        raw = raw.reshape(-1, 2).mean(axis=1)
    np.clip(raw, -1.0, 1.0, out=raw)
    return AudioClip(raw, int(rate), source_id)


def read_wav(path, source_id: str | None = None) -> AudioClip:
    path = Path(path)
    return decode_wav(path.read_bytes(), source_id if source_id is not None else path.stem)


def encode_wav_pcm16(samples: np.ndarray, sample_rate_hz: int) -> bytes:
    """Encode mono samples in [-1, 1] as a 16-bit PCM WAV byte string."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, WAVE_FORMAT_PCM, 1, sample_rate_hz, sample_rate_hz * 2, 2, 16,
        b"data", len(pcm),
    )
    return header + pcm


def frame_signal(clip: AudioClip, frame_size_ms: float = 50.0,
                 frame_step_ms: float = 25.0) -> FrameSequence:
    """Slice a clip into overlapping frames; a trailing partial frame is dropped."""
    frame_len = int(round(frame_size_ms * clip.sample_rate_hz / 1000.0))
    step_len = int(round(frame_step_ms * clip.sample_rate_hz / 1000.0))
    if frame_len < 1 or step_len < 1:
        raise ValueError("frame size and step must cover at least one sample")
    n = len(clip.samples)
    if n < frame_len:
        raise ClipTooShort(f"{n} samples < frame length {frame_len}")
    num_frames = (n - frame_len) // step_len + 1
    windows = np.lib.stride_tricks.sliding_window_view(clip.samples, frame_len)
    frames = windows[::step_len][:num_frames].copy()
    return FrameSequence(frames, frame_size_ms, frame_step_ms, clip.sample_rate_hz, step_len)
