import io
import struct
import wave

import numpy as np
import pytest


def wav_bytes_pcm16(int_samples, sample_rate=16000, channels=1):
    """Independent PCM16 writer built on the stdlib ``wave`` module."""
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(np.asarray(int_samples, dtype="<i2").tobytes())
    return buf.getvalue()


def wav_bytes_float32(samples, sample_rate=16000, channels=1):
    data = np.asarray(samples, dtype="<f4").tobytes()
    fmt = struct.pack("<HHIIHH", 3, channels, sample_rate, sample_rate * 4 * channels, 4 * channels, 32)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(data)) + data
    return b"RIFF" + struct.pack("<I", len(body)) + body


def direct_dft_magnitude(x):
    """O(N^2) one-sided DFT magnitude by explicit summation."""
    n = len(x)
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    return np.abs((x[None, :] * np.exp(-2j * np.pi * k * t / n)).sum(axis=1))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance summary: one PASS/FAIL line per criterion at the end of the run

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        title = name.split("_", 3)[3].replace("_", " ")
        _CRITERIA[number] = ("PASS" if report.outcome == "passed" else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
