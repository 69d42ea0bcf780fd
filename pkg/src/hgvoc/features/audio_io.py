"""WAV reading and writing.

Hand-rolled RIFF chunk parsing so malformed files fail with a clear error:
16-bit PCM and 32-bit float sources are accepted, stereo is downmixed by
averaging, and writing always produces mono 16-bit PCM.
"""

import struct
from dataclasses import dataclass

import numpy as np


class WavFormatError(ValueError):
    """Malformed RIFF structure or an unsupported codec."""


@dataclass
class AudioBuffer:
    """Mono audio in [-1, 1] floats plus its sample rate."""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)

    def duration(self):
        return self.samples.shape[0] / self.sample_rate


def load_wav(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos:pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise WavFormatError(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            if len(body) < size:
                raise WavFormatError(f"{path}: data chunk truncated")
            data = body
        pos += 8 + size + (size & 1)  # chunks are word aligned

    if fmt is None:
        raise WavFormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise WavFormatError(f"{path}: missing data chunk")
    if len(data) == 0:
        raise WavFormatError(f"{path}: empty data chunk")

    audio_format, channels, sample_rate, _, _, bits = fmt
    if channels < 1:
        raise WavFormatError(f"{path}: bad channel count {channels}")

    if audio_format == 1 and bits == 16:
        x = np.frombuffer(data, dtype="<i2").astype(np.float32) / 32768.0
    elif audio_format == 3 and bits == 32:
        x = np.frombuffer(data, dtype="<f4").astype(np.float32)
    else:
        raise WavFormatError(
            f"{path}: unsupported codec (format={audio_format}, bits={bits}); "
            "need 16-bit PCM or 32-bit float")

    if channels > 1:
        usable = (x.shape[0] // channels) * channels
        x = x[:usable].reshape(-1, channels).mean(axis=1)
    if not np.all(np.isfinite(x)):
        raise WavFormatError(f"{path}: non-finite samples")
    x = np.clip(x, -1.0, 1.0)
    return AudioBuffer(x, sample_rate)


def save_wav(path, buf):
    x = np.clip(np.round(buf.samples.astype(np.float64) * 32768.0),
                -32768, 32767).astype("<i2")
    payload = x.tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, buf.sample_rate,
                                 buf.sample_rate * 2, 2, 16)
    hdr += b"data" + struct.pack("<I", len(payload))
    with open(path, "wb") as fh:
        fh.write(hdr + payload)


def peak_normalize(buf, peak=0.95):
    """Scale so the absolute peak hits the target; silence is left alone."""
    m = float(np.max(np.abs(buf.samples))) if buf.samples.size else 0.0
    if m <= 0.0:
        return AudioBuffer(buf.samples.copy(), buf.sample_rate)
    return AudioBuffer(buf.samples * np.float32(peak / m), buf.sample_rate)
