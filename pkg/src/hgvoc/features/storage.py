"""Acoustic feature container, binary feature files, manifests, crops.

Feature file layout (little endian): magic ``HGF1``, u32 frame count,
u32 mel band count, u32 hop in samples, u32 sample rate, then the mel
matrix as row-major f32, the F0 track as f32, and the voicing flags as
u8.  Round trips are bit-exact.
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .audio_io import load_wav

MAGIC = b"HGF1"


class FeatureFileError(ValueError):
    """Bad magic, truncated payload, or inconsistent dimensions."""


@dataclass
class AcousticFeatures:
    mel: np.ndarray       # [That, n_mels] float32
    f0_hz: np.ndarray     # [That] float32, 0 marks unvoiced
    uv: np.ndarray        # [That] uint8
    hop_samples: int
    sample_rate: int

    def __post_init__(self):
        self.mel = np.asarray(self.mel, dtype=np.float32)
        self.f0_hz = np.asarray(self.f0_hz, dtype=np.float32)
        self.uv = np.asarray(self.uv, dtype=np.uint8)

    @property
    def num_frames(self):
        return self.mel.shape[0]

    @property
    def n_mels(self):
        return self.mel.shape[1]

    def validate(self):
        if not (self.mel.shape[0] == self.f0_hz.shape[0] == self.uv.shape[0]):
            raise FeatureFileError("mel, f0 and uv lengths disagree")
        if np.any(self.f0_hz < 0):
            raise FeatureFileError("negative F0")
        if not np.array_equal(self.uv, (self.f0_hz > 0).astype(np.uint8)):
            raise FeatureFileError("voicing flags inconsistent with F0")
        if not np.all(np.isfinite(self.mel)):
            raise FeatureFileError("non-finite mel values")

    def slice_frames(self, start, stop):
        return AcousticFeatures(self.mel[start:stop].copy(),
                                self.f0_hz[start:stop].copy(),
                                self.uv[start:stop].copy(),
                                self.hop_samples, self.sample_rate)


def write_features(path, feats):
    if feats.num_frames == 0:
        raise FeatureFileError("refusing to write zero-frame features")
    feats.validate()
    header = MAGIC + struct.pack("<IIII", feats.num_frames, feats.n_mels,
                                 feats.hop_samples, feats.sample_rate)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(feats.mel, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(feats.f0_hz, dtype="<f4").tobytes())
        fh.write(feats.uv.astype(np.uint8).tobytes())


def read_features(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 20 or raw[:4] != MAGIC:
        raise FeatureFileError(f"{path}: bad magic (not a feature file)")
    t_hat, n_mels, hop, sr = struct.unpack_from("<IIII", raw, 4)
    if t_hat == 0:
        raise FeatureFileError(f"{path}: zero frames")
    need = 20 + t_hat * n_mels * 4 + t_hat * 4 + t_hat
    if len(raw) < need:
        raise FeatureFileError(f"{path}: truncated ({len(raw)} < {need} bytes)")
    off = 20
    mel = np.frombuffer(raw, dtype="<f4", count=t_hat * n_mels,
                        offset=off).reshape(t_hat, n_mels).copy()
    off += t_hat * n_mels * 4
    f0 = np.frombuffer(raw, dtype="<f4", count=t_hat, offset=off).copy()
    off += t_hat * 4
    uv = np.frombuffer(raw, dtype=np.uint8, count=t_hat, offset=off).copy()
    return AcousticFeatures(mel, f0, uv, hop, sr)


# ------------------------------------------------------------------ manifest

@dataclass
class ManifestEntry:
    utt_id: str
    wav_path: str
    feature_path: str
    num_frames: int


def write_manifest(path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{e.utt_id}\t{e.wav_path}\t{e.feature_path}\t{e.num_frames}\n")


def read_manifest(path):
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{ln}: expected 4 tab-separated fields")
            entries.append(ManifestEntry(parts[0], parts[1], parts[2], int(parts[3])))
    return entries


# ------------------------------------------------------------- crop sampling

@dataclass
class Utterance:
    utt_id: str
    audio: np.ndarray
    feats: AcousticFeatures


def load_manifest_data(manifest_path, min_samples=None):
    """Load every manifest utterance; verify stored frame counts."""
    utterances = []
    for e in read_manifest(manifest_path):
        feats = read_features(e.feature_path)
        if feats.num_frames != e.num_frames:
            raise FeatureFileError(
                f"{e.feature_path}: manifest says {e.num_frames} frames, "
                f"file has {feats.num_frames}")
        audio = load_wav(e.wav_path).samples
        if min_samples is not None and audio.shape[0] < min_samples:
            warnings.warn(f"{e.utt_id}: only {audio.shape[0]} samples, "
                          f"shorter than a {min_samples}-sample crop; skipped")
            continue
        utterances.append(Utterance(e.utt_id, audio, feats))
    return utterances


def sample_training_crop(utterances, rng, crop_samples=11000):
    """Draw one frame-aligned crop: audio of crop_samples plus its frames.

    The crop start is a multiple of the hop, so a default 11000-sample
    crop covers exactly 11000/275 = 40 feature frames.
    """
    if not utterances:
        raise ValueError("no utterances long enough to crop")
    hop = utterances[0].feats.hop_samples
    if crop_samples % hop:
        raise ValueError(f"crop of {crop_samples} is not a multiple of hop {hop}")
    n_frames = crop_samples // hop

    utt = utterances[rng.integers(0, len(utterances))]
    max_start = min((utt.audio.shape[0] - crop_samples) // hop,
                    utt.feats.num_frames - n_frames)
    if max_start < 0:
        raise ValueError(f"{utt.utt_id}: too short for a {crop_samples}-sample crop")
    sf = int(rng.integers(0, max_start + 1))
    s0 = sf * hop
    return utt.audio[s0:s0 + crop_samples].copy(), utt.feats.slice_frames(sf, sf + n_frames)
