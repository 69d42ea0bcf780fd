"""Audio I/O and the acoustic front end."""

from .audio_io import AudioBuffer, WavFormatError, load_wav, peak_normalize, save_wav
from .mel import mel_filterbank, mel_spectrogram
from .pitch import derive_uv, estimate_f0, interpolate_unvoiced, read_f0_file
from .resample import resample
from .storage import (AcousticFeatures, FeatureFileError, ManifestEntry,
                      Utterance, load_manifest_data, read_features,
                      read_manifest, sample_training_crop, write_features,
                      write_manifest)

__all__ = [
    "AudioBuffer", "WavFormatError", "load_wav", "save_wav", "peak_normalize",
    "resample", "mel_spectrogram", "mel_filterbank",
    "estimate_f0", "derive_uv", "interpolate_unvoiced", "read_f0_file",
    "AcousticFeatures", "FeatureFileError", "ManifestEntry", "Utterance",
    "write_features", "read_features", "write_manifest", "read_manifest",
    "load_manifest_data", "sample_training_crop",
]
