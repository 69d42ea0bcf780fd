"""Acoustic front end: WAV I/O, resampling, mel, F0, feature files, crops."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgvoc import features as feat
from hgvoc.features import (AcousticFeatures, AudioBuffer, FeatureFileError,
                            WavFormatError)
from hgvoc.numcore.ops import frame_count


def sine(freq, seconds, sr=22050, amp=0.7):
    t = np.arange(int(seconds * sr), dtype=np.float64)
    return AudioBuffer((amp * np.sin(2 * np.pi * freq * t / sr)).astype(np.float32), sr)


# ------------------------------------------------------------------ wav i/o

class TestWavIO:
    def test_round_trip_quantization_bound(self, tmp_path):
        rng = np.random.default_rng(0)
        buf = AudioBuffer(rng.uniform(-1, 1, 5000).astype(np.float32), 22050)
        p = tmp_path / "x.wav"
        feat.save_wav(p, buf)
        back = feat.load_wav(p)
        assert back.sample_rate == 22050
        assert np.max(np.abs(back.samples - buf.samples)) <= 1.0 / 32768

    def test_16bit_values_survive_exactly(self, tmp_path):
        codes = np.array([-32768, -1, 0, 1, 12345, 32767], np.int16)
        buf = AudioBuffer(codes.astype(np.float32) / 32768.0, 8000)
        p = tmp_path / "q.wav"
        feat.save_wav(p, buf)
        np.testing.assert_array_equal(feat.load_wav(p).samples, buf.samples)

    def test_zero_length_data_chunk_errors(self, tmp_path):
        import struct
        hdr = b"RIFF" + struct.pack("<I", 36) + b"WAVE"
        hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, 22050, 44100, 2, 16)
        hdr += b"data" + struct.pack("<I", 0)
        p = tmp_path / "empty.wav"
        p.write_bytes(hdr)
        with pytest.raises(WavFormatError):
            feat.load_wav(p)

    def test_stereo_identical_channels_downmixes_to_either(self, tmp_path):
        import struct
        rng = np.random.default_rng(1)
        mono = (rng.uniform(-0.9, 0.9, 600) * 32767).astype("<i2")
        inter = np.empty(1200, "<i2")
        inter[0::2] = mono
        inter[1::2] = mono
        payload = inter.tobytes()
        hdr = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
        hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 2, 22050, 88200, 4, 16)
        hdr += b"data" + struct.pack("<I", len(payload))
        p = tmp_path / "st.wav"
        p.write_bytes(hdr + payload)
        got = feat.load_wav(p)
        np.testing.assert_allclose(got.samples, mono.astype(np.float32) / 32768,
                                   atol=1e-7)

    def test_float32_wav_loads(self, tmp_path):
        import struct
        x = np.linspace(-0.5, 0.5, 300).astype("<f4")
        payload = x.tobytes()
        hdr = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
        hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 3, 1, 48000, 192000, 4, 32)
        hdr += b"data" + struct.pack("<I", len(payload))
        p = tmp_path / "f.wav"
        p.write_bytes(hdr + payload)
        got = feat.load_wav(p)
        assert got.sample_rate == 48000
        np.testing.assert_allclose(got.samples, x, atol=1e-7)

    def test_not_a_wav_errors(self, tmp_path):
        p = tmp_path / "no.wav"
        p.write_bytes(b"ID3\x00 definitely not riff audio")
        with pytest.raises(WavFormatError):
            feat.load_wav(p)

    def test_peak_normalize(self):
        buf = AudioBuffer(np.array([0.1, -0.4, 0.2], np.float32), 22050)
        out = feat.peak_normalize(buf, 0.95)
        assert abs(np.max(np.abs(out.samples)) - 0.95) < 1e-6
        silent = feat.peak_normalize(AudioBuffer(np.zeros(10, np.float32), 22050))
        np.testing.assert_array_equal(silent.samples, np.zeros(10))


# ---------------------------------------------------------------- resampling

class TestResample:
    def test_equal_rates_identity(self):
        buf = sine(440, 0.1)
        out = feat.resample(buf, 22050)
        np.testing.assert_array_equal(out.samples, buf.samples)

    def test_tone_keeps_frequency_48k_to_22k(self):
        buf = sine(1000, 0.5, sr=48000)
        out = feat.resample(buf, 22050)
        assert out.sample_rate == 22050
        n = 8192
        seg = out.samples[2000:2000 + n].astype(np.float64) * np.hanning(n)
        spec = np.abs(np.fft.rfft(seg))
        peak_hz = np.argmax(spec) * 22050 / n
        assert abs(peak_hz - 1000.0) <= 22050 / n + 1e-9  # within one bin

    def test_dc_preserved(self):
        buf = AudioBuffer(np.full(4000, 0.25, np.float32), 48000)
        out = feat.resample(buf, 22050)
        mid = out.samples[100:-100]
        assert np.max(np.abs(mid - 0.25)) < 1e-3

    def test_bad_target_rate(self):
        with pytest.raises(ValueError):
            feat.resample(sine(100, 0.01), 0)


# ----------------------------------------------------------------------- mel

class TestMelSpectrogram:
    def test_silence_hits_log_floor(self):
        buf = AudioBuffer(np.zeros(5000, np.float32), 22050)
        mel = feat.mel_spectrogram(buf)
        np.testing.assert_allclose(mel, np.log(1e-5), atol=1e-6)

    def test_tone_has_stable_argmax_band(self):
        mel = feat.mel_spectrogram(sine(220, 1.0))
        bands = mel.argmax(axis=1)
        interior = bands[3:-3]
        assert np.all(interior == interior[0])
        # oracle: the winning band's center frequency should bracket 220 Hz
        fb = feat.mel_filterbank()
        centers = (np.arange(1025) * 22050 / 2048)
        band_center = centers[fb[interior[0]].argmax()]
        assert 150 < band_center < 300

    def test_frame_count_formula(self):
        buf = AudioBuffer(np.zeros(11000, np.float32), 22050)
        assert feat.mel_spectrogram(buf).shape == (41, 80)
        assert frame_count(11000, 275) == 41

    def test_too_short_raises(self):
        with pytest.raises(ValueError):
            feat.mel_spectrogram(AudioBuffer(np.zeros(500, np.float32), 22050))

    def test_silence_then_tone_floor_localized(self):
        sr = 22050
        tone = sine(220, 0.5).samples
        x = np.concatenate([np.zeros(11000, np.float32), tone])
        mel = feat.mel_spectrogram(AudioBuffer(x, sr))
        silent_frames = np.all(np.abs(mel - np.log(1e-5)) < 1e-6, axis=1)
        boundary = 11000 // 275
        # frames whose 1102-sample window lies fully in the silent half
        assert np.all(silent_frames[:boundary - 2])
        assert not np.any(silent_frames[boundary + 2:])


# ------------------------------------------------------------------------ f0

class TestPitch:
    def test_pure_tone_tracked_within_2hz(self):
        f0 = feat.estimate_f0(sine(220, 1.0))
        interior = f0[4:-4]
        assert np.all(interior > 0)
        assert np.max(np.abs(interior - 220.0)) <= 2.0

    def test_low_and_high_tones(self):
        for hz in (80.0, 400.0):
            f0 = feat.estimate_f0(sine(hz, 1.0))
            interior = f0[6:-6]
            voiced = interior[interior > 0]
            assert voiced.size > 0.9 * interior.size
            assert np.max(np.abs(voiced - hz)) <= 0.01 * hz + 2.0

    def test_white_noise_mostly_unvoiced(self):
        unvoiced_fraction = []
        for seed in range(3):
            rng = np.random.default_rng(seed)
            buf = AudioBuffer(rng.uniform(-0.8, 0.8, 22050).astype(np.float32), 22050)
            f0 = feat.estimate_f0(buf)
            unvoiced_fraction.append(np.mean(f0 == 0))
        assert min(unvoiced_fraction) >= 0.9

    def test_silence_all_zero(self):
        buf = AudioBuffer(np.zeros(22050, np.float32), 22050)
        np.testing.assert_array_equal(feat.estimate_f0(buf), 0.0)

    def test_f0_length_matches_mel(self):
        buf = sine(150, 0.71)
        assert feat.estimate_f0(buf).shape[0] == feat.mel_spectrogram(buf).shape[0]


class TestVoicing:
    def test_derive_uv_cases(self):
        np.testing.assert_array_equal(
            feat.derive_uv([0.0, 120.5, 0.0, 98.2]), [0, 1, 0, 1])
        np.testing.assert_array_equal(feat.derive_uv(np.zeros(4)), np.zeros(4))
        np.testing.assert_array_equal(feat.derive_uv(np.full(4, 100.0)), np.ones(4))

    def test_negative_f0_rejected(self):
        with pytest.raises(ValueError):
            feat.derive_uv([10.0, -1.0])

    def test_interpolate_hand_example(self):
        out = feat.interpolate_unvoiced([0.0, 100.0, 0.0, 0.0, 200.0])
        np.testing.assert_allclose(out, [100.0, 100.0, 133.33333, 166.66667, 200.0],
                                   rtol=1e-5)

    def test_interpolate_no_gaps_unchanged(self):
        x = np.array([100.0, 150.0, 120.0], np.float32)
        np.testing.assert_allclose(feat.interpolate_unvoiced(x), x, rtol=1e-6)

    def test_interpolate_all_unvoiced_fallback(self):
        np.testing.assert_array_equal(feat.interpolate_unvoiced(np.zeros(5)),
                                      np.full(5, 100.0))

    def test_interpolate_idempotent_and_positive(self):
        rng = np.random.default_rng(3)
        f0 = rng.uniform(60, 300, 40).astype(np.float32)
        f0[rng.uniform(size=40) < 0.5] = 0.0
        once = feat.interpolate_unvoiced(f0)
        twice = feat.interpolate_unvoiced(once)
        np.testing.assert_array_equal(once, twice)
        assert np.all(once > 0)
        if np.any(f0 > 0):
            assert once.min() >= f0[f0 > 0].min() - 1e-4


# -------------------------------------------------------------- feature file

def random_features(rng, t_hat=20, n_mels=8):
    f0 = rng.uniform(60, 300, t_hat).astype(np.float32)
    f0[rng.uniform(size=t_hat) < 0.3] = 0.0
    return AcousticFeatures(
        mel=rng.standard_normal((t_hat, n_mels)).astype(np.float32),
        f0_hz=f0,
        uv=(f0 > 0).astype(np.uint8),
        hop_samples=275,
        sample_rate=22050,
    )


class TestFeatureFile:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(4)
        feats = random_features(rng)
        p = tmp_path / "u.hgf"
        feat.write_features(p, feats)
        back = feat.read_features(p)
        np.testing.assert_array_equal(back.mel, feats.mel)
        np.testing.assert_array_equal(back.f0_hz, feats.f0_hz)
        np.testing.assert_array_equal(back.uv, feats.uv)
        assert back.hop_samples == 275 and back.sample_rate == 22050
        feat.write_features(tmp_path / "v.hgf", back)
        assert (tmp_path / "u.hgf").read_bytes() == (tmp_path / "v.hgf").read_bytes()

    def test_wrong_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.hgf"
        p.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(FeatureFileError):
            feat.read_features(p)

    def test_truncated_rejected(self, tmp_path):
        rng = np.random.default_rng(5)
        p = tmp_path / "t.hgf"
        feat.write_features(p, random_features(rng))
        data = p.read_bytes()
        p.write_bytes(data[:len(data) - 7])
        with pytest.raises(FeatureFileError):
            feat.read_features(p)

    def test_zero_frames_rejected(self, tmp_path):
        feats = AcousticFeatures(np.zeros((0, 8), np.float32), np.zeros(0, np.float32),
                                 np.zeros(0, np.uint8), 275, 22050)
        with pytest.raises(FeatureFileError):
            feat.write_features(tmp_path / "z.hgf", feats)

    @given(st.integers(1, 40), st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_voicing_consistency_invariant(self, t_hat, seed):
        rng = np.random.default_rng(seed)
        feats = random_features(rng, t_hat=t_hat)
        feats.validate()  # lengths equal and uv == (f0 > 0) elementwise
        assert len(feats.mel) == len(feats.f0_hz) == len(feats.uv)


# --------------------------------------------------------------------- crops

class TestTrainingCrop:
    def _mk_utt(self, rng, n_samples=30000):
        audio = rng.uniform(-0.5, 0.5, n_samples).astype(np.float32)
        t_hat = frame_count(n_samples, 275)
        feats = random_features(rng, t_hat=t_hat)
        return feat.Utterance("u0", audio, feats)

    def test_crop_arithmetic(self):
        assert 275 * 40 == 11000

    def test_fixed_seed_reproducible(self):
        rng = np.random.default_rng(10)
        utt = self._mk_utt(np.random.default_rng(0))
        a1, f1 = feat.sample_training_crop([utt], np.random.default_rng(7))
        a2, f2 = feat.sample_training_crop([utt], np.random.default_rng(7))
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(f1.mel, f2.mel)

    def test_offsets_frame_aligned_for_1000_draws(self):
        # audio is a ramp, so the first crop sample reveals the offset
        n = 30000
        audio = np.arange(n, dtype=np.float32) / n
        feats = random_features(np.random.default_rng(1), t_hat=frame_count(n, 275))
        utt = feat.Utterance("u0", audio, feats)
        rng = np.random.default_rng(11)
        seen = set()
        for _ in range(1000):
            crop, fsl = feat.sample_training_crop([utt], rng)
            assert crop.shape[0] == 11000 and fsl.num_frames == 40
            offset = int(round(float(crop[0]) * n))
            assert offset % 275 == 0
            np.testing.assert_array_equal(crop, audio[offset:offset + 11000])
            np.testing.assert_array_equal(
                fsl.f0_hz, feats.f0_hz[offset // 275:offset // 275 + 40])
            seen.add(offset)
        assert len(seen) > 10  # the sampler actually explores start positions

    def test_empty_pool_raises(self):
        with pytest.raises(ValueError):
            feat.sample_training_crop([], np.random.default_rng(0))

    def test_manifest_round_trip(self, tmp_path):
        entries = [feat.ManifestEntry("a", "/w/a.wav", "/f/a.hgf", 41),
                   feat.ManifestEntry("b", "/w/b.wav", "/f/b.hgf", 120)]
        p = tmp_path / "manifest.tsv"
        feat.write_manifest(p, entries)
        back = feat.read_manifest(p)
        assert back == entries
