"""Kernel backend selection and cross-backend agreement."""

import numpy as np
import pytest

from hgvoc import backend, kernels_numpy

compiled_missing = "compiled" not in backend.available_backends()
needs_compiled = pytest.mark.skipif(
    compiled_missing, reason="compiled kernels not built (python build_ext.py)")


class TestSelection:
    def test_active_backend_is_listed(self):
        assert backend.active_backend() in backend.available_backends()

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError):
            backend.use_backend("fortran")

    @needs_compiled
    def test_switching_round_trip(self):
        start = backend.active_backend()
        prior = backend.use_backend("compiled")
        assert prior == start
        assert backend.active_backend() == "compiled"
        backend.use_backend("numpy")
        assert backend.active_backend() == "numpy"
        backend.use_backend(start)


@needs_compiled
class TestAgreement:
    CASES = [
        # (c_in, c_out, kernel, length, dilation, stride, groups)
        (2, 3, 3, 16, 1, 1, 1),
        (16, 16, 5, 1000, 8, 1, 1),
        (16, 64, 41, 512, 1, 4, 4),
        (5, 7, 3, 33, 2, 1, 1),
        (1, 4, 9, 64, 1, 4, 1),
        (64, 64, 5, 600, 16, 1, 1),
        (8, 8, 1, 100, 1, 1, 1),
    ]

    @pytest.mark.parametrize("c_in,c_out,k,t,d,s,g", CASES)
    def test_conv_kernels_agree(self, c_in, c_out, k, t, d, s, g):
        from hgvoc import _kernels as compiled
        rng = np.random.default_rng(hash((c_in, c_out, k, t)) % 2 ** 31)
        x = rng.standard_normal((c_in, t))
        w = rng.standard_normal((c_out, c_in // g, k))
        pad = (k - 1) * d // 2
        xp = np.ascontiguousarray(np.pad(x, ((0, 0), (pad, pad))))

        y_np = kernels_numpy.conv1d_forward(xp, w, d, s, g)
        y_cy = compiled.conv1d_forward(xp, w, d, s, g)
        np.testing.assert_allclose(y_np, y_cy, rtol=1e-12, atol=1e-12)

        gy = np.ascontiguousarray(rng.standard_normal(y_np.shape))
        np.testing.assert_allclose(
            kernels_numpy.conv1d_backward_input(gy, w, d, s, g, xp.shape[1]),
            compiled.conv1d_backward_input(gy, w, d, s, g, xp.shape[1]),
            rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(
            kernels_numpy.conv1d_backward_weight(gy, xp, d, s, g, k),
            compiled.conv1d_backward_weight(gy, xp, d, s, g, k),
            rtol=1e-11, atol=1e-11)

    def test_digest_agrees(self):
        from hgvoc import _kernels as compiled
        rng = np.random.default_rng(0)
        for n in (0, 1, 100, 4096):
            blob = rng.integers(0, 256, n, dtype=np.uint8).tobytes()
            assert compiled.fnv1a64(blob) == kernels_numpy.fnv1a64(blob)

    def test_synthesis_close_across_backends(self):
        from hgvoc.config import RunConfig, generator_config
        from hgvoc.synthetic import make_bench_features
        from hgvoc.wavenet import GeneratorModel, synthesize_audio
        rc = RunConfig(n_mels=8, k_harmonics=4, encoder_channels=8,
                       wavenet_stacks=1, wavenet_layers=2, wavenet_channels=4,
                       wavenet_kernel=3)
        model = GeneratorModel(generator_config(rc), seed=0)
        feats = make_bench_features(rc, 0.2, seed=0)
        start = backend.active_backend()
        try:
            backend.use_backend("numpy")
            a = synthesize_audio(model, feats, seed=1)
            backend.use_backend("compiled")
            b = synthesize_audio(model, feats, seed=1)
        finally:
            backend.use_backend(start)
        # same math, different summation order: float32-close, not bitwise
        np.testing.assert_allclose(a, b, atol=1e-4)
