"""Rate conversion: lengths, band preservation, linearity."""

import numpy as np
import pytest

from pamtriage.resample import resample, resample_output_length, resample_samples

from conftest import make_clip, make_tone


class TestOutputLength:
    def test_600s_hydrophone_clip(self):
        """19,660,800 samples at 32,768 Hz map to 13,230,000 at 22,050 Hz."""
        assert resample_output_length(19660800, 32768, 22050) == 13230000

    def test_round_half_up(self):
        # 3 samples 8k -> 11k: 3*11/8 = 4.125 -> 4
        assert resample_output_length(3, 8000, 11000) == 4

    def test_function_honors_formula(self, rng):
        for n, src, dst in [(32768, 32768, 22050), (1000, 8000, 12000), (777, 22050, 8000)]:
            x = rng.standard_normal(n) * 0.1
            out = resample_samples(x, src, dst)
            assert len(out) == resample_output_length(n, src, dst)

    def test_length_is_content_independent(self, rng):
        a = resample_samples(np.zeros(4096), 32000, 22050)
        b = resample_samples(rng.standard_normal(4096), 32000, 22050)
        assert len(a) == len(b)


class TestIdentityAndLinearity:
    def test_identity_rate_is_bit_identical(self, rng):
        x = rng.standard_normal(5000) * 0.3
        clip = make_clip(x, 22050)
        out = resample(clip, 22050)
        assert np.array_equal(out.samples, x)

    def test_linearity(self, rng):
        """resample(a*x) == a*resample(x) within 1e-9 for |a| <= 1."""
        x = rng.standard_normal(8000) * 0.5
        base = resample_samples(x, 32768, 22050)
        for a in (0.5, -0.25, 1.0, 0.125):
            scaled = resample_samples(a * x, 32768, 22050)
            np.testing.assert_allclose(scaled, a * base, atol=1e-9)

    def test_superposition(self, rng):
        x = rng.standard_normal(4096) * 0.2
        y = rng.standard_normal(4096) * 0.2
        lhs = resample_samples(x + y, 32768, 22050)
        rhs = resample_samples(x, 32768, 22050) + resample_samples(y, 32768, 22050)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestSpectralFidelity:
    def test_1khz_tone_preserved(self):
        """FFT peak stays at 1 kHz and the level moves less than 0.5 dB."""
        rate_in, rate_out = 32768, 22050
        x = make_tone(1000.0, rate_in, seconds=1.0)
        out = resample_samples(x, rate_in, rate_out)

        # interior slices avoid the filter's edge transients
        a = out[rate_out // 10 : -rate_out // 10]
        b = x[rate_in // 10 : -rate_in // 10]
        level_db = 20 * np.log10(np.sqrt(np.mean(a**2)) / np.sqrt(np.mean(b**2)))
        assert abs(level_db) < 0.5

        freqs = np.fft.rfftfreq(len(a), 1 / rate_out)
        peak = freqs[np.argmax(np.abs(np.fft.rfft(a)))]
        assert abs(peak - 1000.0) < freqs[1] * 1.5

    def test_upsampling_preserves_tone(self):
        rate_in, rate_out = 22050, 32768
        x = make_tone(3000.0, rate_in, seconds=0.5)
        out = resample_samples(x, rate_in, rate_out)
        a = out[rate_out // 10 : -rate_out // 10]
        freqs = np.fft.rfftfreq(len(a), 1 / rate_out)
        peak = freqs[np.argmax(np.abs(np.fft.rfft(a)))]
        assert abs(peak - 3000.0) < freqs[1] * 1.5

    def test_downsampling_rejects_above_target_nyquist(self):
        """Content above the output Nyquist must be attenuated, not aliased."""
        rate_in, rate_out = 32768, 8192
        x = make_tone(6000.0, rate_in, seconds=0.5)  # above 4096 Hz Nyquist
        out = resample_samples(x, rate_in, rate_out)
        a = out[rate_out // 10 : -rate_out // 10]
        in_rms = np.sqrt(np.mean(x**2))
        out_rms = np.sqrt(np.mean(a**2))
        assert 20 * np.log10(out_rms / in_rms + 1e-30) < -60


class TestEdgeCases:
    def test_empty_input(self):
        assert len(resample_samples(np.zeros(0), 32768, 22050)) == 0

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            resample_samples(np.zeros(10), 8000, 0)
