"""Mel spectrograms, the 20-statistic embedding provider, and the exchange format."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pamtriage.errors import BandCountMismatch, DimensionMismatch, DuplicateSnippetRef, ParseError, RateMismatch
from pamtriage.features import (
    EMBED_DIM,
    STAT_NAMES,
    STATS_PER_BAND,
    Embedding,
    FeatureConfig,
    band_index_for_freq,
    embed_reference,
    embed_snippet,
    embeddings_matrix,
    import_embeddings,
    mel_spectrogram,
    MelSpectrogram,
    write_embeddings,
)

from conftest import make_snippet, make_tone

LOG_FLOOR = np.log(1e-10)


class TestMelSpectrogram:
    def test_default_shape_is_64x42(self):
        """floor((22050 - 1024)/512) + 1 = 42 frames over 64 bands."""
        s = make_snippet(np.zeros(22050), 22050)
        mel = mel_spectrogram(s)
        assert mel.values.shape == (64, 42)
        assert mel.n_frames == 42

    def test_silence_hits_the_floor(self):
        s = make_snippet(np.zeros(22050), 22050)
        mel = mel_spectrogram(s)
        assert np.all(mel.values == LOG_FLOOR)

    def test_tone_concentrates_in_its_band(self):
        """A 1 kHz tone peaks in the same mel band in every frame."""
        cfg = FeatureConfig()
        s = make_snippet(make_tone(1000.0, 22050), 22050)
        mel = mel_spectrogram(s, cfg)
        argmax_per_frame = np.argmax(mel.values, axis=0)
        assert len(np.unique(argmax_per_frame)) == 1
        assert argmax_per_frame[0] == band_index_for_freq(cfg, 1000.0)

    def test_rate_mismatch_rejected(self):
        s = make_snippet(np.zeros(8000), 8000)
        with pytest.raises(RateMismatch):
            mel_spectrogram(s, FeatureConfig())

    def test_time_reversal_reverses_frames(self, rng):
        """Reversed input gives frame-reversed output when the frame grid
        tiles the snippet exactly (symmetric window, magnitude spectrum)."""
        cfg = FeatureConfig(sample_rate=5120, fmax=2560.0)
        n = 5120  # (n - n_fft) divisible by hop: frames align under reversal
        x = rng.standard_normal(n) * 0.3
        fwd = mel_spectrogram(make_snippet(x, 5120), cfg).values
        rev = mel_spectrogram(make_snippet(x[::-1].copy(), 5120), cfg).values
        np.testing.assert_allclose(rev[:, 1:-1], fwd[:, ::-1][:, 1:-1], atol=1e-6)

    def test_config_hash_distinguishes_configs(self):
        assert FeatureConfig().config_hash != FeatureConfig(n_mels=32, fmax=8000.0).config_hash


class TestEmbedReference:
    def test_dimension_and_determinism(self, rng):
        s = make_snippet(rng.standard_normal(22050) * 0.1, 22050)
        mel = mel_spectrogram(s)
        e1 = embed_reference(mel)
        e2 = embed_reference(mel)
        assert e1.shape == (EMBED_DIM,)
        assert np.array_equal(e1, e2)

    def test_silence_statistics(self):
        """Constant input: stds, ranges and all delta statistics are 0, means
        sit at the log floor."""
        s = make_snippet(np.zeros(22050), 22050)
        vec = embed_reference(mel_spectrogram(s)).reshape(64, STATS_PER_BAND)
        names = list(STAT_NAMES)
        assert np.all(vec[:, names.index("mean")] == LOG_FLOOR)
        for stat in ("std", "range", "mean_abs_delta", "std_delta", "max_abs_delta"):
            assert np.all(vec[:, names.index(stat)] == 0.0), stat

    def test_tone_vs_noise_distinguishable(self, rng):
        tone = embed_snippet(make_snippet(make_tone(1000.0, 22050), 22050)).vector
        noise = embed_snippet(make_snippet(rng.standard_normal(22050) * 0.1, 22050)).vector
        cos = tone @ noise / np.sqrt((tone @ tone) * (noise @ noise))
        assert cos < 0.99

    def test_band_count_enforced(self):
        bad = MelSpectrogram(values=np.zeros((32, 10)), n_mels=32, n_frames=10,
                             config_hash="x")
        with pytest.raises(BandCountMismatch):
            embed_reference(bad)

    def test_log_domain_shift_covariance(self, rng):
        """Adding c to every mel cell shifts location statistics by exactly c
        and leaves spread/delta/shape statistics unchanged."""
        values = rng.standard_normal((64, 42)) * 2.0
        base = MelSpectrogram(values=values, n_mels=64, n_frames=42, config_hash="x")
        c = 0.7
        shifted = MelSpectrogram(values=values + c, n_mels=64, n_frames=42, config_hash="x")
        eb = embed_reference(base).reshape(64, STATS_PER_BAND)
        es = embed_reference(shifted).reshape(64, STATS_PER_BAND)
        names = list(STAT_NAMES)
        shifted_stats = ("mean", "min", "max", "median", "q10", "q25", "q75", "q90",
                         "first", "last")
        invariant_stats = ("std", "range", "mean_abs_delta", "std_delta",
                           "max_abs_delta", "lag1_autocorr", "energy_fraction",
                           "flux_contribution", "above_mean_fraction", "trend_slope")
        for stat in shifted_stats:
            i = names.index(stat)
            np.testing.assert_allclose(es[:, i], eb[:, i] + c, atol=1e-9, err_msg=stat)
        for stat in invariant_stats:
            i = names.index(stat)
            np.testing.assert_allclose(es[:, i], eb[:, i], atol=1e-9, err_msg=stat)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_no_nan_inf_for_random_snippets(self, seed):
        rng = np.random.default_rng(seed)
        x = np.clip(rng.standard_normal(22050) * rng.uniform(0, 1.0), -1, 1)
        vec = embed_snippet(make_snippet(x, 22050)).vector
        assert np.all(np.isfinite(vec))


class TestExchangeFormat:
    def _emb(self, i, dim=EMBED_DIM):
        rng = np.random.default_rng(i)
        return Embedding(snippet_ref=(f"clip-{i % 3}", i), vector=rng.standard_normal(dim))

    def test_roundtrip_order_preserved(self, tmp_path):
        embs = [self._emb(i) for i in range(500)]
        path = tmp_path / "emb.bin"
        write_embeddings(path, embs)
        back = import_embeddings(path)
        assert len(back) == 500
        assert [e.snippet_ref for e in back] == [e.snippet_ref for e in embs]
        assert all(e.provider == "imported" for e in back)
        np.testing.assert_allclose(
            embeddings_matrix(back), embeddings_matrix(embs), atol=1e-6
        )

    def test_single_row(self, tmp_path):
        path = tmp_path / "one.bin"
        write_embeddings(path, [self._emb(0)])
        assert len(import_embeddings(path)) == 1

    def test_wrong_dimension_rejected(self, tmp_path):
        path = tmp_path / "short.bin"
        write_embeddings(path, [self._emb(0, dim=1279)])
        with pytest.raises(DimensionMismatch):
            import_embeddings(path)

    def test_dim_override_accepts_other_sizes(self, tmp_path):
        path = tmp_path / "short.bin"
        write_embeddings(path, [self._emb(0, dim=256)])
        assert len(import_embeddings(path, expected_dim=None)) == 1

    def test_duplicate_ref_rejected(self, tmp_path):
        e = self._emb(0)
        path = tmp_path / "dup.bin"
        write_embeddings(path, [e, e])
        with pytest.raises(DuplicateSnippetRef):
            import_embeddings(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        with pytest.raises(ParseError):
            import_embeddings(path)
