import numpy as np
from django.test import SimpleTestCase

from dsp.stft import (
    compress_magnitude, decompress_magnitude, frame_count, frame_indices, analysis_window, istft, stft, verify_cola,
)
from dsp.types import AudioBuffer, Spectrogram, StftConfig
from utils.exceptions import ConfigError, DomainError, EmptyInput

SR = 16000


class StftTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(31)
        self.cfg = StftConfig()

    def test_frame_count_formula(self):
        self.assertEqual(frame_count(SR, self.cfg), 1 + (SR + 400 - 400) // 100)
        spec = stft(AudioBuffer(self.rng.normal(size=SR)), self.cfg)
        self.assertEqual(spec.shape, (161, 201))

    def test_zero_input_gives_zero_spectrogram(self):
        spec = stft(AudioBuffer(np.zeros(SR)), self.cfg)
        self.assertEqual(spec.bins, self.cfg.n_fft // 2 + 1)
        self.assertFalse(np.any(spec.real) or np.any(spec.imag))

    def test_linearity(self):
        x = self.rng.normal(size=SR // 4)
        y = self.rng.normal(size=SR // 4)
        sx, sy = stft(AudioBuffer(x), self.cfg), stft(AudioBuffer(y), self.cfg)
        sxy = stft(AudioBuffer(x + y), self.cfg)
        scale = np.max(np.abs(sxy.real)) + np.max(np.abs(sxy.imag))
        np.testing.assert_allclose(sx.real + sy.real, sxy.real, atol=1e-10 * scale)
        np.testing.assert_allclose(sx.imag + sy.imag, sxy.imag, atol=1e-10 * scale)
        scaled = stft(AudioBuffer(3.0 * x), self.cfg)
        np.testing.assert_allclose(scaled.real, 3.0 * sx.real, atol=1e-10 * scale)

    def test_bin_centered_cosine_concentrates_energy(self):
        cfg = StftConfig(window="rect")
        k = 20
        t = np.arange(SR // 2)
        x = np.cos(2 * np.pi * k * t / cfg.n_fft)
        spec = stft(AudioBuffer(x), cfg)
        power = spec.magnitude ** 2
        interior = power[2:-2]
        share = interior[:, k] / interior.sum(axis=1)
        self.assertTrue(np.all(share >= 0.99))

        # one interior frame against a direct double-precision DFT
        frame = 10
        samples = x[frame_indices(len(x), cfg)[frame]] * analysis_window(cfg)
        n = np.arange(cfg.win_len)
        direct = np.sum(samples * np.exp(-2j * np.pi * k * n / cfg.n_fft))
        self.assertAlmostEqual(spec.real[frame, k], direct.real, places=8)
        self.assertAlmostEqual(spec.imag[frame, k], direct.imag, places=8)

    def test_parseval_matches_windowed_energy(self):
        x = self.rng.normal(size=SR // 2)
        spec = stft(AudioBuffer(x), self.cfg)
        weights = np.full(spec.bins, 2.0)
        weights[0] = 1.0
        weights[-1] = 1.0
        spectral = np.sum((spec.magnitude ** 2) * weights) / self.cfg.n_fft
        frames = x[frame_indices(len(x), self.cfg)] * analysis_window(self.cfg)
        self.assertAlmostEqual(spectral / np.sum(frames ** 2), 1.0, delta=1e-6)

    def test_empty_audio_raises(self):
        with self.assertRaises(EmptyInput):
            stft(AudioBuffer(np.zeros(0)), self.cfg)

    def test_phase_and_magnitude_ranges(self):
        spec = stft(AudioBuffer(self.rng.normal(size=4000)), self.cfg)
        self.assertTrue(np.all(spec.magnitude >= 0))
        self.assertTrue(np.all(spec.phase > -np.pi) and np.all(spec.phase <= np.pi))


class IstftTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(32)

    def assertRoundTrip(self, cfg, n_samples=SR):
        x = self.rng.uniform(-1, 1, size=n_samples)
        y = istft(stft(AudioBuffer(x), cfg), cfg, n_samples).samples
        self.assertEqual(len(y), n_samples)
        interior = slice(cfg.win_len, n_samples - cfg.win_len)
        self.assertLess(np.max(np.abs(y[interior] - x[interior])), 1e-6)

    def test_round_trip_default(self):
        cfg = StftConfig()
        for trial in range(50):
            n_samples = int(self.rng.integers(4 * cfg.win_len, SR + 1))
            with self.subTest(trial=trial, n_samples=n_samples):
                self.assertRoundTrip(cfg, n_samples)

    def test_round_trip_other_configs(self):
        self.assertRoundTrip(StftConfig(window="hann"))
        self.assertRoundTrip(StftConfig(n_fft=512, win_len=320, hop=80))
        self.assertRoundTrip(StftConfig(window="rect", hop=400))

    def test_zero_spectrogram_gives_zero_waveform(self):
        cfg = StftConfig()
        zeros = Spectrogram(np.zeros((50, cfg.n_bins)), np.zeros((50, cfg.n_bins)))
        out = istft(zeros, cfg, 4000)
        np.testing.assert_array_equal(out.samples, 0.0)

    def test_scaled_magnitude_scales_sine(self):
        cfg = StftConfig()
        x = np.sin(2 * np.pi * 440 * np.arange(SR) / SR)
        spec = stft(AudioBuffer(x), cfg)
        halved = Spectrogram.from_polar(0.5 * spec.magnitude, spec.phase)
        y = istft(halved, cfg, SR).samples
        interior = slice(cfg.win_len, SR - cfg.win_len)
        self.assertLess(np.max(np.abs(y[interior] - 0.5 * x[interior])), 1e-6)

    def test_out_len_is_exact(self):
        cfg = StftConfig()
        spec = stft(AudioBuffer(self.rng.normal(size=1000)), cfg)
        self.assertEqual(len(istft(spec, cfg, 700)), 700)
        longer = istft(spec, cfg, 3000).samples
        self.assertEqual(len(longer), 3000)
        np.testing.assert_array_equal(longer[1200:], 0.0)

    def test_bin_mismatch_raises(self):
        with self.assertRaises(ConfigError):
            istft(Spectrogram(np.zeros((4, 10)), np.zeros((4, 10))), StftConfig(), 100)


class ColaAndCompressionTests(SimpleTestCase):

    def test_verify_cola(self):
        self.assertTrue(verify_cola(StftConfig(window="hann", win_len=400, hop=100)))
        self.assertFalse(verify_cola(StftConfig(window="hann", win_len=400, hop=300)))
        self.assertTrue(verify_cola(StftConfig(window="rect", win_len=400, hop=400)))
        self.assertTrue(verify_cola(StftConfig()))

    def test_invalid_config(self):
        with self.assertRaises(ConfigError):
            StftConfig(hop=500)
        with self.assertRaises(ConfigError):
            StftConfig(compression_exponent=0.0)
        with self.assertRaises(ConfigError):
            StftConfig(window="hamming")

    def test_compression_examples(self):
        mag = np.abs(np.random.default_rng(33).normal(size=(5, 7))) + 1e-6
        np.testing.assert_array_equal(compress_magnitude(mag, 1.0), mag)
        np.testing.assert_array_equal(compress_magnitude(np.zeros(3), 0.3), 0.0)
        self.assertAlmostEqual(compress_magnitude(np.array([4.0]), 0.5)[0], 2.0, places=15)
        np.testing.assert_allclose(decompress_magnitude(compress_magnitude(mag, 0.3), 0.3), mag, rtol=1e-9)

    def test_negative_magnitude_raises(self):
        with self.assertRaises(DomainError):
            compress_magnitude(np.array([-1.0]), 0.3)
        with self.assertRaises(DomainError):
            decompress_magnitude(np.array([-1.0]), 0.3)
