import numpy as np
from django.test import SimpleTestCase

from autodiff.gradcheck import gradcheck
from dsp.stft import stft
from dsp.types import AudioBuffer, Spectrogram, StftConfig
from enhancer.network import forward_tensors, init_params
from enhancer.tests.factories import noise, tiny_config
from enhancer.visual import VisualEmbeddingSequence
from losses.terms import loss_complex, loss_consistency, loss_magnitude, loss_phase, loss_time, total_loss
from losses.weights import LossWeights
from utils.exceptions import ConfigError, LengthMismatch, ShapeError


def random_spec(rng, shape=(6, 9)):
    return Spectrogram(rng.normal(size=shape), rng.normal(size=shape))


class TimeLossTests(SimpleTestCase):

    def test_examples(self):
        rng = np.random.default_rng(71)
        y = AudioBuffer(rng.normal(size=500))
        self.assertEqual(loss_time(y, y).item(), 0.0)
        self.assertAlmostEqual(loss_time(y.samples + 0.5, y).item(), 0.5, places=12)
        yhat = rng.normal(size=500)
        expected = sum(abs(a - b) for a, b in zip(yhat, y.samples)) / 500
        self.assertAlmostEqual(loss_time(yhat, y).item(), expected, delta=1e-12)

    def test_length_mismatch(self):
        with self.assertRaises(LengthMismatch):
            loss_time(np.zeros(10), np.zeros(11))


class SpectralLossTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(72)

    def test_identical_inputs_give_zero(self):
        spec = random_spec(self.rng)
        self.assertEqual(loss_magnitude(spec, spec, 0.3).item(), 0.0)
        self.assertEqual(loss_complex(spec, spec, 0.3).item(), 0.0)
        self.assertEqual(loss_phase(spec, spec).item(), 0.0)

    def test_magnitude_doubling_without_compression(self):
        spec = random_spec(self.rng)
        doubled = Spectrogram(2 * spec.real, 2 * spec.imag)
        self.assertAlmostEqual(loss_magnitude(doubled, spec, 1.0).item(), np.mean(spec.magnitude ** 2), places=9)

    def test_magnitude_matches_naive_loop(self):
        a, b = random_spec(self.rng), random_spec(self.rng)
        total = 0.0
        for t in range(6):
            for f in range(9):
                total += (np.hypot(a.real[t, f], a.imag[t, f]) ** 0.3 - np.hypot(b.real[t, f], b.imag[t, f]) ** 0.3) ** 2
        self.assertAlmostEqual(loss_magnitude(a, b, 0.3).item(), total / 54, delta=1e-9)

    def test_complex_phase_flip(self):
        phase = self.rng.uniform(-np.pi, np.pi, size=(5, 7))
        unit = Spectrogram(np.cos(phase), np.sin(phase))
        flipped = Spectrogram(-unit.real, -unit.imag)
        self.assertAlmostEqual(loss_complex(flipped, unit, 1.0).item(), 4.0, places=9)

    def test_complex_matches_naive_loop(self):
        a, b = random_spec(self.rng), random_spec(self.rng)
        total = 0.0
        for t in range(6):
            for f in range(9):
                za = complex(a.real[t, f], a.imag[t, f])
                zb = complex(b.real[t, f], b.imag[t, f])
                ca = abs(za) ** 0.3 * np.exp(1j * np.angle(za))
                cb = abs(zb) ** 0.3 * np.exp(1j * np.angle(zb))
                total += abs(ca - cb) ** 2
        self.assertAlmostEqual(loss_complex(a, b, 0.3).item(), total / 54, delta=1e-9)

    def test_phase_wrap_and_offset(self):
        magnitude = self.rng.uniform(0.5, 1.5, size=(6, 9))
        phase = self.rng.uniform(-1.0, 1.0, size=(6, 9))
        base = Spectrogram.from_polar(magnitude, phase)
        full_turn = Spectrogram.from_polar(magnitude, phase + 2 * np.pi)
        half_turn = Spectrogram.from_polar(magnitude, phase + np.pi)
        self.assertAlmostEqual(loss_phase(full_turn, base).item(), 0.0, places=9)
        self.assertAlmostEqual(loss_phase(half_turn, base).item(), np.pi, places=9)

    def test_cosine_variant(self):
        magnitude = np.ones((4, 5))
        phase = self.rng.uniform(-1.0, 1.0, size=(4, 5))
        base = Spectrogram.from_polar(magnitude, phase)
        half_turn = Spectrogram.from_polar(magnitude, phase + np.pi)
        self.assertAlmostEqual(loss_phase(half_turn, base, variant="cosine").item(), 2.0, places=9)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            loss_phase(random_spec(self.rng, (4, 5)), random_spec(self.rng, (4, 6)))


class ConsistencyLossTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(73)
        self.cfg = StftConfig(n_fft=64, win_len=64, hop=16)

    def test_real_signal_spectrogram_is_consistent(self):
        x = self.rng.normal(size=800)
        spec = stft(AudioBuffer(x), self.cfg)
        self.assertLess(loss_consistency(spec, self.cfg, out_len=800).item(), 1e-10)
        self.assertLess(loss_consistency(spec, self.cfg).item(), 1e-10)

    def test_lengths_off_the_hop_grid_are_consistent(self):
        for n, cfg in ((805, self.cfg), (813, self.cfg), (16050, StftConfig())):
            with self.subTest(n=n, n_fft=cfg.n_fft):
                spec = stft(AudioBuffer(self.rng.normal(size=n)), cfg)
                self.assertLess(loss_consistency(spec, cfg).item(), 1e-10)
                self.assertLess(loss_consistency(spec, cfg, out_len=n).item(), 1e-10)

    def test_random_phase_is_inconsistent(self):
        spec = stft(AudioBuffer(self.rng.normal(size=800)), self.cfg)
        scrambled = Spectrogram.from_polar(spec.magnitude, self.rng.uniform(-np.pi, np.pi, size=spec.shape))
        self.assertGreater(loss_consistency(scrambled, self.cfg).item(), 1e-3)

    def test_quadratic_homogeneity_without_compression(self):
        cfg = StftConfig(n_fft=64, win_len=64, hop=16, compression_exponent=1.0)
        spec = random_spec(self.rng, (20, 33))
        scaled = Spectrogram(3.0 * spec.real, 3.0 * spec.imag)
        self.assertAlmostEqual(loss_consistency(scaled, cfg).item() / loss_consistency(spec, cfg).item(), 9.0,
                               places=7)


class TotalLossTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(74)
        self.cfg = StftConfig(n_fft=64, win_len=64, hop=16)
        self.y = AudioBuffer(self.rng.normal(size=800))
        self.S = stft(self.y, self.cfg)

    def test_identical_inputs_give_zero(self):
        total, breakdown = total_loss(self.y, self.y, self.S, self.S, LossWeights(), self.cfg)
        self.assertLess(total.item(), 1e-10)
        self.assertEqual(set(breakdown), {"time", "magnitude", "complex", "phase", "consistency"})

    def test_zero_weight_removes_term(self):
        yhat = AudioBuffer(self.y.samples + self.rng.normal(scale=0.1, size=800))
        S_hat = stft(yhat, self.cfg)
        full, parts = total_loss(yhat, self.y, S_hat, self.S, LossWeights(), self.cfg)
        reduced, reduced_parts = total_loss(yhat, self.y, S_hat, self.S, LossWeights(w_phase=0.0), self.cfg)
        self.assertNotIn("phase", reduced_parts)
        self.assertAlmostEqual(full.item() - reduced.item(), 0.3 * parts["phase"], places=10)

    def test_linear_in_weights(self):
        yhat = AudioBuffer(self.rng.normal(size=800))
        S_hat = stft(yhat, self.cfg)
        one, parts = total_loss(yhat, self.y, S_hat, self.S, LossWeights(), self.cfg)
        doubled = LossWeights(w_time=0.4, w_mag=1.8, w_complex=0.2, w_phase=0.6, w_consistency=0.2)
        two, _ = total_loss(yhat, self.y, S_hat, self.S, doubled, self.cfg)
        self.assertAlmostEqual(two.item(), 2 * one.item(), places=9)
        self.assertTrue(all(value >= 0 for value in parts.values()))

    def test_weights_validation(self):
        with self.assertRaises(ConfigError):
            LossWeights(w_time=-1.0)
        with self.assertRaises(ConfigError):
            LossWeights(0.0, 0.0, 0.0, 0.0, 0.0)
        with self.assertRaises(ConfigError):
            LossWeights(phase_loss="l2")

    def test_gradcheck_through_the_model(self):
        cfg = tiny_config()
        params = init_params(cfg)
        noisy = noise(19 * cfg.stft.hop, seed=1)
        clean = noise(19 * cfg.stft.hop, seed=2)
        target = stft(clean, cfg.stft)
        visual = VisualEmbeddingSequence(self.rng.normal(size=(2, cfg.visual_dim)))

        def objective():
            out = forward_tensors(noisy, visual, cfg, params)
            total, _ = total_loss(out.waveform, clean, out.spectrogram, target, LossWeights(w_time=0.0), cfg.stft)
            return total

        inputs = [params[name] for name in ("encoder.conv2.weight", "tf.0.time.fwd.A_log", "mag_decoder.out.weight",
                                            "phase_decoder.out.weight", "visual.proj.weight")]
        error = gradcheck(objective, inputs, max_entries=4, rng=np.random.default_rng(0))
        self.assertLess(error, 1e-3)
