import numpy as np
from django.test import SimpleTestCase

from dsp.types import AudioBuffer
from metrics.stoi import stoi
from scenes.mixer import active_power
from scenes.synth import speech_like
from utils.exceptions import DomainError, LengthMismatch, TooShort


def buffer(x):
    return AudioBuffer(np.asarray(x, dtype=np.float64), 16000)


def at_snr(clean, noise, snr_db):
    scale = np.sqrt(active_power(clean) / (active_power(noise) * 10 ** (snr_db / 10)))
    return clean + scale * noise


class StoiTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.clean, _ = speech_like(np.random.default_rng(2), 48000)
        cls.noise = np.random.default_rng(3).normal(size=48000)

    def test_identical_signals(self):
        self.assertGreaterEqual(stoi(buffer(self.clean), buffer(self.clean)), 0.999)

    def test_independent_noise_scores_low(self):
        self.assertLess(stoi(buffer(self.clean), buffer(self.noise)), 0.2)

    def test_increasing_snr_increases_stoi(self):
        scores = [stoi(buffer(self.clean), buffer(at_snr(self.clean, self.noise, snr))) for snr in (-5, 0, 5)]
        self.assertLess(scores[0], scores[1])
        self.assertLess(scores[1], scores[2])

    def test_ten_noise_levels_are_strictly_ordered(self):
        scores = [
            stoi(buffer(self.clean), buffer(at_snr(self.clean, self.noise, snr)))
            for snr in range(-10, 10, 2)
        ]
        self.assertTrue(all(a < b for a, b in zip(scores, scores[1:])), scores)

    def test_global_scaling_of_either_input(self):
        processed = at_snr(self.clean, self.noise, 0.0)
        base = stoi(buffer(self.clean), buffer(processed))
        self.assertAlmostEqual(stoi(buffer(10 * self.clean), buffer(processed)), base, delta=1e-6)
        self.assertAlmostEqual(stoi(buffer(self.clean), buffer(10 * processed)), base, delta=1e-6)

    def test_too_little_speech(self):
        short = self.clean[:3200]
        with self.assertRaises(TooShort):
            stoi(buffer(short), buffer(short))

    def test_contract_errors(self):
        with self.assertRaises(LengthMismatch):
            stoi(buffer(self.clean), buffer(self.clean[:-1]))
        with self.assertRaises(DomainError):
            stoi(buffer(np.zeros(48000)), buffer(self.noise))
