import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from dsp.wav_io import read_wav
from scenes.mixer import (
    PEAK_LIMIT, active_mask, active_power, audit_scene_snr, fit_source, mix_scene, mix_scene_stems,
    write_scene_stems,
)
from scenes.synth import harmonic_interferer, speech_like
from scenes.types import SceneSpec, SourcePlacement
from utils.exceptions import ConfigError, DomainError, FileError, ZeroPowerSource
from .factories import white, write_clip


class ActivityTests(SimpleTestCase):

    def test_silence_has_no_active_frames(self):
        self.assertFalse(active_mask(np.zeros(1000)).any())
        self.assertEqual(active_power(np.zeros(1000)), 0.0)

    def test_frames_more_than_40_db_down_are_ignored(self):
        x = np.concatenate([np.ones(256), np.full(256, 1e-3)])
        mask = active_mask(x)
        self.assertTrue(mask[:256].all())
        self.assertFalse(mask[256:].any())
        self.assertAlmostEqual(active_power(x), 1.0)

    def test_partial_last_frame_counts(self):
        x = np.ones(300)
        self.assertTrue(active_mask(x).all())
        self.assertEqual(active_mask(x).shape, (300,))


class FitSourceTests(SimpleTestCase):

    def test_loop_wraps_from_offset(self):
        out = fit_source(np.arange(4.0), 7, SourcePlacement(offset=2, fit="loop"))
        np.testing.assert_array_equal(out, [2, 3, 0, 1, 2, 3, 0])

    def test_truncate_pads_with_silence(self):
        out = fit_source(np.arange(1.0, 5.0), 6, SourcePlacement(offset=1, fit="truncate"))
        np.testing.assert_array_equal(out, [2, 3, 4, 0, 0, 0])

    def test_truncate_offset_past_end(self):
        with self.assertRaises(DomainError):
            fit_source(np.ones(4), 6, SourcePlacement(offset=4, fit="truncate"))

    def test_drawn_offset_follows_seed(self):
        src = np.arange(1000.0)
        a = fit_source(src, 10, SourcePlacement(), seed=5, stream=1)
        b = fit_source(src, 10, SourcePlacement(), seed=5, stream=1)
        np.testing.assert_array_equal(a, b)
        self.assertTrue(any(
            not np.array_equal(a, fit_source(src, 10, SourcePlacement(), seed=s, stream=1)) for s in range(6, 10)
        ))

    def test_placement_validation(self):
        with self.assertRaises(ConfigError):
            SourcePlacement(fit="stretch")
        with self.assertRaises(ConfigError):
            SourcePlacement(offset=-1)


class MixSceneTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        rng = np.random.default_rng(0)
        target, _ = speech_like(rng, 16000)
        write_clip(self.root, "target.wav", 0.5 * target)
        write_clip(self.root, "interferer.wav", harmonic_interferer(rng, 24000))
        write_clip(self.root, "noise.wav", white(24000, seed=1))

    def tearDown(self):
        self.tmp.cleanup()

    def spec(self, **kwargs):
        values = dict(scene_id="s1", target_path="target.wav", seed=7)
        values.update(kwargs)
        return SceneSpec(**values)

    def test_zero_db_with_equal_power_gives_unit_scale(self):
        x = white(4096, seed=3)
        write_clip(self.root, "a.wav", x)
        # rolling by whole activity frames keeps the set of frame energies
        write_clip(self.root, "b.wav", np.roll(x, 512))
        spec = SceneSpec(scene_id="eq", target_path="a.wav", noise_path="b.wav", snr_noise_db=0.0,
                         noise_placement=SourcePlacement(offset=0))
        stems = mix_scene_stems(spec, self.root)
        self.assertAlmostEqual(stems.scales["noise"], 1.0, places=9)

    def test_requested_snr_is_measured_on_the_stems(self):
        spec = self.spec(interferer_path="interferer.wav", snr_interferer_db=6.0,
                         noise_path="noise.wav", snr_noise_db=-3.0)
        audit = audit_scene_snr(mix_scene_stems(spec, self.root))
        self.assertAlmostEqual(audit["interferer"], 6.0, delta=0.1)
        self.assertAlmostEqual(audit["noise"], -3.0, delta=0.1)

    def test_snr_survives_writing_the_stems(self):
        spec = self.spec(interferer_path="interferer.wav", snr_interferer_db=6.0)
        stems = mix_scene_stems(spec, self.root)
        written = write_scene_stems(stems, self.root)
        clean = read_wav(self.root / written["clean"]).samples
        scaled = read_wav(self.root / written["interferer"]).samples
        measured = 10 * np.log10(active_power(clean) / active_power(scaled))
        self.assertAlmostEqual(measured, 6.0, delta=0.1)
        self.assertEqual(written["noisy"], "scenes/s1/noisy.wav")
        self.assertEqual(written["interferer"], "scenes/s1/interferer_scaled.wav")

    def test_same_spec_twice_is_bitwise_identical(self):
        spec = self.spec(interferer_path="interferer.wav", noise_path="noise.wav", snr_noise_db=2.5)
        a = mix_scene_stems(spec, self.root)
        b = mix_scene_stems(spec, self.root)
        self.assertEqual(a.noisy.tobytes(), b.noisy.tobytes())
        self.assertEqual(a.target.tobytes(), b.target.tobytes())

    def test_mixture_is_target_plus_scaled_source(self):
        spec = self.spec(noise_path="noise.wav", snr_noise_db=10.0, noise_placement=SourcePlacement(offset=123))
        stems = mix_scene_stems(spec, self.root)
        self.assertEqual(stems.peak_gain, 1.0)
        target = read_wav(self.root / "target.wav").samples
        noise = fit_source(read_wav(self.root / "noise.wav").samples, len(target), SourcePlacement(offset=123))
        np.testing.assert_array_equal(stems.noisy, target + stems.scales["noise"] * noise)
        np.testing.assert_array_equal(stems.target, target)

    def test_loud_scene_is_rescaled_jointly(self):
        write_clip(self.root, "loud.wav", white(16000, seed=4, scale=0.3))
        spec = SceneSpec(scene_id="loud", target_path="loud.wav", noise_path="noise.wav", snr_noise_db=-10.0)
        stems = mix_scene_stems(spec, self.root)
        self.assertLess(stems.peak_gain, 1.0)
        self.assertLessEqual(np.abs(stems.noisy).max(), PEAK_LIMIT + 1e-12)
        target = read_wav(self.root / "loud.wav").samples
        np.testing.assert_allclose(stems.target, target * stems.peak_gain, rtol=0, atol=1e-15)
        self.assertAlmostEqual(audit_scene_snr(stems)["noise"], -10.0, delta=0.1)

    def test_mix_scene_returns_noisy_and_clean(self):
        spec = self.spec(noise_path="noise.wav", snr_noise_db=0.0)
        noisy, clean = mix_scene(spec, self.root)
        self.assertEqual(len(noisy), 16000)
        self.assertEqual(len(clean), 16000)
        self.assertEqual(noisy.sample_rate, 16000)

    def test_silent_source_cannot_reach_an_snr(self):
        write_clip(self.root, "silence.wav", np.zeros(8000))
        with self.assertRaises(ZeroPowerSource):
            mix_scene_stems(self.spec(noise_path="silence.wav"), self.root)

    def test_silent_target_is_rejected(self):
        write_clip(self.root, "silence.wav", np.zeros(8000))
        with self.assertRaises(DomainError):
            mix_scene_stems(SceneSpec(scene_id="x", target_path="silence.wav", noise_path="noise.wav"), self.root)

    def test_missing_clip(self):
        with self.assertRaises(FileError):
            mix_scene_stems(self.spec(noise_path="nope.wav"), self.root)

    def test_spec_needs_a_source_and_finite_snr(self):
        with self.assertRaises(ConfigError):
            SceneSpec(scene_id="x", target_path="t.wav")
        with self.assertRaises(ConfigError):
            SceneSpec(scene_id="x", target_path="t.wav", noise_path="n.wav", snr_noise_db=float("inf"))
