import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from PIL import Image

from dsp.stft import stft
from dsp.types import AudioBuffer
from enhancer.config import ModelConfig
from enhancer.visual import (
    VisualEmbeddingSequence, align_visual, encode_batch, load_video_frames, read_vemb, stub_visual_encoder,
    write_vemb,
)
from utils.exceptions import CorruptFile, FileError, ShapeError, VersionMismatch


class AlignVisualTests(SimpleTestCase):

    def setUp(self):
        self.cfg = ModelConfig()

    def test_constant_embeddings_stay_constant(self):
        row = np.linspace(-1, 1, self.cfg.visual_dim)
        v = VisualEmbeddingSequence(np.tile(row, (20, 1)))
        out = align_visual(v, 100, self.cfg).data
        np.testing.assert_allclose(out, np.tile(row, (100, 1)), atol=1e-12)

    def test_row_count_matches_stft_frames(self):
        n_samples = 102400
        frames = stft(AudioBuffer(np.zeros(n_samples)), self.cfg.stft).frames
        self.assertEqual(frames, 1025)
        v = VisualEmbeddingSequence(np.random.default_rng(0).normal(size=(160, self.cfg.visual_dim)))
        self.assertEqual(align_visual(v, frames, self.cfg).shape, (1025, self.cfg.visual_dim))

    def test_single_frame_is_held(self):
        frame = np.random.default_rng(1).normal(size=(1, self.cfg.visual_dim))
        out = align_visual(VisualEmbeddingSequence(frame), 37, self.cfg).data
        np.testing.assert_allclose(out, np.tile(frame, (37, 1)), atol=1e-12)

    def test_interpolates_between_video_frames(self):
        data = np.zeros((2, self.cfg.visual_dim))
        data[1] = 1.0
        out = align_visual(VisualEmbeddingSequence(data), 10, self.cfg).data
        # STFT frame 4 sits 4 / 6.4 of the way to the second video frame
        np.testing.assert_allclose(out[4], 4 / 6.4, atol=1e-12)
        np.testing.assert_allclose(out[9], 1.0, atol=1e-12)

    def test_dim_mismatch_raises(self):
        with self.assertRaises(ShapeError):
            align_visual(VisualEmbeddingSequence(np.zeros((3, 5))), 10, self.cfg)


class StubEncoderTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(2)

    def test_deterministic(self):
        video = self.rng.integers(0, 256, size=(12, 8, 8, 1), dtype=np.uint8)
        first = stub_visual_encoder(video, seed=5)
        second = stub_visual_encoder(video.copy(), seed=5)
        self.assertEqual(first.data.tobytes(), second.data.tobytes())
        self.assertEqual(first.source, "stub_encoder")
        self.assertEqual(first.data.shape, (12, 64))

    def test_zero_video_gives_zero_mean_bias(self):
        out = stub_visual_encoder(np.zeros((4, 6, 6, 3)), seed=9, visual_dim=16).data
        np.testing.assert_allclose(out, np.tile(out[0], (4, 1)))
        self.assertAlmostEqual(out[0].mean(), 0.0, places=12)
        self.assertGreater(np.abs(out[0]).max(), 0.0)

    def test_absent_video(self):
        self.assertIsNone(stub_visual_encoder(None, seed=0))

    def test_batch_items_do_not_interact(self):
        a = self.rng.normal(size=(5, 4, 4, 1))
        b = self.rng.normal(size=(5, 4, 4, 1))
        ab = encode_batch([a, b], seed=1, visual_dim=8)
        ba = encode_batch([b, a], seed=1, visual_dim=8)
        np.testing.assert_array_equal(ab[0].data, ba[1].data)
        np.testing.assert_array_equal(ab[1].data, ba[0].data)

    def test_embeddings_are_not_tensors(self):
        out = stub_visual_encoder(self.rng.normal(size=(3, 4, 4, 1)), seed=1)
        self.assertIsInstance(out.data, np.ndarray)


class VembFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_and_layout(self):
        data = np.random.default_rng(3).normal(size=(7, 5)).astype(np.float32)
        path = self.root / "clip.vemb"
        write_vemb(path, VisualEmbeddingSequence(data))
        blob = path.read_bytes()
        self.assertEqual(blob[:4], b"VEMB")
        self.assertEqual(struct.unpack_from("<III", blob, 4), (1, 7, 5))
        self.assertEqual(len(blob), 16 + 7 * 5 * 4)
        loaded = read_vemb(path)
        np.testing.assert_array_equal(loaded.data, data.astype(np.float64))

    def test_bad_magic(self):
        path = self.root / "bad.vemb"
        path.write_bytes(b"XEMB" + struct.pack("<III", 1, 1, 1) + b"\0\0\0\0")
        with self.assertRaises(CorruptFile):
            read_vemb(path)

    def test_other_version(self):
        path = self.root / "v2.vemb"
        path.write_bytes(b"VEMB" + struct.pack("<III", 2, 1, 1) + b"\0\0\0\0")
        with self.assertRaises(VersionMismatch):
            read_vemb(path)

    def test_truncated_payload(self):
        path = self.root / "short.vemb"
        path.write_bytes(b"VEMB" + struct.pack("<III", 1, 2, 2) + b"\0" * 8)
        with self.assertRaises(CorruptFile):
            read_vemb(path)

    def test_load_video_frames_from_gif(self):
        path = self.root / "mouth.gif"
        frames = [Image.new("L", (8, 6), color=40 * i) for i in range(4)]
        frames[0].save(path, save_all=True, append_images=frames[1:], duration=40, loop=0)
        video = load_video_frames(path)
        self.assertEqual(video.shape, (4, 6, 8, 3))
        self.assertLess(video[0].mean(), video[3].mean())

    def test_load_video_frames_missing(self):
        with self.assertRaises(FileError):
            load_video_frames(self.root / "absent.gif")
