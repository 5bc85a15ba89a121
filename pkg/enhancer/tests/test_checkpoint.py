import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from autodiff.optim import AdamWState
from enhancer.checkpoint import Checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from enhancer.network import forward, init_params
from utils.exceptions import CorruptFile, VersionMismatch
from .factories import noise, tiny_config


class CheckpointTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.cfg = tiny_config()
        self.params = init_params(self.cfg)

    def tearDown(self):
        self.tmp.cleanup()

    def save(self, checkpoint, name="model.avsm"):
        return save_checkpoint(self.root / name, checkpoint)

    def test_save_load_save_is_byte_identical(self):
        state = AdamWState(step=4)
        for name, tensor in self.params.items():
            state.m[name] = np.full(tensor.shape, 0.5)
            state.v[name] = np.full(tensor.shape, 0.25)
        first = self.save(Checkpoint(self.cfg, self.params, step=8, optimizer=state))
        loaded = load_checkpoint(first)
        second = self.save(loaded, "again.avsm")
        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertEqual(loaded.step, 8)
        self.assertEqual(loaded.optimizer.step, 4)
        self.assertEqual(loaded.config, self.cfg)
        self.assertEqual(set(loaded.optimizer.m), set(self.params))

    def test_header_layout(self):
        blob = encode_checkpoint(Checkpoint(self.cfg, self.params))
        self.assertEqual(blob[:4], b"AVSM")
        self.assertEqual(struct.unpack_from("<I", blob, 4)[0], 1)

    def test_flipped_magic(self):
        path = self.save(Checkpoint(self.cfg, self.params))
        blob = bytearray(path.read_bytes())
        blob[0] ^= 0xFF
        path.write_bytes(bytes(blob))
        with self.assertRaises(CorruptFile):
            load_checkpoint(path)

    def test_flipped_payload_byte(self):
        path = self.save(Checkpoint(self.cfg, self.params))
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0x01
        path.write_bytes(bytes(blob))
        with self.assertRaises(CorruptFile):
            load_checkpoint(path)

    def test_other_version(self):
        path = self.save(Checkpoint(self.cfg, self.params))
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(blob))
        with self.assertRaises(VersionMismatch):
            load_checkpoint(path)

    def test_forward_is_identical_after_reload(self):
        noisy = noise(2400, seed=12)
        before, _ = forward(noisy, None, self.cfg, self.params)
        loaded = load_checkpoint(self.save(Checkpoint(self.cfg, self.params)))
        after, _ = forward(noisy, None, loaded.config, loaded.params)
        self.assertEqual(before.samples.tobytes(), after.samples.tobytes())
