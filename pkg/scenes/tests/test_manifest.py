import json
import tempfile
from pathlib import Path

import jsonschema
import numpy as np
from django.conf import settings
from django.test import SimpleTestCase
from rest_framework.serializers import ValidationError

from scenes.manifest import load_manifest, validate_manifest, write_manifest
from scenes.types import SceneManifest, SceneSpec, SourcePlacement
from utils.exceptions import ConfigError
from .factories import white, write_clip


def scene(scene_id="s1", **kwargs):
    values = {"scene_id": scene_id, "target_path": "t.wav", "noise_path": "n.wav", "snr_noise_db": 3.0, "seed": 9}
    values.update(kwargs)
    return values


class ManifestTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        write_clip(self.root, "t.wav", white(1600, seed=0))
        write_clip(self.root, "n.wav", white(1600, seed=1))

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, payload):
        path = self.root / "manifest.json"
        path.write_text(json.dumps(payload))
        return path

    def test_well_formed_file_round_trips(self):
        manifest = SceneManifest(scenes=[
            SceneSpec(scene_id="a", target_path="t.wav", noise_path="n.wav", snr_noise_db=-2.5, seed=2 ** 63,
                      noise_placement=SourcePlacement(offset=10, fit="truncate")),
            SceneSpec(scene_id="b", target_path="t.wav", interferer_path="n.wav", snr_interferer_db=4.0),
        ])
        path = write_manifest(manifest, self.root / "manifest.json")
        loaded = load_manifest(path)
        self.assertEqual(loaded.to_dict(), manifest.to_dict())
        self.assertEqual(loaded.get("a").noise_placement, SourcePlacement(offset=10, fit="truncate"))
        self.assertEqual(path.read_bytes(), write_manifest(loaded, self.root / "again.json").read_bytes())

    def test_written_manifest_matches_the_documented_schema(self):
        manifest = SceneManifest(scenes=[
            SceneSpec(scene_id="a", target_path="t.wav", noise_path="n.wav", visual_path="a.vemb"),
            SceneSpec(scene_id="b", target_path="t.wav", interferer_path="n.wav",
                      interferer_placement=SourcePlacement(offset=3)),
        ])
        path = write_manifest(manifest, self.root / "manifest.json")
        schema = json.loads(Path(settings.AVSM_MANIFEST_SCHEMA).read_text())
        jsonschema.validate(instance=json.loads(path.read_text()), schema=schema)
        with self.assertRaises(jsonschema.ValidationError):
            jsonschema.validate(instance={"version": 1, "scenes": [scene(noise_path=None)]}, schema=schema)

    def test_defaults_are_filled_in(self):
        loaded = validate_manifest({"version": 1, "scenes": [{"scene_id": "x", "target_path": "t.wav",
                                                              "noise_path": "n.wav"}]})
        spec = loaded.get("x")
        self.assertEqual(spec.snr_noise_db, 0.0)
        self.assertEqual(spec.noise_placement, SourcePlacement())
        self.assertEqual(loaded.sample_rate, 16000)

    def test_duplicate_scene_id(self):
        path = self.write({"version": 1, "sample_rate": 16000, "scenes": [scene("dup"), scene("dup")]})
        with self.assertRaises(ValidationError) as ctx:
            load_manifest(path)
        self.assertIn("dup", str(ctx.exception.detail))

    def test_dangling_path_is_listed(self):
        path = self.write({"version": 1, "scenes": [scene(noise_path="missing/noise.wav")]})
        with self.assertRaises(ValidationError) as ctx:
            load_manifest(path)
        self.assertIn("missing/noise.wav", str(ctx.exception.detail))

    def test_dangling_paths_pass_without_file_checks(self):
        path = self.write({"version": 1, "scenes": [scene(noise_path="missing/noise.wav")]})
        self.assertEqual(len(load_manifest(path, check_files=False)), 1)

    def test_wrong_rate_audio_is_rejected(self):
        write_clip(self.root, "slow.wav", np.zeros(800) + 0.1, sample_rate=8000)
        path = self.write({"version": 1, "scenes": [scene(noise_path="slow.wav")]})
        with self.assertRaises(ValidationError) as ctx:
            load_manifest(path)
        self.assertIn("slow.wav", str(ctx.exception.detail))

    def test_field_errors_name_the_field(self):
        cases = [
            ({"version": 2, "scenes": []}, "version"),
            ({"version": 1, "sample_rate": 8000, "scenes": []}, "sample_rate"),
            ({"version": 1, "scenes": [scene(noise_path=None)]}, "interferer_path"),
            ({"version": 1, "scenes": [scene(target_path="/abs/t.wav")]}, "target_path"),
            ({"version": 1, "scenes": [scene(snr_noise_db=float("nan"))]}, "snr_noise_db"),
            ({"version": 1, "scenes": [scene(scene_id="../escape")]}, "scene_id"),
            ({"version": 1, "scenes": [scene(noise_placement={"fit": "stretch"})]}, "fit"),
        ]
        for payload, needle in cases:
            with self.subTest(needle=needle):
                with self.assertRaises(ValidationError) as ctx:
                    validate_manifest(payload)
                self.assertIn(needle, str(ctx.exception.detail))

    def test_manifest_type_rejects_duplicates(self):
        spec = SceneSpec(scene_id="a", target_path="t.wav", noise_path="n.wav")
        with self.assertRaises(ConfigError):
            SceneManifest(scenes=[spec, spec])
