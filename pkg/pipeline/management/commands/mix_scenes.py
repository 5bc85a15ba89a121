import os
from pathlib import Path

from django.core.management.base import CommandError

from pipeline.management.base import USAGE_ERROR, PipelineCommand
from scenes.corpus import MANIFEST_NAME, generate_toy_corpus
from utils.checksums import directory_sha256


class Command(PipelineCommand):
    help = "Synthesize a deterministic toy corpus (sources, mixed scenes, visual embeddings, manifest)."

    def add_command_arguments(self, parser):
        parser.add_argument("--n-scenes", "--spec-count", dest="n_scenes", type=int, default=10)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out", required=True, help="Corpus directory; manifest.json is written here.")
        parser.add_argument("--visual-dim", type=int, default=64)
        parser.add_argument("--duration", type=float, default=1.0, help="Seconds of audio per scene.")

    def run(self, **options):
        out = Path(options["out"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CommandError(f"cannot create output directory {out}: {exc}", returncode=USAGE_ERROR) from exc
        if not os.access(out, os.W_OK):
            raise CommandError(f"output directory {out} is not writable", returncode=USAGE_ERROR)

        manifest = generate_toy_corpus(
            options["n_scenes"], options["seed"], out,
            visual_dim=options["visual_dim"], duration=options["duration"],
        )
        self.stdout.write(self.style.SUCCESS(
            f"Wrote {len(manifest)} scenes to {out / MANIFEST_NAME} (sha256 {directory_sha256(out)})"
        ))
