from pathlib import Path

from enhancer.checkpoint import load_checkpoint
from metrics.services import evaluate_manifest
from pipeline.management.base import PipelineCommand
from scenes.manifest import load_manifest


class Command(PipelineCommand):
    help = "Score a manifest with STOI and SI-SDR, for a checkpoint or for the noisy input."

    def add_command_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--checkpoint", default=None)
        source.add_argument("--passthrough", action="store_true", help="Score the noisy input itself.")
        parser.add_argument("--manifest", required=True)
        parser.add_argument("--report", required=True, help="Report JSON path; the text table goes next to it.")

    def run(self, **options):
        manifest_path = Path(options["manifest"])
        manifest = load_manifest(manifest_path)
        checkpoint = None if options["passthrough"] else load_checkpoint(options["checkpoint"])
        report = evaluate_manifest(manifest, manifest_path.parent, checkpoint=checkpoint, out_path=options["report"])
        self.stdout.write(report.to_table())
        self.stdout.write(self.style.SUCCESS(f"Report: {options['report']}"))
