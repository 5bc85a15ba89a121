import json
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from enhancer.checkpoint import load_checkpoint
from metrics.services import evaluate_manifest
from pipeline.management.base import USAGE_ERROR, PipelineCommand
from pipeline.serializers import load_run_config
from pipeline.services import ToyTrainer
from scenes.manifest import load_manifest
from utils.exceptions import FileError


class Command(PipelineCommand):
    help = "Run the toy training loop described by a run configuration."

    def add_command_arguments(self, parser):
        parser.add_argument("--config", default=str(settings.AVSM_DEFAULT_RUN_CONFIG),
                            help="Run configuration JSON (default: the shipped toy config).")
        parser.add_argument("--resume", default=None, help="Checkpoint to continue from.")
        parser.add_argument("--print-config", action="store_true",
                            help="Print the fully defaulted configuration and exit.")

    def run(self, **options):
        try:
            run = load_run_config(options["config"])
        except FileError as exc:
            raise CommandError(str(exc), returncode=USAGE_ERROR) from exc
        if options["print_config"]:
            self.stdout.write(json.dumps(run.to_dict(), indent=2, sort_keys=True))
            return

        manifest_path = Path(run.paths.manifest)
        try:
            manifest = load_manifest(manifest_path)
        except FileError as exc:
            raise CommandError(f"paths.manifest: {exc}", returncode=USAGE_ERROR) from exc
        resume = load_checkpoint(options["resume"]) if options["resume"] else None
        summary = ToyTrainer(run, manifest, manifest_path.parent, resume=resume).fit()

        if summary.first_loss is None:
            self.stdout.write(self.style.WARNING(f"Nothing to do: already at step {summary.step}."))
            return
        self.stdout.write(
            f"step {summary.step}: loss {summary.first_loss:.5f} -> {summary.last_loss:.5f}, "
            f"{summary.held_scene} SI-SDR {summary.held_si_sdr_db:.2f} dB "
            f"({summary.held_si_sdr_improvement_db:+.2f} dB over noisy)"
        )
        self.stdout.write(self.style.SUCCESS(f"Checkpoint: {summary.checkpoint}"))

        checkpoint = load_checkpoint(summary.checkpoint)
        report_path = Path(run.paths.report_dir) / f"step_{summary.step:06d}.json"
        report = evaluate_manifest(manifest, manifest_path.parent, checkpoint=checkpoint, out_path=report_path)
        self.stdout.write(report.to_table())
