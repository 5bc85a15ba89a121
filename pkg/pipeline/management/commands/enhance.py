from enhancer.checkpoint import load_checkpoint
from pipeline.management.base import PipelineCommand
from pipeline.services import enhance_file


class Command(PipelineCommand):
    help = "Enhance one 16 kHz mono WAV with a trained checkpoint."

    def add_command_arguments(self, parser):
        parser.add_argument("--checkpoint", required=True)
        parser.add_argument("--in", dest="in_path", required=True, help="Noisy input WAV.")
        parser.add_argument("--out", required=True, help="Enhanced output WAV.")
        visual = parser.add_mutually_exclusive_group()
        visual.add_argument("--vemb", default=None, help="Precomputed visual embeddings (.vemb).")
        visual.add_argument("--video", default=None, help="Multi-frame image (GIF/TIFF) for the stub encoder.")

    def run(self, **options):
        checkpoint = load_checkpoint(options["checkpoint"])
        enhanced = enhance_file(checkpoint, options["in_path"], options["out"],
                                vemb_path=options["vemb"], video_path=options["video"])
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(enhanced)} samples to {options['out']}"))
