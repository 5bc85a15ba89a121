import logging

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from pipeline.serializers import flatten_errors
from utils.exceptions import AVSMError, ConfigError

logger = logging.getLogger("avsem")

USAGE_ERROR = 2
PROCESSING_ERROR = 1


class PipelineCommand(BaseCommand):
    """
    Shared surface of the batch commands: a `--threads` flag and the mapping of failures
    to exit codes (2 for configuration and validation problems, 1 for processing errors).

    The BLAS thread cap itself is exported by manage.py before numpy is imported; here the
    flag is only validated and logged.
    """

    def add_arguments(self, parser):
        parser.add_argument("--threads", type=int, default=None,
                            help="Worker/BLAS thread cap for this process (default: AVSM_THREADS, 1).")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        threads = options.get("threads")
        if threads is not None and threads < 1:
            raise CommandError("--threads must be >= 1", returncode=USAGE_ERROR)
        try:
            return self.run(**options)
        except serializers.ValidationError as exc:
            raise CommandError("invalid input:\n  " + "\n  ".join(flatten_errors(exc.detail)),
                               returncode=USAGE_ERROR) from exc
        except ConfigError as exc:
            raise CommandError(f"invalid configuration: {exc}", returncode=USAGE_ERROR) from exc
        except (AVSMError, OSError) as exc:
            logger.error(f"{type(exc).__name__}: {exc}")
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=PROCESSING_ERROR) from exc

    def run(self, **options):
        raise NotImplementedError
