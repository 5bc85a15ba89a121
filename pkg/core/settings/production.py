from .base import *

LOGGING['loggers']['avsem']['level'] = os.environ.get('AVSM_LOG_LEVEL', 'INFO')

# sidecar log file is mandatory on batch hosts when asked for; fail early if its folder is missing
if log_file and not Path(log_file).resolve().parent.is_dir():
    raise RuntimeError(f"AVSM_LOG_FILE directory does not exist: {log_file}")
