from pathlib import Path
from dotenv import load_dotenv
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

load_dotenv()

debug = os.environ.get('DEBUG')
secret_key = os.environ.get('KEY_SECRET', 'avsem-local-only')

SECRET_KEY = secret_key

if debug == "True":
    DEBUG = True
else:
    DEBUG = False

ALLOWED_HOSTS = []


# worker cap: numpy reads these once, at import, so they are exported before any app module loads

AVSM_THREADS = int(os.environ.get('AVSM_THREADS', 1))

for thread_var in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
    os.environ.setdefault(thread_var, str(AVSM_THREADS))


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # local apps
    "dsp.apps.DspConfig",
    "autodiff.apps.AutodiffConfig",
    "ssm.apps.SsmConfig",
    "enhancer.apps.EnhancerConfig",
    "losses.apps.LossesConfig",
    "scenes.apps.ScenesConfig",
    "metrics.apps.MetricsConfig",
    "pipeline.apps.PipelineConfig",
]

# batch entry points only: no database, no HTTP surface
DATABASES = {}

TIME_ZONE = 'UTC'

USE_TZ = True


# celery configuration

CELERY_BROKER_URL = os.environ.get('CELERY_BROKER_URL', 'redis://localhost:6379/1')
CELERY_RESULT_BACKEND = os.environ.get('CELERY_RESULT_BACKEND', 'redis://localhost:6379/1')

CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = 'UTC'

# desk scale: scene synthesis runs in-process unless a broker is explicitly wanted
CELERY_TASK_ALWAYS_EAGER = os.environ.get('AVSM_CELERY_EAGER', 'True') == 'True'
CELERY_TASK_EAGER_PROPAGATES = True


# pipeline defaults

AVSM_REPORT_SCHEMA = BASE_DIR / "docs" / "schemas" / "metrics_report.schema.json"
AVSM_TRAINING_LOG_SCHEMA = BASE_DIR / "docs" / "schemas" / "training_log.schema.json"
AVSM_MANIFEST_SCHEMA = BASE_DIR / "docs" / "schemas" / "manifest.schema.json"
AVSM_DEFAULT_RUN_CONFIG = BASE_DIR / "fixtures" / "configs" / "toy_run.json"
AVSM_SLOW_TESTS = os.environ.get('AVSM_SLOW_TESTS') == '1'


# logging

log_handlers = ['console']

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': os.environ.get('DJANGO_LOG_LEVEL', 'WARNING'),
        },
        'avsem': {
            'handlers': log_handlers,
            'level': os.environ.get('AVSM_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
        'celery': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': False,
        },
    },
}

# sidecar log: the only place wall-clock timestamps are written to disk
log_file = os.environ.get('AVSM_LOG_FILE')

if log_file:
    LOGGING['handlers']['sidecar'] = {
        'class': 'logging.FileHandler',
        'filename': log_file,
        'formatter': 'verbose',
        'delay': True,
    }
    log_handlers.append('sidecar')
