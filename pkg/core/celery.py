import os

from celery import Celery

from core.settings.base import DEBUG

if DEBUG:
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings.development')
else:
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings.production')

app = Celery('avsem')

app.config_from_object('django.conf:settings', namespace='CELERY')

# scene synthesis is CPU-bound: a worker takes one scene at a time and acks it once written
app.conf.worker_prefetch_multiplier = 1
app.conf.task_acks_late = True
app.conf.broker_connection_retry_on_startup = True
app.conf.worker_send_task_events = False
app.conf.task_routes = {'scenes.tasks.synthesize_scene': {'queue': 'scenes'}}

app.autodiscover_tasks()
