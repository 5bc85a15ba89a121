from django.apps import AppConfig


class DspConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'dsp'
    verbose_name = "STFT analysis/synthesis and WAV I/O"
