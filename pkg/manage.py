#!/usr/bin/env python
"""Django's command-line utility: corpus mixing, toy training, enhancement, evaluation."""
import os
import sys


def export_thread_cap(argv):
    """
    `--threads N` has to reach the BLAS environment before numpy is first imported,
    which happens when Django loads the apps.
    """
    for index, arg in enumerate(argv):
        value = None
        if arg == '--threads' and index + 1 < len(argv):
            value = argv[index + 1]
        elif arg.startswith('--threads='):
            value = arg.split('=', 1)[1]
        if value is not None and value.isdigit() and int(value) > 0:
            os.environ['AVSM_THREADS'] = value
            for thread_var in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
                os.environ[thread_var] = value


def main():
    """Run administrative tasks."""
    export_thread_cap(sys.argv[1:])
    from core.settings.base import DEBUG

    if DEBUG:
        os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings.development')
    else:
        os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings.production')

    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
