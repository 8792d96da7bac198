"""
These settings are here to use during tests, because django requires them.

In a real-world use case, the wavegan_inversion app is installed into another Django
project, so these settings will not be used.
"""

import tempfile
from os.path import abspath, dirname, join

from celery import Celery

results_dir = tempfile.TemporaryDirectory()

APP = Celery()
APP.conf.task_always_eager = True
APP.conf.result_backend = f'file://{results_dir.name}'


def root(*args):
    """
    Get the absolute path of the given path relative to the project root.
    """
    return join(abspath(dirname(__file__)), *args)


DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': 'default.db',
    }
}

INSTALLED_APPS = (
    'wavegan_inversion',
)

SECRET_KEY = 'insecure-secret-key'

WAVEGAN_INVERSION = {
    'DEFAULT_PROFILE': 'toy',
    'CONFIG_OVERRIDES': {},
    'USE_CELERY': False,
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'standard': {'format': '%(asctime)s %(levelname)s %(name)s: %(message)s'},
    },
    'handlers': {
        'console': {'class': 'logging.StreamHandler', 'formatter': 'standard'},
    },
    'loggers': {
        'wavegan_inversion': {'handlers': ['console'], 'level': 'INFO', 'propagate': False},
    },
}
