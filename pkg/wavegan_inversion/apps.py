"""
wavegan_inversion Django application initialization.
"""

from django.apps import AppConfig


class WaveGanInversionConfig(AppConfig):
    """
    Configuration for the wavegan_inversion Django application.
    """

    name = 'wavegan_inversion'
    verbose_name = 'WaveGAN latent recovery'

    def ready(self):
        """
        Register the Celery tasks.
        """
        from . import tasks  # pylint: disable=import-outside-toplevel,unused-import
