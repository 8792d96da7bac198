"""
Shared plumbing for the wavegan_inversion management commands.
"""

from django.core.management.base import BaseCommand, CommandError

from wavegan_inversion.conf import PROFILES, load_experiment_config
from wavegan_inversion.exceptions import WaveGanInversionError


class ExperimentCommand(BaseCommand):
    """
    A command configured by ``--config``, ``--seed``, ``--profile``, ``--workers`` and ``--out``.

    Subclasses implement ``run(config, **options)``; package errors become CommandError.
    """

    def add_arguments(self, parser):
        parser.add_argument('--config', dest='config_path', help='JSON experiment config file.')
        parser.add_argument('--seed', type=int, help='Random seed, recorded in every output.')
        parser.add_argument('--profile', choices=sorted(PROFILES), help='Scale profile.')
        parser.add_argument('--workers', type=int, help='Parallel evaluation workers.')
        parser.add_argument('--out', dest='output_dir', help='Output directory.')

    def load_config(self, options):
        return load_experiment_config(
            path=options.get('config_path'),
            profile=options.get('profile'),
            seed=options.get('seed'),
            workers=options.get('workers'),
            output_dir=options.get('output_dir'),
        )

    def handle(self, *args, **options):
        try:
            config = self.load_config(options)
            return self.run(config, **options)
        except WaveGanInversionError as exc:
            raise CommandError(str(exc)) from exc

    def run(self, config, **options):
        raise NotImplementedError
