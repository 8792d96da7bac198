"""
Summarise one or more evaluation runs.
"""

from django.core.management.base import BaseCommand, CommandError

from wavegan_inversion import api
from wavegan_inversion.exceptions import WaveGanInversionError


class Command(BaseCommand):
    help = 'Render the tables, failure counts and acceptance flags of every run under a results directory.'

    def add_arguments(self, parser):
        parser.add_argument('results_dir')

    def handle(self, *args, **options):
        try:
            self.stdout.write(api.report(options['results_dir']), ending='')
        except WaveGanInversionError as exc:
            raise CommandError(str(exc)) from exc
