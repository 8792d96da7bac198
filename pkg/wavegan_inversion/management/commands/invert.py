"""
Recover a latent vector for a single WAV file.
"""

from wavegan_inversion import api
from wavegan_inversion.management.base import ExperimentCommand
from wavegan_inversion.statuses import InversionMethod


class Command(ExperimentCommand):
    help = 'Invert one WAV file and write a reconstruction plus JSON sidecar per method.'

    def add_arguments(self, parser):
        parser.add_argument('wav_path')
        parser.add_argument(
            '--method', action='append', dest='methods', choices=[method.value for method in InversionMethod],
            help='Method to run; repeat for several. Defaults to all configured methods.',
        )
        super().add_arguments(parser)

    def run(self, config, **options):
        for sidecar in api.invert_file(config, options['wav_path'], options.get('methods'), options.get('output_dir')):
            self.stdout.write(sidecar)
