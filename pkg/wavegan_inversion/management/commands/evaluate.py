"""
Run every inversion method on generated and real targets and write the results tables.
"""

from wavegan_inversion import api
from wavegan_inversion.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Evaluate gradient-based, inverse-mapper and hybrid inversion.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--celery', action='store_true', default=None,
            help='Fan targets out as Celery tasks instead of a local thread pool.',
        )

    def run(self, config, **options):
        run = api.evaluate(config, use_celery=options.get('celery'))
        for domain, path in sorted(run['tables'].items()):
            self.stdout.write('{domain} table: {path}'.format(domain=domain, path=path))
        failed = sum(run['failure_counts'].values())
        if failed:
            self.stderr.write('{count} targets failed; see run.json'.format(count=failed))
