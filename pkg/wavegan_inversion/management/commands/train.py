"""
Train the GAN, the digit classifier or the inverse mapper.

    ./manage.py train gan --profile toy --out runs/toy
    ./manage.py train inverter --config experiment.json
"""

from wavegan_inversion import api
from wavegan_inversion.management.base import ExperimentCommand
from wavegan_inversion.statuses import Component


class Command(ExperimentCommand):
    help = 'Train one component and write its checkpoint directory.'

    def add_arguments(self, parser):
        parser.add_argument('target', choices=[component.value for component in Component])
        super().add_arguments(parser)

    def run(self, config, **options):
        path, training_log = api.train_component(config, options['target'])
        self.stdout.write('Wrote {target} checkpoint to {path}'.format(target=options['target'], path=path))
        if training_log.get('heldout_accuracy') is not None:
            self.stdout.write('Held-out accuracy: {:.4f}'.format(training_log['heldout_accuracy']))
