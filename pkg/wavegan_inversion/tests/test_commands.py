"""
Tests for the wavegan_inversion management commands
"""

import os
from io import StringIO

import ddt
from mock import patch

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from wavegan_inversion.tests.utils import TemporaryDirectoryMixin


@ddt.ddt
class CommandTests(TemporaryDirectoryMixin, SimpleTestCase):
    """
    Tests for train, evaluate, invert and report
    """

    @ddt.data('gan', 'classifier')
    def test_train_without_prerequisites(self, target):
        with patch('wavegan_inversion.management.commands.train.api.train_component') as mock_train:
            mock_train.return_value = (self.tmpdir, {})
            call_command('train', target, '--out', self.tmpdir, stdout=StringIO())
        mock_train.assert_called_once()

    def test_train_inverter_needs_gan(self):
        with self.assertRaisesRegex(CommandError, 'the gan checkpoint is missing.*Train gan first'):
            call_command('train', 'inverter', '--out', self.tmpdir)

    @patch('wavegan_inversion.management.commands.train.api.train_component')
    def test_train(self, mock_train):
        mock_train.return_value = (os.path.join(self.tmpdir, 'classifier'), {'heldout_accuracy': 0.5})
        out = StringIO()
        call_command('train', 'classifier', '--seed', '3', '--profile', 'toy', '--out', self.tmpdir, stdout=out)
        config, target = mock_train.call_args[0]
        self.assertEqual(target, 'classifier')
        self.assertEqual(config.seed, 3)
        self.assertEqual(config.output_dir, self.tmpdir)
        self.assertIn('Held-out accuracy: 0.5000', out.getvalue())

    def test_train_rejects_unknown_target(self):
        with self.assertRaises(CommandError):
            call_command('train', 'vocoder')

    def test_invalid_config_file(self):
        path = self.write_json('bad.json', {'audio': {'hop': 0}})
        with self.assertRaisesRegex(CommandError, 'Invalid experiment configuration'):
            call_command('train', 'gan', '--config', path)

    def test_evaluate_needs_checkpoints(self):
        with self.assertRaisesRegex(CommandError, 'checkpoint is missing'):
            call_command('evaluate', '--out', self.tmpdir)

    @patch('wavegan_inversion.management.commands.evaluate.api.evaluate')
    def test_evaluate_reports_failures(self, mock_evaluate):
        mock_evaluate.return_value = {
            'tables': {'fake': 'fake_table.csv', 'real': 'real_table.csv'},
            'failure_counts': {'fake': 0, 'real': 2},
        }
        out, err = StringIO(), StringIO()
        call_command('evaluate', '--workers', '2', '--celery', '--out', self.tmpdir, stdout=out, stderr=err)
        config = mock_evaluate.call_args[0][0]
        self.assertEqual(config.workers, 2)
        self.assertIs(mock_evaluate.call_args[1]['use_celery'], True)
        self.assertIn('real table: real_table.csv', out.getvalue())
        self.assertIn('2 targets failed', err.getvalue())

    def test_invert_needs_generator(self):
        wav_path = os.path.join(self.tmpdir, 'clip.wav')
        with self.assertRaisesRegex(CommandError, 'gan checkpoint is missing'):
            call_command('invert', wav_path, '--out', self.tmpdir)

    def test_report_needs_runs(self):
        with self.assertRaisesRegex(CommandError, 'No evaluation runs'):
            call_command('report', self.tmpdir)

    @patch('wavegan_inversion.management.commands.invert.api.invert_file')
    def test_invert_methods(self, mock_invert):
        mock_invert.return_value = [os.path.join(self.tmpdir, 'gradient.json')]
        out = StringIO()
        call_command('invert', 'clip.wav', '--method', 'gradient', '--method', 'hybrid', stdout=out)
        self.assertEqual(mock_invert.call_args[0][1:3], ('clip.wav', ['gradient', 'hybrid']))
        self.assertIn('gradient.json', out.getvalue())
