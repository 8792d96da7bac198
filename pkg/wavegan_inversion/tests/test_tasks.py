"""
Tests for wavegan_inversion tasks
"""

import torch
from mock import patch

from django.test import SimpleTestCase

from wavegan_inversion.conf import load_experiment_config
from wavegan_inversion.statuses import Domain
from wavegan_inversion.tasks import invert_target_task
from wavegan_inversion.tests.utils import TINY_EXPERIMENT


class TaskTests(SimpleTestCase):
    """
    Tests for tasks.py
    """

    def setUp(self):
        super().setUp()
        self.config = load_experiment_config(overrides=TINY_EXPERIMENT)
        self.samples = [0.0] * 16384

    @patch('wavegan_inversion.tasks.evaluate_target')
    @patch('wavegan_inversion.tasks.models_for')
    def test_target_is_rebuilt(self, mock_models, mock_evaluate):
        mock_evaluate.return_value = {'domain': 'fake', 'index': 3, 'status': 'ok'}
        result = invert_target_task.delay('fake', 3, self.samples, None, [0.5, -0.5, 0.25, 0.0], self.config.to_dict())
        self.assertEqual(result.get()['status'], 'ok')

        mock_models.assert_called_once_with(self.config.checkpoint_dir)
        target, models, config = mock_evaluate.call_args[0]
        self.assertEqual(target.domain, Domain.FAKE)
        self.assertEqual(target.index, 3)
        self.assertEqual(target.clip.length, 16384)
        self.assertTrue(torch.equal(target.latent, torch.tensor([0.5, -0.5, 0.25, 0.0])))
        self.assertIs(models, mock_models.return_value)
        self.assertEqual(config.hash, self.config.hash)

    @patch('wavegan_inversion.tasks.evaluate_target')
    @patch('wavegan_inversion.tasks.models_for')
    def test_real_target_has_no_latent(self, mock_models, mock_evaluate):  # pylint: disable=unused-argument
        mock_evaluate.return_value = {'domain': 'real', 'index': 0, 'status': 'ok'}
        invert_target_task.delay('real', 0, self.samples, 7, None, self.config.to_dict())
        target = mock_evaluate.call_args[0][0]
        self.assertEqual(target.label, 7)
        self.assertIsNone(target.latent)

    @patch('wavegan_inversion.tasks.invert_target_task.retry')
    @patch('wavegan_inversion.tasks.models_for', side_effect=OSError('checkpoint volume is not mounted'))
    def test_retry(self, mock_models, mock_retry):  # pylint: disable=unused-argument
        invert_target_task.delay('fake', 0, self.samples, None, None, self.config.to_dict())
        mock_retry.assert_called()

    @patch('wavegan_inversion.tasks.invert_target_task.retry')
    @patch('wavegan_inversion.evaluation.save_wav', side_effect=OSError('results volume is read-only'))
    @patch('wavegan_inversion.tasks.models_for')
    def test_retry_on_write_failure(self, mock_models, mock_save, mock_retry):  # pylint: disable=unused-argument
        invert_target_task.delay('fake', 0, self.samples, None, None, self.config.to_dict())
        mock_save.assert_called_once()
        mock_retry.assert_called()
