"""
Tests for gradient inversion, the inverse mapper and the hybrid method
"""

import json
import os

import ddt
import numpy as np
import torch
from mock import patch

from django.test import SimpleTestCase

from wavegan_inversion.audio import AudioClip, spectrogram, spectrogram_mae
from wavegan_inversion.conf import GdConfig, InverterTrainConfig
from wavegan_inversion.data import make_toy_digits
from wavegan_inversion.exceptions import (
    InvalidConfiguration,
    NonFiniteObjective,
    ShapeMismatch,
    TrainingDiverged
)
from wavegan_inversion.generator import generate, sample_latent, torch_rng
from wavegan_inversion.inversion import (
    hard_clip,
    invert_gd,
    invert_hybrid,
    invert_mapper,
    latent_recovery_mse,
    load_inverter,
    load_result,
    predict_latent,
    save_result,
    spectrogram_objective,
    stochastic_clip,
    train_inverter
)
from wavegan_inversion.statuses import AlternationSchedule, ClipMode, InitMode, InversionMethod, OptimizerBackend
from wavegan_inversion.tests.utils import (
    TINY_AUDIO,
    TINY_RESIDUAL,
    TemporaryDirectoryMixin,
    tiny_classifier,
    tiny_generator,
    tiny_mapper
)


def _non_increasing(trace):
    return all(later <= earlier for earlier, later in zip(trace, trace[1:]))


class ClippingTests(SimpleTestCase):
    """
    Tests for hard and stochastic clipping
    """

    def test_hard_clip(self):
        z = torch.tensor([-3.0, -0.5, 0.25, 2.0])
        self.assertEqual(hard_clip(z).tolist(), [-1.0, -0.5, 0.25, 1.0])

    def test_stochastic_clip(self):
        z = torch.tensor([-3.0, -0.5, 0.25, 2.0, float('nan')])
        clipped = stochastic_clip(z, rng=torch_rng(0))
        self.assertEqual(clipped[1].item(), -0.5)
        self.assertEqual(clipped[2].item(), 0.25)
        for index in (0, 3, 4):
            self.assertGreaterEqual(clipped[index].item(), -1.0)
            self.assertLessEqual(clipped[index].item(), 1.0)

    def test_stochastic_clip_bounds(self):
        with self.assertRaises(ValueError):
            stochastic_clip(torch.zeros(3), lo=1.0, hi=1.0)

    def test_stochastic_clip_many_vectors(self):
        z = 2.0 * torch.randn(10000, 8, generator=torch_rng(1))
        inside = (z >= -1.0) & (z <= 1.0)
        self.assertTrue(inside.any() and not inside.all())
        clipped = stochastic_clip(z, rng=torch_rng(2))
        self.assertTrue(torch.all((clipped >= -1.0) & (clipped <= 1.0)))
        self.assertTrue(torch.equal(clipped[inside], z[inside]))
        self.assertTrue(torch.equal(stochastic_clip(clipped, rng=torch_rng(3)), clipped))


@ddt.ddt
class GradientInversionTests(SimpleTestCase):
    """
    Tests for invert_gd
    """

    def setUp(self):
        super().setUp()
        self.generator = tiny_generator()
        self.z_true = sample_latent(torch_rng(11), 4)
        self.target = generate(self.generator, self.z_true)

    @ddt.data(OptimizerBackend.TORCH, OptimizerBackend.SCIPY)
    def test_best_so_far(self, backend):
        cfg = GdConfig(max_steps=4, backend=backend)
        result = invert_gd(self.generator, self.target, cfg, torch_rng(0), spectrogram_config=TINY_AUDIO)
        self.assertEqual(result.method, InversionMethod.GRADIENT)
        self.assertTrue(_non_increasing(result.loss_trace))
        self.assertEqual(len(result.loss_trace), result.steps_run + 1)
        self.assertLessEqual(result.steps_run, 4)
        self.assertLessEqual(result.steps_used, result.steps_run)
        self.assertLessEqual(result.final_loss, result.initial_loss)
        self.assertTrue(np.array_equal(result.reconstruction.samples, generate(self.generator, result.z_hat).samples))
        measured = spectrogram_mae(spectrogram(self.target, TINY_AUDIO), spectrogram(result.reconstruction, TINY_AUDIO))
        self.assertAlmostEqual(measured, result.final_loss, places=6)

    def test_starting_point_is_step_zero(self):
        init = sample_latent(torch_rng(3), 4)
        result = invert_gd(self.generator, self.target, GdConfig(max_steps=0), torch_rng(0), init=init,
                           spectrogram_config=TINY_AUDIO)
        self.assertTrue(torch.equal(result.z_hat, init))
        self.assertEqual((result.steps_used, result.steps_run), (0, 0))
        self.assertEqual(len(result.loss_trace), 1)
        self.assertAlmostEqual(
            result.final_loss, spectrogram_objective(self.generator, self.target, init, TINY_AUDIO), places=12,
        )

    def test_converges_within_a_thousand_steps(self):
        result = invert_gd(self.generator, self.target, GdConfig(max_steps=1000), torch_rng(0),
                           spectrogram_config=TINY_AUDIO)
        self.assertLessEqual(result.steps_run, 1000)
        self.assertTrue(_non_increasing(result.loss_trace))
        self.assertLessEqual(result.final_loss, 0.1 * result.initial_loss)

    def test_exact_start_stops_immediately(self):
        result = invert_gd(self.generator, self.target, GdConfig(max_steps=5), torch_rng(0), init=self.z_true,
                           spectrogram_config=TINY_AUDIO)
        self.assertEqual(result.final_loss, 0.0)
        self.assertEqual(result.steps_run, 0)

    @ddt.data(ClipMode.HARD, ClipMode.STOCHASTIC)
    def test_clipping_keeps_latent_in_range(self, clip_mode):
        init = torch.tensor([0.99, -0.99, 0.99, -0.99])
        cfg = GdConfig(max_steps=3, clip_mode=clip_mode, learning_rate=10.0)
        result = invert_gd(self.generator, self.target, cfg, torch_rng(0), init=init, spectrogram_config=TINY_AUDIO)
        self.assertTrue(torch.all(result.z_hat.abs() <= 1.0))
        self.assertTrue(_non_increasing(result.loss_trace))

    def test_scipy_hard_clipping_uses_bounds(self):
        cfg = GdConfig(max_steps=3, backend=OptimizerBackend.SCIPY, clip_mode=ClipMode.HARD)
        result = invert_gd(self.generator, self.target, cfg, torch_rng(0), spectrogram_config=TINY_AUDIO)
        self.assertTrue(torch.all(result.z_hat.abs() <= 1.0))

    def test_scipy_rejects_stochastic_clipping(self):
        with self.assertRaises(InvalidConfiguration):
            GdConfig(backend=OptimizerBackend.SCIPY, clip_mode=ClipMode.STOCHASTIC)

    def test_provided_init_is_required(self):
        with self.assertRaises(ValueError):
            invert_gd(self.generator, self.target, GdConfig(init_mode=InitMode.PROVIDED), torch_rng(0))

    def test_target_length_is_checked(self):
        with self.assertRaises(ShapeMismatch):
            invert_gd(self.generator, AudioClip(np.zeros(8000)), GdConfig(max_steps=1), torch_rng(0))

    def test_seeded(self):
        cfg = GdConfig(max_steps=2)
        first = invert_gd(self.generator, self.target, cfg, torch_rng(7), spectrogram_config=TINY_AUDIO)
        second = invert_gd(self.generator, self.target, cfg, torch_rng(7), spectrogram_config=TINY_AUDIO)
        self.assertTrue(torch.equal(first.z_hat, second.z_hat))
        self.assertEqual(first.loss_trace, second.loss_trace)

    @patch('wavegan_inversion.inversion._objective')
    def test_non_finite_objective(self, mock_objective):
        mock_objective.return_value = lambda z: torch.tensor(float('nan'), dtype=torch.float64)
        with self.assertRaises(NonFiniteObjective):
            invert_gd(self.generator, self.target, GdConfig(max_steps=2), torch_rng(0), spectrogram_config=TINY_AUDIO)


@ddt.ddt
class MapperAndHybridTests(TemporaryDirectoryMixin, SimpleTestCase):
    """
    Tests for invert_mapper, invert_hybrid and result sidecars
    """

    def setUp(self):
        super().setUp()
        self.generator = tiny_generator()
        self.mapper = tiny_mapper()
        self.target = generate(self.generator, sample_latent(torch_rng(5), 4))

    def test_mapper(self):
        result = invert_mapper(self.mapper, self.generator, self.target, TINY_AUDIO)
        self.assertEqual(result.method, InversionMethod.INVERSE_MAPPER)
        self.assertEqual(len(result.loss_trace), 1)
        self.assertEqual((result.steps_used, result.steps_run), (0, 0))
        self.assertTrue(torch.equal(result.z_hat, predict_latent(self.mapper, spectrogram(self.target, TINY_AUDIO))))

    def test_mapper_input_shape_is_checked(self):
        with self.assertRaises(ShapeMismatch):
            invert_mapper(self.mapper, self.generator, self.target)

    def test_hybrid_never_worse_than_mapper(self):
        mapper_result = invert_mapper(self.mapper, self.generator, self.target, TINY_AUDIO)
        hybrid = invert_hybrid(self.mapper, self.generator, self.target, GdConfig(max_steps=3), torch_rng(0),
                               TINY_AUDIO)
        self.assertEqual(hybrid.method, InversionMethod.HYBRID)
        self.assertEqual(hybrid.initial_loss, mapper_result.final_loss)
        self.assertLessEqual(hybrid.final_loss, mapper_result.final_loss)

    @ddt.data(ClipMode.HARD, ClipMode.STOCHASTIC)
    def test_hybrid_clips_the_prediction(self, clip_mode):
        prediction = torch.tensor([3.0, -2.0, 0.5, 0.0])
        cfg = GdConfig(max_steps=0, clip_mode=clip_mode)
        with patch('wavegan_inversion.inversion.predict_latent', return_value=prediction):
            hybrid = invert_hybrid(self.mapper, self.generator, self.target, cfg, torch_rng(0), TINY_AUDIO)
        self.assertTrue(torch.all(hybrid.z_hat.abs() <= 1.0))
        self.assertEqual(hybrid.z_hat[2:].tolist(), [0.5, 0.0])
        if clip_mode == ClipMode.HARD:
            self.assertEqual(hybrid.z_hat[:2].tolist(), [1.0, -1.0])
        self.assertEqual(
            hybrid.initial_loss, spectrogram_objective(self.generator, self.target, hybrid.z_hat, TINY_AUDIO),
        )

    def test_hybrid_without_budget_is_the_prediction(self):
        mapper_result = invert_mapper(self.mapper, self.generator, self.target, TINY_AUDIO)
        hybrid = invert_hybrid(self.mapper, self.generator, self.target, GdConfig(max_steps=0), torch_rng(0),
                               TINY_AUDIO)
        self.assertTrue(torch.equal(hybrid.z_hat, mapper_result.z_hat))
        self.assertTrue(np.array_equal(hybrid.reconstruction.samples, mapper_result.reconstruction.samples))

    def test_result_sidecar(self):
        result = invert_hybrid(self.mapper, self.generator, self.target, GdConfig(max_steps=2), torch_rng(0),
                               TINY_AUDIO)
        sidecar = save_result(result, self.tmpdir, 'target.wav', 'hash', {'mse_raw': 0.5, 'ignored': 1})
        self.assertEqual(os.path.basename(sidecar), 'hybrid.json')
        with open(sidecar, encoding='utf-8') as handle:
            document = json.load(handle)
        self.assertEqual(document['method'], 'hybrid')
        self.assertEqual(document['reconstruction'], 'hybrid.wav')
        self.assertEqual(document['mse_raw'], 0.5)
        self.assertNotIn('ignored', document)
        self.assertEqual(document['spectrogram_mae'], result.final_loss)

        loaded, _ = load_result(self.tmpdir, InversionMethod.HYBRID)
        self.assertTrue(np.array_equal(loaded.reconstruction.samples, result.reconstruction.samples))
        self.assertEqual(loaded.loss_trace, result.loss_trace)
        self.assertEqual(loaded.steps_used, result.steps_used)
        self.assertTrue(torch.equal(loaded.z_hat, result.z_hat))


@ddt.ddt
class TrainInverterTests(TemporaryDirectoryMixin, SimpleTestCase):
    """
    Tests for train_inverter
    """

    def setUp(self):
        super().setUp()
        self.generator = tiny_generator()
        self.classifier = tiny_classifier()
        self.real = make_toy_digits(per_class=4, num_classes=2, seed=0)

    def _config(self, **kwargs):
        defaults = {'architecture': TINY_RESIDUAL, 'epochs': 1, 'batch_size': 4, 'max_steps': 2, 'log_every': 1}
        defaults.update(kwargs)
        return InverterTrainConfig(**defaults)

    @ddt.data(AlternationSchedule.REAL_THEN_FAKE, AlternationSchedule.FAKE_THEN_REAL)
    def test_alternating_rounds(self, schedule):
        path = os.path.join(self.tmpdir, 'inverter')
        mapper, training_log = train_inverter(
            self.generator, self.classifier, self.real, self._config(schedule=schedule), torch_rng(0), TINY_AUDIO,
            checkpoint_dir=path,
        )
        self.assertEqual(training_log['rounds'], 2)
        self.assertEqual(len(training_log['real_loss']), 2)
        self.assertEqual(len(training_log['fake_loss']), 2)
        self.assertEqual(len(training_log['latent_mse']), 2)
        self.assertTrue(all(parameter.requires_grad for parameter in self.generator.parameters()))

        restored = load_inverter(path)
        spec = spectrogram(self.real[0].clip, TINY_AUDIO)
        self.assertTrue(torch.allclose(predict_latent(restored, spec), predict_latent(mapper, spec)))

    def test_fake_only(self):
        _, training_log = train_inverter(
            self.generator, self.classifier, self.real, self._config(schedule=AlternationSchedule.FAKE_ONLY),
            torch_rng(0), TINY_AUDIO,
        )
        self.assertEqual(training_log['real_loss'], [])
        self.assertEqual(len(training_log['fake_loss']), 2)

    def test_latent_only(self):
        _, training_log = train_inverter(
            self.generator, self.classifier, self.real, self._config(perceptual_weight=0.0), torch_rng(0), TINY_AUDIO,
        )
        self.assertEqual(training_log['real_loss'], [])
        self.assertEqual(training_log['fake_loss'], training_log['latent_mse'])

    def test_epochs_bound_rounds(self):
        _, training_log = train_inverter(
            self.generator, self.classifier, self.real, self._config(max_steps=None, batch_size=8), torch_rng(0),
            TINY_AUDIO,
        )
        self.assertEqual((training_log['rounds'], training_log['epochs']), (1, 1))

    def test_weights_cannot_both_be_zero(self):
        with self.assertRaises(InvalidConfiguration):
            self._config(latent_weight=0.0, perceptual_weight=0.0)

    @patch('wavegan_inversion.inversion.perceptual_loss_tensor', return_value=torch.tensor(float('nan')))
    def test_divergence_is_reported(self, mock_loss):
        with self.assertRaises(TrainingDiverged) as context:
            train_inverter(self.generator, self.classifier, self.real, self._config(), torch_rng(0), TINY_AUDIO)
        mock_loss.assert_called()
        self.assertEqual(context.exception.component, 'inverter')
        self.assertIn('epoch=1 batch=1', str(context.exception))

    def test_latent_recovery_mse(self):
        value = latent_recovery_mse(tiny_mapper(), self.generator, torch_rng(0), count=8, spectrogram_config=TINY_AUDIO)
        self.assertGreaterEqual(value, 0.0)


class TrainedInverterTests(SimpleTestCase):
    """
    Trains a tiny inverse mapper on generated audio and checks what it learned
    """

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.generator = tiny_generator()
        cfg = InverterTrainConfig(
            architecture=TINY_RESIDUAL, epochs=600, batch_size=16, learning_rate=3e-3, perceptual_weight=0.0,
            schedule=AlternationSchedule.FAKE_ONLY, log_every=100,
        )
        real = make_toy_digits(per_class=4, num_classes=2, seed=0)
        cls.mapper, cls.training_log = train_inverter(
            cls.generator, tiny_classifier(), real, cfg, torch_rng(0), TINY_AUDIO,
        )

    def test_latent_mse_descends(self):
        latent_mse = self.training_log['latent_mse']
        self.assertEqual(len(latent_mse), 600)
        self.assertLess(np.mean(latent_mse[-50:]), np.mean(latent_mse[:50]))

    def test_beats_the_mean_predictor(self):
        # predicting 0 for every coordinate scores Var(U(-1, 1)) = 1/3
        value = latent_recovery_mse(self.mapper, self.generator, torch_rng(99), count=256,
                                    spectrogram_config=TINY_AUDIO)
        self.assertLess(value, 1.0 / 3.0)

    def test_hybrid_dominates_mapper(self):
        latents = sample_latent(torch_rng(21), 4, 32)
        for index, z in enumerate(latents):
            target = generate(self.generator, z)
            mapper_result = invert_mapper(self.mapper, self.generator, target, TINY_AUDIO)
            hybrid = invert_hybrid(self.mapper, self.generator, target, GdConfig(max_steps=50), torch_rng(index),
                                   TINY_AUDIO)
            self.assertLessEqual(hybrid.final_loss, mapper_result.final_loss)
            self.assertTrue(_non_increasing(hybrid.loss_trace))
