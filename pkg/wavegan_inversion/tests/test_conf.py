"""
Tests for experiment configuration and its serializers
"""

import os

import ddt

from django.test import SimpleTestCase, override_settings

from wavegan_inversion.conf import (
    PROFILES,
    GdConfig,
    InverterTrainConfig,
    ResidualArchitecture,
    config_hash,
    deep_merge,
    experiment_config_from_dict,
    load_experiment_config
)
from wavegan_inversion.exceptions import InvalidConfiguration
from wavegan_inversion.serializers import ExperimentConfigSerializer, GdConfigSerializer
from wavegan_inversion.statuses import AlternationSchedule, Component, Domain, InversionMethod, ScaleProfile
from wavegan_inversion.tests.utils import TemporaryDirectoryMixin


@ddt.ddt
class LoadExperimentConfigTests(TemporaryDirectoryMixin, SimpleTestCase):
    """
    Tests for load_experiment_config
    """

    def test_toy_defaults(self):
        config = load_experiment_config()
        self.assertEqual(config.profile, ScaleProfile.TOY)
        self.assertEqual(config.generator.latent_dim, 16)
        self.assertEqual(config.generator.output_length, 16384)
        self.assertEqual(config.evaluation.num_targets, 32)
        self.assertEqual(config.evaluation.domains, (Domain.FAKE, Domain.REAL))
        self.assertEqual(config.evaluation.methods, tuple(InversionMethod.table_order()))
        self.assertEqual(config.classifier.architecture.stage_widths, (8, 16, 32, 64))
        self.assertEqual(config.inverter.schedule, AlternationSchedule.REAL_THEN_FAKE)

    def test_full_profile(self):
        config = load_experiment_config(profile='full')
        self.assertEqual(config.generator.latent_dim, 100)
        self.assertEqual(config.evaluation.num_targets, 1000)
        self.assertEqual(config.hybrid.max_steps, 200)
        self.assertEqual(config.gradient.max_steps, 50000)
        self.assertEqual(config.classifier.architecture, ResidualArchitecture())

    @override_settings(WAVEGAN_INVERSION={'DEFAULT_PROFILE': 'full', 'CONFIG_OVERRIDES': {'seed': 9}})
    def test_settings_layer(self):
        config = load_experiment_config()
        self.assertEqual(config.profile, ScaleProfile.FULL)
        self.assertEqual(config.seed, 9)

    def test_file_then_flags(self):
        path = self.write_json('experiment.json', {
            'seed': 3, 'gradient': {'max_steps': 7, 'clip_mode': 'hard'}, 'inverter': {'schedule': 'fake_only'},
        })
        config = load_experiment_config(path=path, seed=4, workers=2, output_dir=os.path.join(self.tmpdir, 'out'))
        self.assertEqual(config.seed, 4)
        self.assertEqual(config.workers, 2)
        self.assertEqual(config.gradient.max_steps, 7)
        self.assertEqual(config.gradient.clip_mode.value, 'hard')
        self.assertEqual(config.inverter.schedule, AlternationSchedule.FAKE_ONLY)
        self.assertEqual(config.checkpoint_dir, os.path.join(self.tmpdir, 'out', 'checkpoints'))
        self.assertEqual(config.checkpoint_path(Component.GAN), os.path.join(self.tmpdir, 'out', 'checkpoints', 'gan'))

    @ddt.data(
        {'profile': 'huge'},
        {'overrides': {'audio': {'window_size': 256, 'hop': 512}}},
        {'overrides': {'inverter': {'latent_weight': 0, 'perceptual_weight': 0}}},
        {'overrides': {'gradient': {'backend': 'scipy', 'clip_mode': 'stochastic'}}},
        {'overrides': {'evaluation': {'methods': ['annealing']}}},
        {'overrides': {'generator': {'kernel_size': 24}}},
        {'overrides': {'classifier': {'architecture': {'stage_widths': [8]}}}},
        {'overrides': {'data': {'evaluate_on': 'test'}}},
    )
    def test_invalid(self, kwargs):
        with self.assertRaises(InvalidConfiguration):
            load_experiment_config(**kwargs)

    def test_hash(self):
        config = load_experiment_config()
        self.assertEqual(len(config.hash), 64)
        self.assertEqual(config.hash, load_experiment_config().hash)
        self.assertNotEqual(config.hash, load_experiment_config(seed=1).hash)
        self.assertEqual(experiment_config_from_dict(config.to_dict()).hash, config.hash)

    def test_config_hash_ignores_key_order(self):
        self.assertEqual(config_hash({'a': 1, 'b': [1, 2]}), config_hash({'b': [1, 2], 'a': 1}))


class ConfigSectionTests(SimpleTestCase):
    """
    Tests for the config dataclasses and serializers
    """

    def test_deep_merge(self):
        base = {'a': {'b': 1, 'c': 2}, 'd': 3}
        merged = deep_merge(base, {'a': {'c': 5}, 'e': 6})
        self.assertEqual(merged, {'a': {'b': 1, 'c': 5}, 'd': 3, 'e': 6})
        self.assertEqual(base['a']['c'], 2)

    def test_gd_config_allows_zero_budget(self):
        self.assertEqual(GdConfig(max_steps=0).max_steps, 0)
        with self.assertRaises(InvalidConfiguration):
            GdConfig(max_steps=-1)

    def test_inverter_max_steps(self):
        self.assertIsNone(InverterTrainConfig().max_steps)
        with self.assertRaises(InvalidConfiguration):
            InverterTrainConfig(max_steps=0)

    def test_gd_serializer_reports_field(self):
        serializer = GdConfigSerializer(data={'clip_low': 1.0, 'clip_high': -1.0})
        self.assertFalse(serializer.is_valid())
        self.assertIn('clip_low', str(serializer.errors))

    def test_profiles_are_valid(self):
        for name, profile in PROFILES.items():
            serializer = ExperimentConfigSerializer(data=profile)
            self.assertTrue(serializer.is_valid(), (name, serializer.errors))
