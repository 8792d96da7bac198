"""Small models, data and configs shared by the wavegan_inversion tests"""

import json
import os
import shutil
import tempfile

import numpy as np
import torch

from wavegan_inversion.audio import AudioClip
from wavegan_inversion.classifier import DigitClassifier
from wavegan_inversion.conf import GeneratorArchitecture, ResidualArchitecture, SpectrogramConfig
from wavegan_inversion.generator import WaveGANGenerator
from wavegan_inversion.inversion import InverseMapper

TINY_GENERATOR = GeneratorArchitecture(latent_dim=4, model_dim=1)
TINY_RESIDUAL = ResidualArchitecture(stage_widths=(4, 8), blocks_per_stage=1, stem='compact')
TINY_AUDIO = SpectrogramConfig(window_size=256, hop=256)
TINY_INPUT_SHAPE = TINY_AUDIO.output_shape()

TINY_RESIDUAL_DATA = {'stage_widths': [4, 8], 'blocks_per_stage': 1, 'stem': 'compact'}

# A whole experiment small enough to train and evaluate in a unit test.
TINY_EXPERIMENT = {
    'workers': 1,
    'audio': {'window_size': 256, 'hop': 256},
    'generator': {'latent_dim': 4, 'model_dim': 1},
    'gan_training': {'steps': 2, 'batch_size': 4, 'critic_steps': 1, 'checkpoint_every': 1, 'log_every': 1},
    'classifier': {'architecture': TINY_RESIDUAL_DATA, 'steps': 2, 'batch_size': 8, 'log_every': 1},
    'inverter': {'architecture': TINY_RESIDUAL_DATA, 'epochs': 1, 'batch_size': 4, 'max_steps': 2, 'log_every': 1},
    'gradient': {'max_steps': 2},
    'hybrid': {'max_steps': 2},
    'evaluation': {'num_targets': 2, 'inception_splits': 2, 'figures': 1},
    'data': {'toy_per_class': 4},
}


def tiny_generator(seed=0):
    torch.manual_seed(seed)
    return WaveGANGenerator(TINY_GENERATOR).eval()


def tiny_classifier(num_classes=10, seed=0, input_shape=TINY_INPUT_SHAPE):
    torch.manual_seed(seed)
    return DigitClassifier(num_classes, TINY_RESIDUAL, input_shape=input_shape).eval()


def tiny_mapper(latent_dim=4, seed=0):
    torch.manual_seed(seed)
    return InverseMapper(latent_dim, TINY_RESIDUAL, input_shape=TINY_INPUT_SHAPE).eval()


def tone(frequency=440.0, amplitude=0.5, length=16384, sample_rate=16000):
    t = np.arange(length) / sample_rate
    return AudioClip((amplitude * np.sin(2 * np.pi * frequency * t)).astype(np.float32))


class TemporaryDirectoryMixin:
    """
    Gives each test a scratch directory in ``self.tmpdir``.
    """

    def setUp(self):
        super().setUp()
        self.tmpdir = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmpdir, ignore_errors=True)

    def write_json(self, name, document):
        path = os.path.join(self.tmpdir, name)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(document, handle)
        return path
