"""
Configuration for wavegan_inversion.

An experiment is configured in layers, later layers winning:

    1. the built-in scale profile (``PROFILES['toy']`` or ``PROFILES['full']``)
    2. the ``WAVEGAN_INVERSION['CONFIG_OVERRIDES']`` Django setting
    3. the JSON config file given on the command line
    4. command line flags (seed, profile, workers, output directory)

The merged mapping is validated by ``serializers.ExperimentConfigSerializer`` and turned
into the frozen dataclasses below. Each dataclass checks its own invariants, so configs
built directly in code are held to the same rules as configs read from disk.
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Optional, Tuple

from django.conf import settings

from wavegan_inversion.exceptions import InvalidConfiguration
from wavegan_inversion.statuses import (
    AlternationSchedule,
    BlockReduction,
    ClipMode,
    Component,
    Domain,
    InitMode,
    InversionMethod,
    OptimizerBackend,
    ScaleProfile
)

log = logging.getLogger(__name__)

SAMPLE_RATE = 16000
CANONICAL_LENGTH = 16384


def _require(condition, key, message):
    if not condition:
        raise InvalidConfiguration({key: [message]})


@dataclass(frozen=True)
class SpectrogramConfig:
    """
    Parameters of the magnitude STFT used by every spectrogram consumer.
    """
    window_size: int = 256
    hop: int = 128
    log_floor: float = 1e-6
    use_log: bool = True

    def __post_init__(self):
        _require(self.window_size > 0, 'window_size', 'must be positive')
        _require(0 < self.hop <= self.window_size, 'hop', 'must satisfy 0 < hop <= window_size')
        _require(self.log_floor > 0, 'log_floor', 'must be positive')

    def output_shape(self, length=CANONICAL_LENGTH):
        """
        (frequency bins, frames) of the spectrogram of a clip with ``length`` samples.
        """
        return self.window_size // 2 + 1, 1 + (length - self.window_size) // self.hop


@dataclass(frozen=True)
class GeneratorArchitecture:
    """
    Shape of the transpose-convolution generator and its critic.

    The generator projects the latent vector to 16 frames of ``16 * model_dim`` channels and
    upsamples five times by ``stride``, so the output length is ``16 * stride ** 5``.
    """
    latent_dim: int = 100
    model_dim: int = 64
    kernel_size: int = 25
    stride: int = 4

    def __post_init__(self):
        _require(self.latent_dim > 0, 'latent_dim', 'must be positive')
        _require(self.model_dim > 0, 'model_dim', 'must be positive')
        _require(self.kernel_size % 2 == 1, 'kernel_size', 'must be odd')

    @property
    def output_length(self):
        return 16 * self.stride ** 5


@dataclass(frozen=True)
class GanTrainConfig:
    """
    Wasserstein-GP training of the generator against a phase-shuffled critic.
    """
    steps: int = 100000
    batch_size: int = 64
    generator_lr: float = 1e-4
    critic_lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    gp_weight: float = 10.0
    phase_shuffle: int = 2
    critic_steps: int = 5
    checkpoint_every: int = 5000
    log_every: int = 100

    def __post_init__(self):
        for name in ('steps', 'batch_size', 'generator_lr', 'critic_lr', 'gp_weight', 'critic_steps',
                     'checkpoint_every', 'log_every'):
            _require(getattr(self, name) > 0, name, 'must be positive')
        _require(self.phase_shuffle >= 0, 'phase_shuffle', 'must not be negative')


@dataclass(frozen=True)
class ResidualArchitecture:
    """
    Residual network body shared by the digit classifier and the inverse mapper.

    ``stem='imagenet'`` is the 7x7/stride-2 convolution plus max pooling of an 18-layer
    residual network; ``stem='compact'`` is a single 3x3 convolution for small inputs.
    """
    stage_widths: Tuple[int, ...] = (64, 128, 256, 512)
    blocks_per_stage: int = 2
    stem: str = 'imagenet'

    def __post_init__(self):
        _require(2 <= len(self.stage_widths) <= 4, 'stage_widths', 'between 2 and 4 stages are supported')
        _require(all(width > 0 for width in self.stage_widths), 'stage_widths', 'widths must be positive')
        _require(self.blocks_per_stage > 0, 'blocks_per_stage', 'must be positive')
        _require(self.stem in ('imagenet', 'compact'), 'stem', "must be 'imagenet' or 'compact'")


@dataclass(frozen=True)
class ClassifierTrainConfig:
    """
    Spoken-digit classifier shape and training schedule.
    """
    num_classes: int = 10
    architecture: ResidualArchitecture = field(default_factory=ResidualArchitecture)
    steps: int = 6000
    batch_size: int = 64
    learning_rate: float = 1e-3
    heldout_fraction: float = 0.1
    require_all_classes: bool = True
    log_every: int = 100

    def __post_init__(self):
        _require(self.num_classes >= 2, 'num_classes', 'at least two classes are needed')
        for name in ('steps', 'batch_size', 'learning_rate', 'log_every'):
            _require(getattr(self, name) > 0, name, 'must be positive')
        _require(0 < self.heldout_fraction < 1, 'heldout_fraction', 'must lie strictly between 0 and 1')


@dataclass(frozen=True)
class InverterTrainConfig:
    """
    Inverse mapper shape and its alternating real/fake training schedule.

    ``max_steps`` caps the number of training rounds across all epochs; ``None`` runs every
    epoch to completion. One round is one real batch and one fake batch.
    """
    architecture: ResidualArchitecture = field(default_factory=ResidualArchitecture)
    epochs: int = 250
    learning_rate: float = 1e-3
    batch_size: int = 64
    latent_weight: float = 1.0
    perceptual_weight: float = 1.0
    schedule: AlternationSchedule = AlternationSchedule.REAL_THEN_FAKE
    max_steps: Optional[int] = None
    block_reduction: BlockReduction = BlockReduction.MEAN
    log_every: int = 50

    def __post_init__(self):
        for name in ('epochs', 'learning_rate', 'batch_size', 'log_every'):
            _require(getattr(self, name) > 0, name, 'must be positive')
        _require(self.latent_weight >= 0 and self.perceptual_weight >= 0, 'latent_weight',
                 'loss weights must not be negative')
        _require(self.latent_weight > 0 or self.perceptual_weight > 0, 'latent_weight',
                 'latent_weight and perceptual_weight cannot both be 0')
        _require(self.max_steps is None or self.max_steps > 0, 'max_steps', 'must be positive')


@dataclass(frozen=True)
class GdConfig:
    """
    Gradient inversion of the spectrogram objective.

    ``max_steps`` may be 0, in which case the starting point is returned unchanged; this is
    the degenerate budget of the hybrid method.

    The torch backend runs ``torch.optim.LBFGS`` with the strong Wolfe line search, the only
    line search it offers; ``backend='scipy'`` uses the ``L-BFGS-B`` line search instead.
    """
    max_steps: int = 50000
    backend: OptimizerBackend = OptimizerBackend.TORCH
    learning_rate: float = 1.0
    history_size: int = 10
    tolerance: float = 1e-8
    line_search: Optional[str] = 'strong_wolfe'
    clip_mode: ClipMode = ClipMode.NONE
    clip_low: float = -1.0
    clip_high: float = 1.0
    init_mode: InitMode = InitMode.RANDOM

    def __post_init__(self):
        _require(self.max_steps >= 0, 'max_steps', 'must not be negative')
        _require(self.learning_rate > 0, 'learning_rate', 'must be positive')
        _require(self.history_size > 0, 'history_size', 'must be positive')
        _require(self.tolerance >= 0, 'tolerance', 'must not be negative')
        _require(self.clip_low < self.clip_high, 'clip_low', 'must be smaller than clip_high')
        _require(self.line_search in (None, 'strong_wolfe'), 'line_search', "must be null or 'strong_wolfe'")
        _require(
            not (self.backend == OptimizerBackend.SCIPY and self.clip_mode == ClipMode.STOCHASTIC),
            'clip_mode', 'stochastic clipping needs per-step control and is only available with the torch backend',
        )


@dataclass(frozen=True)
class EvaluationConfig:
    """
    Which targets, methods and metrics an evaluation run covers.
    """
    num_targets: int = 1000
    inception_splits: int = 10
    figures: int = 3
    domains: Tuple[Domain, ...] = (Domain.FAKE, Domain.REAL)
    methods: Tuple[InversionMethod, ...] = tuple(InversionMethod.table_order())
    metrics: Tuple[str, ...] = ('inception', 'mse', 'ssim', 'accuracy')

    def __post_init__(self):
        _require(self.num_targets > 0, 'num_targets', 'must be positive')
        _require(self.inception_splits > 0, 'inception_splits', 'must be positive')
        _require(self.figures >= 0, 'figures', 'must not be negative')


@dataclass(frozen=True)
class DataConfig:
    """
    Where real audio comes from and how it is split.

    Without ``sc09_root`` the synthetic toy digits are used, so nothing has to be downloaded.
    """
    sc09_root: Optional[str] = None
    manifest: Optional[str] = None
    toy_per_class: int = 40
    heldout_fraction: float = 0.1
    evaluate_on: str = 'heldout'
    load_workers: int = 4

    def __post_init__(self):
        _require(self.toy_per_class > 0, 'toy_per_class', 'must be positive')
        _require(0 < self.heldout_fraction < 1, 'heldout_fraction', 'must lie strictly between 0 and 1')
        _require(self.evaluate_on in ('heldout', 'train'), 'evaluate_on', "must be 'heldout' or 'train'")
        _require(self.load_workers > 0, 'load_workers', 'must be positive')


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything a train/evaluate/invert run needs.
    """
    profile: ScaleProfile
    seed: int
    output_dir: str
    checkpoint_dir: str
    workers: int
    deterministic: bool
    audio: SpectrogramConfig
    generator: GeneratorArchitecture
    gan_training: GanTrainConfig
    classifier: ClassifierTrainConfig
    inverter: InverterTrainConfig
    gradient: GdConfig
    hybrid: GdConfig
    evaluation: EvaluationConfig
    data: DataConfig

    def checkpoint_path(self, component):
        return os.path.join(self.checkpoint_dir, Component(component).value)

    def to_dict(self):
        """
        Plain JSON-compatible representation, the input of ``config_hash``.
        """
        return _plain(asdict(self))

    @property
    def hash(self):
        return config_hash(self.to_dict())

    def with_overrides(self, **changes):
        return replace(self, **changes)


_SECTIONS = {
    'audio': SpectrogramConfig,
    'generator': GeneratorArchitecture,
    'gan_training': GanTrainConfig,
    'gradient': GdConfig,
    'hybrid': GdConfig,
    'evaluation': EvaluationConfig,
    'data': DataConfig,
}

_ENUM_FIELDS = {
    'schedule': AlternationSchedule,
    'block_reduction': BlockReduction,
    'backend': OptimizerBackend,
    'clip_mode': ClipMode,
    'init_mode': InitMode,
}


PROFILES = {
    ScaleProfile.TOY.value: {
        'profile': 'toy',
        'seed': 0,
        'output_dir': 'runs/toy',
        'checkpoint_dir': 'runs/toy/checkpoints',
        'workers': 1,
        'deterministic': True,
        'audio': {'window_size': 256, 'hop': 256, 'log_floor': 1e-6, 'use_log': True},
        'generator': {'latent_dim': 16, 'model_dim': 4},
        'gan_training': {
            'steps': 2000, 'batch_size': 16, 'phase_shuffle': 2, 'critic_steps': 5,
            'checkpoint_every': 500, 'log_every': 100,
        },
        'classifier': {
            'num_classes': 10,
            'architecture': {'stage_widths': [8, 16, 32, 64], 'blocks_per_stage': 1, 'stem': 'compact'},
            'steps': 500, 'batch_size': 32, 'learning_rate': 1e-3, 'require_all_classes': True,
        },
        'inverter': {
            'architecture': {'stage_widths': [8, 16, 32, 64], 'blocks_per_stage': 1, 'stem': 'compact'},
            'epochs': 250, 'batch_size': 16, 'learning_rate': 1e-3, 'max_steps': 2000,
        },
        'gradient': {'max_steps': 1000},
        'hybrid': {'max_steps': 50},
        'evaluation': {'num_targets': 32, 'inception_splits': 4, 'figures': 3},
        'data': {'toy_per_class': 40},
    },
    ScaleProfile.FULL.value: {
        'profile': 'full',
        'seed': 0,
        'output_dir': 'runs/full',
        'checkpoint_dir': 'runs/full/checkpoints',
        'workers': 4,
        'deterministic': True,
        'audio': {'window_size': 256, 'hop': 128, 'log_floor': 1e-6, 'use_log': True},
        'generator': {'latent_dim': 100, 'model_dim': 64},
        'gan_training': {'steps': 100000, 'batch_size': 64},
        'classifier': {'num_classes': 10, 'steps': 6000, 'batch_size': 64},
        'inverter': {'epochs': 250, 'batch_size': 64, 'learning_rate': 1e-3},
        'gradient': {'max_steps': 50000},
        'hybrid': {'max_steps': 200},
        'evaluation': {'num_targets': 1000, 'inception_splits': 10, 'figures': 3},
        'data': {},
    },
}


def _plain(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def config_hash(mapping):
    """
    Stable SHA-256 of a JSON-compatible mapping.
    """
    canonical = json.dumps(_plain(mapping), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def deep_merge(base, override):
    """
    Return a copy of ``base`` with ``override`` merged in, recursing into nested dicts.
    """
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def build_section(cls, data):
    kwargs = {}
    names = {f.name for f in fields(cls)}
    for key, value in data.items():
        if key not in names:
            continue
        if key in _ENUM_FIELDS and value is not None:
            value = _ENUM_FIELDS[key](value)
        elif key == 'architecture':
            value = build_section(ResidualArchitecture, value)
        elif key == 'domains':
            value = tuple(Domain(item) for item in value)
        elif key == 'methods':
            value = tuple(InversionMethod(item) for item in value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def experiment_config_from_dict(data):
    """
    Build an ExperimentConfig from an already validated mapping.
    """
    sections = {name: build_section(cls, data.get(name, {})) for name, cls in _SECTIONS.items()}
    return ExperimentConfig(
        profile=ScaleProfile(data['profile']),
        seed=data['seed'],
        output_dir=data['output_dir'],
        checkpoint_dir=data['checkpoint_dir'],
        workers=data['workers'],
        deterministic=data['deterministic'],
        classifier=build_section(ClassifierTrainConfig, data.get('classifier', {})),
        inverter=build_section(InverterTrainConfig, data.get('inverter', {})),
        **sections,
    )


def get_setting(name, default=None):
    """
    Read one key of the ``WAVEGAN_INVERSION`` Django setting.
    """
    return getattr(settings, 'WAVEGAN_INVERSION', {}).get(name, default)


def load_experiment_config(path=None, profile=None, seed=None, workers=None, output_dir=None, overrides=None):
    """
    Merge profile defaults, settings, an optional JSON file and flags into an ExperimentConfig.

    Arguments:
        * `path` (str): Optional JSON config file.
        * `profile` (str): 'toy' or 'full'; beats the file, which beats the settings default.
        * `seed`, `workers`, `output_dir`: Optional flag overrides.
        * `overrides` (dict): Optional nested mapping merged last, mostly for tests.
    """
    # pylint: disable=import-outside-toplevel
    from wavegan_inversion.serializers import ExperimentConfigSerializer

    file_data = {}
    if path:
        with open(path, encoding='utf-8') as config_file:
            file_data = json.load(config_file)

    profile_name = profile or file_data.get('profile') or get_setting('DEFAULT_PROFILE', ScaleProfile.TOY.value)
    if profile_name not in PROFILES:
        raise InvalidConfiguration({'profile': ['unknown profile {}'.format(profile_name)]})

    merged = deep_merge(PROFILES[profile_name], get_setting('CONFIG_OVERRIDES', {}))
    merged = deep_merge(merged, file_data)
    merged['profile'] = profile_name
    if output_dir is not None:
        if 'checkpoint_dir' not in file_data:
            merged['checkpoint_dir'] = os.path.join(output_dir, 'checkpoints')
        merged['output_dir'] = output_dir
    flags = {'seed': seed, 'workers': workers}
    merged.update({key: value for key, value in flags.items() if value is not None})
    merged = deep_merge(merged, overrides)

    serializer = ExperimentConfigSerializer(data=merged)
    if not serializer.is_valid():
        raise InvalidConfiguration(serializer.errors)

    config = experiment_config_from_dict(serializer.validated_data)
    log.info(
        'Loaded experiment config profile={profile} seed={seed} hash={hash} from {path}'.format(
            profile=config.profile.value, seed=config.seed, hash=config.hash[:12], path=path or '<defaults>',
        )
    )
    return config
