"""
Python API for wavegan_inversion.

The management commands are thin wrappers around these functions.
"""

import logging
import os

import torch

from wavegan_inversion.audio import load_wav, mse_raw, spectrogram, ssim
from wavegan_inversion.checkpoints import require_checkpoint
from wavegan_inversion.classifier import load_classifier, train_classifier
from wavegan_inversion.conf import get_setting
from wavegan_inversion.data import load_real_splits
from wavegan_inversion.evaluation import render_report, run_evaluation
from wavegan_inversion.generator import load_generator, torch_rng, train_gan
from wavegan_inversion.inversion import (
    invert_gd,
    invert_hybrid,
    invert_mapper,
    load_inverter,
    save_result,
    train_inverter
)
from wavegan_inversion.statuses import Component, InversionMethod

log = logging.getLogger(__name__)


def configure_runtime(config):
    """
    Seed torch and, in deterministic mode, restrict it to one thread.
    """
    if config.deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(config.seed)


def check_prerequisites(config, component):
    """
    Raise MissingPrerequisite if a checkpoint ``component`` depends on has not been trained.
    """
    component = Component(component)
    for prerequisite in component.prerequisites():
        require_checkpoint(config.checkpoint_path(prerequisite), component.value, prerequisite.value)


def train_component(config, component):
    """
    Train one component and write its checkpoint.

    Arguments:
        * `config` (ExperimentConfig)
        * `component` (str): 'gan', 'classifier' or 'inverter'.

    Returns (checkpoint path, training log).
    """
    component = Component(component)
    check_prerequisites(config, component)
    configure_runtime(config)
    path = config.checkpoint_path(component)
    train, heldout = load_real_splits(config.data, config.seed, config.classifier.num_classes)
    rng = torch_rng(config.seed)
    log.info('Training {component} with profile={profile} seed={seed} config={hash} into {path}'.format(
        component=component.value, profile=config.profile.value, seed=config.seed, hash=config.hash[:12], path=path,
    ))

    if component == Component.GAN:
        _, training_log = train_gan(
            train, config.gan_training, rng, config.generator, checkpoint_dir=path, config_hash=config.hash,
        )
    elif component == Component.CLASSIFIER:
        _, training_log = train_classifier(
            train, config.classifier, rng, heldout=heldout, spectrogram_config=config.audio,
            checkpoint_dir=path, config_hash=config.hash,
        )
    else:
        generator = load_generator(config.checkpoint_path(Component.GAN))
        classifier = load_classifier(config.checkpoint_path(Component.CLASSIFIER))
        _, training_log = train_inverter(
            generator, classifier, train, config.inverter, rng, config.audio,
            checkpoint_dir=path, config_hash=config.hash,
        )
    return path, training_log


def evaluate(config, use_celery=None):
    """
    Run the full evaluation described by ``config``; returns the run document.
    """
    configure_runtime(config)
    if use_celery is None:
        use_celery = get_setting('USE_CELERY', False)
    return run_evaluation(config, use_celery=use_celery)


def report(results_dir):
    return render_report(results_dir)


def invert_file(config, wav_path, methods=None, out_dir=None):
    """
    Invert one WAV file with the given methods and write a reconstruction and sidecar for each.

    Returns the list of sidecar paths.
    """
    configure_runtime(config)
    methods = [InversionMethod(method) for method in (methods or config.evaluation.methods)]
    needs_mapper = any(method != InversionMethod.GRADIENT for method in methods)
    require_checkpoint(config.checkpoint_path(Component.GAN), 'invert', Component.GAN.value)
    if needs_mapper:
        require_checkpoint(config.checkpoint_path(Component.INVERTER), 'invert', Component.INVERTER.value)

    generator = load_generator(config.checkpoint_path(Component.GAN))
    mapper = load_inverter(config.checkpoint_path(Component.INVERTER)) if needs_mapper else None
    target = load_wav(wav_path, generator.output_length)
    target_spec = spectrogram(target, config.audio)
    out_dir = out_dir or os.path.join(config.output_dir, 'invert', os.path.splitext(os.path.basename(wav_path))[0])
    rng = torch_rng(config.seed)

    sidecars = []
    for method in methods:
        if method == InversionMethod.GRADIENT:
            result = invert_gd(generator, target, config.gradient, rng, spectrogram_config=config.audio)
        elif method == InversionMethod.INVERSE_MAPPER:
            result = invert_mapper(mapper, generator, target, config.audio)
        else:
            result = invert_hybrid(mapper, generator, target, config.hybrid, rng, config.audio)
        metrics = {
            'mse_raw': mse_raw(target, result.reconstruction),
            'ssim': ssim(target_spec, spectrogram(result.reconstruction, config.audio)),
        }
        sidecars.append(save_result(result, out_dir, os.path.abspath(wav_path), config.hash, metrics))
        log.info('Inverted {path} with {method}: spectrogram MAE {initial:.5f} -> {final:.5f} in {steps} steps'.format(
            path=wav_path, method=method.value, initial=result.initial_loss, final=result.final_loss,
            steps=result.steps_run,
        ))
    return sidecars
