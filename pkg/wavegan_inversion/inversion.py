"""
Latent vector recovery: the inverse mapping network, gradient inversion of the spectrogram
objective, and their hybrid.

The gradient objective for a latent ``z`` and a target clip is the mean absolute
difference between the spectrogram of ``g(z)`` and the spectrogram of the target. It is
evaluated in float64 from float32 spectrograms, so the best-so-far bookkeeping agrees with
``audio.spectrogram_mae`` on the returned reconstruction.
"""

import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, replace
from typing import Tuple

import numpy as np
import torch
from scipy.optimize import minimize
from torch import nn

from wavegan_inversion.audio import (
    AudioClip,
    load_wav,
    save_wav,
    spectrogram,
    spectrogram_batch,
    spectrogram_tensor
)
from wavegan_inversion.checkpoints import read_manifest, read_parameters, write_checkpoint
from wavegan_inversion.classifier import perceptual_loss_tensor
from wavegan_inversion.conf import GdConfig, InverterTrainConfig, ResidualArchitecture, SpectrogramConfig
from wavegan_inversion.exceptions import EmptyDataset, NonFiniteObjective, ShapeMismatch, TrainingDiverged
from wavegan_inversion.generator import as_latent, generate, sample_latent, torch_rng
from wavegan_inversion.resnet import ResidualBody
from wavegan_inversion.serializers import InversionResultSerializer
from wavegan_inversion.statuses import AlternationSchedule, ClipMode, InitMode, InversionMethod, OptimizerBackend

log = logging.getLogger(__name__)


class InverseMapper(nn.Module):
    """
    Residual network regressing a latent vector from a spectrogram.

    The final layer is linear with no activation, so predictions are not confined to [-1, 1].
    """

    def __init__(self, latent_dim, architecture=None, input_shape=None):
        super().__init__()
        self.latent_dim = latent_dim
        self.architecture = architecture or ResidualArchitecture()
        self.input_shape = tuple(input_shape) if input_shape else None
        self.body = ResidualBody(self.architecture)
        self.fc = nn.Linear(self.body.out_features, latent_dim)

    def forward(self, x):
        pooled, _ = self.body(x)
        return self.fc(pooled)

    def check_input(self, shape):
        if self.input_shape is not None and tuple(shape) != self.input_shape:
            raise ShapeMismatch(
                'Spectrogram of shape {shape} does not match the inverse mapper input shape {expected}.'.format(
                    shape=tuple(shape), expected=self.input_shape,
                )
            )


@dataclass(frozen=True, eq=False)
class InversionResult:
    """
    Outcome of one latent recovery.

    ``loss_trace[k]`` is the best objective seen after k steps, so the trace never increases;
    ``steps_used`` is the step at which the returned ``z_hat`` was found and ``steps_run``
    the number of steps taken. ``reconstruction`` is always ``generate(g, z_hat)``.
    """
    method: InversionMethod
    z_hat: torch.Tensor
    reconstruction: AudioClip
    loss_trace: Tuple[float, ...]
    steps_used: int
    steps_run: int
    wall_time: float

    @property
    def initial_loss(self):
        return self.loss_trace[0]

    @property
    def final_loss(self):
        return self.loss_trace[-1]


def predict_latent(m, s):
    """
    Latent vector predicted by the inverse mapper for one Spectrogram.
    """
    m.check_input(s.shape)
    m.eval()
    with torch.no_grad():
        return m(s.as_tensor())[0]


def hard_clip(z, lo=-1.0, hi=1.0):
    return torch.clamp(torch.as_tensor(z, dtype=torch.float32), lo, hi)


def stochastic_clip(z, lo=-1.0, hi=1.0, rng=None):
    """
    Replace every component outside [lo, hi] with an independent uniform draw on [lo, hi].

    Components already in range are returned bit for bit.
    """
    if not lo < hi:
        raise ValueError('stochastic_clip needs lo < hi, got lo={lo} hi={hi}'.format(lo=lo, hi=hi))
    z = torch.as_tensor(z, dtype=torch.float32)
    outside = ~((z >= lo) & (z <= hi))
    draws = lo + (hi - lo) * torch.rand(z.shape, generator=rng)
    return torch.where(outside, torch.clamp(draws, lo, hi), z)


def _clip(z, cfg, rng):
    if cfg.clip_mode == ClipMode.HARD:
        return hard_clip(z, cfg.clip_low, cfg.clip_high)
    if cfg.clip_mode == ClipMode.STOCHASTIC:
        return stochastic_clip(z, cfg.clip_low, cfg.clip_high, rng)
    return z


def _target_spectrogram(g, target, spectrogram_config):
    if target.length != g.output_length:
        raise ShapeMismatch('Target has {actual} samples, the generator produces {expected}.'.format(
            actual=target.length, expected=g.output_length,
        ))
    with torch.no_grad():
        return spectrogram_tensor(torch.from_numpy(np.array(target.samples)), spectrogram_config).double()


def _objective(g, target_spec, spectrogram_config):
    def evaluate(z):
        spec = spectrogram_tensor(g(z[None])[0], spectrogram_config)
        return torch.mean(torch.abs(spec.double() - target_spec))
    return evaluate


def _checked(value, step):
    value = float(value)
    if not np.isfinite(value):
        raise NonFiniteObjective('Gradient inversion objective is {value} at step={step}.'.format(
            value=value, step=step,
        ))
    return value


def spectrogram_objective(g, target, z, spectrogram_config=None):
    """
    The gradient inversion objective at one latent vector.
    """
    spectrogram_config = spectrogram_config or SpectrogramConfig()
    objective = _objective(g, _target_spectrogram(g, target, spectrogram_config), spectrogram_config)
    with torch.no_grad():
        return _checked(objective(as_latent(z, g.latent_dim)), 0)


def _run_torch_lbfgs(objective, z0, cfg, rng, best_loss):
    z = z0.clone().requires_grad_(True)
    optimizer = torch.optim.LBFGS(
        [z], lr=cfg.learning_rate, max_iter=1, max_eval=25, history_size=cfg.history_size,
        tolerance_change=cfg.tolerance, line_search_fn=cfg.line_search,
    )

    best_z, steps_used, steps_run = z0.clone(), 0, 0
    trace = [best_loss]
    previous = best_loss

    def closure():
        optimizer.zero_grad()
        loss = objective(z)
        _checked(loss.item(), steps_run + 1)
        z.grad, = torch.autograd.grad(loss, [z])
        return loss

    for step in range(1, cfg.max_steps + 1):
        optimizer.step(closure)
        steps_run = step
        with torch.no_grad():
            clipped = _clip(z.detach(), cfg, rng)
            if not torch.equal(clipped, z):
                z.copy_(clipped)
                optimizer.state.clear()
            current = _checked(objective(z), step)
        if current < trace[-1]:
            best_z, steps_used = z.detach().clone(), step
        trace.append(min(trace[-1], current))
        if current == 0.0 or abs(previous - current) <= cfg.tolerance:
            break
        previous = current
    return best_z, trace, steps_used, steps_run


def _run_scipy_lbfgsb(objective, z0, cfg, best_loss):
    state = {'best': best_loss, 'z': z0.clone(), 'step': 0, 'iterations': 0}
    trace = [best_loss]

    def fun(x):
        z = torch.from_numpy(x.astype(np.float32)).requires_grad_(True)
        loss = objective(z)
        value = _checked(loss.item(), state['iterations'] + 1)
        gradient, = torch.autograd.grad(loss, [z])
        state['last'] = (np.array(x), value, z.detach().clone())
        return value, gradient.double().numpy()

    def callback(xk, *_):
        # only accepted iterates count, never line-search trial points
        state['iterations'] += 1
        x, value, z = state['last']
        if not np.array_equal(x, xk):
            z = torch.from_numpy(np.asarray(xk, dtype=np.float32))
            with torch.no_grad():
                value = _checked(objective(z), state['iterations'])
        if value < state['best']:
            state['best'], state['z'], state['step'] = value, z, state['iterations']
        trace.append(state['best'])

    bounds = None
    if cfg.clip_mode == ClipMode.HARD:
        bounds = [(cfg.clip_low, cfg.clip_high)] * z0.shape[0]
    minimize(
        fun, z0.double().numpy(), jac=True, method='L-BFGS-B', bounds=bounds, callback=callback,
        options={'maxiter': cfg.max_steps, 'maxcor': cfg.history_size, 'ftol': cfg.tolerance, 'gtol': 0.0},
    )
    return state['z'], trace, state['step'], state['iterations']


def invert_gd(g, target, cfg=None, rng=None, init=None, spectrogram_config=None):
    """
    Recover a latent vector for ``target`` by quasi-Newton minimisation of the spectrogram
    mean absolute error.

    Arguments:
        * `g` (WaveGANGenerator)
        * `target` (AudioClip): real or generated clip of the generator's output length.
        * `cfg` (GdConfig)
        * `rng` (torch.Generator): draws the random start and stochastic clipping values.
        * `init` (latent vector): Optional starting point; required when
          ``cfg.init_mode == 'provided'``.
        * `spectrogram_config` (SpectrogramConfig)

    With clipping enabled a provided ``init`` is clipped before it is scored. The starting
    point counts as step 0. Optimisation stops after ``cfg.max_steps`` steps or
    when the objective changes by no more than ``cfg.tolerance`` in one step, and returns the
    best latent seen; ties keep the earliest.
    """
    cfg = cfg or GdConfig()
    spectrogram_config = spectrogram_config or SpectrogramConfig()
    rng = rng if rng is not None else torch_rng(0)
    started = time.perf_counter()

    if init is not None:
        # a provided start is moved into the clip box before it is scored
        z0 = _clip(as_latent(init, g.latent_dim).detach().clone(), cfg, rng)
    elif cfg.init_mode == InitMode.PROVIDED:
        raise ValueError('Gradient inversion with init_mode=provided needs an init vector.')
    else:
        z0 = sample_latent(rng, g.latent_dim)

    objective = _objective(g, _target_spectrogram(g, target, spectrogram_config), spectrogram_config)
    with torch.no_grad():
        initial = _checked(objective(z0), 0)

    if cfg.max_steps == 0 or initial == 0.0:
        best_z, trace, steps_used, steps_run = z0, [initial], 0, 0
    elif cfg.backend == OptimizerBackend.SCIPY:
        best_z, trace, steps_used, steps_run = _run_scipy_lbfgsb(objective, z0, cfg, initial)
    else:
        best_z, trace, steps_used, steps_run = _run_torch_lbfgs(objective, z0, cfg, rng, initial)

    result = InversionResult(
        method=InversionMethod.GRADIENT,
        z_hat=best_z,
        reconstruction=generate(g, best_z),
        loss_trace=tuple(trace),
        steps_used=steps_used,
        steps_run=steps_run,
        wall_time=time.perf_counter() - started,
    )
    log.debug('Gradient inversion ran {run} steps; objective {initial:.6f} -> {final:.6f} (best at step {used})'.format(
        run=steps_run, initial=initial, final=result.final_loss, used=steps_used,
    ))
    return result


def invert_mapper(m, g, target, spectrogram_config=None):
    """
    The inverse mapper's prediction packaged as an InversionResult.
    """
    spectrogram_config = spectrogram_config or SpectrogramConfig()
    started = time.perf_counter()
    z_hat = predict_latent(m, spectrogram(target, spectrogram_config))
    loss = spectrogram_objective(g, target, z_hat, spectrogram_config)
    return InversionResult(
        method=InversionMethod.INVERSE_MAPPER,
        z_hat=z_hat,
        reconstruction=generate(g, z_hat),
        loss_trace=(loss,),
        steps_used=0,
        steps_run=0,
        wall_time=time.perf_counter() - started,
    )


def invert_hybrid(m, g, target, cfg=None, rng=None, spectrogram_config=None):
    """
    Start gradient inversion from the inverse mapper's prediction.

    Because the prediction is step 0 of the best-so-far search, the result is never worse
    than the prediction alone; a zero step budget returns the prediction itself. When
    ``cfg.clip_mode`` is set the prediction is clipped first, and the guarantee holds
    against the clipped prediction.
    """
    cfg = cfg or GdConfig(max_steps=200)
    spectrogram_config = spectrogram_config or SpectrogramConfig()
    started = time.perf_counter()
    z_init = predict_latent(m, spectrogram(target, spectrogram_config))
    result = invert_gd(g, target, cfg, rng, init=z_init, spectrogram_config=spectrogram_config)
    return replace(result, method=InversionMethod.HYBRID, wall_time=time.perf_counter() - started)


@contextmanager
def _frozen(*modules):
    saved = [[p.requires_grad for p in module.parameters()] for module in modules]
    for module in modules:
        module.requires_grad_(False)
        module.eval()
    try:
        yield
    finally:
        for module, flags in zip(modules, saved):
            for parameter, flag in zip(module.parameters(), flags):
                parameter.requires_grad_(flag)


def train_inverter(g, c, real, cfg=None, rng=None, spectrogram_config=None, checkpoint_dir=None, config_hash=''):
    """
    Train an InverseMapper for generator ``g`` with perceptual features from classifier ``c``.

    Each round takes one batch of real audio, trained with the perceptual loss only, and
    one batch of freshly generated audio, trained with the latent MSE plus the perceptual
    loss; ``cfg.schedule`` sets the order. An epoch is one pass over ``real``. With
    ``perceptual_weight == 0`` the real batches carry no signal and are skipped.

    Returns (mapper, training_log) with the loss trace of each branch.
    """
    cfg = cfg or InverterTrainConfig()
    spectrogram_config = spectrogram_config or SpectrogramConfig()
    rng = rng if rng is not None else torch_rng(0)
    clips = [getattr(item, 'clip', item) for item in real]
    if not clips:
        raise EmptyDataset('Cannot train the inverse mapper without real audio.')
    real_inputs = spectrogram_batch(clips, spectrogram_config)

    torch.manual_seed(int(torch.randint(2 ** 31 - 1, (1,), generator=rng)))
    mapper = InverseMapper(g.latent_dim, cfg.architecture, input_shape=real_inputs.shape[-2:])
    optimizer = torch.optim.Adam(mapper.parameters(), lr=cfg.learning_rate)
    use_real = cfg.perceptual_weight > 0 and cfg.schedule != AlternationSchedule.FAKE_ONLY
    training_log = {'real_loss': [], 'fake_loss': [], 'latent_mse': []}

    def spectrograms(waveforms):
        return spectrogram_tensor(waveforms, spectrogram_config)[:, None]

    def update(loss, branch, epoch, batch, round_index):
        if not torch.isfinite(loss):
            detail = 'epoch={epoch} batch={batch} {branch} loss is {value}'.format(
                epoch=epoch, batch=batch, branch=branch, value=loss.item(),
            )
            raise TrainingDiverged('inverter', round_index, detail)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()

    def real_step(indices, epoch, batch, round_index):
        target = real_inputs[indices]
        reconstruction = spectrograms(g(mapper(target)))
        loss = cfg.perceptual_weight * perceptual_loss_tensor(c, reconstruction, target, cfg.block_reduction)
        update(loss, 'real', epoch, batch, round_index)
        training_log['real_loss'].append(float(loss.item()))

    def fake_step(epoch, batch, round_index):
        z = sample_latent(rng, g.latent_dim, cfg.batch_size)
        with torch.no_grad():
            target = spectrograms(g(z))
        z_hat = mapper(target)
        latent_mse = nn.functional.mse_loss(z_hat, z)
        loss = cfg.latent_weight * latent_mse
        if cfg.perceptual_weight > 0:
            reconstruction = spectrograms(g(z_hat))
            loss = loss + cfg.perceptual_weight * perceptual_loss_tensor(c, reconstruction, target, cfg.block_reduction)
        update(loss, 'fake', epoch, batch, round_index)
        training_log['fake_loss'].append(float(loss.item()))
        training_log['latent_mse'].append(float(latent_mse.item()))

    rounds = 0
    epochs_run = 0
    with _frozen(g, c):
        mapper.train()
        for epoch in range(1, cfg.epochs + 1):
            epochs_run = epoch
            order = torch.randperm(real_inputs.shape[0], generator=rng)
            for batch, start in enumerate(range(0, len(order), cfg.batch_size), start=1):
                rounds += 1
                indices = order[start:start + cfg.batch_size]
                if cfg.schedule == AlternationSchedule.FAKE_THEN_REAL:
                    fake_step(epoch, batch, rounds)
                    if use_real:
                        real_step(indices, epoch, batch, rounds)
                else:
                    if use_real:
                        real_step(indices, epoch, batch, rounds)
                    fake_step(epoch, batch, rounds)
                if rounds % cfg.log_every == 0:
                    log.info('Inverter round={round} epoch={epoch} latent_mse={mse:.5f} fake_loss={fake:.5f}'.format(
                        round=rounds, epoch=epoch, mse=training_log['latent_mse'][-1],
                        fake=training_log['fake_loss'][-1],
                    ))
                if cfg.max_steps and rounds >= cfg.max_steps:
                    break
            if cfg.max_steps and rounds >= cfg.max_steps:
                break
    mapper.eval()

    training_log['rounds'] = rounds
    training_log['epochs'] = epochs_run
    log.info('Inverse mapper trained for {rounds} rounds over {epochs} epochs'.format(rounds=rounds, epochs=epochs_run))
    if checkpoint_dir:
        save_inverter(mapper, checkpoint_dir, training_log, config_hash)
    return mapper, training_log


def latent_recovery_mse(m, g, rng, count=256, spectrogram_config=None):
    """
    Mean squared error between fresh latents and the mapper's predictions for their audio.

    Independent uniform pairs score 2/3 on average.
    """
    spectrogram_config = spectrogram_config or SpectrogramConfig()
    z = sample_latent(rng, g.latent_dim, count)
    m.eval()
    with torch.no_grad():
        predictions = m(spectrogram_tensor(g(z), spectrogram_config)[:, None])
    return float(nn.functional.mse_loss(predictions, z).item())


def save_inverter(m, path, training_log=None, config_hash=''):
    manifest = {
        'architecture': asdict(m.architecture),
        'latent_dim': m.latent_dim,
        'input_shape': list(m.input_shape) if m.input_shape else None,
        'config_hash': config_hash,
    }
    return write_checkpoint(path, 'inverter', m, manifest, training_log)


def load_inverter(path):
    """
    Load an inverse mapper checkpoint in inference mode.
    """
    manifest = read_manifest(path, kind='inverter')
    architecture = manifest['architecture']
    architecture['stage_widths'] = tuple(architecture['stage_widths'])
    m = InverseMapper(manifest['latent_dim'], ResidualArchitecture(**architecture), manifest['input_shape'])
    m.load_state_dict(read_parameters(path))
    m.eval()
    return m


def save_result(result, directory, target, config_hash='', metrics=None):
    """
    Write ``<method>.wav`` and its ``<method>.json`` sidecar into ``directory``.

    Arguments:
        * `result` (InversionResult)
        * `directory` (str)
        * `target` (str): identifier or path of the target clip.
        * `config_hash` (str)
        * `metrics` (dict): Optional ``mse_raw``, ``ssim`` and ``latent_mse`` values.
    """
    method = InversionMethod(result.method).value
    os.makedirs(directory, exist_ok=True)
    wav_name = '{}.wav'.format(method)
    save_wav(result.reconstruction, os.path.join(directory, wav_name), encoding='float32')
    document = {
        'method': method,
        'target': target,
        'reconstruction': wav_name,
        'sample_rate': result.reconstruction.sample_rate,
        'z_hat': result.z_hat,
        'loss_trace': list(result.loss_trace),
        'steps_used': result.steps_used,
        'steps_run': result.steps_run,
        'wall_time': result.wall_time,
        'spectrogram_mae': result.final_loss,
        'initial_mae': result.initial_loss,
        'config_hash': config_hash,
    }
    document.update({key: value for key, value in (metrics or {}).items() if key in ('mse_raw', 'ssim', 'latent_mse')})
    sidecar = os.path.join(directory, '{}.json'.format(method))
    with open(sidecar, 'w', encoding='utf-8') as sidecar_file:
        json.dump(InversionResultSerializer(document).data, sidecar_file, indent=2, sort_keys=True)
    return sidecar


def load_result(directory, method):
    """
    Read a sidecar and its WAV back into (InversionResult, sidecar dict).
    """
    method = InversionMethod(method).value
    with open(os.path.join(directory, '{}.json'.format(method)), encoding='utf-8') as sidecar_file:
        serializer = InversionResultSerializer(data=json.load(sidecar_file))
    serializer.is_valid(raise_exception=True)
    document = dict(serializer.validated_data)
    clip = load_wav(os.path.join(directory, document['reconstruction']))
    result = InversionResult(
        method=InversionMethod(document['method']),
        z_hat=torch.tensor(document['z_hat'], dtype=torch.float32),
        reconstruction=clip,
        loss_trace=tuple(document['loss_trace']),
        steps_used=document['steps_used'],
        steps_run=document['steps_run'],
        wall_time=document['wall_time'],
    )
    return result, document
