"""
Raw-waveform generator, its phase-shuffled critic and their adversarial training.

The generator projects a latent vector uniform on [-1, 1]^d to 16 frames and upsamples it
with five strided transpose convolutions to one second of 16 kHz audio. It has no
normalisation or dropout layers, so ``generate`` is a pure function of (parameters, z).
"""

import logging
from dataclasses import asdict

import numpy as np
import torch
from torch import nn

from wavegan_inversion.audio import AudioClip
from wavegan_inversion.checkpoints import read_manifest, read_parameters, write_checkpoint
from wavegan_inversion.conf import GeneratorArchitecture
from wavegan_inversion.exceptions import EmptyDataset, LatentDimensionMismatch, ShapeMismatch, TrainingDiverged

log = logging.getLogger(__name__)

INITIAL_FRAMES = 16
UPSAMPLING_LAYERS = 5
LEAKY_SLOPE = 0.2


def torch_rng(seed):
    """
    A seeded torch random source.
    """
    return torch.Generator().manual_seed(int(seed))


def sample_latent(rng, d, batch_size=None):
    """
    Draw latent vectors with independent components uniform on [-1, 1].

    Returns a [d] tensor, or [batch_size, d] when ``batch_size`` is given.
    """
    if d <= 0:
        raise ValueError('Latent dimension must be positive, got {}'.format(d))
    shape = (d,) if batch_size is None else (batch_size, d)
    return torch.rand(shape, generator=rng) * 2.0 - 1.0


def _transpose_padding(kernel_size, stride):
    # chosen so that every layer multiplies the length by exactly ``stride``
    padding = (kernel_size - stride + 1) // 2
    return padding, 2 * padding - (kernel_size - stride)


class WaveGANGenerator(nn.Module):
    """
    Transpose-convolution stack mapping [B, latent_dim] to [B, output_length] waveforms.
    """

    def __init__(self, architecture=None):
        super().__init__()
        self.architecture = architecture or GeneratorArchitecture()
        arch = self.architecture
        widths = [arch.model_dim * 2 ** (UPSAMPLING_LAYERS - 1 - i) for i in range(UPSAMPLING_LAYERS)] + [1]
        self.project = nn.Linear(arch.latent_dim, INITIAL_FRAMES * 16 * arch.model_dim)
        padding, output_padding = _transpose_padding(arch.kernel_size, arch.stride)
        self.upsample = nn.ModuleList([
            nn.ConvTranspose1d(
                16 * arch.model_dim if i == 0 else widths[i - 1], widths[i], arch.kernel_size,
                stride=arch.stride, padding=padding, output_padding=output_padding,
            )
            for i in range(UPSAMPLING_LAYERS)
        ])

    @property
    def latent_dim(self):
        return self.architecture.latent_dim

    @property
    def output_length(self):
        return self.architecture.output_length

    def forward(self, z):
        x = self.project(z).view(z.shape[0], 16 * self.architecture.model_dim, INITIAL_FRAMES)
        x = torch.relu(x)
        for index, layer in enumerate(self.upsample):
            x = layer(x)
            if index < UPSAMPLING_LAYERS - 1:
                x = torch.relu(x)
        return torch.tanh(x[:, 0, :])


def draw_phase_shifts(batch, channels, n, rng=None):
    """
    Integer shifts uniform on [-n, n], one per (example, channel).
    """
    return torch.randint(-n, n + 1, (batch, channels), generator=rng)


def phase_shuffle(activations, n, rng=None, shifts=None):
    """
    Shift each channel's time axis by a random integer in [-n, n], filling the edges by
    reflection.

    Arguments:
        * `activations` (torch.Tensor): [B, C, T] feature map.
        * `n` (int): shift radius, at most T.
        * `rng` (torch.Generator): Optional random source for the shifts.
        * `shifts` (torch.Tensor): Optional [B, C] integer shifts to apply instead of drawing them.

    A shift of +k moves content k samples later, so ``out[t] = in[t - k]``. Indices that fall
    outside the signal are mirrored about the edge, the edge sample included: a +2 shift of
    ``[x0, x1, x2, ...]`` starts with ``[x1, x0, x0, x1, ...]``.
    """
    if n < 0:
        raise ValueError('Phase shuffle radius must not be negative, got {}'.format(n))
    batch, channels, length = activations.shape
    if n > length:
        raise ShapeMismatch(
            'Phase shuffle radius n={n} is larger than the time dimension ({length}).'.format(n=n, length=length)
        )
    if shifts is None:
        if n == 0:
            return activations
        shifts = draw_phase_shifts(batch, channels, n, rng)
    shifts = torch.as_tensor(shifts, dtype=torch.long, device=activations.device)

    period = 2 * length
    positions = torch.arange(length, device=activations.device)
    source = torch.remainder(positions[None, None, :] - shifts[:, :, None], period)
    source = torch.where(source >= length, period - 1 - source, source)
    return torch.gather(activations, 2, source)


class PhaseShuffle(nn.Module):
    """
    Phase shuffle as a layer; active only in training mode.
    """

    def __init__(self, n, rng=None):
        super().__init__()
        self.n = n
        self.rng = rng

    def forward(self, x):
        if not self.training or self.n == 0:
            return x
        return phase_shuffle(x, self.n, rng=self.rng)


class WaveGANDiscriminator(nn.Module):
    """
    Strided 1-D convolution critic with phase shuffle between its convolutions.

    Produces one unbounded score per waveform in a [B, T] batch.
    """

    def __init__(self, architecture=None, phase_shuffle_radius=2, rng=None):
        super().__init__()
        self.architecture = architecture or GeneratorArchitecture()
        arch = self.architecture
        widths = [1] + [arch.model_dim * 2 ** i for i in range(UPSAMPLING_LAYERS)]
        padding = (arch.kernel_size - 1) // 2
        self.convs = nn.ModuleList([
            nn.Conv1d(widths[i], widths[i + 1], arch.kernel_size, stride=arch.stride, padding=padding)
            for i in range(UPSAMPLING_LAYERS)
        ])
        self.shuffles = nn.ModuleList([
            PhaseShuffle(phase_shuffle_radius, rng) for _ in range(UPSAMPLING_LAYERS - 1)
        ])
        final_length = arch.output_length
        for _ in range(UPSAMPLING_LAYERS):
            final_length = (final_length + 2 * padding - arch.kernel_size) // arch.stride + 1
        self.score = nn.Linear(widths[-1] * final_length, 1)

    def forward(self, waveforms):
        x = waveforms[:, None, :]
        for index, conv in enumerate(self.convs):
            x = nn.functional.leaky_relu(conv(x), LEAKY_SLOPE)
            if index < len(self.shuffles):
                x = self.shuffles[index](x)
        return self.score(x.flatten(1))[:, 0]


def as_latent(z, latent_dim):
    """
    Coerce a latent vector to a float32 [latent_dim] tensor, checking its dimension.
    """
    if not torch.is_tensor(z):
        z = torch.from_numpy(np.asarray(z, dtype=np.float32))
    z = z.to(torch.float32)
    if z.ndim != 1 or z.shape[0] != latent_dim:
        raise LatentDimensionMismatch(latent_dim, z.shape[-1] if z.ndim else 0)
    return z


def generate(g, z):
    """
    Synthesize one AudioClip from a latent vector.
    """
    z = as_latent(z, g.latent_dim)
    with torch.no_grad():
        samples = g(z.detach()[None])[0]
    return AudioClip(samples.numpy())


def _waveform_matrix(real, length):
    clips = [getattr(item, 'clip', item) for item in real]
    if not clips:
        raise EmptyDataset('Cannot train the GAN on an empty dataset.')
    for clip in clips:
        if clip.length != length:
            raise ShapeMismatch(
                'Training clips must have {length} samples to match the generator, got {actual}.'.format(
                    length=length, actual=clip.length,
                )
            )
    return torch.from_numpy(np.stack([clip.samples for clip in clips]).astype(np.float32))


def _gradient_penalty(critic, real, fake, rng):
    alpha = torch.rand((real.shape[0], 1), generator=rng)
    mixed = (alpha * real + (1 - alpha) * fake).requires_grad_(True)
    scores = critic(mixed)
    gradients = torch.autograd.grad(scores.sum(), mixed, create_graph=True)[0]
    return ((gradients.norm(2, dim=1) - 1) ** 2).mean()


def spectral_peak_histogram(waveforms, bins=32, sample_rate=16000):
    """
    Normalised histogram of each waveform's dominant frequency.
    """
    waveforms = np.asarray(waveforms, dtype=np.float64)
    peaks = np.argmax(np.abs(np.fft.rfft(waveforms, axis=-1)), axis=-1) * sample_rate / waveforms.shape[-1]
    histogram, _ = np.histogram(peaks, bins=bins, range=(0, sample_rate / 2))
    return histogram / max(histogram.sum(), 1)


def train_gan(real, cfg, rng, architecture=None, checkpoint_dir=None, config_hash=''):
    """
    Train a generator with the Wasserstein gradient-penalty objective.

    Arguments:
        * `real` (iterable): AudioClips or LabeledClips of the generator's output length.
        * `cfg` (GanTrainConfig)
        * `rng` (torch.Generator): drives weight init, batches, latents and phase shuffle.
        * `architecture` (GeneratorArchitecture): Optional, defaults to the full-scale shape.
        * `checkpoint_dir` (str): Optional; checkpoints are written every
          ``cfg.checkpoint_every`` steps and at the end.
        * `config_hash` (str): recorded in the checkpoint manifest.

    Returns (generator, training_log).
    """
    architecture = architecture or GeneratorArchitecture()
    data = _waveform_matrix(real, architecture.output_length)

    torch.manual_seed(int(torch.randint(2 ** 31 - 1, (1,), generator=rng)))
    generator = WaveGANGenerator(architecture)
    critic = WaveGANDiscriminator(architecture, cfg.phase_shuffle, rng)
    generator_opt = torch.optim.Adam(generator.parameters(), lr=cfg.generator_lr, betas=(cfg.beta1, cfg.beta2))
    critic_opt = torch.optim.Adam(critic.parameters(), lr=cfg.critic_lr, betas=(cfg.beta1, cfg.beta2))
    generator.train()
    critic.train()

    training_log = {'critic_loss': [], 'generator_loss': []}
    for step in range(1, cfg.steps + 1):
        for _ in range(cfg.critic_steps):
            real_batch = data[torch.randint(data.shape[0], (cfg.batch_size,), generator=rng)]
            with torch.no_grad():
                fake_batch = generator(sample_latent(rng, architecture.latent_dim, cfg.batch_size))
            critic_loss = (
                critic(fake_batch).mean() - critic(real_batch).mean()
                + cfg.gp_weight * _gradient_penalty(critic, real_batch, fake_batch, rng)
            )
            if not torch.isfinite(critic_loss):
                raise TrainingDiverged('gan', step, 'critic loss is {}'.format(critic_loss.item()))
            critic_opt.zero_grad()
            critic_loss.backward()
            critic_opt.step()

        generator_loss = -critic(generator(sample_latent(rng, architecture.latent_dim, cfg.batch_size))).mean()
        if not torch.isfinite(generator_loss):
            raise TrainingDiverged('gan', step, 'generator loss is {}'.format(generator_loss.item()))
        generator_opt.zero_grad()
        generator_loss.backward()
        generator_opt.step()

        training_log['critic_loss'].append(float(critic_loss.item()))
        training_log['generator_loss'].append(float(generator_loss.item()))
        if step % cfg.log_every == 0:
            log.info('GAN step={step}/{steps} critic_loss={critic:.5f} generator_loss={gen:.5f}'.format(
                step=step, steps=cfg.steps, critic=critic_loss.item(), gen=generator_loss.item(),
            ))
        if checkpoint_dir and step % cfg.checkpoint_every == 0 and step != cfg.steps:
            save_generator(generator, checkpoint_dir, training_log, config_hash)

    generator.eval()
    with torch.no_grad():
        samples = generator(sample_latent(rng, architecture.latent_dim, min(64, data.shape[0]))).numpy()
    real_peaks = spectral_peak_histogram(data.numpy())
    fake_peaks = spectral_peak_histogram(samples)
    training_log['spectral_peaks'] = {
        'real': real_peaks.tolist(),
        'generated': fake_peaks.tolist(),
        'overlap': float(np.minimum(real_peaks, fake_peaks).sum()),
    }
    log.info('GAN training finished after {steps} steps; spectral peak overlap={overlap:.3f}'.format(
        steps=cfg.steps, overlap=training_log['spectral_peaks']['overlap'],
    ))
    if checkpoint_dir:
        save_generator(generator, checkpoint_dir, training_log, config_hash)
    return generator, training_log


def save_generator(g, path, training_log=None, config_hash=''):
    manifest = {
        'architecture': asdict(g.architecture),
        'latent_dim': g.latent_dim,
        'output_length': g.output_length,
        'config_hash': config_hash,
    }
    return write_checkpoint(path, 'generator', g, manifest, training_log)


def load_generator(path):
    """
    Load a generator checkpoint in inference mode.
    """
    manifest = read_manifest(path, kind='generator')
    g = WaveGANGenerator(GeneratorArchitecture(**manifest['architecture']))
    g.load_state_dict(read_parameters(path))
    g.eval()
    return g
