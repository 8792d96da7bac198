"""
Audio containers, WAV I/O, the spectrogram transform and low-level reconstruction metrics.

Clips and spectrograms are immutable numpy-backed values. ``spectrogram_tensor`` is the
differentiable torch transform that training and gradient inversion use; ``spectrogram`` is
defined through it so that both paths produce bitwise identical values.
"""

import logging
import os
from dataclasses import dataclass

import matplotlib
import numpy as np
import torch
from scipy.io import wavfile
from scipy.ndimage import uniform_filter

from wavegan_inversion.conf import CANONICAL_LENGTH, SAMPLE_RATE, SpectrogramConfig
from wavegan_inversion.exceptions import (
    InvalidAudio,
    ShapeMismatch,
    UnsupportedChannelCount,
    UnsupportedEncoding,
    UnsupportedSampleRate
)

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # pylint: disable=wrong-import-position

log = logging.getLogger(__name__)

SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True, eq=False)
class AudioClip:
    """
    A mono raw waveform with samples in [-1, 1].

    Arguments:
        * `samples` (np.ndarray): float32, one dimension.
        * `sample_rate` (int): Hz, 16000 for everything this package produces.
    """
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1:
            raise InvalidAudio('AudioClip samples must be one-dimensional, got shape {}'.format(samples.shape))
        if not np.all(np.isfinite(samples)):
            raise InvalidAudio('AudioClip samples must be finite.')
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise InvalidAudio('AudioClip samples must lie in [-1, 1].')
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)

    @property
    def length(self):
        return int(self.samples.shape[0])

    def fit_length(self, length=CANONICAL_LENGTH):
        """
        Zero-pad or truncate to ``length`` samples.
        """
        if self.length == length:
            return self
        if self.length > length:
            return AudioClip(self.samples[:length], self.sample_rate)
        return AudioClip(np.pad(self.samples, (0, length - self.length)), self.sample_rate)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """
    Magnitude (or log-magnitude) STFT image, frequency bins x frames.
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise ShapeMismatch('Spectrogram values must be two-dimensional, got shape {}'.format(values.shape))
        if not np.all(np.isfinite(values)):
            raise InvalidAudio('Spectrogram values must be finite.')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_elements(self):
        return int(self.values.size)

    def as_tensor(self):
        """
        Network input layout: [1, 1, bins, frames].
        """
        return torch.from_numpy(np.array(self.values))[None, None]


def load_wav(path, length=CANONICAL_LENGTH):
    """
    Read a mono 16 kHz WAV file into an AudioClip of the canonical length.

    16-bit PCM is scaled by 1/32768; float files are taken as they are, with any sample
    outside [-1, 1] clamped and a warning logged.
    """
    if not os.path.exists(path):
        raise FileNotFoundError('WAV file {path} does not exist.'.format(path=path))

    rate, data = wavfile.read(path)
    if data.ndim > 1:
        if data.shape[1] != 1:
            raise UnsupportedChannelCount(path, data.shape[1])
        data = data[:, 0]
    if rate != SAMPLE_RATE:
        raise UnsupportedSampleRate(
            '{path} is sampled at {rate} Hz; only {expected} Hz audio is accepted.'.format(
                path=path, rate=rate, expected=SAMPLE_RATE,
            )
        )

    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float32)
        peak = float(np.max(np.abs(samples))) if samples.size else 0.0
        if peak > 1.0:
            log.warning('Clamping {path}: float samples reach {peak:.4f}, outside [-1, 1].'.format(
                path=path, peak=peak,
            ))
            samples = np.clip(samples, -1.0, 1.0)
    else:
        raise UnsupportedEncoding(
            '{path} uses sample type {dtype}; only 16-bit PCM and float WAV files are supported.'.format(
                path=path, dtype=data.dtype,
            )
        )

    return AudioClip(samples, rate).fit_length(length)


def save_wav(clip, path, encoding='pcm16'):
    """
    Write an AudioClip as a mono WAV file, 16-bit PCM by default or 32-bit float.
    """
    if encoding == 'pcm16':
        data = np.clip(np.round(clip.samples.astype(np.float64) * 32768.0), -32768, 32767).astype(np.int16)
    elif encoding == 'float32':
        data = np.array(clip.samples, dtype=np.float32)
    else:
        raise UnsupportedEncoding('Cannot write WAV with encoding={encoding}.'.format(encoding=encoding))
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    wavfile.write(path, clip.sample_rate, data)
    return path


def spectrogram_tensor(samples, cfg):
    """
    Differentiable magnitude STFT of a batch of waveforms.

    Arguments:
        * `samples` (torch.Tensor): [..., T] waveforms.
        * `cfg` (SpectrogramConfig)

    Returns a [..., bins, frames] tensor. Frames are not centred or end-padded, so the
    frame count is ``1 + (T - window_size) // hop``.
    """
    if samples.shape[-1] < cfg.window_size:
        raise ShapeMismatch(
            'Spectrogram window of {window} samples is longer than the clip ({length} samples).'.format(
                window=cfg.window_size, length=samples.shape[-1],
            )
        )
    lead_shape = samples.shape[:-1]
    flat = samples.reshape(-1, samples.shape[-1])
    window = torch.hann_window(cfg.window_size, dtype=flat.dtype, device=flat.device)
    stft = torch.stft(
        flat, n_fft=cfg.window_size, hop_length=cfg.hop, win_length=cfg.window_size,
        window=window, center=False, return_complex=True,
    )
    magnitude = stft.abs()
    if cfg.use_log:
        magnitude = torch.log(torch.clamp(magnitude, min=cfg.log_floor))
    return magnitude.reshape(*lead_shape, *magnitude.shape[-2:])


def spectrogram(clip, cfg=None):
    """
    Spectrogram of one AudioClip.
    """
    cfg = cfg or SpectrogramConfig()
    with torch.no_grad():
        values = spectrogram_tensor(torch.from_numpy(np.array(clip.samples)), cfg)
    return Spectrogram(values.numpy())


def spectrogram_batch(items, cfg=None):
    """
    Stack AudioClips or Spectrograms into a [N, 1, bins, frames] network input.
    """
    cfg = cfg or SpectrogramConfig()
    items = list(items)
    if not items:
        raise ShapeMismatch('Cannot build a network input from zero items.')
    if isinstance(items[0], Spectrogram):
        shapes = {item.shape for item in items}
        if len(shapes) != 1:
            raise ShapeMismatch('Spectrograms of different shapes cannot be batched: {}'.format(sorted(shapes)))
        return torch.from_numpy(np.stack([item.values for item in items]))[:, None]
    with torch.no_grad():
        samples = torch.from_numpy(np.stack([item.samples for item in items]))
        return spectrogram_tensor(samples, cfg)[:, None]


def _check_same_shape(a, b, what):
    if a.shape != b.shape:
        raise ShapeMismatch('Cannot compare {what} of shapes {a} and {b}.'.format(what=what, a=a.shape, b=b.shape))


def mse_raw(a, b):
    """
    Mean squared sample difference between two clips of equal length.
    """
    _check_same_shape(a.samples, b.samples, 'clips')
    diff = a.samples.astype(np.float64) - b.samples.astype(np.float64)
    return float(np.mean(diff * diff))


def spectrogram_mae(a, b):
    """
    Mean absolute difference of two spectrograms, the quantity gradient inversion minimises.
    """
    _check_same_shape(a.values, b.values, 'spectrograms')
    return float(np.mean(np.abs(a.values.astype(np.float64) - b.values.astype(np.float64))))


def ssim(a, b):
    """
    Mean structural similarity of two spectrograms.

    ``a`` is the reference. Local statistics come from a 7x7 uniform window with sample
    (N - 1) covariance, and only windows lying entirely inside the image contribute to the
    mean. The dynamic range is the observed max - min of the reference; a constant reference
    falls back to the joint range of both spectrograms.
    """
    _check_same_shape(a.values, b.values, 'spectrograms')
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeMismatch('SSIM needs spectrograms of at least {w}x{w}, got {shape}.'.format(
            w=SSIM_WINDOW, shape=a.shape,
        ))

    x = a.values.astype(np.float64)
    y = b.values.astype(np.float64)
    data_range = x.max() - x.min()
    if data_range == 0:
        data_range = max(x.max(), y.max()) - min(x.min(), y.min())
    if data_range == 0:
        # both images are the same constant
        return 1.0

    count = SSIM_WINDOW ** 2
    cov_norm = count / (count - 1)
    ux = uniform_filter(x, size=SSIM_WINDOW)
    uy = uniform_filter(y, size=SSIM_WINDOW)
    uxx = uniform_filter(x * x, size=SSIM_WINDOW)
    uyy = uniform_filter(y * y, size=SSIM_WINDOW)
    uxy = uniform_filter(x * y, size=SSIM_WINDOW)
    vx = cov_norm * (uxx - ux * ux)
    vy = cov_norm * (uyy - uy * uy)
    vxy = cov_norm * (uxy - ux * uy)

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    numerator = (2 * ux * uy + c1) * (2 * vxy + c2)
    denominator = (ux * ux + uy * uy + c1) * (vx + vy + c2)
    index = numerator / denominator

    pad = (SSIM_WINDOW - 1) // 2
    interior = index[pad:-pad, pad:-pad]
    return float(np.clip(interior.mean(), -1.0, 1.0))


def save_spectrogram_image(spec, path):
    """
    Export a spectrogram as a grayscale PNG, low frequencies at the bottom.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    plt.imsave(path, spec.values, cmap='gray', origin='lower')
    return path
