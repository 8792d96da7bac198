"""
Comparison figures: one column for the target and one per reconstruction, with the
waveform on the top row and the spectrogram below it.
"""

import os

import matplotlib
import numpy as np

from wavegan_inversion.audio import spectrogram

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # pylint: disable=wrong-import-position

COLUMN_TITLES = {
    'target': 'Target',
    'gradient': 'Gradient-based',
    'inverse_mapper': 'Inverse mapper',
    'hybrid': 'Hybrid',
}


def plot_comparison(target, reconstructions, path, spectrogram_config=None, title=None):
    """
    Save a waveform/spectrogram grid comparing ``target`` with each reconstruction.

    Arguments:
        * `target` (AudioClip)
        * `reconstructions` (dict): method name -> AudioClip, in column order.
        * `path` (str): PNG file to write.
        * `spectrogram_config` (SpectrogramConfig)
        * `title` (str): Optional figure title.
    """
    columns = [('target', target)] + list(reconstructions.items())
    figure, axes = plt.subplots(2, len(columns), figsize=(3.2 * len(columns), 5), squeeze=False)
    seconds = np.arange(target.length) / target.sample_rate
    for column, (name, clip) in enumerate(columns):
        wave_axis, spec_axis = axes[0][column], axes[1][column]
        wave_axis.plot(seconds, clip.samples, linewidth=0.5)
        wave_axis.set_ylim(-1, 1)
        wave_axis.set_title(COLUMN_TITLES.get(name, name))
        spec_axis.imshow(spectrogram(clip, spectrogram_config).values, origin='lower', aspect='auto', cmap='magma')
        spec_axis.set_xlabel('frame')
        if column == 0:
            wave_axis.set_ylabel('amplitude')
            spec_axis.set_ylabel('frequency bin')
    if title:
        figure.suptitle(title)
    figure.tight_layout()
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    figure.savefig(path, dpi=100)
    plt.close(figure)
    return path
