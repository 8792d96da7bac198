"""
Real and generated audio datasets.

Real audio is either the SC09 spoken-digit set laid out as ``root/<digit>/<file>.wav`` or
the synthetic toy digits, which need no download. Generated audio is drawn at run time
from a generator through a FakeBatchSource.
"""

import json
import logging
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from wavegan_inversion.audio import AudioClip, load_wav
from wavegan_inversion.conf import CANONICAL_LENGTH, SAMPLE_RATE
from wavegan_inversion.exceptions import (
    DatasetCountMismatch,
    EmptyDataset,
    InvalidAudio,
    MissingClassFolder,
    NoClassesFound
)
from wavegan_inversion.generator import generate, sample_latent

log = logging.getLogger(__name__)

DIGIT_NAMES = ('zero', 'one', 'two', 'three', 'four', 'five', 'six', 'seven', 'eight', 'nine')


@dataclass(frozen=True)
class LabeledClip:
    """
    One real clip with its digit label (0-9) and speaker id.
    """
    clip: AudioClip
    label: int
    speaker: str = ''


@dataclass(frozen=True)
class LabeledDataset:
    """
    An immutable, non-empty list of LabeledClips.

    Arguments:
        * `items` (tuple of LabeledClip)
        * `split` (str): 'all', 'train', 'heldout' or 'toy'.
        * `skipped` (int): files that could not be read while loading.
    """
    items: Tuple[LabeledClip, ...]
    split: str = 'all'
    skipped: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'items', tuple(self.items))
        if not self.items:
            raise EmptyDataset('A {split} dataset must hold at least one clip.'.format(split=self.split))

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, index):
        return self.items[index]

    @property
    def labels(self):
        return [item.label for item in self.items]

    @property
    def clips(self):
        return [item.clip for item in self.items]

    def counts(self):
        """
        Number of clips per label.
        """
        return dict(sorted(Counter(self.labels).items()))


def _folder_label(name):
    name = name.lower()
    if name in DIGIT_NAMES:
        return DIGIT_NAMES.index(name)
    if name.isdigit() and len(name) == 1:
        return int(name)
    return None


def _speaker(filename):
    stem = os.path.splitext(filename)[0]
    return stem.split('_nohash_')[0] if '_nohash_' in stem else stem


def _read_manifest(path):
    with open(path, encoding='utf-8') as manifest_file:
        document = json.load(manifest_file)
    counts = document.get('counts', document)
    expected = {}
    for key, count in counts.items():
        label = _folder_label(str(key))
        if label is None:
            raise MissingClassFolder('Manifest {path} names unknown class {key}.'.format(path=path, key=key))
        expected[label] = int(count)
    return expected


def load_sc09(root, manifest=None, length=CANONICAL_LENGTH, workers=4):
    """
    Load every WAV file under ``root/<digit>/`` into a LabeledDataset.

    Arguments:
        * `root` (str): directory with one folder per digit, named ``zero``..``nine`` or ``0``..``9``.
        * `manifest` (str): Optional JSON file pinning the expected number of clips per class.
        * `length` (int): canonical clip length; shorter clips are zero-padded.
        * `workers` (int): threads used to read files.

    Files that cannot be decoded are skipped with a warning and counted in ``skipped``.
    """
    if not os.path.isdir(root):
        raise FileNotFoundError('Dataset root {root} is not a directory.'.format(root=root))

    folders = {}
    for name in sorted(os.listdir(root)):
        label = _folder_label(name)
        if label is not None and os.path.isdir(os.path.join(root, name)):
            folders[label] = os.path.join(root, name)
    if not folders:
        raise NoClassesFound('no classes found in {root}'.format(root=root))

    expected = _read_manifest(manifest) if manifest else None
    if expected:
        missing = sorted(set(expected) - set(folders))
        if missing:
            raise MissingClassFolder('Dataset root {root} has no folder for {names}.'.format(
                root=root, names=[DIGIT_NAMES[label] for label in missing],
            ))

    jobs = []
    for label, folder in sorted(folders.items()):
        for filename in sorted(os.listdir(folder)):
            if filename.lower().endswith('.wav'):
                jobs.append((label, os.path.join(folder, filename)))

    def _load(job):
        label, path = job
        try:
            return LabeledClip(load_wav(path, length), label, _speaker(os.path.basename(path)))
        except (InvalidAudio, ValueError, OSError) as exc:
            log.warning('Skipping unreadable file {path}: {error}'.format(path=path, error=exc))
            return None

    with ThreadPoolExecutor(max_workers=workers) as pool:
        loaded = list(pool.map(_load, jobs))
    items = [item for item in loaded if item is not None]
    skipped = len(loaded) - len(items)

    if expected:
        counts = Counter(item.label for item in items)
        for label, count in sorted(expected.items()):
            if counts.get(label, 0) != count:
                raise DatasetCountMismatch(
                    'Class {name} has {actual} readable clips, the manifest expects {count}.'.format(
                        name=DIGIT_NAMES[label], actual=counts.get(label, 0), count=count,
                    )
                )
    if not items:
        raise EmptyDataset('No readable WAV files under {root}.'.format(root=root))

    log.info('Loaded {count} clips in {classes} classes from {root} ({skipped} skipped)'.format(
        count=len(items), classes=len(folders), root=root, skipped=skipped,
    ))
    return LabeledDataset(items, split='all', skipped=skipped)


def split_dataset(ds, heldout_fraction=0.1, seed=0):
    """
    Stratified train/held-out split, deterministic for a given seed.

    Every class with at least two clips contributes at least one held-out clip and keeps at
    least one training clip. Both splits preserve the original item order.
    """
    items = list(ds)
    rng = np.random.default_rng(seed)
    heldout_index = set()
    by_label = {}
    for index, item in enumerate(items):
        by_label.setdefault(item.label, []).append(index)
    for label in sorted(by_label):
        indices = by_label[label]
        if len(indices) < 2:
            continue
        count = min(len(indices) - 1, max(1, int(round(heldout_fraction * len(indices)))))
        heldout_index.update(rng.permutation(indices)[:count].tolist())

    train = [item for index, item in enumerate(items) if index not in heldout_index]
    heldout = [item for index, item in enumerate(items) if index in heldout_index]
    skipped = getattr(ds, 'skipped', 0)
    return LabeledDataset(train, 'train', skipped), LabeledDataset(heldout, 'heldout', skipped)


def _toy_template(label):
    # even digits are steady tones, odd digits rising chirps; every third digit gets a harmonic
    start = 200.0 + 150.0 * label
    end = start * (1.5 if label % 2 else 1.0)
    harmonic = 0.3 if label % 3 == 0 else 0.0
    return start, end, harmonic


def make_toy_digits(per_class=40, num_classes=10, seed=0, length=CANONICAL_LENGTH, speakers=8):
    """
    Synthetic spoken-digit stand-in: one tone or chirp template per class, varied per
    "speaker" in pitch, gain and timing, plus background noise.
    """
    rng = np.random.default_rng(seed)
    speaker_pitch = 1.0 + rng.uniform(-0.04, 0.04, size=speakers)
    speaker_gain = rng.uniform(0.5, 0.8, size=speakers)
    t = np.arange(length) / SAMPLE_RATE
    items = []
    for label in range(num_classes):
        for index in range(per_class):
            speaker = index % speakers
            onset = rng.uniform(0.05, 0.2)
            duration = rng.uniform(0.4, 0.6)
            start, end, harmonic = _toy_template(label)
            start *= speaker_pitch[speaker]
            end *= speaker_pitch[speaker]
            local = np.clip(t - onset, 0.0, duration)
            phase = 2 * np.pi * (start * local + (end - start) * local ** 2 / (2 * duration))
            active = (t >= onset) & (t <= onset + duration)
            envelope = np.where(active, np.sin(np.pi * local / duration) ** 2, 0.0)
            wave = envelope * (np.sin(phase) + harmonic * np.sin(2 * phase))
            wave = speaker_gain[speaker] * wave / (1.0 + harmonic) + rng.normal(0.0, 0.01, size=length)
            clip = AudioClip(np.clip(wave, -1.0, 1.0).astype(np.float32))
            items.append(LabeledClip(clip, label, 'toy{:02d}'.format(speaker)))
    log.info('Synthesised {count} toy digit clips for {classes} classes'.format(
        count=len(items), classes=num_classes,
    ))
    return LabeledDataset(items, split='toy')


@dataclass(frozen=True)
class FakeBatchSource:
    """
    Pairs of (latent, generate(g, latent)) drawn at run time.
    """
    generator: object
    batch_size: int = 64
    latent_dim: int = field(default=None)

    def __post_init__(self):
        if self.latent_dim is None:
            object.__setattr__(self, 'latent_dim', self.generator.latent_dim)


def next_fake_batch(src, rng):
    """
    Draw ``src.batch_size`` latents and synthesize one clip from each.

    Returns (latents [B, d] tensor, list of AudioClip); every clip is exactly
    ``generate(src.generator, latents[i])``.
    """
    latents = sample_latent(rng, src.latent_dim, src.batch_size)
    return latents, [generate(src.generator, z) for z in latents]


def load_real_splits(data_config, seed, num_classes=10):
    """
    The configured real dataset (SC09 when ``sc09_root`` is set, toy digits otherwise),
    split into (train, heldout).
    """
    if data_config.sc09_root:
        dataset = load_sc09(data_config.sc09_root, data_config.manifest, workers=data_config.load_workers)
    else:
        dataset = make_toy_digits(data_config.toy_per_class, num_classes, seed)
    return split_dataset(dataset, data_config.heldout_fraction, seed)
