"""
Spoken-digit classifier over spectrograms.

One trained classifier serves three roles: its per-stage activations define the perceptual
loss, its posteriors define the inception score, and its argmax defines reconstruction
accuracy.
"""

import logging
from dataclasses import asdict

import numpy as np
import torch
from scipy.special import rel_entr
from torch import nn

from wavegan_inversion.audio import spectrogram_batch
from wavegan_inversion.checkpoints import read_manifest, read_parameters, write_checkpoint
from wavegan_inversion.conf import ClassifierTrainConfig, ResidualArchitecture, SpectrogramConfig
from wavegan_inversion.exceptions import (
    DatasetError,
    EmptyClass,
    EmptyDataset,
    InsufficientClasses,
    ShapeMismatch,
    TrainingDiverged
)
from wavegan_inversion.resnet import ResidualBody
from wavegan_inversion.statuses import BlockReduction

log = logging.getLogger(__name__)

INFERENCE_BATCH = 64


class DigitClassifier(nn.Module):
    """
    Residual network producing digit logits and one feature tap per residual stage.

    Arguments:
        * `num_classes` (int)
        * `architecture` (ResidualArchitecture)
        * `input_shape` (tuple): Optional (bins, frames) the network was trained on; inputs
          of any other shape are rejected.
    """

    def __init__(self, num_classes=10, architecture=None, input_shape=None):
        super().__init__()
        self.num_classes = num_classes
        self.architecture = architecture or ResidualArchitecture()
        self.input_shape = tuple(input_shape) if input_shape else None
        self.body = ResidualBody(self.architecture)
        self.fc = nn.Linear(self.body.out_features, num_classes)

    @property
    def tap_names(self):
        return self.body.tap_names

    def forward(self, x):
        pooled, taps = self.body(x)
        return self.fc(pooled), taps

    def check_input(self, shape):
        """
        Raise ShapeMismatch unless ``shape`` (bins, frames) is what the network was trained on.
        """
        if self.input_shape is not None and tuple(shape) != self.input_shape:
            raise ShapeMismatch(
                'Spectrogram of shape {shape} does not match the classifier input shape {expected}.'.format(
                    shape=tuple(shape), expected=self.input_shape,
                )
            )


def _probabilities(c, inputs):
    c.check_input(inputs.shape[-2:])
    c.eval()
    chunks = []
    with torch.no_grad():
        for start in range(0, inputs.shape[0], INFERENCE_BATCH):
            logits, _ = c(inputs[start:start + INFERENCE_BATCH])
            chunks.append(torch.softmax(logits.double(), dim=-1))
    return torch.cat(chunks).numpy()


def classify(c, s):
    """
    Class posterior of one Spectrogram, a float64 vector summing to 1.
    """
    return _probabilities(c, s.as_tensor())[0]


def classify_batch(c, items, spectrogram_config=None):
    """
    Class posteriors of many AudioClips or Spectrograms, as an [N, num_classes] array.
    """
    return _probabilities(c, spectrogram_batch(items, spectrogram_config))


def features(c, s):
    """
    Per-stage activations of one Spectrogram, ordered from the first residual stage.
    """
    c.check_input(s.shape)
    c.eval()
    with torch.no_grad():
        _, taps = c(s.as_tensor())
    return [tap[0] for tap in taps]


def perceptual_loss_tensor(c, a, b, block_reduction=BlockReduction.MEAN):
    """
    Differentiable perceptual loss between two [B, 1, bins, frames] batches.

    Each stage contributes the mean squared difference of its activations; stages are then
    averaged (``block_reduction='mean'``) or summed.
    """
    if a.shape != b.shape:
        raise ShapeMismatch('Cannot compare inputs of shapes {} and {}.'.format(tuple(a.shape), tuple(b.shape)))
    _, taps_a = c(a)
    _, taps_b = c(b)
    per_block = torch.stack([nn.functional.mse_loss(x, y) for x, y in zip(taps_a, taps_b)])
    if BlockReduction(block_reduction) == BlockReduction.SUM:
        return per_block.sum()
    return per_block.mean()


def perceptual_loss(c, a, b, block_reduction=BlockReduction.MEAN):
    """
    Perceptual loss between two Spectrograms of equal shape.
    """
    if a.shape != b.shape:
        raise ShapeMismatch('Cannot compare spectrograms of shapes {} and {}.'.format(a.shape, b.shape))
    c.check_input(a.shape)
    c.eval()
    with torch.no_grad():
        return float(perceptual_loss_tensor(c, a.as_tensor(), b.as_tensor(), block_reduction).item())


def inception_score_from_probabilities(probabilities, splits=10):
    """
    Inception score of a set of class posteriors.

    The rows are cut into ``splits`` nearly equal groups; each group scores
    exp(mean KL(p(y|x) || p(y))), with p(y) the group's mean posterior. Returns the mean and
    standard deviation over groups.
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.ndim != 2 or probabilities.shape[0] == 0:
        raise EmptyDataset('Inception score needs at least one posterior.')
    if not 1 <= splits <= probabilities.shape[0]:
        raise ValueError('Inception score needs 1 <= splits <= {count}, got splits={splits}'.format(
            count=probabilities.shape[0], splits=splits,
        ))
    scores = []
    for part in np.array_split(probabilities, splits):
        marginal = part.mean(axis=0, keepdims=True)
        scores.append(np.exp(rel_entr(part, marginal).sum(axis=1).mean()))
    scores = np.clip(np.array(scores), 1.0, probabilities.shape[1])
    return float(scores.mean()), float(scores.std())


def inception_score(c, clips, splits=10, spectrogram_config=None):
    """
    Inception score of a set of AudioClips under classifier ``c``.
    """
    clips = list(clips)
    if not clips:
        raise EmptyDataset('Inception score needs at least one clip.')
    return inception_score_from_probabilities(classify_batch(c, clips, spectrogram_config), splits)


def accuracy(c, labeled, spectrogram_config=None):
    """
    Fraction of (clip, label) pairs whose argmax prediction equals the label.
    """
    pairs = [(item.clip, item.label) if hasattr(item, 'clip') else tuple(item) for item in labeled]
    if not pairs:
        raise EmptyDataset('Accuracy needs at least one labeled clip.')
    predictions = classify_batch(c, [clip for clip, _ in pairs], spectrogram_config).argmax(axis=1)
    labels = np.array([label for _, label in pairs])
    return float(np.mean(predictions == labels))


def _check_labels(labels, cfg):
    present = set(labels)
    if len(present) < 2:
        raise InsufficientClasses(
            'Training the classifier needs at least two classes, found {}.'.format(sorted(present))
        )
    out_of_range = sorted(label for label in present if not 0 <= label < cfg.num_classes)
    if out_of_range:
        raise DatasetError('Labels {labels} are outside 0..{top}.'.format(labels=out_of_range, top=cfg.num_classes - 1))
    if cfg.require_all_classes:
        missing = sorted(set(range(cfg.num_classes)) - present)
        if missing:
            raise EmptyClass('Classes {} have no training items.'.format(missing))


def train_classifier(train, cfg=None, rng=None, heldout=None, spectrogram_config=None,
                     checkpoint_dir=None, config_hash=''):
    """
    Train a DigitClassifier on labeled clips.

    Arguments:
        * `train` (LabeledDataset or list of LabeledClip)
        * `cfg` (ClassifierTrainConfig)
        * `rng` (torch.Generator)
        * `heldout` (LabeledDataset): Optional; when omitted ``cfg.heldout_fraction`` of
          ``train`` is split off for the accuracy report.
        * `spectrogram_config` (SpectrogramConfig)
        * `checkpoint_dir` (str): Optional directory to save the trained classifier into.
        * `config_hash` (str)

    Returns (classifier, report) where report holds the loss trace and held-out accuracy.
    """
    # pylint: disable=import-outside-toplevel
    from wavegan_inversion.data import split_dataset

    cfg = cfg or ClassifierTrainConfig()
    spectrogram_config = spectrogram_config or SpectrogramConfig()
    rng = rng if rng is not None else torch.Generator().manual_seed(0)
    items = list(train)
    if not items:
        raise EmptyDataset('Cannot train the classifier on an empty dataset.')
    if heldout is None:
        split_seed = int(torch.randint(2 ** 31 - 1, (1,), generator=rng))
        items, heldout = split_dataset(items, cfg.heldout_fraction, split_seed)
        items = list(items)
    labels = [item.label for item in items]
    _check_labels(labels, cfg)

    inputs = spectrogram_batch([item.clip for item in items], spectrogram_config)
    targets = torch.tensor(labels, dtype=torch.long)

    torch.manual_seed(int(torch.randint(2 ** 31 - 1, (1,), generator=rng)))
    classifier = DigitClassifier(cfg.num_classes, cfg.architecture, input_shape=inputs.shape[-2:])
    optimizer = torch.optim.Adam(classifier.parameters(), lr=cfg.learning_rate)
    classifier.train()

    losses = []
    for step in range(1, cfg.steps + 1):
        index = torch.randint(inputs.shape[0], (min(cfg.batch_size, inputs.shape[0]),), generator=rng)
        logits, _ = classifier(inputs[index])
        loss = nn.functional.cross_entropy(logits, targets[index])
        if not torch.isfinite(loss):
            raise TrainingDiverged('classifier', step, 'cross-entropy is {}'.format(loss.item()))
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(float(loss.item()))
        if step % cfg.log_every == 0:
            log.info('Classifier step={step}/{steps} loss={loss:.5f}'.format(
                step=step, steps=cfg.steps, loss=losses[-1],
            ))

    classifier.eval()
    heldout = list(heldout or [])
    heldout_accuracy = accuracy(classifier, heldout, spectrogram_config) if heldout else None
    report = {'loss': losses, 'heldout_accuracy': heldout_accuracy, 'heldout_count': len(heldout)}
    log.info('Classifier trained on {count} clips; held-out accuracy={accuracy} over {heldout} clips'.format(
        count=len(items), accuracy=heldout_accuracy, heldout=len(heldout),
    ))
    if checkpoint_dir:
        save_classifier(classifier, checkpoint_dir, report, config_hash)
    return classifier, report


def save_classifier(c, path, training_log=None, config_hash=''):
    manifest = {
        'architecture': asdict(c.architecture),
        'num_classes': c.num_classes,
        'input_shape': list(c.input_shape) if c.input_shape else None,
        'taps': c.tap_names,
        'config_hash': config_hash,
    }
    return write_checkpoint(path, 'classifier', c, manifest, training_log)


def load_classifier(path):
    """
    Load a classifier checkpoint in inference mode.
    """
    manifest = read_manifest(path, kind='classifier')
    architecture = manifest['architecture']
    architecture['stage_widths'] = tuple(architecture['stage_widths'])
    c = DigitClassifier(manifest['num_classes'], ResidualArchitecture(**architecture), manifest['input_shape'])
    c.load_state_dict(read_parameters(path))
    c.eval()
    return c
