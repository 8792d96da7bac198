"""
Checkpoint directories for trained components.

A checkpoint is a directory holding ``parameters.pt`` (a torch ``state_dict``),
``manifest.json`` (the kind of network, its architecture and the hash of the config that
trained it) and ``training_log.json`` (loss traces).
"""

import hashlib
import json
import logging
import os
from datetime import datetime, timezone

import torch

from wavegan_inversion.exceptions import CheckpointError, MissingPrerequisite

log = logging.getLogger(__name__)

PARAMETERS_FILE = 'parameters.pt'
MANIFEST_FILE = 'manifest.json'
TRAINING_LOG_FILE = 'training_log.json'


def write_checkpoint(path, kind, module, manifest, training_log=None):
    """
    Write a module's parameters and manifest into ``path``.

    Arguments:
        * `path` (str): checkpoint directory, created if needed.
        * `kind` (str): 'generator', 'classifier' or 'inverter'.
        * `module` (torch.nn.Module)
        * `manifest` (dict): kind-specific fields (architecture, config hash, shapes).
        * `training_log` (dict): Optional loss traces.
    """
    os.makedirs(path, exist_ok=True)
    torch.save(module.state_dict(), os.path.join(path, PARAMETERS_FILE))
    document = dict(manifest)
    document['kind'] = kind
    document['created'] = datetime.now(timezone.utc).isoformat()
    with open(os.path.join(path, MANIFEST_FILE), 'w', encoding='utf-8') as manifest_file:
        json.dump(document, manifest_file, indent=2, sort_keys=True)
    if training_log is not None:
        with open(os.path.join(path, TRAINING_LOG_FILE), 'w', encoding='utf-8') as log_file:
            json.dump(training_log, log_file, sort_keys=True)
    log.info('Wrote {kind} checkpoint to {path}'.format(kind=kind, path=path))
    return path


def checkpoint_exists(path):
    return os.path.isfile(os.path.join(path, PARAMETERS_FILE)) and os.path.isfile(os.path.join(path, MANIFEST_FILE))


def read_manifest(path, kind=None):
    """
    Read and check the manifest of the checkpoint at ``path``.
    """
    if not checkpoint_exists(path):
        raise CheckpointError('No checkpoint found at {path}.'.format(path=path))
    with open(os.path.join(path, MANIFEST_FILE), encoding='utf-8') as manifest_file:
        manifest = json.load(manifest_file)
    if kind is not None and manifest.get('kind') != kind:
        raise CheckpointError(
            'Checkpoint at {path} holds a {found}, expected a {kind}.'.format(
                path=path, found=manifest.get('kind'), kind=kind,
            )
        )
    return manifest


def read_parameters(path):
    return torch.load(os.path.join(path, PARAMETERS_FILE), map_location='cpu')


def read_training_log(path):
    log_path = os.path.join(path, TRAINING_LOG_FILE)
    if not os.path.isfile(log_path):
        return {}
    with open(log_path, encoding='utf-8') as log_file:
        return json.load(log_file)


def parameters_hash(path):
    """
    SHA-256 of the parameter blob, recorded as evaluation provenance.
    """
    digest = hashlib.sha256()
    with open(os.path.join(path, PARAMETERS_FILE), 'rb') as blob:
        for chunk in iter(lambda: blob.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def require_checkpoint(path, component, prerequisite):
    """
    Raise MissingPrerequisite unless a checkpoint exists at ``path``.
    """
    if not checkpoint_exists(path):
        raise MissingPrerequisite(component, prerequisite, path)
