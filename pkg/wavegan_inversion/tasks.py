# pylint: disable=logging-format-interpolation, unused-argument
"""
wavegan_inversion celery tasks
"""

import logging
from functools import lru_cache

import numpy as np
import torch
from celery import shared_task
from edx_django_utils.monitoring import set_code_owner_attribute, set_custom_attribute

from wavegan_inversion.audio import AudioClip
from wavegan_inversion.conf import experiment_config_from_dict
from wavegan_inversion.evaluation import EvaluationTarget, evaluate_target, load_evaluation_models
from wavegan_inversion.statuses import Domain

log = logging.getLogger(__name__)

DEFAULT_RETRY_SECONDS = 30
MAX_RETRIES = 3


@lru_cache(maxsize=4)
def models_for(checkpoint_dir):
    """
    Checkpointed models under ``checkpoint_dir``, loaded once per worker process.
    """
    return load_evaluation_models(checkpoint_dir)


@shared_task(
    bind=True, autoretry_for=(OSError,), default_retry_delay=DEFAULT_RETRY_SECONDS, max_retries=MAX_RETRIES,
)
@set_code_owner_attribute
def invert_target_task(self, domain, index, samples, label, latent, config_data):
    """
    Celery task running every configured inversion method on one evaluation target
    """
    set_custom_attribute('wavegan_inversion_target', '{domain}/{index}'.format(domain=domain, index=index))
    log.info('wavegan_inversion: invert_target_task started for %(domain)s target %(index)s',
             {
                'domain': domain,
                'index': index,
             }
             )
    config = experiment_config_from_dict(config_data)
    target = EvaluationTarget(
        domain=Domain(domain),
        index=index,
        clip=AudioClip(np.asarray(samples, dtype=np.float32)),
        label=label,
        latent=None if latent is None else torch.tensor(latent, dtype=torch.float32),
    )
    outcome = evaluate_target(target, models_for(config.checkpoint_dir), config)
    log.info(
        'invert_target_task finished {domain} target={index} with status={status}'.format(
            domain=domain, index=index, status=outcome['status'],
        )
    )
    return outcome
