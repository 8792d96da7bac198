"""
Enumerations for wavegan_inversion.
"""

from enum import Enum


class InversionMethod(str, Enum):
    """
    The three ways of recovering a latent vector.

    Gradient: quasi-Newton minimisation of the spectrogram MAE from a random start.

    Inverse mapper: a single forward pass of the trained residual network.

    Hybrid: the inverse mapper's prediction refined by a short gradient budget.
    """
    GRADIENT = 'gradient'
    INVERSE_MAPPER = 'inverse_mapper'
    HYBRID = 'hybrid'

    @classmethod
    def table_order(cls):
        """
        Order of the method rows in the results tables.
        """
        return [cls.GRADIENT, cls.INVERSE_MAPPER, cls.HYBRID]


class ClipMode(str, Enum):
    """
    What happens to latent components that leave [-1, 1] during gradient inversion.
    """
    NONE = 'none'
    HARD = 'hard'
    STOCHASTIC = 'stochastic'


class InitMode(str, Enum):
    """
    Where gradient inversion starts.
    """
    RANDOM = 'random'
    PROVIDED = 'provided'


class OptimizerBackend(str, Enum):
    """
    Implementation of the limited-memory quasi-Newton optimizer.
    """
    TORCH = 'torch'
    SCIPY = 'scipy'


class ScaleProfile(str, Enum):
    """
    Size presets for networks, budgets and target counts.
    """
    TOY = 'toy'
    FULL = 'full'


class Component(str, Enum):
    """
    Trainable components, in dependency order.
    """
    GAN = 'gan'
    CLASSIFIER = 'classifier'
    INVERTER = 'inverter'

    def prerequisites(self):
        """
        Components whose checkpoints must exist before this one can be trained.
        """
        if self is Component.INVERTER:
            return [Component.GAN, Component.CLASSIFIER]
        return []


class Domain(str, Enum):
    """
    Origin of the evaluation targets.
    """
    FAKE = 'fake'
    REAL = 'real'


class AlternationSchedule(str, Enum):
    """
    Batch order inside one inverse-mapper training round.
    """
    REAL_THEN_FAKE = 'real_then_fake'
    FAKE_THEN_REAL = 'fake_then_real'
    FAKE_ONLY = 'fake_only'


class BlockReduction(str, Enum):
    """
    How each residual block's squared activation differences are reduced in the perceptual loss.
    """
    MEAN = 'mean'
    SUM = 'sum'
