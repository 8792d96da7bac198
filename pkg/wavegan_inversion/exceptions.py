"""
Custom exceptions for wavegan_inversion.
"""


class WaveGanInversionError(Exception):
    """
    Base class for every error raised by this package.
    """


class InvalidAudio(WaveGanInversionError):
    """
    An audio file or sample buffer cannot be turned into an AudioClip.
    """


class UnsupportedChannelCount(InvalidAudio):
    """
    The WAV file has more than one channel. Multi-channel audio is rejected, never downmixed.

    Arguments:
        * path (str)
        * channels (int)
    """

    def __init__(self, path, channels):
        self.path = path
        self.channels = channels
        super().__init__(self.path, self.channels)

    def __str__(self):
        return (
            'unsupported channel count: {path} has {channels} channels, '
            'only mono audio is accepted.'.format(path=self.path, channels=self.channels)
        )


class UnsupportedEncoding(InvalidAudio):
    """
    The WAV file is neither 16-bit PCM nor 32/64-bit float.
    """


class UnsupportedSampleRate(InvalidAudio):
    """
    The WAV file is not sampled at the canonical rate. No resampling is performed.
    """


class ShapeMismatch(WaveGanInversionError):
    """
    Two arrays that must agree in shape (clips, spectrograms, network inputs) do not.
    """


class LatentDimensionMismatch(WaveGanInversionError):
    """
    A latent vector does not match the latent dimension of the generator it is fed to.

    Arguments:
        * expected (int)
        * actual (int)
    """

    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(self.expected, self.actual)

    def __str__(self):
        return (
            'Latent vector has dimension {actual}, but the generator expects '
            'latent_dim={expected}.'.format(actual=self.actual, expected=self.expected)
        )


class TrainingDiverged(WaveGanInversionError):
    """
    A training loop produced a non-finite loss.

    Arguments:
        * component (str): 'gan', 'classifier' or 'inverter'
        * step (int)
        * detail (str): the offending loss term and any batch/epoch coordinates
    """

    def __init__(self, component, step, detail):
        self.component = component
        self.step = step
        self.detail = detail
        super().__init__(self.component, self.step, self.detail)

    def __str__(self):
        return (
            'Training of {component} diverged at step={step}: {detail}'.format(
                component=self.component, step=self.step, detail=self.detail,
            )
        )


class NonFiniteObjective(WaveGanInversionError):
    """
    The gradient inversion objective evaluated to NaN or infinity.
    """


class DatasetError(WaveGanInversionError):
    """
    A labeled dataset could not be built or used.
    """


class NoClassesFound(DatasetError):
    """
    The dataset root contains no recognised digit folders.
    """


class MissingClassFolder(DatasetError):
    """
    The dataset manifest expects a digit folder that does not exist.
    """


class DatasetCountMismatch(DatasetError):
    """
    The number of loaded clips for a class differs from the count pinned by the manifest.
    """


class EmptyDataset(DatasetError):
    """
    An operation that needs at least one item was given none.
    """


class EmptyClass(DatasetError):
    """
    A class the classifier must learn has no training items.
    """


class InsufficientClasses(DatasetError):
    """
    Fewer than two distinct labels are present, so there is nothing to classify.
    """


class CheckpointError(WaveGanInversionError):
    """
    A checkpoint directory is missing, incomplete or of the wrong kind.
    """


class MissingPrerequisite(CheckpointError):
    """
    A step needs a checkpoint that has not been trained yet.

    Arguments:
        * component (str): what is being trained or evaluated
        * prerequisite (str): the checkpoint kind that is missing
        * path (str)
    """

    def __init__(self, component, prerequisite, path):
        self.component = component
        self.prerequisite = prerequisite
        self.path = path
        super().__init__(self.component, self.prerequisite, self.path)

    def __str__(self):
        return (
            'Cannot run {component}: the {prerequisite} checkpoint is missing '
            '(expected at {path}). Train {prerequisite} first.'.format(
                component=self.component, prerequisite=self.prerequisite, path=self.path,
            )
        )


class InvalidConfiguration(WaveGanInversionError):
    """
    An experiment configuration failed validation.

    Arguments:
        * errors (dict): serializer errors keyed by field
    """

    def __init__(self, errors):
        self.errors = errors
        super().__init__(self.errors)

    def __str__(self):
        return 'Invalid experiment configuration: {errors}'.format(errors=self.errors)


class EmptyResults(WaveGanInversionError):
    """
    A results directory holds no evaluation runs.
    """
