"""Defines serializers used to validate experiment configs and inversion sidecars"""

from rest_framework import serializers

from wavegan_inversion.conf import (
    DataConfig,
    EvaluationConfig,
    GanTrainConfig,
    GdConfig,
    GeneratorArchitecture,
    ResidualArchitecture,
    SpectrogramConfig,
    build_section
)
from wavegan_inversion.exceptions import InvalidConfiguration
from wavegan_inversion.statuses import (
    AlternationSchedule,
    BlockReduction,
    ClipMode,
    Domain,
    InitMode,
    InversionMethod,
    OptimizerBackend,
    ScaleProfile
)

METRIC_CHOICES = ('inception', 'mse', 'ssim', 'accuracy')


def _choices(enum_cls):
    return [member.value for member in enum_cls]


class SectionSerializer(serializers.Serializer):  # pylint: disable=abstract-method
    """
    Base for config sections that map onto a frozen dataclass from ``conf``.

    Field types and ranges are checked by the serializer fields; cross-field invariants
    are delegated to the dataclass so there is one place that states them.
    """
    section_class = None

    def validate(self, attrs):
        try:
            build_section(self.section_class, attrs)
        except InvalidConfiguration as exc:
            raise serializers.ValidationError(exc.errors) from exc
        return attrs


class SpectrogramConfigSerializer(SectionSerializer):  # pylint: disable=abstract-method
    """
    Serializer for SpectrogramConfig.
    """
    section_class = SpectrogramConfig

    window_size = serializers.IntegerField(required=False, min_value=1)
    hop = serializers.IntegerField(required=False, min_value=1)
    log_floor = serializers.FloatField(required=False)
    use_log = serializers.BooleanField(required=False)


class GeneratorArchitectureSerializer(SectionSerializer):  # pylint: disable=abstract-method
    """
    Serializer for GeneratorArchitecture.
    """
    section_class = GeneratorArchitecture

    latent_dim = serializers.IntegerField(required=False, min_value=1)
    model_dim = serializers.IntegerField(required=False, min_value=1)
    kernel_size = serializers.IntegerField(required=False, min_value=1)
    stride = serializers.IntegerField(required=False, min_value=2)


class GanTrainConfigSerializer(SectionSerializer):  # pylint: disable=abstract-method
    """
    Serializer for GanTrainConfig.
    """
    section_class = GanTrainConfig

    steps = serializers.IntegerField(required=False, min_value=1)
    batch_size = serializers.IntegerField(required=False, min_value=1)
    generator_lr = serializers.FloatField(required=False)
    critic_lr = serializers.FloatField(required=False)
    beta1 = serializers.FloatField(required=False, min_value=0, max_value=1)
    beta2 = serializers.FloatField(required=False, min_value=0, max_value=1)
    gp_weight = serializers.FloatField(required=False)
    phase_shuffle = serializers.IntegerField(required=False, min_value=0)
    critic_steps = serializers.IntegerField(required=False, min_value=1)
    checkpoint_every = serializers.IntegerField(required=False, min_value=1)
    log_every = serializers.IntegerField(required=False, min_value=1)


class ResidualArchitectureSerializer(SectionSerializer):  # pylint: disable=abstract-method
    """
    Serializer for ResidualArchitecture.
    """
    section_class = ResidualArchitecture

    stage_widths = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False)
    blocks_per_stage = serializers.IntegerField(required=False, min_value=1)
    stem = serializers.ChoiceField(choices=['imagenet', 'compact'], required=False)


class ClassifierTrainConfigSerializer(serializers.Serializer):  # pylint: disable=abstract-method
    """
    Serializer for ClassifierTrainConfig.
    """
    num_classes = serializers.IntegerField(required=False, min_value=2)
    architecture = ResidualArchitectureSerializer(required=False)
    steps = serializers.IntegerField(required=False, min_value=1)
    batch_size = serializers.IntegerField(required=False, min_value=1)
    learning_rate = serializers.FloatField(required=False)
    heldout_fraction = serializers.FloatField(required=False, min_value=0, max_value=1)
    require_all_classes = serializers.BooleanField(required=False)
    log_every = serializers.IntegerField(required=False, min_value=1)


class InverterTrainConfigSerializer(serializers.Serializer):  # pylint: disable=abstract-method
    """
    Serializer for InverterTrainConfig.
    """
    architecture = ResidualArchitectureSerializer(required=False)
    epochs = serializers.IntegerField(required=False, min_value=1)
    learning_rate = serializers.FloatField(required=False)
    batch_size = serializers.IntegerField(required=False, min_value=1)
    latent_weight = serializers.FloatField(required=False, min_value=0)
    perceptual_weight = serializers.FloatField(required=False, min_value=0)
    schedule = serializers.ChoiceField(choices=_choices(AlternationSchedule), required=False)
    max_steps = serializers.IntegerField(required=False, allow_null=True, min_value=1)
    block_reduction = serializers.ChoiceField(choices=_choices(BlockReduction), required=False)
    log_every = serializers.IntegerField(required=False, min_value=1)

    def validate(self, attrs):
        if attrs.get('latent_weight', 1.0) == 0 and attrs.get('perceptual_weight', 1.0) == 0:
            raise serializers.ValidationError('latent_weight and perceptual_weight cannot both be 0')
        return attrs


class GdConfigSerializer(SectionSerializer):  # pylint: disable=abstract-method
    """
    Serializer for GdConfig, used for both the gradient and the hybrid sections.
    """
    section_class = GdConfig

    max_steps = serializers.IntegerField(required=False, min_value=0)
    backend = serializers.ChoiceField(choices=_choices(OptimizerBackend), required=False)
    learning_rate = serializers.FloatField(required=False)
    history_size = serializers.IntegerField(required=False, min_value=1)
    tolerance = serializers.FloatField(required=False, min_value=0)
    line_search = serializers.ChoiceField(choices=['strong_wolfe'], required=False, allow_null=True)
    clip_mode = serializers.ChoiceField(choices=_choices(ClipMode), required=False)
    clip_low = serializers.FloatField(required=False)
    clip_high = serializers.FloatField(required=False)
    init_mode = serializers.ChoiceField(choices=_choices(InitMode), required=False)


class EvaluationConfigSerializer(SectionSerializer):  # pylint: disable=abstract-method
    """
    Serializer for EvaluationConfig.
    """
    section_class = EvaluationConfig

    num_targets = serializers.IntegerField(required=False, min_value=1)
    inception_splits = serializers.IntegerField(required=False, min_value=1)
    figures = serializers.IntegerField(required=False, min_value=0)
    domains = serializers.ListField(
        child=serializers.ChoiceField(choices=_choices(Domain)), required=False, allow_empty=False,
    )
    methods = serializers.ListField(
        child=serializers.ChoiceField(choices=_choices(InversionMethod)), required=False, allow_empty=False,
    )
    metrics = serializers.ListField(
        child=serializers.ChoiceField(choices=METRIC_CHOICES), required=False, allow_empty=False,
    )


class DataConfigSerializer(SectionSerializer):  # pylint: disable=abstract-method
    """
    Serializer for DataConfig.
    """
    section_class = DataConfig

    sc09_root = serializers.CharField(required=False, allow_null=True)
    manifest = serializers.CharField(required=False, allow_null=True)
    toy_per_class = serializers.IntegerField(required=False, min_value=1)
    heldout_fraction = serializers.FloatField(required=False, min_value=0, max_value=1)
    evaluate_on = serializers.ChoiceField(choices=['heldout', 'train'], required=False)
    load_workers = serializers.IntegerField(required=False, min_value=1)


class ExperimentConfigSerializer(serializers.Serializer):  # pylint: disable=abstract-method
    """
    Serializer for a complete, merged experiment configuration.
    """
    profile = serializers.ChoiceField(choices=_choices(ScaleProfile))
    seed = serializers.IntegerField(min_value=0)
    output_dir = serializers.CharField()
    checkpoint_dir = serializers.CharField()
    workers = serializers.IntegerField(min_value=1)
    deterministic = serializers.BooleanField()
    audio = SpectrogramConfigSerializer(required=False)
    generator = GeneratorArchitectureSerializer(required=False)
    gan_training = GanTrainConfigSerializer(required=False)
    classifier = ClassifierTrainConfigSerializer(required=False)
    inverter = InverterTrainConfigSerializer(required=False)
    gradient = GdConfigSerializer(required=False)
    hybrid = GdConfigSerializer(required=False)
    evaluation = EvaluationConfigSerializer(required=False)
    data = DataConfigSerializer(required=False)


class LatentField(serializers.ListField):
    """
    A latent vector, rendered from a tensor and read back as a list of floats.
    """
    child = serializers.FloatField()

    def to_representation(self, data):
        if hasattr(data, 'tolist'):
            data = data.tolist()
        return [float(value) for value in data]


class InversionResultSerializer(serializers.Serializer):  # pylint: disable=abstract-method
    """
    Serializer for the JSON sidecar written next to every reconstruction WAV.
    """
    method = serializers.ChoiceField(choices=_choices(InversionMethod))
    target = serializers.CharField()
    reconstruction = serializers.CharField()
    sample_rate = serializers.IntegerField()
    z_hat = LatentField()
    loss_trace = serializers.ListField(child=serializers.FloatField())
    steps_used = serializers.IntegerField(min_value=0)
    steps_run = serializers.IntegerField(min_value=0)
    wall_time = serializers.FloatField(min_value=0)
    spectrogram_mae = serializers.FloatField()
    initial_mae = serializers.FloatField()
    mse_raw = serializers.FloatField(allow_null=True, required=False)
    ssim = serializers.FloatField(allow_null=True, required=False)
    latent_mse = serializers.FloatField(allow_null=True, required=False)
    config_hash = serializers.CharField()

    def to_representation(self, instance):
        data = super().to_representation(instance)
        data['method'] = InversionMethod(data['method']).value
        return data
