"""
BG Deconvolution Experiment Serializers
Validation of ExperimentConfig documents (JSON files merged with CLI flags)
"""
from rest_framework import serializers

from bgdeconv.exceptions import ConfigError, DomainError
from bgdeconv.model import Hyperpriors
from bgdeconv.samplers.kernel import DEFAULT_ETA, SamplerKind

PRESETS = ['mendel', 'toy-single-spike']
INIT_PRESETS = ['two-spike']


class GenerateSerializer(serializers.Serializer):
    """Synthetic data drawn from the BG model"""
    M = serializers.IntegerField(min_value=1)
    P = serializers.IntegerField(min_value=0, default=20)
    lam = serializers.FloatField(min_value=0.0, max_value=1.0)
    sigma_eps2 = serializers.FloatField(min_value=0.0)
    ir = serializers.ChoiceField(choices=['benchmark', 'file'], default='benchmark')
    ir_path = serializers.CharField(required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(min_value=0, default=0)
    target_snr_db = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate_lam(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("lambda must lie strictly between 0 and 1")
        return value

    def validate(self, attrs):
        if attrs['ir'] == 'file' and not attrs.get('ir_path'):
            raise serializers.ValidationError("ir 'file' needs ir_path")
        if attrs['ir'] == 'benchmark' and attrs['P'] != 20:
            raise serializers.ValidationError("The benchmark IR has P = 20")
        if attrs.get('target_snr_db') is not None and attrs['sigma_eps2'] <= 0:
            raise serializers.ValidationError("A target SNR needs a positive sigma_eps2")
        return attrs


class DataSourceSerializer(serializers.Serializer):
    """Exactly one of a preset, a generation recipe or a data directory"""
    preset = serializers.ChoiceField(choices=PRESETS, required=False)
    generate = GenerateSerializer(required=False)
    path = serializers.CharField(required=False)

    def validate(self, attrs):
        given = [key for key in ('preset', 'generate', 'path') if attrs.get(key)]
        if len(given) != 1:
            raise serializers.ValidationError(
                "Data source needs exactly one of 'preset', 'generate' or 'path'")
        return attrs


class InitSerializer(serializers.Serializer):
    """Overrides of the default chain initialization"""
    preset = serializers.ChoiceField(choices=INIT_PRESETS, required=False)
    h = serializers.ListField(child=serializers.FloatField(), required=False)
    q_positions = serializers.ListField(child=serializers.IntegerField(min_value=0),
                                        required=False)
    x = serializers.ListField(child=serializers.FloatField(), required=False)
    lam = serializers.FloatField(required=False)
    sigma_eps2 = serializers.FloatField(required=False, min_value=0.0)
    sigma_h2 = serializers.FloatField(required=False, min_value=0.0)


class HyperpriorSerializer(serializers.Serializer):
    ig_shape_eps = serializers.FloatField(default=1.0)
    ig_scale_eps = serializers.FloatField(default=1.0)
    ig_shape_h = serializers.FloatField(default=1.0)
    ig_scale_h = serializers.FloatField(default=1.0)
    beta_a = serializers.FloatField(default=1.0)
    beta_b = serializers.FloatField(default=1.0)

    def validate(self, attrs):
        try:
            Hyperpriors(**attrs)
        except DomainError as e:
            raise serializers.ValidationError(str(e))
        return attrs


class ExperimentConfigSerializer(serializers.Serializer):
    """
    Declarative description of one experiment.

    `burn_in` defaults to 3I/4 and `batch` to max(1, I/20).
    """
    data = DataSourceSerializer()
    sampler = serializers.CharField(default='pm')
    eta = serializers.FloatField(default=DEFAULT_ETA)
    chains = serializers.IntegerField(min_value=1, default=10)
    iterations = serializers.IntegerField(min_value=1, default=1000)
    burn_in = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)
    batch = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(min_value=0, default=0)
    jobs = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    out = serializers.CharField(required=False, allow_null=True, default=None)
    init = InitSerializer(required=False, allow_null=True, default=None)
    priors = HyperpriorSerializer(required=False, allow_null=True, default=None)

    def validate(self, attrs):
        try:
            attrs['kind'] = SamplerKind.parse(attrs['sampler'], attrs['eta'])
        except ConfigError as e:
            raise serializers.ValidationError({'sampler': str(e)})

        iterations = attrs['iterations']
        if attrs.get('burn_in') is None:
            attrs['burn_in'] = (3 * iterations) // 4
        if attrs['burn_in'] >= iterations:
            raise serializers.ValidationError(
                {'burn_in': f"Burn-in must be below the {iterations} iterations"})
        if attrs.get('batch') is None:
            attrs['batch'] = max(1, iterations // 20)
        return attrs
