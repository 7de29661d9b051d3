from rest_framework import serializers

from spherelab.serializers import RecordSerializer


class ExactField(serializers.Field):
    """Fractions as ``"p/q"`` strings, floats and infinities as they print."""

    def to_representation(self, value):
        return None if value is None else str(value)


class BirchParametersSerializer(serializers.Serializer):
    alpha = ExactField()
    beta = ExactField()
    gamma = ExactField()
    hypothesis_holds = serializers.BooleanField()


class NormRowSerializer(RecordSerializer):
    level = serializers.IntegerField()
    estimate = serializers.FloatField()
    method = serializers.CharField()
    iters = serializers.IntegerField()
    seconds = serializers.FloatField(allow_null=True)


class ExponentFitSerializer(serializers.Serializer):
    slope = serializers.FloatField()
    intercept = serializers.FloatField()
    residual = serializers.FloatField()
    points = serializers.SerializerMethodField()
    p = ExactField()
    q = ExactField()
    method = serializers.CharField(allow_null=True)

    def get_points(self, fit):
        return len(fit.levels)


class RestrictedWeakRowSerializer(serializers.Serializer):
    radius = serializers.IntegerField()
    threshold = serializers.FloatField()
    size = serializers.IntegerField()
    set_size = serializers.IntegerField()
    bound = serializers.FloatField()
    ratio = serializers.FloatField()
