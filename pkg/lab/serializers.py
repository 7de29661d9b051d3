import re

from django.conf import settings
from rest_framework import serializers

COMMANDS = ('shell', 'sums', 'avg', 'mult', 'norm', 'report')


class ExponentField(serializers.CharField):
    """``p`` and ``q`` as exact strings: ``3/2``, ``1.6667``, ``inf``."""

    def to_internal_value(self, data):
        text = super().to_internal_value(str(data)).strip().lower()
        if text in ('inf', 'infinity'):
            return 'inf'
        if not re.fullmatch(r"\d+(?:\.\d+)?(?:/\d+)?", text):
            raise serializers.ValidationError(f"not an exponent: {data!r}")
        return text


class ExperimentConfigSerializer(serializers.Serializer):
    command = serializers.ChoiceField(choices=COMMANDS)
    d = serializers.IntegerField(min_value=2, default=4)
    k = serializers.IntegerField(min_value=2, default=2)
    levels = serializers.CharField(required=False, allow_null=True, default=None)
    p = ExponentField(required=False, allow_null=True, default=None)
    q = ExponentField(required=False, allow_null=True, default=None)
    method = serializers.CharField(required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(min_value=0, default=0)
    output = serializers.CharField(required=False, allow_null=True, default=None)
    cache_dir = serializers.CharField(required=False, allow_null=True, default=None)
    max_cells = serializers.IntegerField(min_value=1, required=False)
    max_shell_points = serializers.IntegerField(min_value=1, required=False)
    quadrature_points = serializers.IntegerField(min_value=1, required=False)
    sample_budget = serializers.IntegerField(min_value=1, required=False)
    workers = serializers.IntegerField(min_value=1, required=False)
    tolerances = serializers.DictField(child=serializers.FloatField(), required=False, default=dict)
    timings = serializers.BooleanField(default=False)
    options = serializers.DictField(required=False, default=dict)

    def to_internal_value(self, data):
        if isinstance(data.get('levels'), list):
            data = {**data, 'levels': ','.join(str(v) for v in data['levels'])}
        return super().to_internal_value(data)

    def validate_tolerances(self, value):
        unknown = sorted(set(value) - set(settings.LAB['TOLERANCES']))
        if unknown:
            raise serializers.ValidationError(f"unknown tolerances: {', '.join(unknown)}")
        return value
