from rest_framework import serializers

from spherelab.serializers import RecordSerializer


class ErrorScanSerializer(RecordSerializer):
    level = serializers.IntegerField()
    cutoff = serializers.IntegerField()
    sup_estimate = serializers.FloatField()
    argmax_xi = serializers.ListField(child=serializers.FloatField(), allow_null=True)
    samples = serializers.IntegerField()
    seed = serializers.IntegerField()


class KernelCheckSerializer(RecordSerializer):
    a = serializers.IntegerField()
    q = serializers.IntegerField()
    level = serializers.IntegerField()
    x = serializers.ListField(child=serializers.IntegerField())
    left = serializers.FloatField(source='left.real')
    left_imag = serializers.FloatField(source='left.imag')
    right = serializers.FloatField(source='right.real')
    right_imag = serializers.FloatField(source='right.imag')
    residual = serializers.FloatField()
    envelope_ratio = serializers.FloatField()


class SplitSerializer(RecordSerializer):
    level = serializers.IntegerField()
    j = serializers.IntegerField()
    delta = serializers.FloatField()
    xi = serializers.ListField(child=serializers.FloatField())
    low = serializers.FloatField()
    high = serializers.FloatField()
    envelope = serializers.FloatField()


class MultiplierValueSerializer(RecordSerializer):
    level = serializers.IntegerField()
    cutoff = serializers.IntegerField()
    xi = serializers.ListField(child=serializers.FloatField())
    exact = serializers.FloatField()
    main = serializers.FloatField()
    error = serializers.FloatField()
