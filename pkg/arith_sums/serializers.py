from rest_framework import serializers

from spherelab.serializers import RecordSerializer


class WeilRowSerializer(serializers.Serializer):
    q = serializers.IntegerField()
    ratio = serializers.FloatField()
    gcd = serializers.IntegerField()
    abs_value = serializers.FloatField()


class BoundRowSerializer(serializers.Serializer):
    q = serializers.IntegerField()
    sup_abs = serializers.FloatField()
    scaled = serializers.FloatField()


class SumValueSerializer(RecordSerializer):
    kind = serializers.CharField()
    q = serializers.IntegerField()
    a = serializers.IntegerField(allow_null=True)
    level = serializers.IntegerField(allow_null=True)
    m = serializers.ListField(child=serializers.IntegerField(), allow_null=True)
    real = serializers.FloatField(source='value.real')
    imag = serializers.FloatField(source='value.imag')
    magnitude = serializers.FloatField()
