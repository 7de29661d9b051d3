from rest_framework import serializers

from spherelab.serializers import RecordSerializer


class ShellSerializer(RecordSerializer):
    d = serializers.IntegerField(source='form.d')
    k = serializers.IntegerField(source='form.k')
    level = serializers.IntegerField()
    count = serializers.IntegerField()
    full = serializers.BooleanField(source='is_full')


class RegularValueSerializer(RecordSerializer):
    level = serializers.IntegerField()
    count = serializers.IntegerField()
    within_bound = serializers.BooleanField(allow_null=True)
    expected = serializers.FloatField(allow_null=True)
