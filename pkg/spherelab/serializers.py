from rest_framework import serializers


class RecordSerializer(serializers.Serializer):
    """Read-only record serializer.

    ``renamed`` maps attribute names to output keys for keys that are not
    valid Python identifiers (``lambda``).
    """
    renamed = {'level': 'lambda'}

    def to_representation(self, instance):
        data = super().to_representation(instance)
        return {self.renamed.get(key, key): value for key, value in data.items()}
