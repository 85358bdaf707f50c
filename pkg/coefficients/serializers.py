from rest_framework import serializers

from .profiles import Family, Role, build_profile

NESTED_PARAMS = {Family.PRODUCT: 'factors', Family.LIOUVILLE_DAMPING: 'shape'}


class CoefficientSpecSerializer(serializers.Serializer):
    """Validates a coefficient entry {family, params, role, period} and builds its profile."""
    family = serializers.ChoiceField(choices=Family.choices)
    params = serializers.DictField(required=False, default=dict)
    role = serializers.ChoiceField(choices=Role.choices, required=False)
    period = serializers.FloatField(required=False, allow_null=True, min_value=0.0)

    def _numeric_params(self, params):
        number = serializers.FloatField()
        cleaned, errors = {}, {}
        for key, value in params.items():
            try:
                cleaned[key] = number.to_internal_value(value)
            except serializers.ValidationError as exc:
                errors[key] = exc.detail
        if errors:
            raise serializers.ValidationError({'params': errors})
        return cleaned

    def _nested_params(self, family, params):
        key = NESTED_PARAMS[family]
        if key not in params:
            raise serializers.ValidationError({'params': f"{family} needs '{key}'"})
        nested = params[key]
        if family == Family.PRODUCT:
            if not isinstance(nested, list) or len(nested) != 2:
                raise serializers.ValidationError({'params': "product needs exactly two factors"})
            children = [CoefficientSpecSerializer(data=item) for item in nested]
        else:
            children = [CoefficientSpecSerializer(data=nested)]
        for child in children:
            if not child.is_valid():
                raise serializers.ValidationError({'params': {key: child.errors}})
        specs = [child.validated_data['spec'] for child in children]
        return {key: specs if family == Family.PRODUCT else specs[0]}

    def validate(self, data):
        family = Family(data['family'])
        if family in NESTED_PARAMS:
            params = self._nested_params(family, data.get('params') or {})
        else:
            params = self._numeric_params(data.get('params') or {})
        spec = {'family': family.value, 'params': params}
        for key in ('role', 'period'):
            if data.get(key) is not None:
                spec[key] = data[key]
        try:
            profile = build_profile(spec, role=self.context.get('role'))
        except (TypeError, ValueError, KeyError) as exc:
            raise serializers.ValidationError({'params': str(exc)})
        data['spec'] = spec
        data['profile'] = profile
        return data
