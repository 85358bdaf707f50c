"""
Scenario documents: one JSON object naming the equation, the Cauchy data, the
frequency and time grids, the analyses to run and the theorem checks to apply.

Validation runs every compatibility check (coefficient roles, periodicity,
theorem admissibility) before a single mode is integrated.
"""
import json

import numpy as np
from django.db import models
from rest_framework import serializers

from coefficients.profiles import Role
from coefficients.serializers import CoefficientSpecSerializer
from floquet.services import HillProblem
from rates.services import ClockKind, Quantity, predict
from rates.theorems import TheoremId
from spectral.services import Clustering, Component, Layout
from wave_lab.exceptions import InadmissibleExponents, PreconditionError, ScenarioError

from .utils import flatten_errors


class AnalysisKind(models.TextChoices):
    ENERGY = 'energy', 'Energy trace'
    DISPERSIVE = 'dispersive', 'L^q norm trace'
    FLOQUET = 'floquet', 'Instability intervals'
    DIFFUSION = 'diffusion', 'Diffusion phenomenon'
    LIOUVILLE = 'liouville', 'Liouville transform check'
    CLASSIFY = 'classify', 'Dissipation classification'
    STABILISATION = 'stabilisation', 'Stabilisation measure'


class Spacing(models.TextChoices):
    GEOMETRIC = 'geometric', 'Geometric'
    LINEAR = 'linear', 'Linear'


class DiffusionMode(models.TextChoices):
    EXPLICIT = 'explicit', 'Given constants'
    ESTIMATED = 'estimated', 'Estimated constants'
    ESTIMATE_ONLY = 'estimate_only', 'Estimator only'


# analyses that read the shared mode ensemble
ENSEMBLE_KINDS = (AnalysisKind.ENERGY, AnalysisKind.DISPERSIVE, AnalysisKind.DIFFUSION)
# analyses whose traces a theorem check can be applied to
TRACE_KINDS = ENSEMBLE_KINDS


class ExponentField(serializers.FloatField):
    """A Lebesgue exponent: a number ≥ 1 or the string 'inf'."""

    def __init__(self, **kwargs):
        kwargs.setdefault('min_value', 1.0)
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if isinstance(data, str) and data.strip().lower() in ('inf', 'infinity', '∞'):
            return float('inf')
        return super().to_internal_value(data)


def time_points(t_max, samples, spacing=Spacing.GEOMETRIC, t_first=1.0):
    """Output times starting at 0: geometric from t_first, or uniform."""
    if spacing == Spacing.LINEAR:
        return np.linspace(0.0, t_max, samples)
    return np.concatenate(([0.0], np.geomspace(t_first, t_max, samples - 1)))


class FrequencyGridSerializer(serializers.Serializer):
    min = serializers.FloatField(default=1e-3, min_value=0.0)
    max = serializers.FloatField(default=12.0, min_value=0.0)
    count = serializers.IntegerField(default=512, min_value=2)
    clustering = serializers.ChoiceField(choices=Clustering.choices, default=Clustering.GEOMETRIC)
    low_count = serializers.IntegerField(default=32, min_value=1)

    def validate(self, data):
        if not 0 < data['min'] < data['max']:
            raise serializers.ValidationError("frequency grid needs 0 < min < max")
        return data


class DataSerializer(serializers.Serializer):
    family = serializers.ChoiceField(choices=['gaussian'], default='gaussian')
    width = serializers.FloatField(default=1.0, min_value=0.0)
    amplitude1 = serializers.FloatField(default=1.0)
    amplitude2 = serializers.FloatField(default=0.0)
    layout = serializers.ChoiceField(choices=Layout.choices, default=Layout.RADIAL)

    def validate_width(self, value):
        if value <= 0:
            raise serializers.ValidationError("width must be positive")
        return value


class TimeGridSerializer(serializers.Serializer):
    t_max = serializers.FloatField(default=100.0)
    samples = serializers.IntegerField(default=200, min_value=2)
    spacing = serializers.ChoiceField(choices=Spacing.choices, default=Spacing.GEOMETRIC)
    t_first = serializers.FloatField(default=1.0)

    def validate(self, data):
        if data['t_max'] <= 0 or data['t_first'] <= 0:
            raise serializers.ValidationError("t_max and t_first must be positive")
        if data['spacing'] == Spacing.GEOMETRIC and data['t_first'] >= data['t_max']:
            raise serializers.ValidationError("t_first must lie below t_max")
        return data


def _coefficient(spec, role, field):
    serializer = CoefficientSpecSerializer(data=spec, context={'role': role})
    if not serializer.is_valid():
        raise serializers.ValidationError({field: serializer.errors})
    return serializer.validated_data['profile']


class EquationSerializer(serializers.Serializer):
    speed = serializers.DictField()
    damping = serializers.DictField(required=False, allow_null=True)
    mass = serializers.DictField(required=False, allow_null=True)

    def validate(self, data):
        profiles = {'speed': _coefficient(data['speed'], Role.SPEED, 'speed')}
        for field, role in (('damping', Role.DAMPING), ('mass', Role.MASS)):
            profiles[field] = _coefficient(data[field], role, field) if data.get(field) else None
        data['profiles'] = profiles
        return data


class EnergyAnalysisSerializer(serializers.Serializer):
    weight = serializers.ChoiceField(choices=['plain', 'adapted', 'action'], default='plain')
    limit = serializers.BooleanField(default=False)
    node_doubling = serializers.BooleanField(default=False)
    conservation_tol = serializers.FloatField(required=False, min_value=0.0)
    band_max_ratio = serializers.FloatField(required=False, min_value=1.0)
    node_doubling_tol = serializers.FloatField(required=False, min_value=0.0)


class DispersiveAnalysisSerializer(serializers.Serializer):
    p = ExponentField(default=2.0, max_value=2.0)
    q = ExponentField(default=2.0)
    quantity = serializers.ChoiceField(choices=Component.choices, default=Component.U_T)
    r_max = serializers.FloatField(required=False, min_value=0.0)
    r_points = serializers.IntegerField(default=4097, min_value=16)


class GrowthDemoSerializer(serializers.Serializer):
    horizon = serializers.FloatField(min_value=0.0)
    n_modes = serializers.IntegerField(default=64, min_value=4)
    support_fraction = serializers.FloatField(default=0.05, min_value=0.0, max_value=1.0)
    min_diagnostic = serializers.FloatField(required=False)


class FloquetAnalysisSerializer(serializers.Serializer):
    lambda_max = serializers.FloatField(min_value=0.0)
    scan_points = serializers.IntegerField(default=400, min_value=100)
    period = serializers.FloatField(required=False, min_value=0.0)
    demo = GrowthDemoSerializer(required=False)
    min_intervals = serializers.IntegerField(required=False, min_value=0)
    max_intervals = serializers.IntegerField(required=False, min_value=0)
    max_excess = serializers.FloatField(required=False)


class DiffusionAnalysisSerializer(serializers.Serializer):
    mode = serializers.ChoiceField(choices=DiffusionMode.choices, default=DiffusionMode.ESTIMATED)
    alpha = serializers.FloatField(required=False)
    beta = serializers.FloatField(required=False)
    free_wave = serializers.BooleanField(default=False)
    control_factor = serializers.FloatField(required=False, min_value=0.0)
    levels = serializers.IntegerField(default=6, min_value=2)
    damping = serializers.DictField(required=False)
    window = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2, required=False)
    min_gain = serializers.FloatField(required=False)
    control_max_gain = serializers.FloatField(required=False)
    expect_alpha = serializers.FloatField(required=False)
    expect_beta = serializers.FloatField(required=False)
    expect_tol = serializers.FloatField(default=1e-3, min_value=0.0)

    def validate(self, data):
        if data['mode'] == DiffusionMode.EXPLICIT:
            missing = [key for key in ('alpha', 'beta') if data.get(key) is None]
            if missing:
                raise serializers.ValidationError({key: ["required in explicit mode"] for key in missing})
            if data['alpha'] <= 0:
                raise serializers.ValidationError({'alpha': ["must be positive"]})
        if data.get('damping'):
            data['profile'] = _coefficient(data['damping'], Role.DAMPING, 'damping')
        return data


class LiouvilleAnalysisSerializer(serializers.Serializer):
    shape = serializers.DictField(required=False)
    lambda_spec = serializers.FloatField(default=1.0, min_value=0.0)
    horizon = serializers.FloatField(default=100.0, min_value=0.0)
    tol = serializers.FloatField(default=1e-8)
    init = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2, default=[1.0, 0.0])
    late_time = serializers.FloatField(default=1e4, min_value=0.0)
    late_limit = serializers.FloatField(required=False)
    late_tol = serializers.FloatField(default=0.05, min_value=0.0)
    max_residual = serializers.FloatField(required=False, min_value=0.0)

    def validate(self, data):
        if data.get('shape'):
            data['profile'] = _coefficient(data['shape'], Role.SHAPE, 'shape')
        return data


class ConditionGridSerializer(serializers.Serializer):
    t_max = serializers.FloatField(default=1e4, min_value=0.0)
    samples = serializers.IntegerField(default=2000, min_value=10)


class ClassifyAnalysisSerializer(ConditionGridSerializer):
    expect = serializers.ChoiceField(choices=['non_effective', 'effective', 'over_damping'], required=False)


class StabilisationAnalysisSerializer(ConditionGridSerializer):
    limit = serializers.FloatField()
    exponent = serializers.FloatField(required=False)
    tolerance = serializers.FloatField(default=0.05, min_value=0.0)
    max_exponent = serializers.FloatField(required=False)


ANALYSIS_SERIALIZERS = {
    AnalysisKind.ENERGY: EnergyAnalysisSerializer,
    AnalysisKind.DISPERSIVE: DispersiveAnalysisSerializer,
    AnalysisKind.FLOQUET: FloquetAnalysisSerializer,
    AnalysisKind.DIFFUSION: DiffusionAnalysisSerializer,
    AnalysisKind.LIOUVILLE: LiouvilleAnalysisSerializer,
    AnalysisKind.CLASSIFY: ClassifyAnalysisSerializer,
    AnalysisKind.STABILISATION: StabilisationAnalysisSerializer,
}


class AnalysisSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=AnalysisKind.choices)
    label = serializers.RegexField(r'^[A-Za-z0-9_]+$', required=False)

    def to_internal_value(self, data):
        head = super().to_internal_value(data)
        kind = AnalysisKind(head['kind'])
        params = {key: value for key, value in data.items() if key not in ('kind', 'label')}
        serializer = ANALYSIS_SERIALIZERS[kind](data=params)
        if not serializer.is_valid():
            raise serializers.ValidationError(serializer.errors)
        return {'kind': kind, 'label': head.get('label') or kind.value, **serializer.validated_data}


class VerifySerializer(serializers.Serializer):
    theorem_id = serializers.ChoiceField(choices=TheoremId.choices, allow_null=True)
    analysis = serializers.CharField()
    tolerance = serializers.FloatField(default=0.05, min_value=0.0)
    window = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2, required=False)
    clock = serializers.ChoiceField(choices=ClockKind.choices, required=False)
    p = ExponentField(required=False, max_value=2.0)
    q = ExponentField(required=False)
    note = serializers.CharField(required=False, allow_blank=True, default='')

    def validate(self, data):
        if data.get('window') and not data['window'][0] < data['window'][1]:
            raise serializers.ValidationError({'window': ["window must be increasing"]})
        return data


class ScenarioSerializer(serializers.Serializer):
    name = serializers.SlugField()
    description = serializers.CharField(required=False, allow_blank=True, default='')
    criteria = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False, default=list)
    equation = EquationSerializer()
    dimension = serializers.IntegerField(default=3, min_value=1, max_value=3)
    data = DataSerializer(required=False)
    frequency_grid = FrequencyGridSerializer(required=False)
    time_grid = TimeGridSerializer(required=False)
    tol = serializers.FloatField(required=False, min_value=1e-13, max_value=1e-4)
    analyses = serializers.ListField(child=AnalysisSerializer(), min_length=1)
    verify = serializers.ListField(child=VerifySerializer(), required=False, default=list)

    def validate(self, data):
        for key, serializer in (('data', DataSerializer), ('frequency_grid', FrequencyGridSerializer),
                                ('time_grid', TimeGridSerializer)):
            if key not in data:
                defaults = serializer(data={})
                defaults.is_valid(raise_exception=True)
                data[key] = defaults.validated_data
        profiles = data['equation']['profiles']
        errors = {}
        self._check_layout(data, errors)
        self._check_analyses(data, profiles, errors)
        if not errors:
            self._check_verify(data, profiles, errors)
        if errors:
            raise serializers.ValidationError(errors)
        return data

    @staticmethod
    def _check_layout(data, errors):
        if data['data']['layout'] == Layout.LINE and data['dimension'] != 1:
            errors['data'] = {'layout': ["line layout needs dimension 1"]}

    def _check_analyses(self, data, profiles, errors):
        labels = [analysis['label'] for analysis in data['analyses']]
        problems = {}
        for index, analysis in enumerate(data['analyses']):
            if labels.count(analysis['label']) > 1:
                problems[index] = {'label': [f"duplicate label '{analysis['label']}'"]}
                continue
            try:
                self._check_analysis(data, profiles, analysis)
            except serializers.ValidationError as exc:
                if isinstance(exc.detail, dict) and 'equation' in exc.detail:
                    errors.setdefault('equation', {}).update(exc.detail['equation'])
                else:
                    problems[index] = exc.detail
        if problems:
            errors['analyses'] = problems

    @staticmethod
    def _check_analysis(data, profiles, analysis):
        kind = analysis['kind']
        damping = profiles['damping']
        if kind == AnalysisKind.DIFFUSION:
            if analysis.get('profile') is not None and analysis['mode'] != DiffusionMode.ESTIMATE_ONLY:
                raise serializers.ValidationError(
                    {'damping': ["a damping override is only used in estimate_only mode"]})
            damping = analysis.get('profile') or damping
            if damping is None:
                raise serializers.ValidationError({'equation': {'damping': ["required by the diffusion analysis"]}})
            if analysis['mode'] != DiffusionMode.EXPLICIT and not damping.is_constant and damping.period is None:
                raise serializers.ValidationError({'mode': ["estimated constants need a constant or periodic damping"]})
            if analysis['free_wave']:
                if data['dimension'] != 3 or data['data']['layout'] != Layout.RADIAL:
                    raise serializers.ValidationError({'free_wave': ["the three-term comparison is stated for n = 3"]})
                if not damping.is_constant or not np.isclose(float(damping.eval(0.0)), 0.5):
                    raise serializers.ValidationError({'free_wave': ["the three-term comparison needs 2b ≡ 1"]})
        elif kind == AnalysisKind.CLASSIFY and damping is None:
            raise serializers.ValidationError({'equation': {'damping': ["required by the classify analysis"]}})
        elif kind == AnalysisKind.FLOQUET:
            try:
                HillProblem(profiles['speed'], damping, profiles['mass'], analysis.get('period'))
            except PreconditionError as exc:
                raise serializers.ValidationError({'equation': {'speed': [f"floquet analysis: {exc}"]}})
            if 'demo' in analysis and analysis['demo']['horizon'] <= 0:
                raise serializers.ValidationError({'demo': {'horizon': ["must be positive"]}})
        elif kind == AnalysisKind.LIOUVILLE:
            shape = analysis.get('profile') or profiles['speed']
            if shape.role != Role.SHAPE:
                raise serializers.ValidationError({'shape': ["needs a profile with role 'shape'"]})
        elif kind == AnalysisKind.DISPERSIVE and analysis['q'] != 2.0:
            radial3d = data['dimension'] == 3 and data['data']['layout'] == Layout.RADIAL
            line = data['dimension'] == 1 and data['data']['layout'] == Layout.LINE
            if not (radial3d or line):
                raise serializers.ValidationError({'q': ["q ≠ 2 needs radial n = 3 or line n = 1 data"]})
            if radial3d and analysis['quantity'] == Component.GRAD:
                raise serializers.ValidationError({'quantity': ["radial synthesis supports u and u_t"]})

    @staticmethod
    def _check_verify(data, profiles, errors):
        analyses = {analysis['label']: analysis for analysis in data['analyses']}
        problems = {}
        if data['verify']:
            grid = data['time_grid']
            if grid['spacing'] == Spacing.GEOMETRIC and grid['t_max'] < 100 * grid['t_first']:
                errors['time_grid'] = {'t_max': ["rate fits need t_max ≥ 100 × t_first"]}
            if grid['spacing'] == Spacing.LINEAR and grid['samples'] < 101:
                errors['time_grid'] = {'samples': ["rate fits on a linear grid need at least 101 samples"]}
        for index, record in enumerate(data['verify']):
            analysis = analyses.get(record['analysis'])
            if analysis is None:
                problems[index] = {'analysis': [f"no analysis labelled '{record['analysis']}'"]}
                continue
            if analysis['kind'] not in TRACE_KINDS or analysis.get('mode') == DiffusionMode.ESTIMATE_ONLY:
                problems[index] = {'analysis': [f"{analysis['kind']} analyses produce no trace to check"]}
                continue
            if record['theorem_id'] is None:
                continue
            try:
                build_prediction(record, analysis, data['dimension'], profiles)
            except (InadmissibleExponents, PreconditionError) as exc:
                problems[index] = {'theorem_id': [str(exc)]}
        if problems:
            errors['verify'] = problems


def record_quantity(analysis):
    """Quantity a theorem is checked against for the trace of `analysis`."""
    if analysis['kind'] == AnalysisKind.ENERGY:
        return Quantity.ADAPTED_ENERGY if analysis['weight'] == 'adapted' else Quantity.ENERGY
    if analysis['kind'] == AnalysisKind.DISPERSIVE:
        return Quantity(analysis['quantity'])
    return Quantity.DEFICIT


def build_prediction(record, analysis, dimension, profiles):
    """RatePrediction for a verify record; p and q default to the analysis exponents (2, 2 for energies)."""
    quantity = record_quantity(analysis)
    p = record.get('p', analysis.get('p', 2.0))
    q = record.get('q', analysis.get('q', 2.0))
    k = 1 if quantity == Quantity.U_T else 0
    alpha_order = 1 if quantity == Quantity.GRAD else 0
    damping = analysis.get('profile') or profiles['damping']
    if record['theorem_id'] in (TheoremId.WIRTH_NONEFFECTIVE, TheoremId.WIRTH_EFFECTIVE) and damping is None:
        raise PreconditionError(f"{record['theorem_id']} needs a damping coefficient")
    if record['theorem_id'] == TheoremId.REISSIG_YAGDJIAN and profiles['speed'].role != Role.SHAPE:
        raise PreconditionError("reissig_yagdjian needs a speed with role 'shape'")
    if quantity == Quantity.DEFICIT and record['theorem_id'] not in (TheoremId.NISHIHARA_DIFFUSION,
                                                                      TheoremId.WIRTH_DIFFUSION):
        raise PreconditionError("diffusion traces are checked against the diffusion statements only")
    return predict(record['theorem_id'], n=dimension, p=p, q=q, k=k, alpha_order=alpha_order, quantity=quantity,
                   damping=damping, shape=profiles['speed'])


def parse_scenario(text, source='<scenario>'):
    """JSON text to a validated scenario; errors carry line/column or field paths."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(document, dict):
        raise ScenarioError(f"{source}: a scenario is a JSON object")
    serializer = ScenarioSerializer(data=document)
    if not serializer.is_valid():
        lines = flatten_errors(serializer.errors)
        raise ScenarioError(f"{source}: invalid scenario\n  " + "\n  ".join(lines), serializer.errors)
    scenario = serializer.validated_data
    scenario['document'] = document
    return scenario


def load_scenario(path):
    with open(path, encoding='utf-8') as handle:
        return parse_scenario(handle.read(), str(path))
