"""
Scenario runs: build the coefficients and spectral data of a validated
scenario, run its analyses, apply its theorem checks and write the run
directory (report.json, run_meta.json, trace_*.csv, scan_*.csv).

report.json only holds deterministic content, so two runs of the same
scenario produce byte-identical reports whatever the thread count; wall
times go to run_meta.json.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from django.conf import settings
from django.db import models
from django.utils import timezone

from asymptotics.services import (
    HeatSurrogate,
    decay_gain,
    diffusion_deficit,
    estimate_alpha_beta,
    liouville_damping,
    liouville_verify,
)
from coefficients.conditions import check_bounded_primitive, classify_dissipation, stabilisation_measure
from coefficients.profiles import SplitDamping
from floquet.services import HillProblem, discriminant_scan, instability_intervals, write_scan_csv, yagdjian_demo
from modes.services import ModeState, integrate_modes
from rates.services import (
    ClockFunction,
    ClockKind,
    PredictionKind,
    no_prediction,
    scattering_limit,
    verify,
    window_shift_deviation,
)
from rates.theorems import TheoremId, theorem_catalog
from spectral.services import (
    FrequencyGrid,
    Layout,
    TraceKind,
    dispersive_trace,
    gaussian_data,
    node_doubling_deviation,
    plancherel_energy,
    plancherel_norm,
)
from wave_lab.exceptions import DegenerateWindow, PreconditionError, ScenarioError, WaveLabError

from .serializers import AnalysisKind, DiffusionMode, build_prediction, load_scenario, record_quantity, time_points
from .utils import error_payload, success_payload, write_json

logger = logging.getLogger(__name__)


class ExitStatus(models.IntegerChoices):
    PASSED = 0, 'All checks passed'
    VERIFICATION_FAILED = 1, 'A verification or check failed'
    INVALID = 2, 'Usage or validation error'
    NUMERIC_FAILURE = 3, 'An analysis failed'


@dataclass
class RunContext:
    """Per-run state shared by the analysis handlers."""
    scenario: dict
    output_dir: Path
    workers: int
    tol_override: Optional[float] = None
    ensembles: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    gains: dict = field(default_factory=dict)
    counters: dict = field(default_factory=lambda: {'nodes': 0, 'accepted_steps': 0, 'rejected_steps': 0,
                                                     'rhs_evaluations': 0, 'scan_samples': 0})

    @property
    def profiles(self):
        return self.scenario['equation']['profiles']

    @property
    def tol(self):
        if self.tol_override is not None:
            return self.tol_override
        return self.scenario.get('tol', settings.WAVE_LAB['DEFAULT_TOL'])

    @property
    def scan_tol(self):
        return self.tol_override

    def frequency_grid(self):
        spec = self.scenario['frequency_grid']
        return FrequencyGrid(spec['max'], spec['count'], spec['clustering'], spec['min'], spec['low_count'])

    def times(self):
        spec = self.scenario['time_grid']
        return time_points(spec['t_max'], spec['samples'], spec['spacing'], spec['t_first'])

    def ensemble(self, refined=False):
        """Spectral data and mode ensemble of the scenario, integrated once per grid."""
        key = 'refined' if refined else 'base'
        if key not in self.ensembles:
            grid = self.frequency_grid()
            if refined:
                grid = grid.refined()
            spec = self.scenario['data']
            data = gaussian_data(self.scenario['dimension'], grid, spec['width'], spec['amplitude1'],
                                 spec['amplitude2'], spec['layout'])
            profiles = self.profiles
            ensemble = integrate_modes(data.lambdas, profiles['speed'], self.times(), data.u1_hat, data.u2_hat,
                                       profiles['damping'], profiles['mass'], tol=self.tol, workers=self.workers)
            self.counters['nodes'] += int(data.nodes.size)
            for name, value in ensemble.stats.as_dict().items():
                self.counters[name] += value
            self.ensembles[key] = (data, ensemble)
        return self.ensembles[key]

    def write_trace(self, name, trace):
        path = self.output_dir / f'trace_{name}.csv'
        trace.to_csv(path)
        return path.name


@dataclass
class AnalysisOutcome:
    label: str
    kind: str
    status: str = 'success'
    message: str = ''
    result: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    error_type: Optional[str] = None

    @property
    def failed(self):
        return self.status == 'error'

    def as_dict(self):
        data = {'kind': str(self.kind), 'result': self.result, 'files': self.files, 'checks': self.checks}
        if self.failed:
            return error_payload(self.message, errors={'type': self.error_type}, data=data)
        return success_payload(self.message or f'{self.kind} analysis completed', data)


@dataclass
class RunReport:
    scenario: dict
    outcomes: list
    verification: list
    counters: dict
    output_dir: Path
    timings: dict = field(default_factory=dict)
    workers: int = 1
    tol_override: Optional[float] = None
    started_at: Optional[str] = None
    finished_at: Optional[str] = None

    @property
    def name(self):
        return self.scenario['name']

    @property
    def checks(self):
        return [
            {'analysis': outcome.label, 'check': name, 'pass': bool(passed)}
            for outcome in self.outcomes for name, passed in sorted(outcome.checks.items())
        ]

    @property
    def errored(self):
        return any(outcome.failed for outcome in self.outcomes)

    @property
    def failures(self):
        failed = [f"{record['analysis']}/{record['theorem_id']}" for record in self.verification
                  if record['pass'] is False]
        failed += [f"{check['analysis']}/{check['check']}" for check in self.checks if not check['pass']]
        return failed

    @property
    def exit_code(self):
        if self.errored:
            return ExitStatus.NUMERIC_FAILURE
        if self.failures:
            return ExitStatus.VERIFICATION_FAILED
        return ExitStatus.PASSED

    @property
    def files(self):
        return sorted(name for outcome in self.outcomes for name in outcome.files)

    def as_dict(self):
        data = {
            'schema_version': settings.WAVE_LAB['REPORT_SCHEMA_VERSION'],
            'scenario': self.name,
            'criteria': list(self.scenario.get('criteria', [])),
            'analyses': {outcome.label: outcome.as_dict() for outcome in self.outcomes},
            'verification': self.verification,
            'checks': self.checks,
            'counters': self.counters,
            'files': self.files,
            'exit_code': int(self.exit_code),
        }
        if self.errored:
            failed = [outcome.label for outcome in self.outcomes if outcome.failed]
            return error_payload(f"analyses failed: {', '.join(failed)}", data=data)
        if self.failures:
            return error_payload(f"verification failed: {', '.join(self.failures)}", data=data)
        return success_payload(f"{self.name}: all checks passed", data)

    def meta(self):
        return {
            'scenario': self.name,
            'threads': self.workers,
            'tol_override': self.tol_override,
            'started_at': self.started_at,
            'finished_at': self.finished_at,
            'wall_time_s': self.timings,
        }


def resolve_scenario(reference):
    """A scenario file path, or the name of a bundled scenario."""
    path = Path(reference)
    if path.is_file():
        return path
    bundled = Path(settings.WAVE_LAB['SCENARIO_DIR']) / f'{reference}.json'
    if bundled.is_file():
        return bundled
    raise ScenarioError(f"unknown scenario '{reference}': no such file and no bundled scenario of that name")


def catalog():
    """(name, scenario or ScenarioError) for every bundled scenario, sorted by file name."""
    entries = []
    for path in sorted(Path(settings.WAVE_LAB['SCENARIO_DIR']).glob('*.json')):
        try:
            entries.append((path.stem, load_scenario(path)))
        except ScenarioError as exc:
            entries.append((path.stem, exc))
    return entries


class RunService:
    @classmethod
    def run(cls, scenario, output_dir, workers=None, tol_override=None, exports=()):
        """Run every analysis and check of a validated scenario and write the run directory."""
        from .exports import ExportService, write_plot_script

        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        workers = settings.WAVE_LAB['WORKERS'] if workers is None else max(1, int(workers))
        context = RunContext(scenario, output_dir, workers, tol_override)
        started = timezone.now()
        logger.info("running scenario %s (%d analyses, %d threads)", scenario['name'], len(scenario['analyses']),
                    workers)

        outcomes, timings = [], {}
        for spec in scenario['analyses']:
            clock = time.perf_counter()
            outcomes.append(cls._run_analysis(context, spec))
            timings[spec['label']] = time.perf_counter() - clock
        by_label = {outcome.label: outcome for outcome in outcomes}
        verification = [cls._verify(context, record, by_label) for record in scenario['verify']]

        report = RunReport(scenario, outcomes, verification, context.counters, output_dir, timings, workers,
                           tol_override, started.isoformat(), timezone.now().isoformat())
        write_json(output_dir / 'report.json', report.as_dict())
        write_json(output_dir / 'run_meta.json', report.meta())
        write_plot_script(output_dir, report.files)
        for export_format in exports:
            ExportService.export_report(report.as_dict(), export_format, output_dir)
        level = logging.INFO if report.exit_code == ExitStatus.PASSED else logging.WARNING
        logger.log(level, "scenario %s finished with exit code %d", report.name, report.exit_code)
        return report

    @classmethod
    def _run_analysis(cls, context, spec):
        handlers = {
            AnalysisKind.ENERGY: cls._run_energy,
            AnalysisKind.DISPERSIVE: cls._run_dispersive,
            AnalysisKind.FLOQUET: cls._run_floquet,
            AnalysisKind.DIFFUSION: cls._run_diffusion,
            AnalysisKind.LIOUVILLE: cls._run_liouville,
            AnalysisKind.CLASSIFY: cls._run_classify,
            AnalysisKind.STABILISATION: cls._run_stabilisation,
        }
        outcome = AnalysisOutcome(spec['label'], spec['kind'])
        try:
            handlers[spec['kind']](context, spec, outcome)
        except (WaveLabError, ArithmeticError, ValueError) as exc:
            logger.error("analysis %s failed: %s", spec['label'], exc)
            outcome.status = 'error'
            outcome.message = str(exc)
            outcome.error_type = type(exc).__name__
        return outcome

    @staticmethod
    def _energy_trace(context, spec, data, ensemble):
        if spec['weight'] == 'plain':
            return plancherel_energy(data, ensemble)
        return plancherel_energy(data, ensemble, speed=context.profiles['speed'], kind=TraceKind(spec['weight']))

    @staticmethod
    def _limit_clock(context, spec):
        profiles = context.profiles
        if profiles['damping'] is not None:
            return ClockFunction(ClockKind.DAMPING_EXPONENTIAL, profiles['damping'])
        if spec['weight'] == 'adapted':
            return ClockFunction(ClockKind.SHAPE, profiles['speed'])
        return None

    @classmethod
    def _run_energy(cls, context, spec, outcome):
        data, ensemble = context.ensemble()
        trace = cls._energy_trace(context, spec, data, ensemble)
        initial = float(trace.values[0])
        if not initial > 0:
            raise PreconditionError("the initial energy vanishes")
        ratio = trace.values / initial
        drift = float(np.max(np.abs(ratio - 1.0)))
        c1, c2 = float(np.min(ratio)), float(np.max(ratio))
        outcome.result.update({
            'initial_energy': initial,
            'final_energy': float(trace.values[-1]),
            'ratio_bounds': [c1, c2],
            'band': {'c1': c1, 'c2': c2, 'spread': c2 / c1},
            'max_drift': drift,
            'samples': int(trace.times.size),
        })
        if 'conservation_tol' in spec:
            outcome.checks['conservation'] = drift <= spec['conservation_tol']
        if 'band_max_ratio' in spec:
            # c1 E0 ≤ E(t) ≤ c2 E0 over the whole grid
            outcome.checks['band'] = c2 / c1 <= spec['band_max_ratio']
        if spec['limit']:
            limit = scattering_limit(trace, cls._limit_clock(context, spec), initial_energy=initial)
            outcome.result['scattering_limit'] = limit.as_dict()
            outcome.checks['limit_converged'] = limit.converged and limit.nonzero
        if spec['node_doubling']:
            fine = cls._energy_trace(context, spec, *context.ensemble(refined=True))
            deviation = node_doubling_deviation(trace, fine)
            outcome.result['node_doubling_deviation'] = deviation
            if 'node_doubling_tol' in spec:
                outcome.checks['node_doubling'] = deviation < spec['node_doubling_tol']
        outcome.files.append(context.write_trace(outcome.label, trace))
        context.traces[outcome.label] = trace

    @staticmethod
    def _run_dispersive(context, spec, outcome):
        data, ensemble = context.ensemble()
        if spec['q'] == 2.0:
            trace = plancherel_norm(data, ensemble, spec['quantity'])
        else:
            grid = None
            if data.layout == Layout.RADIAL and spec.get('r_max'):
                grid = np.linspace(0.0, spec['r_max'], spec['r_points'])
            trace = dispersive_trace(data, ensemble, spec['q'], spec['quantity'], grid)
        outcome.result.update({
            'quantity': str(spec['quantity']),
            'p': spec['p'],
            'q': 'inf' if np.isinf(spec['q']) else spec['q'],
            'initial': float(trace.values[0]),
            'final': float(trace.values[-1]),
            'warnings': trace.metadata.get('warnings', {}),
        })
        outcome.files.append(context.write_trace(outcome.label, trace))
        context.traces[outcome.label] = trace

    @staticmethod
    def _run_floquet(context, spec, outcome):
        profiles = context.profiles
        problem = HillProblem(profiles['speed'], profiles['damping'], profiles['mass'], spec.get('period'))
        intervals = instability_intervals(problem, spec['lambda_max'], spec['scan_points'], context.scan_tol,
                                          context.workers)
        lambdas = spec['lambda_max'] / spec['scan_points'] * np.arange(1, spec['scan_points'] + 1)
        samples = discriminant_scan(problem, lambdas, context.scan_tol, context.workers)
        context.counters['scan_samples'] += len(samples)
        path = context.output_dir / f'scan_{outcome.label}.csv'
        write_scan_csv(samples, path)
        outcome.files.append(path.name)
        excess = max(abs(sample.normalised) for sample in samples) - 2.0
        outcome.result.update({
            'period': problem.period,
            'intervals': [interval.as_dict() for interval in intervals],
            'max_excess': float(excess),
            'scan_points': spec['scan_points'],
        })
        if 'min_intervals' in spec:
            outcome.checks['min_intervals'] = len(intervals) >= spec['min_intervals']
        if 'max_intervals' in spec:
            outcome.checks['max_intervals'] = len(intervals) <= spec['max_intervals']
        if 'max_excess' in spec:
            outcome.checks['max_excess'] = excess <= spec['max_excess']

        demo_spec = spec.get('demo')
        if demo_spec:
            if not intervals:
                raise PreconditionError("no instability interval to support the growth data")
            interval = max(intervals, key=lambda item: item.max_growth_rate)
            demo = yagdjian_demo(problem, interval, demo_spec['horizon'], demo_spec['n_modes'],
                                 demo_spec['support_fraction'], tol=context.tol, workers=context.workers)
            outcome.result['growth'] = demo.as_dict()
            outcome.files.append(context.write_trace(f'{outcome.label}_growth', demo.trace))
            outcome.checks['growth_rate'] = demo.passed
            if 'min_diagnostic' in demo_spec:
                ratios = [ratio for _, ratio in demo.diagnostics]
                increasing = len(ratios) > 1 and ratios[-1] > ratios[len(ratios) // 2]
                outcome.checks['superpolynomial'] = demo.diagnostic > demo_spec['min_diagnostic'] and increasing

    @staticmethod
    def _run_diffusion(context, spec, outcome):
        damping = spec.get('profile') or context.profiles['damping']
        if spec['mode'] == DiffusionMode.EXPLICIT:
            surrogate = HeatSurrogate(spec['alpha'], spec['beta'])
        else:
            constants = estimate_alpha_beta(damping, levels=spec['levels'], workers=context.workers)
            surrogate = constants.surrogate
            outcome.result['constants'] = constants.as_dict()
            if 'expect_alpha' in spec:
                outcome.checks['alpha'] = abs(constants.alpha_hat - spec['expect_alpha']) <= spec['expect_tol']
            if 'expect_beta' in spec:
                outcome.checks['beta'] = abs(constants.beta_hat - spec['expect_beta']) <= spec['expect_tol']
            if spec['mode'] == DiffusionMode.ESTIMATE_ONLY:
                return
        outcome.result['surrogate'] = {'alpha': surrogate.alpha, 'beta': surrogate.beta}

        data, ensemble = context.ensemble()
        window = tuple(spec['window']) if spec.get('window') else None
        deficit = diffusion_deficit(data, ensemble, surrogate, spec['free_wave'], damping)
        solution = plancherel_norm(data, ensemble)
        gain = decay_gain(deficit, solution, window)
        outcome.result['gain'] = gain.as_dict()
        if 'min_gain' in spec:
            outcome.checks['gain'] = gain.gain >= spec['min_gain']
        control = None
        if spec.get('control_factor'):
            perturbed = diffusion_deficit(data, ensemble, surrogate.scaled(alpha_factor=spec['control_factor']),
                                          spec['free_wave'], damping)
            control = decay_gain(perturbed, solution, window)
            outcome.result['control'] = {'alpha_factor': spec['control_factor'], **control.as_dict()}
            if 'control_max_gain' in spec:
                outcome.checks['control_collapses'] = control.gain < spec['control_max_gain']
        outcome.files.append(context.write_trace(outcome.label, deficit))
        outcome.files.append(context.write_trace(f'{outcome.label}_solution', solution))
        context.traces[outcome.label] = deficit
        context.gains[outcome.label] = (gain, control)

    @staticmethod
    def _run_liouville(context, spec, outcome):
        shape = spec.get('profile') or context.profiles['speed']
        tol = context.tol_override or spec['tol']
        check = liouville_verify(shape, spec['lambda_spec'], ModeState(*spec['init']), spec['horizon'], tol)
        damping = liouville_damping(shape)
        t = max(spec['late_time'], damping.domain_start)
        late = 2.0 * float(damping.eval(t)) * (1.0 + t)
        outcome.result.update({'check': check.as_dict(), 'late': {'t': t, 'two_b_times_one_plus_t': late}})
        outcome.checks['two_routes'] = check.passed
        if 'max_residual' in spec:
            outcome.checks['max_residual'] = check.residual <= spec['max_residual']
        if 'late_limit' in spec:
            outcome.checks['late_limit'] = abs(late - spec['late_limit']) <= spec['late_tol']

    @staticmethod
    def _run_classify(context, spec, outcome):
        damping = context.profiles['damping']
        grid = time_points(spec['t_max'], spec['samples'])
        label, report = classify_dissipation(damping, grid)
        outcome.result.update({'classification': str(label), 'report': report.as_dict()})
        if isinstance(damping, SplitDamping):
            outcome.result['oscillation_primitive'] = check_bounded_primitive(damping, grid).as_dict()
        if 'expect' in spec:
            outcome.checks['classification'] = str(label) == spec['expect']

    @staticmethod
    def _run_stabilisation(context, spec, outcome):
        grid = time_points(spec['t_max'], spec['samples'])
        report = stabilisation_measure(context.profiles['speed'], spec['limit'], grid)
        outcome.result.update(report.as_dict())
        q_hat = report.fitted_exponent
        if 'exponent' in spec:
            outcome.checks['exponent'] = abs(q_hat - spec['exponent']) <= spec['tolerance']
        if 'max_exponent' in spec:
            outcome.checks['max_exponent'] = q_hat <= spec['max_exponent']

    @classmethod
    def _verify(cls, context, record, outcomes):
        label = record['analysis']
        outcome = outcomes[label]
        base = {'analysis': label, 'theorem_id': record['theorem_id'], 'tolerance': record['tolerance']}
        if outcome.failed:
            return {**base, 'pass': False, 'details': {'error': f"analysis {label} failed"}}
        analysis = next(spec for spec in context.scenario['analyses'] if spec['label'] == label)
        try:
            if record['theorem_id'] is None:
                prediction = no_prediction(record['note'] or 'no theorem covers this case', record_quantity(analysis))
            else:
                prediction = build_prediction(record, analysis, context.scenario['dimension'], context.profiles)
            if analysis['kind'] == AnalysisKind.DIFFUSION:
                return {**base, **cls._verify_gain(context, record, prediction)}
            return {**base, **cls._verify_trace(context, record, prediction, outcome)}
        except WaveLabError as exc:
            logger.warning("verification of %s against %s failed: %s", label, record['theorem_id'], exc)
            return {**base, 'pass': False, 'details': {'error': str(exc)}}

    @staticmethod
    def _clock(context, kind):
        kind = ClockKind(kind)
        if kind == ClockKind.POLY:
            return ClockFunction()
        if kind in (ClockKind.DAMPING_EXPONENTIAL, ClockKind.RECIPROCAL_DAMPING):
            return ClockFunction(kind, context.profiles['damping'])
        return ClockFunction(kind, context.profiles['speed'])

    @classmethod
    def _verify_trace(cls, context, record, prediction, outcome):
        trace = context.traces[outcome.label]
        window = tuple(record['window']) if record.get('window') else None
        clock = cls._clock(context, record['clock']) if record.get('clock') else None
        report = verify(trace, prediction, record['tolerance'], window, clock)
        data = report.as_dict()
        if prediction.kind == PredictionKind.RATE and prediction.extra_factor is None:
            try:
                data['details']['window_shift'] = window_shift_deviation(trace, clock or prediction.clock, window)
            except DegenerateWindow:
                data['details']['window_shift'] = None
        limit = outcome.result.get('scattering_limit')
        if prediction.kind == PredictionKind.LIMIT and limit is not None:
            data['details']['scattering_limit'] = limit
            data['pass'] = bool(data['pass'] and limit['converged'] and limit['nonzero'])
        return data

    @staticmethod
    def _verify_gain(context, record, prediction):
        """Diffusion statements are checked on the gain of the deficit over the solution decay."""
        gain, control = context.gains[record['analysis']]
        details = {'deficit': gain.deficit_fit.as_dict(), 'solution': gain.solution_fit.as_dict()}
        if prediction.kind == PredictionKind.NONE:
            predicted, passed = None, None
            details['note'] = prediction.note
        else:
            predicted = prediction.exponent
            if prediction.theorem_id == TheoremId.NISHIHARA_DIFFUSION:
                # the solution itself decays with the L^p-L^q part of the exponent
                predicted -= 1.5 * (1.0 / prediction.p - (0.0 if np.isinf(prediction.q) else 1.0 / prediction.q))
            passed = bool(gain.gain >= predicted - record['tolerance'])
        if control is not None:
            details['control_gain'] = control.gain
        return {
            'n': prediction.n, 'p': prediction.p, 'q': 'inf' if np.isinf(prediction.q) else prediction.q,
            'kind': 'gain', 'predicted': predicted, 'fitted': gain.gain, 'r2': gain.deficit_fit.r_squared,
            'window': list(gain.deficit_fit.window), 'pass': passed, 'details': details,
        }


def theorem_matrix():
    """theorem id -> bundled scenarios that check it."""
    matrix = {str(theorem_id): [] for theorem_id in theorem_catalog()}
    for name, scenario in catalog():
        if isinstance(scenario, ScenarioError):
            continue
        for record in scenario['verify']:
            if record['theorem_id'] is not None and name not in matrix[str(record['theorem_id'])]:
                matrix[str(record['theorem_id'])].append(name)
    return matrix
