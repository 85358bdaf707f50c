import json
import tempfile
from io import StringIO
from pathlib import Path

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings, tag

from coefficients.profiles import Constant, InverseDamping
from wave_lab.exceptions import ScenarioError

from .serializers import parse_scenario, time_points
from .services import ExitStatus, catalog, resolve_scenario
from .utils import flatten_errors, jsonable

FREE_WAVE = {
    'name': 'small_free_wave',
    'equation': {'speed': {'family': 'constant', 'params': {'c': 1}}},
    'dimension': 3,
    'data': {'width': 1.0, 'amplitude1': 1.0, 'amplitude2': 0.5},
    'frequency_grid': {'max': 4.0, 'count': 32, 'low_count': 8},
    'time_grid': {'t_max': 20.0, 'samples': 101, 'spacing': 'linear'},
    'analyses': [{'kind': 'energy', 'label': 'energy', 'conservation_tol': 1e-6}],
    'verify': [{'theorem_id': 'free_strichartz', 'analysis': 'energy', 'tolerance': 0.02}],
}


class ScenarioTestCase(SimpleTestCase):
    def setUp(self):
        workdir = tempfile.TemporaryDirectory()
        self.addCleanup(workdir.cleanup)
        self.workdir = Path(workdir.name)

    def write_scenario(self, document, name='scenario.json'):
        path = self.workdir / name
        path.write_text(document if isinstance(document, str) else json.dumps(document), encoding='utf-8')
        return path

    def run_command(self, document, out='out', **options):
        stdout = StringIO()
        call_command('run', scenario=str(self.write_scenario(document)), out=str(self.workdir / out), stdout=stdout,
                     **options)
        return stdout.getvalue()


class ParseScenarioTests(SimpleTestCase):
    def test_defaults(self):
        scenario = parse_scenario(json.dumps(FREE_WAVE))
        self.assertNotIn('tol', scenario)
        self.assertEqual(scenario['data']['layout'], 'radial')
        self.assertEqual(scenario['frequency_grid']['clustering'], 'geometric')
        self.assertEqual(scenario['verify'][0]['tolerance'], 0.02)
        self.assertIsInstance(scenario['equation']['profiles']['speed'], Constant)
        self.assertIsNone(scenario['equation']['profiles']['damping'])

    def test_numbers_as_strings(self):
        document = {**FREE_WAVE, 'equation': {
            'speed': {'family': 'constant', 'params': {'c': '1'}},
            'damping': {'family': 'inverse_damping', 'params': {'mu': '0.3'}},
        }}
        scenario = parse_scenario(json.dumps(document))
        self.assertIsInstance(scenario['equation']['profiles']['damping'], InverseDamping)

    def test_json_error_has_line_and_column(self):
        with self.assertRaises(ScenarioError) as raised:
            parse_scenario('{\n  "name": "broken",\n  oops\n}', 'broken.json')
        self.assertIn('broken.json:3:3:', str(raised.exception))

    def test_top_level_must_be_an_object(self):
        with self.assertRaises(ScenarioError):
            parse_scenario('[1, 2]')

    def test_diffusion_needs_damping(self):
        document = {**FREE_WAVE, 'analyses': [{'kind': 'diffusion', 'mode': 'explicit', 'alpha': 1, 'beta': 1}],
                    'verify': []}
        with self.assertRaises(ScenarioError) as raised:
            parse_scenario(json.dumps(document))
        self.assertIn('equation.damping', str(raised.exception))

    def test_damping_override_only_for_estimates(self):
        document = {**FREE_WAVE, 'verify': [], 'analyses': [{
            'kind': 'diffusion', 'mode': 'explicit', 'alpha': 1, 'beta': 1,
            'damping': {'family': 'constant', 'params': {'c': 0.5}},
        }]}
        with self.assertRaises(ScenarioError) as raised:
            parse_scenario(json.dumps(document))
        self.assertIn('analyses[0].damping', str(raised.exception))

    def test_unknown_family_names_the_field(self):
        document = {**FREE_WAVE, 'equation': {'speed': {'family': 'wobbly'}}}
        with self.assertRaises(ScenarioError) as raised:
            parse_scenario(json.dumps(document))
        self.assertIn('equation.speed', str(raised.exception))

    def test_verify_needs_a_known_trace(self):
        document = {**FREE_WAVE, 'verify': [{'theorem_id': 'free_strichartz', 'analysis': 'missing'}]}
        with self.assertRaises(ScenarioError) as raised:
            parse_scenario(json.dumps(document))
        self.assertIn('verify[0].analysis', str(raised.exception))

    def test_rate_fits_need_a_long_grid(self):
        document = {**FREE_WAVE, 'time_grid': {'t_max': 50.0, 'samples': 100, 't_first': 1.0}}
        with self.assertRaises(ScenarioError) as raised:
            parse_scenario(json.dumps(document))
        self.assertIn('time_grid.t_max', str(raised.exception))

    def test_inadmissible_exponents(self):
        document = {**FREE_WAVE, 'analyses': [{'kind': 'dispersive', 'label': 'ut', 'quantity': 'u_t'}],
                    'verify': [{'theorem_id': 'free_strichartz', 'analysis': 'ut', 'p': 1.5, 'q': 4}]}
        with self.assertRaises(ScenarioError) as raised:
            parse_scenario(json.dumps(document))
        self.assertIn('verify[0].theorem_id', str(raised.exception))

    def test_band_ratio_is_at_least_one(self):
        document = {**FREE_WAVE, 'analyses': [{'kind': 'energy', 'weight': 'action', 'band_max_ratio': 0.5}],
                    'verify': []}
        with self.assertRaises(ScenarioError) as raised:
            parse_scenario(json.dumps(document))
        self.assertIn('analyses[0].band_max_ratio', str(raised.exception))

    def test_duplicate_labels(self):
        document = {**FREE_WAVE, 'analyses': [{'kind': 'energy'}, {'kind': 'energy'}], 'verify': []}
        with self.assertRaises(ScenarioError):
            parse_scenario(json.dumps(document))

    def test_time_points(self):
        geometric = time_points(100.0, 5)
        self.assertEqual(geometric[0], 0.0)
        self.assertAlmostEqual(geometric[1], 1.0)
        self.assertAlmostEqual(geometric[-1], 100.0)
        self.assertEqual(len(time_points(10.0, 11, 'linear')), 11)


class UtilsTests(SimpleTestCase):
    def test_jsonable(self):
        self.assertEqual(jsonable({'a': float('inf'), 'b': [float('nan')], 'c': 2j}),
                         {'a': 'inf', 'b': ['nan'], 'c': {'re': 0.0, 'im': 2.0}})

    def test_flatten_errors(self):
        errors = {'equation': {'damping': ['required']}, 'analyses': {1: {'q': ['bad']}},
                  'non_field_errors': ['broken']}
        self.assertEqual(flatten_errors(errors),
                         ['equation.damping: required', 'analyses[1].q: bad', 'scenario: broken'])


class RunCommandTests(ScenarioTestCase):
    def test_free_wave_passes(self):
        output = self.run_command(FREE_WAVE, threads=2, export=['xlsx', 'pdf'])
        self.assertIn('all checks passed', output)
        out = self.workdir / 'out'
        report = json.loads((out / 'report.json').read_text(encoding='utf-8'))
        self.assertEqual(report['status'], 'success')
        self.assertEqual(report['data']['exit_code'], 0)
        self.assertEqual(report['data']['schema_version'], settings.WAVE_LAB['REPORT_SCHEMA_VERSION'])
        self.assertTrue(report['data']['verification'][0]['pass'])
        self.assertEqual(report['data']['files'], ['trace_energy.csv'])
        for name in ('trace_energy.csv', 'run_meta.json', 'plot_traces.py', 'report.xlsx', 'report.pdf'):
            self.assertTrue((out / name).is_file(), name)
        meta = json.loads((out / 'run_meta.json').read_text(encoding='utf-8'))
        self.assertEqual(meta['threads'], 2)

    def test_energy_band_and_action(self):
        document = {**FREE_WAVE, 'verify': [], 'analyses': [
            {'kind': 'energy', 'label': 'energy', 'band_max_ratio': 1.001},
            {'kind': 'energy', 'label': 'action', 'weight': 'action', 'conservation_tol': 1e-6},
        ]}
        self.run_command(document)
        report = json.loads((self.workdir / 'out' / 'report.json').read_text(encoding='utf-8'))
        energy = report['data']['analyses']['energy']['data']
        action = report['data']['analyses']['action']['data']
        band = energy['result']['band']
        self.assertLessEqual(band['c1'], 1.0)
        self.assertGreaterEqual(band['c2'], 1.0)
        self.assertEqual(energy['result']['ratio_bounds'], [band['c1'], band['c2']])
        self.assertEqual(energy['checks'], {'band': True})
        # a ≡ 1: the action is the energy
        self.assertAlmostEqual(action['result']['initial_energy'], energy['result']['initial_energy'],
                               delta=1e-12 * energy['result']['initial_energy'])

    def test_failed_verification(self):
        document = {**FREE_WAVE, 'verify': [{'theorem_id': 'wirth_periodic', 'analysis': 'energy'}]}
        with self.assertRaises(CommandError) as raised:
            self.run_command(document)
        self.assertEqual(raised.exception.returncode, ExitStatus.VERIFICATION_FAILED)
        report = json.loads((self.workdir / 'out' / 'report.json').read_text(encoding='utf-8'))
        self.assertEqual(report['status'], 'error')
        self.assertFalse(report['data']['verification'][0]['pass'])

    def test_failed_check(self):
        document = {**FREE_WAVE, 'analyses': [{'kind': 'energy', 'label': 'energy', 'conservation_tol': 0.0}]}
        with self.assertRaises(CommandError) as raised:
            self.run_command(document)
        self.assertEqual(raised.exception.returncode, ExitStatus.VERIFICATION_FAILED)

    def test_exploratory_record_does_not_fail(self):
        document = {**FREE_WAVE, 'verify': [{'theorem_id': None, 'analysis': 'energy', 'note': 'no statement'}]}
        self.run_command(document)
        report = json.loads((self.workdir / 'out' / 'report.json').read_text(encoding='utf-8'))
        self.assertIsNone(report['data']['verification'][0]['pass'])

    def test_validation_error_writes_nothing(self):
        document = {**FREE_WAVE, 'analyses': [{'kind': 'classify'}], 'verify': []}
        with self.assertRaises(CommandError) as raised:
            self.run_command(document)
        self.assertEqual(raised.exception.returncode, ExitStatus.INVALID)
        self.assertIn('equation.damping', str(raised.exception))
        self.assertFalse((self.workdir / 'out').exists())

    def test_parse_error(self):
        with self.assertRaises(CommandError) as raised:
            self.run_command('{"name": "x",\n "equation": }')
        self.assertEqual(raised.exception.returncode, ExitStatus.INVALID)
        self.assertIn(':2:14:', str(raised.exception))

    def test_bad_options(self):
        with self.assertRaises(CommandError) as raised:
            self.run_command(FREE_WAVE, threads=0)
        self.assertEqual(raised.exception.returncode, ExitStatus.INVALID)
        with self.assertRaises(CommandError) as raised:
            self.run_command(FREE_WAVE, tol_override=1e-2)
        self.assertEqual(raised.exception.returncode, ExitStatus.INVALID)

    def test_unknown_scenario(self):
        with self.assertRaises(CommandError) as raised:
            call_command('run', scenario='no_such_scenario', stdout=StringIO())
        self.assertEqual(raised.exception.returncode, ExitStatus.INVALID)

    def test_analysis_failure_is_reported(self):
        document = {**FREE_WAVE, 'verify': [], 'time_grid': {'t_max': 5.0, 'samples': 11, 'spacing': 'linear'},
                    'analyses': [{'kind': 'energy', 'label': 'energy', 'limit': True}]}
        with self.assertRaises(CommandError) as raised:
            self.run_command(document)
        self.assertEqual(raised.exception.returncode, ExitStatus.NUMERIC_FAILURE)
        report = json.loads((self.workdir / 'out' / 'report.json').read_text(encoding='utf-8'))
        entry = report['data']['analyses']['energy']
        self.assertEqual(entry['status'], 'error')
        self.assertEqual(entry['errors']['type'], 'DegenerateWindow')

    @override_settings(WAVE_LAB={**settings.WAVE_LAB, 'CHUNK_SIZE': 8})
    def test_outputs_do_not_depend_on_threads(self):
        self.run_command(FREE_WAVE, out='one', threads=1)
        self.run_command(FREE_WAVE, out='four', threads=4)
        for name in ('report.json', 'trace_energy.csv'):
            self.assertEqual((self.workdir / 'one' / name).read_bytes(), (self.workdir / 'four' / name).read_bytes())


class CatalogTests(SimpleTestCase):
    def test_every_bundled_scenario_validates(self):
        entries = catalog()
        self.assertGreaterEqual(len(entries), 12)
        for name, scenario in entries:
            self.assertNotIsInstance(scenario, ScenarioError, name)
            self.assertEqual(scenario['name'], name)

    def test_resolve_by_name(self):
        self.assertEqual(resolve_scenario('noneffective_mu03').name, 'noneffective_mu03.json')
        with self.assertRaises(ScenarioError):
            resolve_scenario('no_such_scenario')

    def test_list(self):
        stdout = StringIO()
        call_command('list', stdout=stdout)
        self.assertIn('noneffective_mu03', stdout.getvalue())
        count = int(stdout.getvalue().strip().splitlines()[-1].split()[0])
        self.assertGreaterEqual(count, 12)

    def test_describe(self):
        stdout = StringIO()
        call_command('describe', 'hirosawa_nakazawa', stdout=stdout)
        self.assertIn('t²E(t) → 0', stdout.getvalue())
        self.assertIn('over-damping', stdout.getvalue())
        self.assertIn('overdamping_mu2', stdout.getvalue())

    def test_describe_matrix(self):
        stdout = StringIO()
        call_command('describe', stdout=stdout)
        self.assertIn('wirth_noneffective', stdout.getvalue())
        self.assertIn('noneffective_mu03', stdout.getvalue())

    def test_describe_unknown(self):
        with self.assertRaises(CommandError) as raised:
            call_command('describe', 'no_such_theorem', stdout=StringIO())
        self.assertEqual(raised.exception.returncode, ExitStatus.INVALID)


@tag('slow')
class BundledScenarioTests(ScenarioTestCase):
    def run_bundled(self, name):
        call_command('run', scenario=name, out=str(self.workdir / name), stdout=StringIO())
        return json.loads((self.workdir / name / 'report.json').read_text(encoding='utf-8'))['data']

    def assertVerified(self, record, expected, delta):
        self.assertAlmostEqual(record['fitted'], expected, delta=delta)
        self.assertTrue(record['pass'])

    def assertChecksPass(self, data, names):
        checks = {check['check']: check['pass'] for check in data['checks']}
        self.assertTrue(set(names) <= set(checks), checks)
        self.assertTrue(all(checks.values()), checks)

    def test_noneffective_rate(self):
        data = self.run_bundled('noneffective_mu03')
        record = data['verification'][0]
        self.assertVerified(record, 0.6, 0.05)
        limit = data['analyses']['energy']['data']['result']['scattering_limit']
        self.assertTrue(limit['converged'])
        self.assertTrue(limit['nonzero'])
        self.assertEqual(record['details']['scattering_limit'], limit)

    def test_modulated_noneffective_rate(self):
        self.assertVerified(self.run_bundled('modulated_noneffective')['verification'][0], 0.6, 0.1)

    def test_over_damping_vanishes(self):
        data = self.run_bundled('overdamping_mu2')
        self.assertTrue(data['verification'][0]['pass'])
        self.assertChecksPass(data, ['classification'])

    def test_two_sided_bound(self):
        data = self.run_bundled('logsine_two_sided')
        action, energy = data['verification']
        self.assertLessEqual(abs(action['fitted']), 0.02)
        self.assertTrue(action['pass'])
        self.assertIsNone(energy['pass'])
        self.assertGreater(abs(energy['fitted']), 0.02)
        band = data['analyses']['energy']['data']['result']['band']
        self.assertLess(band['c1'], 1.0)
        self.assertLessEqual(band['spread'], 3.5)
        self.assertLessEqual(data['analyses']['action']['data']['result']['band']['spread'], 1.1)
        self.assertChecksPass(data, ['band'])

    def test_effective_dissipation(self):
        record = self.run_bundled('effective_power_damping')['verification'][0]
        self.assertAlmostEqual(record['predicted'], 1.75)
        self.assertVerified(record, 1.75, 0.1)

    def test_free_dispersive_rate(self):
        data = self.run_bundled('free_dispersive_linf')
        self.assertVerified(data['verification'][0], 1.0, 0.1)
        self.assertIn('warnings', data['analyses']['ut_sup']['data']['result'])

    def test_matsumura_rate(self):
        self.assertVerified(self.run_bundled('matsumura_constant')['verification'][0], 0.75, 0.1)

    def test_diffusion_gain(self):
        for name in ('diffusion_constant', 'diffusion_periodic'):
            with self.subTest(name):
                data = self.run_bundled(name)
                for record in data['verification']:
                    self.assertGreaterEqual(record['fitted'], 0.9)
                    self.assertTrue(record['pass'])
                self.assertChecksPass(data, [])

    def test_mathieu_growth(self):
        data = self.run_bundled('mathieu_growth')
        self.assertChecksPass(data, ['min_intervals', 'growth_rate', 'superpolynomial'])
        for interval in data['analyses']['tongues']['data']['result']['intervals']:
            self.assertAlmostEqual(interval['max_relative_growth_rate'], interval['max_growth_rate'], delta=1e-8)

    def test_borg_scans(self):
        self.assertChecksPass(self.run_bundled('borg_constant_speed'), ['max_excess', 'max_intervals'])
        self.assertChecksPass(self.run_bundled('borg_periodic_speed'), ['min_intervals'])

    def test_stabilisation_measures(self):
        for name in ('stabilisation_sine_power', 'stabilisation_bump_sum'):
            with self.subTest(name):
                data = self.run_bundled(name)
                self.assertTrue(data['checks'])
                self.assertChecksPass(data, [])

    def test_free_wave_conservation(self):
        data = self.run_bundled('free_wave_conservation')
        self.assertChecksPass(data, ['conservation', 'node_doubling'])
        self.assertTrue(data['verification'][0]['pass'])

    def test_estimator_constants(self):
        checks = self.run_bundled('estimator_constants')['checks']
        self.assertEqual(len(checks), 6)
        self.assertTrue(all(check['pass'] for check in checks))

    def test_liouville(self):
        checks = self.run_bundled('liouville_power_shape')['checks']
        self.assertTrue(all(check['pass'] for check in checks))


class SelfTestCommandTests(SimpleTestCase):
    def test_quick_checks(self):
        stdout = StringIO()
        call_command('selftest', only=['power_fit', 'thread_count_invariance'], stdout=stdout)
        self.assertIn('2 self-checks passed', stdout.getvalue())
