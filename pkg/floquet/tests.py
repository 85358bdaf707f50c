from math import log, pi

import numpy as np
from django.test import SimpleTestCase, tag

from coefficients.profiles import Constant, InverseDamping, PeriodicDamping, PeriodicSpeed
from wave_lab.exceptions import PreconditionError

from .services import (
    DiscriminantSample,
    HillProblem,
    InstabilityInterval,
    discriminant_scan,
    growth_rate,
    instability_intervals,
    monodromy,
    scan_dataframe,
    yagdjian_demo,
)

MATHIEU = HillProblem(PeriodicSpeed(1.0, 0.4, 2 * pi))


class HillProblemTests(SimpleTestCase):
    def test_period_from_profiles(self):
        self.assertAlmostEqual(MATHIEU.period, 2 * pi)
        self.assertEqual(HillProblem(Constant(2.0), period=3.0).period, 3.0)

    def test_invalid_problems(self):
        with self.assertRaises(PreconditionError):
            HillProblem(Constant(1.0))
        with self.assertRaises(PreconditionError):
            HillProblem(Constant(1.0), damping=InverseDamping(0.3), period=1.0)
        with self.assertRaises(PreconditionError):
            HillProblem(PeriodicSpeed(1.0, 0.4, 2 * pi), damping=PeriodicDamping(0.5, 0.1, pi))


class MonodromyTests(SimpleTestCase):
    def test_constant_speed_discriminant(self):
        c, period = 2.0, 3.0
        problem = HillProblem(Constant(c), period=period)
        for lam in (0.0, 0.3, 1.7):
            expected = 2 * np.cos(c * np.sqrt(lam) * period)
            self.assertAlmostEqual(monodromy(problem, lam).trace, expected, delta=1e-8)

    def test_zero_frequency(self):
        np.testing.assert_allclose(monodromy(MATHIEU, 0.0).entries, [[1.0, 2 * pi], [0.0, 1.0]], atol=1e-9)

    def test_unimodular_without_damping(self):
        for sample in discriminant_scan(MATHIEU, np.linspace(0.01, 3.0, 30)):
            self.assertAlmostEqual(sample.det_monodromy, 1.0, delta=1e-8)

    def test_first_tongue_is_unstable(self):
        sample = discriminant_scan(MATHIEU, [0.25])[0]
        self.assertGreater(abs(sample.discriminant), 2.0)
        self.assertTrue(sample.unstable)

    def test_scan_is_continuous(self):
        coarse = discriminant_scan(MATHIEU, np.linspace(0.01, 3.0, 200))
        values = np.array([sample.discriminant for sample in coarse])
        self.assertLess(np.max(np.abs(np.diff(values))), 0.5)

    def test_damped_reference(self):
        problem = HillProblem(Constant(1.0), damping=PeriodicDamping(0.05, 0.02, 2 * pi))
        sample = discriminant_scan(problem, [0.0])[0]
        self.assertTrue(sample.unstable)
        self.assertAlmostEqual(sample.growth_rate, 0.0, delta=1e-9)
        self.assertGreater(sample.relative_growth_rate, 0.0)

    def test_scan_frame(self):
        frame = scan_dataframe(discriminant_scan(MATHIEU, [0.1, 0.2]))
        self.assertEqual(list(frame.columns), ['lambda', 'discriminant', 'det', 'growth_rate'])
        self.assertEqual(len(frame), 2)

    def test_negative_lambda(self):
        with self.assertRaises(PreconditionError):
            monodromy(MATHIEU, -1.0)


class GrowthRateTests(SimpleTestCase):
    def test_quadratic_formula(self):
        self.assertAlmostEqual(DiscriminantSample(0.0, 2.5, 1.0, 3.0).growth_rate, log(2.0) / 3.0)
        self.assertEqual(DiscriminantSample(0.0, -1.2, 1.0, 3.0).growth_rate, 0.0)

    def test_stable_is_zero(self):
        self.assertEqual(growth_rate(HillProblem(Constant(1.0), period=2.0), 0.7), 0.0)

    def test_matches_iterated_monodromy(self):
        nu = growth_rate(MATHIEU, 0.25)
        self.assertGreater(nu, 0.0)
        matrix = monodromy(MATHIEU, 0.25).entries
        n = np.arange(5, 21)
        norms = [np.log(np.linalg.norm(np.linalg.matrix_power(matrix, k))) for k in n]
        slope = np.polyfit(n * MATHIEU.period, norms, 1)[0]
        self.assertLess(abs(slope - nu) / nu, 0.01)


class InstabilityIntervalTests(SimpleTestCase):
    def test_constant_speed_has_none(self):
        self.assertEqual(instability_intervals(HillProblem(Constant(1.0), period=2 * pi), 5.0, 100), [])

    def test_mathieu_first_tongue(self):
        intervals = instability_intervals(MATHIEU, 1.5, 150)
        self.assertTrue(intervals)
        first = intervals[0]
        self.assertLess(first.lower, 0.25)
        self.assertGreater(first.upper, 0.25)
        self.assertGreater(first.lower, 0.18)
        self.assertLess(first.upper, 0.34)
        for interval in intervals:
            self.assertLess(interval.lower, interval.upper)
            self.assertGreater(interval.max_growth_rate, 0.0)
            self.assertAlmostEqual(interval.max_relative_growth_rate, interval.max_growth_rate, delta=1e-8)
            for endpoint in (interval.lower, interval.upper):
                sample = discriminant_scan(MATHIEU, [endpoint])[0]
                self.assertAlmostEqual(abs(sample.discriminant), 2.0, delta=1e-7)
        for left, right in zip(intervals, intervals[1:]):
            self.assertLessEqual(left.upper, right.lower)

    def test_damped_peak_reports_both_rates(self):
        problem = HillProblem(PeriodicSpeed(1.0, 0.4, 2 * pi), damping=PeriodicDamping(0.01, 0.005, 2 * pi))
        intervals = instability_intervals(problem, 0.5, 100)
        first = next(interval for interval in intervals if interval.lower < 0.25 < interval.upper)
        sample = discriminant_scan(problem, [first.peak_lambda])[0]
        self.assertAlmostEqual(first.max_growth_rate, log(sample.spectral_radius) / problem.period, delta=1e-10)
        self.assertAlmostEqual(first.max_relative_growth_rate - first.max_growth_rate, 0.01, delta=1e-7)
        self.assertEqual(first.as_dict()['max_relative_growth_rate'], first.max_relative_growth_rate)

    def test_truncation_is_flagged(self):
        with self.assertLogs('floquet.services', 'WARNING'):
            intervals = instability_intervals(MATHIEU, 0.25, 100)
        self.assertTrue(intervals[-1].truncated)

    def test_preconditions(self):
        with self.assertRaises(PreconditionError):
            instability_intervals(MATHIEU, 1.0, 50)
        with self.assertRaises(PreconditionError):
            instability_intervals(MATHIEU, 0.0, 100)


class GrowthDemoTests(SimpleTestCase):
    def test_preconditions(self):
        with self.assertRaises(PreconditionError):
            yagdjian_demo(MATHIEU, InstabilityInterval(0.1, 0.2, 0.0, 0.15), 40 * pi)
        with self.assertRaises(PreconditionError):
            yagdjian_demo(MATHIEU, InstabilityInterval(0.2, 0.3, 0.05, 0.25), 4 * pi)

    @tag('slow')
    def test_energy_grows_at_twice_the_floquet_rate(self):
        interval = instability_intervals(MATHIEU, 1.0, 100)[0]
        result = yagdjian_demo(MATHIEU, interval, 40 * pi)
        self.assertLessEqual(result.relative_error, 0.02)
        self.assertGreater(result.diagnostic, 2.0)
        ratios = dict(result.diagnostics)
        self.assertGreater(ratios[result.trace.times[-1]], ratios[result.trace.times[len(result.trace.times) // 2]])
