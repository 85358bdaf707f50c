from math import e, pi

import numpy as np
from django.test import SimpleTestCase
from scipy import integrate

from wave_lab.exceptions import CoefficientDomainError, OrderExceeded

from .bump import bump, bump_integral, bump_normalisation
from .conditions import (
    DissipationClass,
    Verdict,
    check_bounded_primitive,
    check_shape_admissibility,
    check_symbol_class,
    classify_dissipation,
    stabilisation_measure,
)
from .profiles import (
    BumpSum,
    Constant,
    InverseDamping,
    LogModulatedDamping,
    LogSine,
    ModulatedDamping,
    PeriodicDamping,
    PeriodicSpeed,
    PowerDamping,
    PowerShape,
    Product,
    Role,
    SinePower,
    build_profile,
)
from .serializers import CoefficientSpecSerializer


def central_difference(func, t, h):
    return (func(t + h) - func(t - h)) / (2 * h)


class ProfileEvaluationTests(SimpleTestCase):
    def test_closed_form_values(self):
        self.assertEqual(Constant(2).eval(5.0, 0), 2.0)
        self.assertEqual(Constant(2).eval(5.0, 1), 0.0)
        self.assertAlmostEqual(PowerShape(1).eval(3.0, 0), 4.0, places=14)
        self.assertAlmostEqual(PowerShape(1).eval(3.0, 1), 1.0, places=14)
        self.assertAlmostEqual(SinePower(2, 1, 0.5).eval(pi ** 2, 0), 2.0, places=12)

    def test_bump_sum_is_one_between_bumps(self):
        profile = BumpSum(0.7, 0.4, 8)
        # first bump covers [2, 2 + 2^0.4], second starts at 4
        self.assertEqual(profile.eval(3.5, 0), 1.0)
        self.assertEqual(profile.eval(3.5, 2), 0.0)

    def test_array_in_array_out(self):
        values = LogSine(2, 1).eval(np.array([0.0, 1.0, 10.0]))
        self.assertEqual(values.shape, (3,))
        self.assertAlmostEqual(values[0], 2.0 + np.sin(1.0), places=14)

    def test_order_exceeded(self):
        with self.assertRaises(OrderExceeded):
            SinePower(2, 1, 0.5).eval(1.0, 5)
        with self.assertRaises(OrderExceeded):
            LogModulatedDamping().eval(1.0, 2)

    def test_negative_time_is_a_domain_error(self):
        with self.assertRaises(CoefficientDomainError):
            Constant(1).eval(-0.5)
        with self.assertRaises(CoefficientDomainError):
            InverseDamping(0.3).primitive(np.array([1.0, -1.0]))

    def test_positivity_is_enforced(self):
        with self.assertRaises(ValueError):
            LogSine(1, 1)
        with self.assertRaises(ValueError):
            PeriodicDamping(0.2, 0.3, 1.0)
        with self.assertRaises(ValueError):
            PeriodicSpeed(1, 1.2, 2 * pi)
        with self.assertRaises(ValueError):
            PowerDamping(1.0)

    def test_periodic_families_repeat(self):
        grid = np.linspace(0.0, 50.0, 301)
        for profile in (PeriodicSpeed(1, 0.4, 2 * pi), PeriodicDamping(0.5, 0.3, 2 * pi), PeriodicDamping(1, 0.5, 1.3)):
            for k in range(profile.max_derivative_order + 1):
                here = profile.eval(grid, k)
                there = profile.eval(grid + profile.period, k)
                np.testing.assert_array_less(np.abs(there - here), 1e-12 * (1 + np.abs(here)))

    def test_periodic_speed_squares_exactly(self):
        profile = PeriodicSpeed(1, 0.4, 2 * pi)
        t = np.linspace(0.0, 10.0, 11)
        np.testing.assert_allclose(profile.squared(t), 1 + 0.4 * np.cos(t), rtol=1e-15, atol=1e-15)

    def test_derivatives_match_central_differences(self):
        cases = [
            (LogSine(2, 1), [0.5, 3.0, 40.0]),
            (SinePower(2, 1, 0.5), [2.0, 9.0, 50.0]),
            (ModulatedDamping(0.6, 0.5), [2.0, 9.0, 50.0]),
            (PeriodicSpeed(1, 0.4, 2 * pi), [0.3, 2.0, 7.0]),
            (PowerDamping(0.5), [1.0, 10.0]),
            (InverseDamping(0.3), [1.0, 10.0]),
            (BumpSum(0.7, 0.4, 4), [4.6, 4.9, 8.9]),
            (LogModulatedDamping(), [1.0, 30.0]),
            (Product(PowerShape(1), LogSine(2, 1), role=Role.SPEED), [1.0, 20.0]),
        ]
        h = 1e-4
        for profile, times in cases:
            for k in range(profile.max_derivative_order):
                for t in times:
                    exact = profile.eval(t, k + 1)
                    approx = central_difference(lambda s: profile.eval(s, k), t, h)
                    self.assertLessEqual(
                        abs(approx - exact), 1e-6 * max(1.0, abs(exact)),
                        msg=f"{profile!r} k={k} t={t}",
                    )

    def test_primitive_matches_values(self):
        h = 1e-3
        for profile in (LogSine(2, 1), SinePower(2, 1, 0.5), PeriodicDamping(0.5, 0.3, 2 * pi),
                        ModulatedDamping(0.6, 0.5), PowerDamping(0.5), BumpSum(0.7, 0.4, 4)):
            for t in (1.0, 4.5, 17.0):
                slope = central_difference(profile.primitive, t, h)
                self.assertLessEqual(abs(slope - profile.eval(t)), 1e-6 * abs(profile.eval(t)),
                                     msg=f"{profile!r} t={t}")

    def test_primitive_examples(self):
        self.assertAlmostEqual(PowerShape(1).primitive(1.0), 2.5, places=13)
        self.assertAlmostEqual(InverseDamping(0.3).primitive(e - 1), 0.3, places=13)
        self.assertAlmostEqual(Constant(1, role=Role.SHAPE).primitive(3.0), 4.0, places=14)

    def test_one_bump_integrates_to_half_height_times_width(self):
        profile = BumpSum(0.7, 0.4, 8)
        start, width, height = profile.centres[1], profile.widths[1], profile.heights[1]
        gain = profile.primitive(start + width) - profile.primitive(start)
        self.assertAlmostEqual(gain, width + height * width / 2, places=9)

    def test_reciprocal_primitive(self):
        self.assertAlmostEqual(InverseDamping(0.5).reciprocal_primitive(2.0), 4.0 / 0.5, places=12)
        self.assertAlmostEqual(PowerDamping(0.5).reciprocal_primitive(3.0), (8.0 - 1.0) / 1.5, places=12)
        self.assertAlmostEqual(Constant(2.0, role=Role.DAMPING).reciprocal_primitive(3.0), 1.5, places=14)

    def test_shape_inverse_primitive(self):
        shape = PowerShape(1)
        for target in (1.0, 2.5, 1e4):
            self.assertAlmostEqual(shape.primitive(shape.inverse_primitive(target)), target,
                                   delta=1e-10 * (1 + target))
        generic = Constant(2.0, role=Role.SHAPE)
        self.assertAlmostEqual(generic.inverse_primitive(7.0), 3.0, places=10)

    def test_build_profile(self):
        profile = build_profile({'family': 'periodic_speed', 'params': {'c0': 1, 'eps': 0.4, 'T': 2 * pi}})
        self.assertIsInstance(profile, PeriodicSpeed)
        self.assertAlmostEqual(profile.period, 2 * pi)
        product = build_profile({'family': 'product', 'params': {'factors': [
            {'family': 'power_shape', 'params': {'ell': 1}},
            {'family': 'log_sine', 'params': {'c0': 2, 'c1': 1}},
        ]}})
        self.assertAlmostEqual(product.eval(3.0), 4.0 * LogSine(2, 1).eval(3.0), places=13)
        with self.assertRaises(ValueError):
            build_profile({'family': 'constant', 'params': {'c': 1}, 'period': 2.0})


class BumpTests(SimpleTestCase):
    def test_normalisation(self):
        value, _ = integrate.quad(lambda s: float(bump(np.array([s]))[0]), 0.0, 1.0, epsabs=1e-14)
        self.assertAlmostEqual(value, 0.5, places=10)
        self.assertAlmostEqual(float(bump_integral(np.array(1.0))), 0.5, places=15)
        self.assertGreater(bump_normalisation(), 0)

    def test_vanishes_outside_support(self):
        np.testing.assert_array_equal(bump(np.array([-1.0, 0.0, 1.0, 2.0]), 3), np.zeros(4))

    def test_symmetry(self):
        s = np.array([0.1, 0.3, 0.45])
        np.testing.assert_allclose(bump(s), bump(1 - s), rtol=1e-12)
        np.testing.assert_allclose(bump(s, 1), -bump(1 - s, 1), rtol=1e-10)


class ConditionTests(SimpleTestCase):
    grid = np.geomspace(1.0, 1e4, 400)

    def test_constant_has_zero_symbol_constants(self):
        for weight in ('inv_t', 'shape_ratio'):
            report = check_symbol_class(Constant(2), weight, 3, self.grid, shape=PowerShape(0))
            self.assertEqual(report.constants, {1: 0.0, 2: 0.0, 3: 0.0})
            self.assertEqual(report.verdict, Verdict.SATISFIED)

    def test_log_sine_symbol_class(self):
        report = check_symbol_class(LogSine(2, 1), 'inv_t', 2, self.grid)
        self.assertLessEqual(report.constants[1], 1.0)
        self.assertEqual(report.verdict, Verdict.SATISFIED)

    def test_sine_power_second_order_constant_grows(self):
        short = check_symbol_class(SinePower(2, 1, 0.5), 'inv_t', 2, np.geomspace(1.0, 1e2, 400))
        long = check_symbol_class(SinePower(2, 1, 0.5), 'inv_t', 2, self.grid)
        self.assertGreater(long.constants[2], 10 * short.constants[2])

    def test_damping_symbol_class_with_offset(self):
        report = check_symbol_class(InverseDamping(0.3), 'inv_t', 3, self.grid, offset=1.0)
        self.assertAlmostEqual(report.constants[0], 0.3, places=12)
        self.assertAlmostEqual(report.constants[2], 0.6, places=12)

    def test_symbol_class_reports_ratio_bounds(self):
        speed = Product(PowerShape(1), LogSine(2, 1), role=Role.SPEED)
        report = check_symbol_class(speed, 'shape_ratio', 2, self.grid, shape=PowerShape(1))
        lower, upper = report.extras['observed_ratio_bounds']
        self.assertGreaterEqual(lower, 1.0 - 1e-12)
        self.assertLessEqual(upper, 3.0 + 1e-12)

    def test_stabilisation_of_constant(self):
        report = stabilisation_measure(Constant(2), 2.0, np.linspace(0, 100, 50))
        self.assertEqual(report.fitted_exponent, float('-inf'))
        self.assertEqual(report.verdict, Verdict.SATISFIED)

    def test_stabilisation_violated_for_sine_power(self):
        grid = np.concatenate(([0.0], np.geomspace(1.0, 1e4, 300)))
        report = stabilisation_measure(SinePower(2, 1, 0.5), 2.0, grid)
        self.assertAlmostEqual(report.fitted_exponent, 1.0, delta=0.05)
        self.assertEqual(report.verdict, Verdict.VIOLATED)

    def test_stabilisation_of_bump_sum(self):
        grid = np.concatenate(([0.0], np.geomspace(1.0, 2.0 ** 11, 400)))
        report = stabilisation_measure(BumpSum(0.7, 0.4, 10), 1.0, grid)
        self.assertLessEqual(report.fitted_exponent, 0.45)
        self.assertEqual(report.verdict, Verdict.SATISFIED)

    def test_classify_dissipation(self):
        cases = [
            (InverseDamping(0.3), DissipationClass.NON_EFFECTIVE),
            (PowerDamping(0.5), DissipationClass.EFFECTIVE),
            (InverseDamping(2.0), DissipationClass.OVER_DAMPING),
        ]
        for damping, expected in cases:
            label, report = classify_dissipation(damping, self.grid)
            self.assertEqual(label, expected, msg=repr(damping))
            self.assertEqual(report.samples['tb'].shape, self.grid.shape)

    def test_classify_needs_three_decades(self):
        label, report = classify_dissipation(InverseDamping(0.3), np.linspace(1, 50, 100))
        self.assertEqual(label, DissipationClass.INCONCLUSIVE)
        self.assertTrue(report.warnings)

    def test_power_shape_admissibility(self):
        for ell in (0.5, 1.0, 2.0):
            report = check_shape_admissibility(PowerShape(ell), self.grid)
            lower, upper = report.extras['bounds']
            self.assertGreater(lower, 0)
            self.assertLess(upper, 2)
            self.assertAlmostEqual(report.extras['limsup_estimate'], ell / (ell + 1), delta=0.05)
            self.assertEqual(report.verdict, Verdict.SATISFIED)

    def test_oscillating_part_has_bounded_primitive(self):
        grid = np.concatenate(([0.0], np.geomspace(1e-2, 1e4, 400)))
        report = check_bounded_primitive(ModulatedDamping(0.6, 0.5), grid)
        self.assertEqual(report.verdict, Verdict.SATISFIED)
        self.assertLess(report.constants[0], 2.0)


class CoefficientSpecSerializerTests(SimpleTestCase):
    def test_decimal_strings_are_accepted(self):
        serializer = CoefficientSpecSerializer(data={'family': 'inverse_damping', 'params': {'mu': '0.3'}})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertIsInstance(serializer.validated_data['profile'], InverseDamping)
        self.assertEqual(serializer.validated_data['spec']['params'], {'mu': 0.3})

    def test_nested_product(self):
        serializer = CoefficientSpecSerializer(data={'family': 'product', 'params': {'factors': [
            {'family': 'power_shape', 'params': {'ell': '1'}},
            {'family': 'constant', 'params': {'c': '2'}},
        ]}})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertAlmostEqual(serializer.validated_data['profile'].eval(1.0), 4.0)

    def test_invalid_entries(self):
        self.assertIn('family', self._errors({'family': 'airy', 'params': {}}))
        self.assertIn('params', self._errors({'family': 'log_sine', 'params': {'c0': 1, 'c1': 2}}))
        self.assertIn('params', self._errors({'family': 'constant', 'params': {'c': 'two'}}))
        self.assertIn('params', self._errors({'family': 'constant', 'params': {'speed': 1}}))

    def _errors(self, data):
        serializer = CoefficientSpecSerializer(data=data)
        self.assertFalse(serializer.is_valid())
        return serializer.errors
