import numpy as np
from django.test import SimpleTestCase

from coefficients.profiles import InverseDamping, PowerDamping
from spectral.services import EnergyTrace
from wave_lab.exceptions import DegenerateWindow, InadmissibleExponents, PreconditionError

from .services import (
    ClockFunction,
    ClockKind,
    PredictionKind,
    clock_slope,
    fit_power_decay,
    no_prediction,
    predict,
    scattering_limit,
    theorem_for_inverse_damping,
    verify,
    window_shift_deviation,
)
from .theorems import TheoremId, theorem_catalog

TIMES = np.linspace(0.0, 1000.0, 2001)


def trace(values, times=TIMES):
    return EnergyTrace(times, values)


class FitTests(SimpleTestCase):
    def test_exact_power_law(self):
        fit = fit_power_decay(trace(7 * (1 + TIMES) ** -2.0))
        self.assertAlmostEqual(fit.exponent, 2.0, delta=1e-9)
        self.assertAlmostEqual(fit.r_squared, 1.0, delta=1e-12)
        self.assertAlmostEqual(fit.window[1], 1000.0)

    def test_law_in_the_damping_clock(self):
        damping = InverseDamping(0.3)
        clock = ClockFunction(ClockKind.DAMPING_EXPONENTIAL, damping)
        values = 3 * clock(TIMES) ** -2.0
        self.assertAlmostEqual(fit_power_decay(trace(values), clock).exponent, 2.0, delta=1e-6)

    def test_constant(self):
        fit = fit_power_decay(trace(np.full(TIMES.shape, 5.0)))
        self.assertAlmostEqual(fit.exponent, 0.0, delta=1e-12)
        self.assertEqual(fit.r_squared, 1.0)

    def test_invalid_inputs(self):
        with self.assertRaises(DegenerateWindow):
            fit_power_decay(trace(np.ones(5), np.arange(5.0)))
        with self.assertRaises(PreconditionError):
            fit_power_decay(trace(np.zeros(TIMES.shape)))
        with self.assertRaises(DegenerateWindow):
            fit_power_decay(trace(np.ones(TIMES.shape)), window=(10.0, 5000.0))

    def test_window_shift(self):
        exact = trace((1 + TIMES) ** -1.5)
        self.assertLess(window_shift_deviation(exact, ClockFunction()), 1e-9)

    def test_clock_needs_profile(self):
        with self.assertRaises(PreconditionError):
            ClockFunction(ClockKind.SHAPE_PRIMITIVE)


class PredictTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(predict('free_strichartz', n=3, p=1, q=np.inf, quantity='u_t').exponent, 1.0)
        self.assertEqual(predict('matsumura', n=3, p=1, q=2, k=1, alpha_order=0, quantity='u_t').exponent, 1.75)
        effective = predict('wirth_effective', n=3, p=2, q=2, quantity='u_t', damping=PowerDamping(0.5))
        self.assertEqual(effective.exponent, 1.0)
        self.assertEqual(effective.clock.kind, ClockKind.RECIPROCAL_DAMPING)
        self.assertEqual(effective.extra_factor, '1/b')

    def test_energy_forms(self):
        self.assertEqual(predict('free_strichartz').exponent, 0.0)
        noneffective = predict('wirth_noneffective', damping=InverseDamping(0.3))
        self.assertEqual(noneffective.kind, PredictionKind.LIMIT)
        self.assertEqual(noneffective.exponent, 2.0)
        self.assertEqual(predict('hirosawa_nakazawa').kind, PredictionKind.VANISHING)
        self.assertEqual(predict('wirth_periodic').exponent, 1.0)
        self.assertEqual(predict('matsumura', p=1).exponent, 2.5)
        self.assertEqual(predict('nishihara_diffusion', p=1, q=2).exponent, 1.75)

    def test_inadmissible(self):
        with self.assertRaises(InadmissibleExponents):
            predict('free_strichartz', p=2, q=4, quantity='u_t')
        with self.assertRaises(InadmissibleExponents):
            predict('nishihara_diffusion', n=2)
        with self.assertRaises(InadmissibleExponents):
            predict('hirosawa_nakazawa', quantity='u_t')
        with self.assertRaises(InadmissibleExponents):
            predict('matsumura', p=1, q=1.5)

    def test_inverse_damping_bands(self):
        self.assertEqual(theorem_for_inverse_damping(0.3), TheoremId.WIRTH_NONEFFECTIVE)
        self.assertIsNone(theorem_for_inverse_damping(0.7))
        self.assertEqual(theorem_for_inverse_damping(2.0), TheoremId.HIROSAWA_NAKAZAWA)

    def test_catalog(self):
        catalog = theorem_catalog()
        self.assertEqual(set(catalog), set(TheoremId.values))
        for theorem in catalog.values():
            self.assertTrue(theorem.statement)
            self.assertTrue(theorem.hypotheses)


class VerifyTests(SimpleTestCase):
    def test_conserved_energy(self):
        report = verify(trace(np.full(TIMES.shape, 2.0) + 1e-4 * np.sin(TIMES)), predict('free_strichartz'), 0.02)
        self.assertTrue(report.passed)
        self.assertEqual(report.as_dict()['predicted'], 0.0)

    def test_clock_conversion(self):
        damping = InverseDamping(0.3)
        self.assertAlmostEqual(clock_slope(ClockFunction(ClockKind.DAMPING_EXPONENTIAL, damping), ClockFunction(),
                                           TIMES[1:]), 0.3, delta=1e-12)
        report = verify(trace(5 * (1 + TIMES) ** -0.6), predict('wirth_noneffective', damping=damping),
                        clock=ClockFunction())
        self.assertAlmostEqual(report.predicted, 0.6, delta=1e-12)
        self.assertTrue(report.passed)

    def test_failing_rate(self):
        report = verify(trace((1 + TIMES) ** -0.3), predict('wirth_periodic'))
        self.assertFalse(report.passed)

    def test_vanishing(self):
        times = np.geomspace(1.0, 1e4, 400)
        self.assertTrue(verify(trace((1 + times) ** -2.5, times), predict('hirosawa_nakazawa')).passed)
        self.assertFalse(verify(trace((1 + times) ** -2.0, times), predict('hirosawa_nakazawa')).passed)

    def test_no_prediction(self):
        report = verify(trace((1 + TIMES) ** -1.2), no_prediction('μ in [1/2, 1]'))
        self.assertIsNone(report.passed)
        self.assertAlmostEqual(report.fitted.exponent, 1.2, delta=1e-9)

    def test_extra_factor(self):
        damping = InverseDamping(0.3)
        prediction = predict('wirth_noneffective', n=3, p=1, q=np.inf, quantity='u_t', damping=damping)
        values = (1 + TIMES) ** -1.0 * (1 + TIMES) ** -0.3
        self.assertTrue(verify(trace(values), prediction).passed)

    def test_effective_velocity_factor(self):
        damping = PowerDamping(0.5)
        prediction = predict('wirth_effective', n=3, p=2, q=2, quantity='u_t', damping=damping)
        values = prediction.clock(TIMES) ** -1.0 / damping.eval(TIMES)
        report = verify(trace(values), prediction)
        self.assertAlmostEqual(report.fitted.exponent, 1.0, delta=1e-9)
        self.assertTrue(report.passed)


class ScatteringLimitTests(SimpleTestCase):
    times = np.linspace(0.0, 1e4, 10001)

    def test_exact_limit(self):
        clock = ClockFunction(ClockKind.DAMPING_EXPONENTIAL, InverseDamping(0.3))
        result = scattering_limit(trace(4.0 / clock(self.times) ** 2, self.times), clock)
        self.assertAlmostEqual(result.limit_estimate, 4.0, delta=1e-9)
        self.assertTrue(result.converged)
        self.assertTrue(result.nonzero)

    def test_free_wave(self):
        result = scattering_limit(trace(np.full(self.times.shape, 1.5), self.times))
        self.assertEqual(result.limit_estimate, 1.5)
        self.assertTrue(result.converged)

    def test_insufficient_span(self):
        times = np.linspace(1.0, 50.0, 100)
        with self.assertRaises(DegenerateWindow):
            scattering_limit(trace(np.ones(times.shape), times))
