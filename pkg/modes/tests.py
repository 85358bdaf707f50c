from math import pi

import numpy as np
from django.test import SimpleTestCase, override_settings

from coefficients.profiles import Constant, InverseDamping, LogSine, PeriodicDamping, PeriodicSpeed, Role
from wave_lab.exceptions import PreconditionError, ToleranceNotAchieved

from .integrator import DormandPrince
from .services import (
    EnergyWeight,
    ModeParams,
    ModeState,
    abel_determinant,
    fundamental_matrices,
    fundamental_matrix,
    integrate_mode,
    integrate_modes,
    mode_energies,
    mode_energy,
)

ONE = Constant(1.0)


def damping(c):
    return Constant(c, role=Role.DAMPING)


class IntegrateModeTests(SimpleTestCase):
    def test_free_oscillator(self):
        trajectory = integrate_mode(ModeParams(4.0, ONE), ModeState(1, 0), [0.0, pi / 2, pi])
        self.assertAlmostEqual(trajectory.v[1].real, -1.0, delta=1e-9)
        self.assertAlmostEqual(trajectory.v[2].real, 1.0, delta=1e-9)
        self.assertEqual(trajectory.v[0], 1.0)
        self.assertEqual(trajectory.tol_used, 1e-10)

    def test_damped_zero_frequency_closed_form(self):
        times = np.linspace(0.0, 10.0, 21)
        u1, u2 = 0.7, -1.3
        trajectory = integrate_mode(ModeParams(0.0, ONE, damping=damping(0.5)), ModeState(u1, u2), times)
        np.testing.assert_allclose(trajectory.v.real, u1 + u2 * (1 - np.exp(-times)), atol=1e-8)
        np.testing.assert_allclose(trajectory.v_dot.real, u2 * np.exp(-times), atol=1e-8)

    def test_against_tighter_tolerance(self):
        params = ModeParams(1.0, ONE, damping=InverseDamping(0.3))
        coarse = integrate_mode(params, ModeState(1, 0), [0.0, 100.0])
        fine = integrate_mode(params, ModeState(1, 0), [0.0, 100.0], tol=1e-13)
        self.assertLess(abs(coarse.v[-1] - fine.v[-1]), 1e-8)
        self.assertLess(abs(coarse.v_dot[-1] - fine.v_dot[-1]), 1e-8)

    def test_complex_data_is_two_real_problems(self):
        times = np.linspace(0.0, 5.0, 6)
        params = ModeParams(2.0, LogSine(2, 1))
        both = integrate_mode(params, ModeState(1 + 2j, -0.5j), times)
        self.assertTrue(np.all(np.isfinite(both.v)))
        real = integrate_mode(params, ModeState(1, 0), times)
        np.testing.assert_allclose(both.v.real, real.v.real, rtol=1e-8, atol=1e-10)

    def test_energy_conservation(self):
        speed, lam = Constant(2.0), 3.0
        times = np.linspace(0.0, 200.0, 401)
        trajectory = integrate_mode(ModeParams(lam, speed), ModeState(0.4, 1.0), times, tol=1e-12)
        energy = mode_energies(trajectory.v, trajectory.v_dot, lam, 2.0, EnergyWeight.ADAPTED)
        np.testing.assert_array_less(np.abs(energy / energy[0] - 1), 1e-8)

    def test_action_is_adiabatic_invariant(self):
        speed, lam = LogSine(2, 1), 4.0
        times = np.linspace(0.0, 300.0, 601)
        trajectory = integrate_mode(ModeParams(lam, speed), ModeState(1, 0), times)
        a_values = speed.eval(times)
        adapted = mode_energies(trajectory.v, trajectory.v_dot, lam, a_values, EnergyWeight.ADAPTED)
        action = mode_energies(trajectory.v, trajectory.v_dot, lam, a_values, EnergyWeight.ACTION)
        self.assertLess(np.min(adapted / adapted[0]), 0.5)
        np.testing.assert_array_less(np.abs(action / action[0] - 1), 0.03)

    def test_linearity(self):
        times = np.linspace(0.0, 30.0, 31)
        params = ModeParams(1.5, LogSine(2, 1), damping=InverseDamping(0.3))
        first = integrate_mode(params, ModeState(1, 0), times, tol=1e-12)
        second = integrate_mode(params, ModeState(0, 1), times, tol=1e-12)
        combined = integrate_mode(params, ModeState(2.5, 1), times, tol=1e-12)
        expected = 2.5 * first.v + second.v
        self.assertLess(np.max(np.abs(combined.v - expected)), 1e-10 * np.max(np.abs(expected)))

    def test_observed_order(self):
        errors, steps = [], []
        times = np.array([0.0, 50.0])
        for tol in (1e-6, 1e-9):
            solver = DormandPrince(ONE, tol=tol, max_step_factor=100.0)
            states, stats = solver.integrate([1.0], np.array([[[1.0], [0.0]]]), times)
            errors.append(abs(states[0, -1, 0, 0] - np.cos(50.0)))
            steps.append(stats.accepted)
        order = np.log(errors[0] / errors[1]) / np.log(steps[1] / steps[0])
        self.assertGreaterEqual(order, 4.0)

    def test_identical_for_any_thread_count(self):
        lambdas = np.linspace(0.1, 6.0, 5)
        times = np.linspace(0.0, 20.0, 9)
        runs = [
            integrate_modes(lambdas, LogSine(2, 1), times, 1.0, 0.5j, damping=InverseDamping(0.3),
                            workers=workers, chunk_size=2)
            for workers in (1, 3)
        ]
        np.testing.assert_array_equal(runs[0].v, runs[1].v)
        np.testing.assert_array_equal(runs[0].v_dot, runs[1].v_dot)

    def test_invalid_requests(self):
        params = ModeParams(1.0, ONE)
        with self.assertRaises(PreconditionError):
            integrate_mode(params, ModeState(1, 0), [0.0, 1.0], tol=1e-3)
        with self.assertRaises(PreconditionError):
            integrate_mode(params, ModeState(1, 0), [0.0, 2.0, 1.0])
        with self.assertRaises(PreconditionError):
            ModeParams(-1.0, ONE)

    @override_settings(WAVE_LAB={'DEFAULT_TOL': 1e-10, 'MAX_STEP_FACTOR': 0.1, 'MAX_STEPS': 10,
                                 'MAX_REJECTS': 60, 'WORKERS': 1, 'CHUNK_SIZE': 64})
    def test_step_budget(self):
        with self.assertRaises(ToleranceNotAchieved):
            integrate_mode(ModeParams(1.0, ONE), ModeState(1, 0), [0.0, 100.0])


class FundamentalMatrixTests(SimpleTestCase):
    def test_constant_speed_closed_form(self):
        c, lam, period = 2.0, 0.5, 3.0
        matrix = fundamental_matrix(ModeParams(lam, Constant(c)), 0.0, period).entries
        omega = c * np.sqrt(lam)
        expected = np.array([
            [np.cos(omega * period), np.sin(omega * period) / omega],
            [-omega * np.sin(omega * period), np.cos(omega * period)],
        ])
        np.testing.assert_allclose(matrix, expected, atol=1e-8)

    def test_unit_determinant_without_damping(self):
        matrices, _ = fundamental_matrices([0.0, 0.25, 1.0, 3.0], PeriodicSpeed(1, 0.4, 2 * pi), 0.0, 2 * pi)
        for matrix in matrices:
            self.assertAlmostEqual(matrix.det, 1.0, delta=1e-9)

    def test_abel_identity(self):
        matrix = fundamental_matrix(ModeParams(2.0, ONE, damping=damping(0.5)), 0.0, 1.0)
        self.assertAlmostEqual(matrix.det, np.exp(-1.0), delta=1e-9)
        periodic = PeriodicDamping(0.5, 0.3, 2 * pi)
        for lam in (0.0, 0.3, 2.0):
            matrix = fundamental_matrix(ModeParams(lam, LogSine(2, 1), damping=periodic), 0.5, 7.0)
            expected = abel_determinant(periodic, 0.5, 7.0)
            self.assertLess(abs(matrix.det - expected) / expected, 1e-8)

    def test_apply_propagates_states(self):
        params = ModeParams(1.0, ONE, damping=InverseDamping(0.3))
        matrix = fundamental_matrix(params, 0.0, 4.0)
        direct = integrate_mode(params, ModeState(0.3, -2.0), [0.0, 4.0])
        mapped = matrix.apply(ModeState(0.3, -2.0))
        self.assertAlmostEqual(mapped.v, direct.v[-1], delta=1e-9)


class ModeEnergyTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(mode_energy(ModeState(1, 0), 4.0), 2.0)
        self.assertEqual(mode_energy(ModeState(0, 3), 17.0), 4.5)
        self.assertEqual(mode_energy(ModeState(1, 0), 1.0, a_value=2.0, weight='adapted'), 2.0)
        self.assertEqual(mode_energy(ModeState(1, 0), 1.0, a_value=2.0, weight='action'), 1.0)
        self.assertEqual(mode_energy(ModeState(0, 2), 1.0, a_value=2.0, weight='action'), 1.0)

    def test_adapted_needs_positive_speed(self):
        with self.assertRaises(PreconditionError):
            mode_energy(ModeState(1, 0), 1.0, a_value=0.0, weight='adapted')
        with self.assertRaises(PreconditionError):
            mode_energy(ModeState(0, 1), 1.0, a_value=0.0, weight='action')
