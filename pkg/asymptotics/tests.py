import numpy as np
from django.test import SimpleTestCase, tag

from coefficients.profiles import Constant, InverseDamping, PeriodicDamping, PowerShape, Role
from modes.services import ModeState, integrate_modes
from spectral.services import FrequencyGrid, gaussian_data, plancherel_norm
from wave_lab.exceptions import PreconditionError

from .services import (
    HeatSurrogate,
    LiouvilleMap,
    closed_form_beta,
    decay_gain,
    diffusion_deficit,
    estimate_alpha_beta,
    free_wave_modes,
    liouville_damping,
    liouville_verify,
    mode_deficit,
)

HALF = Constant(0.5, role=Role.DAMPING)


class HeatSurrogateTests(SimpleTestCase):
    def test_closed_form(self):
        surrogate = HeatSurrogate(2.0, 0.5)
        modes = surrogate.modes([0.0, 1.0], [0.0, 1.0], np.array([1.0, 2.0]), np.array([4.0, 0.0]))
        np.testing.assert_allclose(modes, [[3.0, 3.0], [2.0, 2.0 * np.exp(-2.0)]])

    def test_alpha_must_be_positive(self):
        with self.assertRaises(PreconditionError):
            HeatSurrogate(0.0, 1.0)

    def test_free_wave_closed_form(self):
        v, v_dot = free_wave_modes([0.0, 4.0], [0.0, 1.0], np.array([1.0, 1.0]), np.array([2.0, 0.0]))
        np.testing.assert_allclose(v, [[1.0, 3.0], [1.0, np.cos(2.0)]])
        np.testing.assert_allclose(v_dot, [[2.0, 2.0], [0.0, -2.0 * np.sin(2.0)]])


class DiffusionDeficitTests(SimpleTestCase):
    def test_zero_frequency_mode(self):
        times = np.linspace(0.0, 5.0, 11)
        u1, u2 = np.array([0.4]), np.array([1.5])
        ensemble = integrate_modes([0.0], Constant(1.0), times, u1, u2, damping=HALF)
        deficit = mode_deficit(ensemble, u1, u2, HeatSurrogate(1.0, 1.0))
        np.testing.assert_allclose(deficit[0].real, -u2[0] * np.exp(-times), atol=1e-8)

    def test_three_term_needs_constant_half(self):
        data = gaussian_data(3, FrequencyGrid(rho_max=2.0, count=16))
        ensemble = integrate_modes(data.lambdas, Constant(1.0), [0.0, 1.0], data.u1_hat, data.u2_hat,
                                   damping=Constant(1.0, role=Role.DAMPING))
        with self.assertRaises(PreconditionError):
            diffusion_deficit(data, ensemble, HeatSurrogate(1.0, 1.0), free_wave=True,
                              damping=Constant(1.0, role=Role.DAMPING))

    @tag('slow')
    def test_gain_of_one_power(self):
        data = gaussian_data(3, FrequencyGrid(rho_max=2.0, count=160, rho_min=1e-4), amplitude2=0.5)
        times = np.concatenate(([0.0], np.geomspace(1.0, 400.0, 200)))
        ensemble = integrate_modes(data.lambdas, Constant(1.0), times, data.u1_hat, data.u2_hat, damping=HALF)
        solution = plancherel_norm(data, ensemble)
        correct = decay_gain(diffusion_deficit(data, ensemble, HeatSurrogate(1.0, 1.0)), solution)
        wrong = decay_gain(diffusion_deficit(data, ensemble, HeatSurrogate(1.2, 1.0)), solution)
        self.assertAlmostEqual(correct.solution_fit.exponent, 0.75, delta=0.1)
        self.assertGreaterEqual(correct.gain, 0.9)
        self.assertLess(wrong.gain, 0.5)


class EstimatorTests(SimpleTestCase):
    def test_half_damping(self):
        constants = estimate_alpha_beta(HALF)
        self.assertAlmostEqual(constants.alpha_hat, 1.0, delta=1e-3)
        self.assertAlmostEqual(constants.beta_hat, 1.0, delta=1e-3)
        self.assertAlmostEqual(constants.diagnostics['beta_closed_form'], 1.0, delta=1e-10)

    def test_constant_damping_root_expansion(self):
        for c in (1.0, 2.0):
            constants = estimate_alpha_beta(Constant(c, role=Role.DAMPING))
            self.assertAlmostEqual(constants.alpha_hat, 1 / (2 * c), delta=1e-3)
            self.assertAlmostEqual(constants.beta_hat, 1 / (2 * c), delta=1e-3)

    def test_ladder_is_converged(self):
        damping = PeriodicDamping(0.5, 0.3, 2 * np.pi)
        short, longer = estimate_alpha_beta(damping, levels=4), estimate_alpha_beta(damping, levels=6)
        self.assertLess(abs(short.alpha_hat - longer.alpha_hat), 1e-4)
        self.assertLess(abs(short.beta_hat - longer.beta_hat), 1e-4)
        self.assertGreater(longer.alpha_hat, 0.0)
        self.assertGreater(longer.beta_hat, 0.0)
        self.assertAlmostEqual(longer.beta_hat, closed_form_beta(damping), delta=1e-3)

    def test_not_periodic(self):
        with self.assertRaises(PreconditionError):
            estimate_alpha_beta(InverseDamping(0.3))


class LiouvilleTests(SimpleTestCase):
    def test_power_shape_limit(self):
        damping = liouville_damping(PowerShape(1.0))
        t = 1e4
        self.assertLess(abs(2 * damping.eval(t) * (1 + t) - 0.5), 0.05)

    def test_constant_shape_has_no_damping(self):
        damping = liouville_damping(Constant(1.0, role=Role.SHAPE))
        self.assertAlmostEqual(damping.eval(5.0), 0.0)

    def test_needs_shape(self):
        with self.assertRaises(PreconditionError):
            liouville_damping(Constant(1.0))

    def test_inverse_residual(self):
        mapping = LiouvilleMap(PowerShape(1.0))
        t = np.array([1.0, 3.0, 101.0])
        np.testing.assert_allclose(mapping.forward(mapping.inverse(t)), t, rtol=1e-10)

    def test_identity_transform(self):
        check = liouville_verify(Constant(1.0, role=Role.SHAPE), 1.0, ModeState(1, 0), 20.0, tol=1e-12)
        self.assertLessEqual(check.residual, 1e-10)

    def test_power_shape_two_routes(self):
        check = liouville_verify(PowerShape(1.0), 1.0, ModeState(1, 0), 100.0, tol=1e-8)
        self.assertLessEqual(check.residual, 1e-6)

    def test_residual_is_linear_in_data(self):
        one = liouville_verify(PowerShape(1.0), 1.0, ModeState(1, 0.5), 20.0, tol=1e-8)
        two = liouville_verify(PowerShape(1.0), 1.0, ModeState(2, 1.0), 20.0, tol=1e-8)
        self.assertAlmostEqual(two.absolute_residual, 2 * one.absolute_residual,
                               delta=1e-9 * max(one.absolute_residual, 1e-300))
