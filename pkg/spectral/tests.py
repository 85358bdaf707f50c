from math import pi

import numpy as np
from django.test import SimpleTestCase, tag

from coefficients.profiles import Constant, Role
from modes.services import integrate_modes
from wave_lab.exceptions import GridMismatch, PreconditionError

from .services import (
    Clustering,
    FieldSnapshot,
    FrequencyGrid,
    Layout,
    SpectralData,
    analyse_1d,
    data_norm,
    dispersive_trace,
    gaussian_data,
    lq_norm,
    measure_lq,
    node_doubling_deviation,
    plancherel_energy,
    plancherel_norm,
    spatial_energy,
    sphere_area,
    synthesize_1d,
    synthesize_radial3d,
)

UNIFORM = FrequencyGrid(rho_max=12.0, count=512, clustering=Clustering.UNIFORM)


class SpectralDataTests(SimpleTestCase):
    def test_sphere_area(self):
        self.assertAlmostEqual(sphere_area(1), 2.0)
        self.assertAlmostEqual(sphere_area(2), 2 * pi)
        self.assertAlmostEqual(sphere_area(3), 4 * pi)

    def test_single_node_norm(self):
        data = SpectralData(3, [1.0], [1.0], 1.0, 0.0)
        self.assertEqual(data_norm(data), 1.0)

    def test_gaussian_l2_norms(self):
        line = gaussian_data(1, UNIFORM, layout=Layout.LINE)
        self.assertAlmostEqual(data_norm(line), (pi / 2) ** 0.25, delta=1e-10)
        for grid in (UNIFORM, FrequencyGrid()):
            radial = gaussian_data(3, grid)
            self.assertAlmostEqual(data_norm(radial), (pi / 2) ** 0.75, delta=1e-8)

    def test_sobolev_weight(self):
        data = SpectralData(3, [2.0], [1.0], 1.0, 0.0)
        self.assertAlmostEqual(data_norm(data, r_p=2), 5.0)

    def test_invalid_data(self):
        with self.assertRaises(GridMismatch):
            SpectralData(3, [1.0, 2.0], [1.0, -1.0], 1.0, 0.0)
        with self.assertRaises(GridMismatch):
            SpectralData(3, [2.0, 1.0], [1.0, 1.0], 1.0, 0.0)
        with self.assertRaises(PreconditionError):
            SpectralData(4, [1.0], [1.0], 1.0, 0.0)


class SynthesisTests(SimpleTestCase):
    def test_line_gaussian(self):
        data = gaussian_data(1, UNIFORM, layout=Layout.LINE)
        snapshot = synthesize_1d(data, data.u1_hat)
        self.assertLess(np.max(np.abs(snapshot.values.imag)), 1e-10)
        np.testing.assert_allclose(snapshot.values.real, np.exp(-snapshot.grid ** 2), atol=1e-10)

    def test_line_analysis_inverts_synthesis(self):
        data = gaussian_data(1, UNIFORM, amplitude1=0.5, layout=Layout.LINE)
        recovered = analyse_1d(synthesize_1d(data, data.u1_hat), data)
        self.assertLess(np.max(np.abs(recovered - data.u1_hat)), 1e-12 * np.max(np.abs(data.u1_hat)))

    def test_x_grid_must_be_conjugate(self):
        data = gaussian_data(1, UNIFORM, layout=Layout.LINE)
        with self.assertRaises(GridMismatch):
            synthesize_1d(data, data.u1_hat, x_grid=np.linspace(-1, 1, 7))

    def test_radial_gaussian(self):
        data = gaussian_data(3, UNIFORM)
        r = np.linspace(0.0, 5.0, 51)
        snapshot = synthesize_radial3d(data, data.u1_hat, r)
        np.testing.assert_allclose(snapshot.values.real, np.exp(-r ** 2), atol=1e-8)
        self.assertEqual(snapshot.warnings, ())

    def test_under_resolution_warning(self):
        data = gaussian_data(3, UNIFORM)
        with self.assertLogs('spectral.services', 'WARNING'):
            snapshot = synthesize_radial3d(data, data.u1_hat, np.linspace(0.0, 400.0, 11))
        self.assertEqual(snapshot.warnings, ('under_resolved',))
        self.assertIn('under_resolved', measure_lq(snapshot, np.inf).warnings)

    def test_free_wave_matches_kirchhoff(self):
        data = gaussian_data(3, UNIFORM, amplitude1=0.0, amplitude2=1.0)
        ensemble = integrate_modes(data.lambdas, Constant(1.0), [0.0, 10.0], data.u1_hat, data.u2_hat)
        r, t = np.linspace(0.5, 20.0, 40), 10.0
        snapshot = synthesize_radial3d(data, ensemble.v[:, -1], r, t=t)
        exact = (np.exp(-(r - t) ** 2) - np.exp(-(r + t) ** 2)) / (4 * r)
        np.testing.assert_allclose(snapshot.values.real, exact, atol=1e-7)


class NormTests(SimpleTestCase):
    def test_examples(self):
        x = np.linspace(0.0, 1.0, 101)
        snapshot = FieldSnapshot(0.0, x, np.ones_like(x), 1)
        self.assertAlmostEqual(lq_norm(snapshot, 2), 1.0)
        self.assertEqual(lq_norm(snapshot, np.inf), 1.0)

    def test_gaussian(self):
        x = np.linspace(-10.0, 10.0, 4001)
        snapshot = FieldSnapshot(0.0, x, np.exp(-x ** 2), 1)
        self.assertAlmostEqual(lq_norm(snapshot, 2), (pi / 2) ** 0.25, delta=1e-8)

    def test_truncated_support_warns(self):
        x = np.linspace(-1.0, 1.0, 101)
        snapshot = FieldSnapshot(0.0, x, np.exp(-x ** 2), 1)
        with self.assertLogs('spectral.services', 'WARNING'):
            result = measure_lq(snapshot, 2)
        self.assertEqual(result.warnings, ('support_truncated',))
        self.assertEqual(result.value, lq_norm(snapshot, 2))

    def test_clean_norm_has_no_warnings(self):
        x = np.linspace(-10.0, 10.0, 4001)
        self.assertEqual(measure_lq(FieldSnapshot(0.0, x, np.exp(-x ** 2), 1), 2).warnings, ())

    def test_trace_counts_flagged_samples(self):
        data = gaussian_data(3, UNIFORM, amplitude1=1.0, amplitude2=0.0)
        ensemble = integrate_modes(data.lambdas, Constant(1.0), [0.0, 1.0], data.u1_hat, data.u2_hat)
        trace = dispersive_trace(data, ensemble, 2.0, 'u', grid=np.linspace(0.0, 2.0, 41))
        self.assertEqual(trace.metadata['warnings'], {'support_truncated': 2})


class PlancherelTests(SimpleTestCase):
    def test_free_wave_energy(self):
        data = gaussian_data(3, FrequencyGrid(rho_max=8.0, count=64), amplitude2=0.5)
        ensemble = integrate_modes(data.lambdas, Constant(1.0), [0.0, 5.0, 10.0], data.u1_hat, data.u2_hat)
        trace = plancherel_energy(data, ensemble)
        self.assertAlmostEqual(trace.values[0], data.data_energy(), delta=1e-12 * data.data_energy())
        np.testing.assert_allclose(trace.values, trace.values[0], rtol=1e-8)

    def test_parseval_on_the_line(self):
        data = gaussian_data(1, UNIFORM, amplitude2=0.5, layout=Layout.LINE)
        gradient = synthesize_1d(data, data.u1_hat, component='grad')
        velocity = synthesize_1d(data, data.u1_hat, data.u2_hat, component='u_t')
        self.assertAlmostEqual(spatial_energy(gradient, velocity), data.data_energy(), delta=1e-8)

    def test_norm_of_velocity(self):
        data = gaussian_data(3, FrequencyGrid(rho_max=8.0, count=64), amplitude2=1.0)
        ensemble = integrate_modes(data.lambdas, Constant(1.0), [0.0, 1.0], data.u1_hat, data.u2_hat)
        trace = plancherel_norm(data, ensemble, 'u_t')
        self.assertAlmostEqual(trace.values[0], data_norm(data, component='u2'), delta=1e-12)

    def test_node_doubling(self):
        grid = FrequencyGrid(rho_max=8.0, count=128)
        damping = Constant(0.5, role=Role.DAMPING)
        traces = []
        for refined in (grid, grid.refined()):
            data = gaussian_data(3, refined)
            ensemble = integrate_modes(data.lambdas, Constant(1.0), [0.0, 2.0, 4.0], data.u1_hat, data.u2_hat,
                                       damping=damping)
            traces.append(plancherel_energy(data, ensemble))
        self.assertLess(node_doubling_deviation(*traces), 1e-4)

    def test_mismatched_ensemble(self):
        data = gaussian_data(3, FrequencyGrid(rho_max=8.0, count=16))
        ensemble = integrate_modes(data.lambdas[:5], Constant(1.0), [0.0, 1.0], 1.0, 0.0)
        with self.assertRaises(GridMismatch):
            plancherel_energy(data, ensemble)

    def test_adapted_needs_speed(self):
        data = SpectralData(3, [1.0], [1.0], 1.0, 0.0)
        ensemble = integrate_modes(data.lambdas, Constant(1.0), [0.0, 1.0], 1.0, 0.0)
        with self.assertRaises(PreconditionError):
            plancherel_energy(data, ensemble, kind='adapted')

    @tag('slow')
    def test_dispersive_norm_decays(self):
        data = gaussian_data(3, UNIFORM, amplitude2=1.0, amplitude1=0.0)
        ensemble = integrate_modes(data.lambdas, Constant(1.0), [5.0 * k for k in range(5)] + [40.0],
                                   data.u1_hat, data.u2_hat)
        trace = dispersive_trace(data, ensemble, grid=np.linspace(0.0, 60.0, 1201))
        self.assertTrue(np.all(np.diff(trace.values[1:]) < 0))
