"""
Quick numerical self-checks run by `manage.py selftest`: each one compares a
computed value with a closed form or with a second computation.
"""
import logging
import time
from dataclasses import dataclass, field
from math import pi

import numpy as np

from asymptotics.services import estimate_alpha_beta, liouville_verify
from coefficients.profiles import Constant, PeriodicDamping, PeriodicSpeed, PowerShape, Role
from floquet.services import HillProblem, growth_rate
from modes.services import abel_determinant, fundamental_matrices, integrate_modes
from rates.services import fit_power_decay
from spectral.services import (
    Clustering,
    EnergyTrace,
    FrequencyGrid,
    Layout,
    gaussian_data,
    plancherel_energy,
    spatial_energy,
    synthesize_1d,
)
from wave_lab.exceptions import WaveLabError

logger = logging.getLogger(__name__)


@dataclass
class SelfCheck:
    name: str
    value: float
    passed: bool
    wall_time: float = 0.0


@dataclass
class SelfTestReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)


def _abel():
    damping = PeriodicDamping(0.5, 0.3, 2 * pi)
    matrices, _ = fundamental_matrices([0.5, 2.0], Constant(1.0), 0.0, 10.0, damping, workers=1)
    expected = abel_determinant(damping, 0.0, 10.0)
    error = max(abs(matrix.det - expected) / expected for matrix in matrices)
    return error, error <= 1e-8


def _parseval():
    grid = FrequencyGrid(rho_max=12.0, count=512, clustering=Clustering.UNIFORM)
    data = gaussian_data(1, grid, amplitude2=0.5, layout=Layout.LINE)
    gradient = synthesize_1d(data, data.u1_hat, component='grad')
    velocity = synthesize_1d(data, data.u1_hat, data.u2_hat, component='u_t')
    error = abs(spatial_energy(gradient, velocity) - data.data_energy())
    return error, error <= 1e-8


def _power_fit():
    times = np.linspace(0.0, 1000.0, 2001)
    fit = fit_power_decay(EnergyTrace(times, 3.0 * (1.0 + times) ** -1.5))
    return fit.exponent, abs(fit.exponent - 1.5) <= 1e-9


def _estimator():
    constants = estimate_alpha_beta(Constant(0.5, role=Role.DAMPING), workers=1)
    error = max(abs(constants.alpha_hat - 1.0), abs(constants.beta_hat - 1.0))
    return error, error <= 1e-3


def _liouville():
    check = liouville_verify(PowerShape(1.0), 1.0, (1.0, 0.0), 20.0, tol=1e-10)
    return check.residual, check.passed


def _thread_count():
    data = gaussian_data(3, FrequencyGrid(rho_max=4.0, count=96))
    times = np.linspace(0.0, 20.0, 11)
    damping = Constant(0.5, role=Role.DAMPING)
    runs = [integrate_modes(data.lambdas, Constant(1.0), times, data.u1_hat, data.u2_hat, damping, workers=workers)
            for workers in (1, 4)]
    difference = float(np.max(np.abs(runs[0].v - runs[1].v)))
    return difference, np.array_equal(runs[0].v, runs[1].v) and np.array_equal(runs[0].v_dot, runs[1].v_dot)


def _free_energy():
    data = gaussian_data(3, FrequencyGrid(rho_max=8.0, count=128), amplitude2=0.5)
    ensemble = integrate_modes(data.lambdas, Constant(1.0), np.linspace(0.0, 50.0, 26), data.u1_hat, data.u2_hat,
                               workers=1)
    trace = plancherel_energy(data, ensemble)
    drift = float(np.max(np.abs(trace.values / trace.values[0] - 1.0)))
    return drift, drift <= 1e-8


def _mathieu_growth():
    rate = growth_rate(HillProblem(PeriodicSpeed(1.0, 0.4, 2 * pi)), 0.25)
    return rate, rate > 0.0


CHECKS = (
    ('abel_determinant', _abel),
    ('parseval_line', _parseval),
    ('power_fit', _power_fit),
    ('diffusion_constants_half_damping', _estimator),
    ('liouville_two_routes', _liouville),
    ('thread_count_invariance', _thread_count),
    ('free_wave_energy', _free_energy),
    ('mathieu_first_tongue_growth', _mathieu_growth),
)


def run_selftest(names=None):
    report = SelfTestReport()
    for name, check in CHECKS:
        if names and name not in names:
            continue
        started = time.perf_counter()
        try:
            value, passed = check()
        except (WaveLabError, ArithmeticError) as exc:
            logger.error("self-check %s raised %s", name, exc)
            value, passed = float('nan'), False
        report.checks.append(SelfCheck(name, float(value), bool(passed), time.perf_counter() - started))
    return report
