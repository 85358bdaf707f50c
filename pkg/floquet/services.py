"""
Hill problems with periodic coefficients: monodromy, discriminant scans,
instability intervals and the exponential energy growth they produce.

For damped problems the discriminant is normalised by √det M = exp(−∫₀ᵀ b),
so |Δ̃| > 2 means a spectral radius above exp(−∫₀ᵀ b) in every case.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from django.conf import settings
from scipy.optimize import minimize_scalar

from coefficients.bump import bump
from coefficients.profiles import CoefficientProfile
from modes.services import fundamental_matrices, integrate_modes
from spectral.services import EnergyTrace, Layout, SpectralData, plancherel_energy
from wave_lab.exceptions import PreconditionError
from wave_lab.parallel import ordered_map

logger = logging.getLogger(__name__)

# |Δ̃| − 2 must exceed this to count as unstable
INSTABILITY_THRESHOLD = 1e-8
REFINE_RTOL = 1e-8


@dataclass
class HillProblem:
    speed: CoefficientProfile
    damping: Optional[CoefficientProfile] = None
    mass: Optional[CoefficientProfile] = None
    period: Optional[float] = None

    def __post_init__(self):
        periods = []
        for profile in (self.speed, self.damping, self.mass):
            if profile is None or profile.is_constant:
                continue
            if profile.period is None:
                raise PreconditionError(f"{profile.family} is not periodic")
            periods.append(profile.period)
        if self.period is not None:
            periods.append(float(self.period))
        if not periods:
            raise PreconditionError("constant coefficients need an explicit period")
        if not np.allclose(periods, periods[0], rtol=1e-12, atol=0):
            raise PreconditionError(f"coefficient periods differ: {sorted(set(periods))}")
        self.period = float(periods[0])

    @property
    def damped(self):
        return self.damping is not None

    def to_spec(self):
        return {
            'speed': self.speed.to_spec(),
            'damping': self.damping.to_spec() if self.damping else None,
            'mass': self.mass.to_spec() if self.mass else None,
            'period': self.period,
        }


def multipliers(discriminant, det):
    """Eigenvalues of a 2×2 matrix with the given trace and determinant."""
    root = np.sqrt(complex(discriminant ** 2 - 4.0 * det))
    return (discriminant + root) / 2, (discriminant - root) / 2


@dataclass
class DiscriminantSample:
    lambda_spec: float
    discriminant: float
    det_monodromy: float
    period: float
    damped: bool = False

    @property
    def normalised(self):
        return self.discriminant / np.sqrt(self.det_monodromy)

    @property
    def spectral_radius(self):
        return max(abs(mu) for mu in multipliers(self.discriminant, self.det_monodromy))

    @property
    def unstable(self):
        return abs(self.normalised) - 2.0 > INSTABILITY_THRESHOLD

    @property
    def growth_rate(self):
        if not self.damped and abs(self.discriminant) <= 2.0:
            return 0.0
        return float(np.log(self.spectral_radius) / self.period)

    @property
    def relative_growth_rate(self):
        """Growth above the Abel reference exp(−∫₀ᵀ b); equals growth_rate without damping."""
        if abs(self.normalised) <= 2.0:
            return 0.0
        return float(np.log(self.spectral_radius / np.sqrt(self.det_monodromy)) / self.period)

    def as_dict(self):
        return {'lambda': self.lambda_spec, 'discriminant': self.discriminant, 'det': self.det_monodromy,
                'growth_rate': self.growth_rate}


@dataclass
class InstabilityInterval:
    """
    max_growth_rate is log(spectral radius)/T at the peak. The peak is located on
    the growth relative to exp(−∫₀ᵀ b), max_relative_growth_rate; the two differ
    by the mean damping and coincide without damping.
    """
    lower: float
    upper: float
    max_growth_rate: float
    peak_lambda: float
    truncated: bool = False
    max_relative_growth_rate: Optional[float] = None

    def __post_init__(self):
        if self.max_relative_growth_rate is None:
            self.max_relative_growth_rate = self.max_growth_rate

    @property
    def width(self):
        return self.upper - self.lower

    def as_dict(self):
        return {'lower': self.lower, 'upper': self.upper, 'max_growth_rate': self.max_growth_rate,
                'max_relative_growth_rate': self.max_relative_growth_rate, 'peak_lambda': self.peak_lambda,
                'truncated': self.truncated}


def _scan_tol(tol):
    return settings.WAVE_LAB['SCAN_TOL'] if tol is None else float(tol)


def monodromy(problem, lambda_spec, tol=None):
    if lambda_spec < 0:
        raise PreconditionError(f"lambda_spec={lambda_spec} must be ≥ 0")
    matrices, _ = fundamental_matrices([lambda_spec], problem.speed, 0.0, problem.period, problem.damping,
                                       problem.mass, tol=_scan_tol(tol), workers=1)
    return matrices[0]


def discriminant_scan(problem, lambdas, tol=None, workers=None):
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lambdas < 0):
        raise PreconditionError("spectral parameters must be ≥ 0")
    matrices, stats = fundamental_matrices(lambdas, problem.speed, 0.0, problem.period, problem.damping,
                                           problem.mass, tol=_scan_tol(tol), workers=workers)
    samples = [
        DiscriminantSample(float(lam), matrix.trace, matrix.det, problem.period, problem.damped)
        for lam, matrix in zip(lambdas, matrices)
    ]
    if not problem.damped:
        drift = max(abs(sample.det_monodromy - 1.0) for sample in samples)
        if drift > 1e-8:
            logger.warning("monodromy determinant drifts from 1 by %.2e; tighten the scan tolerance", drift)
    logger.info("discriminant scan: %d samples on [%g, %g], %d steps",
                lambdas.size, lambdas[0], lambdas[-1], stats.accepted)
    return samples


def scan_dataframe(samples):
    return pd.DataFrame([sample.as_dict() for sample in samples], columns=['lambda', 'discriminant', 'det',
                                                                           'growth_rate'])


def write_scan_csv(samples, path):
    scan_dataframe(samples).to_csv(path, index=False, float_format='%.17g')


def _sample(problem, lam, tol):
    matrix = monodromy(problem, lam, tol)
    return DiscriminantSample(float(lam), matrix.trace, matrix.det, problem.period, problem.damped)


def _refine(problem, stable, unstable, tol):
    """Bisect between a stable and an unstable λ until the bracket is 1e-8 relative."""
    while abs(unstable - stable) > REFINE_RTOL * max(abs(stable), abs(unstable), 1.0):
        middle = 0.5 * (stable + unstable)
        if _sample(problem, middle, tol).unstable:
            unstable = middle
        else:
            stable = middle
    return 0.5 * (stable + unstable)


def _peak(problem, lower, upper, guess, spacing, tol):
    def negative_rate(lam):
        return -_sample(problem, lam, tol).relative_growth_rate

    bounds = (max(lower, guess - spacing), min(upper, guess + spacing))
    if bounds[1] - bounds[0] <= 0:
        return guess, -negative_rate(guess)
    result = minimize_scalar(negative_rate, bounds=bounds, method='bounded',
                             options={'xatol': 1e-6 * max(bounds[1] - bounds[0], 1e-12)})
    best_lam, best_rate = guess, -negative_rate(guess)
    if -result.fun > best_rate:
        best_lam, best_rate = float(result.x), float(-result.fun)
    return best_lam, best_rate


def instability_intervals(problem, lambda_max, scan_points=400, tol=None, workers=None):
    """
    Scan Δ on a uniform grid of `scan_points` over (0, lambda_max], refine every
    stable/unstable transition by bisection and return the disjoint, sorted
    intervals with their peak growth rates. A finite scan only certifies what
    it finds.
    """
    if lambda_max <= 0:
        raise PreconditionError("lambda_max must be positive")
    if scan_points < 100:
        raise PreconditionError("scan_points must be at least 100")
    spacing = lambda_max / scan_points
    lambdas = spacing * np.arange(1, scan_points + 1)
    samples = discriminant_scan(problem, lambdas, tol, workers)
    unstable = np.array([sample.unstable for sample in samples])

    runs = []
    index = 0
    while index < unstable.size:
        if not unstable[index]:
            index += 1
            continue
        start = index
        while index + 1 < unstable.size and unstable[index + 1]:
            index += 1
        runs.append((start, index))
        index += 1

    def build(run):
        start, stop = run
        if start == 0:
            lower = 0.0 if _sample(problem, 0.0, tol).unstable else _refine(problem, 0.0, lambdas[0], tol)
        else:
            lower = _refine(problem, lambdas[start - 1], lambdas[start], tol)
        truncated = stop == unstable.size - 1
        upper = float(lambdas[-1]) if truncated else _refine(problem, lambdas[stop + 1], lambdas[stop], tol)
        inside = [samples[k] for k in range(start, stop + 1)]
        guess = max(inside, key=lambda sample: sample.relative_growth_rate).lambda_spec
        peak_lambda, relative_rate = _peak(problem, lower, upper, guess, spacing, tol)
        absolute_rate = _sample(problem, peak_lambda, tol).growth_rate
        return InstabilityInterval(float(lower), float(upper), absolute_rate, peak_lambda, truncated, relative_rate)

    intervals = [interval for interval in ordered_map(build, runs, workers) if interval.upper > interval.lower]
    for interval in intervals:
        if interval.truncated:
            logger.warning("instability interval starting at λ=%.6g may be truncated at lambda_max=%g",
                           interval.lower, lambda_max)
    if not intervals:
        logger.info("no instability interval found up to λ=%g (%d scan points)", lambda_max, scan_points)
    return intervals


def growth_rate(problem, lambda_spec, tol=None):
    """ν = log(spectral radius of M)/T, exactly 0 for |Δ| ≤ 2 without damping."""
    return _sample(problem, lambda_spec, tol).growth_rate


@dataclass
class YagdjianResult:
    trace: EnergyTrace
    fitted_rate: float
    predicted_rate: float
    support: tuple
    diagnostics: List[tuple] = field(default_factory=list)

    @property
    def relative_error(self):
        return abs(self.fitted_rate - self.predicted_rate) / self.predicted_rate

    @property
    def passed(self):
        return self.relative_error <= 0.02

    @property
    def diagnostic(self):
        """log(E(t)/E(0))/log t at the horizon."""
        return self.diagnostics[-1][1] if self.diagnostics else float('nan')

    @property
    def raw_diagnostic(self):
        t, value = self.trace.times[-1], self.trace.values[-1]
        return float(np.log(value) / np.log(t))

    def as_dict(self):
        return {
            'fitted_rate': self.fitted_rate,
            'predicted_rate': self.predicted_rate,
            'relative_error': self.relative_error,
            'passed': self.passed,
            'support': list(self.support),
            'diagnostic': self.diagnostic,
            'log_energy_over_log_t': self.raw_diagnostic,
            'diagnostics': [{'t': t, 'ratio': ratio} for t, ratio in self.diagnostics],
        }


def growth_data(interval, n_modes=64, support_fraction=0.05):
    """Smooth bump weight in λ around the peak of `interval`, one mode per Gauss-Legendre node."""
    half = 0.5 * support_fraction * interval.width
    lower = max(interval.lower, interval.peak_lambda - half)
    upper = min(interval.upper, interval.peak_lambda + half)
    x, w = np.polynomial.legendre.leggauss(n_modes)
    lambdas = lower + (upper - lower) * (x + 1) / 2
    weights = (upper - lower) / 2 * w * bump((lambdas - lower) / (upper - lower))
    # the bump underflows to 0 next to the support edges
    keep = weights > 0
    return SpectralData(1, np.sqrt(lambdas[keep]), weights[keep], 1.0, 0.0, Layout.RADIAL), (lower, upper)


def yagdjian_demo(problem, interval, horizon, n_modes=64, support_fraction=0.05, tol=None, workers=None):
    """
    Energy of data spectrally supported in an instability interval, sampled at
    multiples of the period. The exponential rate fitted on the last half of
    the horizon is compared with 2·max_growth_rate.
    """
    if interval is None or interval.max_growth_rate <= 0:
        raise PreconditionError("the interval must have a positive growth rate")
    periods = int(np.floor(horizon / problem.period + 1e-12))
    if periods < 10:
        raise PreconditionError(f"horizon {horizon:g} is shorter than 10 periods")
    data, support = growth_data(interval, n_modes, support_fraction)
    times = problem.period * np.arange(periods + 1)
    ensemble = integrate_modes(data.lambdas, problem.speed, times, data.u1_hat, data.u2_hat, problem.damping,
                               problem.mass, tol=tol, workers=workers)
    trace = plancherel_energy(data, ensemble)
    trace.metadata.update({'support': list(support), 'stroboscopic_period': problem.period})

    late = trace.times >= trace.times[-1] / 2
    fitted = float(np.polyfit(trace.times[late], np.log(trace.values[late]), 1)[0])
    diagnostics = [
        (float(t), float(np.log(value / trace.values[0]) / np.log(t)))
        for t, value in zip(trace.times, trace.values) if t > 1.0
    ]
    result = YagdjianResult(trace, fitted, 2.0 * interval.max_growth_rate, support, diagnostics)
    logger.info("growth demo: fitted rate %.6g vs predicted %.6g (%.2f%%)",
                result.fitted_rate, result.predicted_rate, 100 * result.relative_error)
    return result
