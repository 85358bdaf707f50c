"""
Large-time comparisons: damped waves against heat surrogates, the diffusion
constants of periodic dampings, and the change of variables that turns an
increasing speed into a dissipation.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings
from scipy import integrate

from coefficients.profiles import Constant, LiouvilleDamping, Role
from modes.services import ModeState, fundamental_matrices, integrate_modes
from rates.services import ClockFunction, fit_power_decay
from spectral.services import EnergyTrace, TraceKind, check_ensemble
from wave_lab.exceptions import EstimatorError, PreconditionError

logger = logging.getLogger(__name__)

ESTIMATOR_TOL = 1e-12
LADDER_RATIO = 4.0


@dataclass(frozen=True)
class HeatSurrogate:
    """ŵ(t) = (û₁ + β û₂) exp(−α λ t), the Fourier side of w_t = αΔw, w(0) = u₁ + βu₂."""
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise PreconditionError(f"diffusion coefficient alpha={self.alpha} must be positive")

    def modes(self, lambdas, times, u1_hat, u2_hat):
        lambdas, times = np.asarray(lambdas, dtype=float), np.asarray(times, dtype=float)
        amplitude = np.asarray(u1_hat) + self.beta * np.asarray(u2_hat)
        return amplitude[:, None] * np.exp(-self.alpha * np.outer(lambdas, times))

    def scaled(self, alpha_factor=1.0, beta_factor=1.0):
        return HeatSurrogate(self.alpha * alpha_factor, self.beta * beta_factor)


def free_wave_modes(lambdas, times, u1_hat, u2_hat):
    """Closed-form v = û₁ cos(ρt) + û₂ sin(ρt)/ρ of the free wave, and v′."""
    rho = np.sqrt(np.asarray(lambdas, dtype=float))[:, None]
    times = np.asarray(times, dtype=float)[None, :]
    u1, u2 = np.asarray(u1_hat)[:, None], np.asarray(u2_hat)[:, None]
    phase = rho * times
    sinc = times * np.sinc(phase / np.pi)
    v = u1 * np.cos(phase) + u2 * sinc
    v_dot = -u1 * rho * np.sin(phase) + u2 * np.cos(phase)
    return v, v_dot


def mode_deficit(ensemble, u1_hat, u2_hat, surrogate, free_wave=False):
    """v̂ − ŵ per node, minus e^{−t/2} times the free wave with data (u₁, u₂ + u₁/2) when requested."""
    deficit = ensemble.v - surrogate.modes(ensemble.lambdas, ensemble.times, u1_hat, u2_hat)
    if free_wave:
        u1_hat = np.asarray(u1_hat)
        wave, _ = free_wave_modes(ensemble.lambdas, ensemble.times, u1_hat, np.asarray(u2_hat) + u1_hat / 2)
        deficit = deficit - np.exp(-ensemble.times / 2)[None, :] * wave
    return deficit


def diffusion_deficit(data, ensemble, surrogate, free_wave=False, damping=None):
    """‖u(t) − w(t)‖ in L² (optionally also minus the damped free wave) assembled by Plancherel."""
    check_ensemble(data, ensemble)
    if free_wave:
        if data.dimension != 3:
            raise PreconditionError("the three-term comparison is stated for n = 3")
        if damping is None or not damping.is_constant or not np.isclose(float(damping.eval(0.0)), 0.5):
            raise PreconditionError("the three-term comparison needs 2b ≡ 1")
    deficit = mode_deficit(ensemble, data.u1_hat, data.u2_hat, surrogate, free_wave)
    values = np.sqrt(data.weights @ np.abs(deficit) ** 2)
    return EnergyTrace(ensemble.times, values, TraceKind.NORM, quantity='L2 deficit',
                       metadata={'alpha': surrogate.alpha, 'beta': surrogate.beta, 'free_wave': free_wave})


@dataclass
class DiffusionGain:
    gain: float
    deficit_fit: object
    solution_fit: object

    def as_dict(self):
        return {'gain': self.gain, 'deficit': self.deficit_fit.as_dict(), 'solution': self.solution_fit.as_dict()}


def decay_gain(deficit_trace, solution_trace, window=None, clock=None):
    """Fitted deficit exponent minus fitted solution exponent on the same window."""
    clock = clock or ClockFunction()
    deficit_fit = fit_power_decay(deficit_trace, clock, window)
    solution_fit = fit_power_decay(solution_trace, clock, window)
    return DiffusionGain(deficit_fit.exponent - solution_fit.exponent, deficit_fit, solution_fit)


def _damping_period(damping):
    if damping.is_constant:
        return 1.0
    if damping.period is None:
        raise PreconditionError(f"{damping.family} is not periodic")
    return float(damping.period)


def closed_form_beta(damping, period=None):
    """β₀ = ∫₀ᵀ e^{−2∫₀ˢ b} ds / (1 − e^{−2∫₀ᵀ b}), the λ = 0 limit of the slow projection."""
    period = period or _damping_period(damping)
    total = float(damping.primitive(period))
    numerator, _ = integrate.quad(lambda s: np.exp(-2.0 * float(damping.primitive(s))), 0.0, period,
                                  epsabs=1e-13, epsrel=1e-12, limit=200)
    return numerator / -np.expm1(-2.0 * total)


def _slow_mode(matrix, lam):
    values, right = np.linalg.eig(matrix)
    if np.any(np.abs(values.imag) > 0):
        raise EstimatorError(f"complex monodromy eigenvalues at λ={lam:.3g}; shrink lambda0")
    values, right = values.real, right.real
    order = np.argsort(-np.abs(values))
    slow, fast = values[order[0]], values[order[1]]
    if not slow > 0 or abs(slow) <= abs(fast) * (1 + 1e-6):
        raise EstimatorError(f"monodromy eigenvalues nearly degenerate at λ={lam:.3g}; shrink lambda0")
    left = np.linalg.inv(right)[order[0]]
    vector = right[:, order[0]]
    # slow amplitude of v from data (u1, u2) is (left · data)·vector[0]
    coefficients = left * vector[0]
    return slow, coefficients[1] / coefficients[0]


def _richardson(column, ratio, order):
    factor = ratio ** order
    return [(factor * fine - coarse) / (factor - 1) for coarse, fine in zip(column, column[1:])]


@dataclass
class DiffusionConstants:
    alpha_hat: float
    beta_hat: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def surrogate(self):
        return HeatSurrogate(self.alpha_hat, self.beta_hat)

    def as_dict(self):
        return {'alpha_hat': self.alpha_hat, 'beta_hat': self.beta_hat, 'diagnostics': self.diagnostics}


def estimate_alpha_beta(damping, levels=6, lambda0=None, tol=ESTIMATOR_TOL, workers=None):
    """
    Diffusion constants of a periodic (or constant) damping from the slow
    Floquet mode at small λ: α̂ extrapolates −ν_slow(λ)/λ and β̂ the (0, 1)
    projection onto the slow eigenvector, on the ladder λ_k = λ₀ 4^{−k}.
    """
    period = _damping_period(damping)
    mean = float(damping.primitive(period)) / period
    if not mean > 0:
        raise PreconditionError("damping must be positive on average")
    lambda0 = lambda0 or min(0.05, 0.2 * mean ** 2)
    lambdas = lambda0 * LADDER_RATIO ** -np.arange(levels + 1.0)
    matrices, stats = fundamental_matrices(lambdas, Constant(1.0), 0.0, period, damping, tol=tol, workers=workers)

    alphas, betas = [], []
    for lam, matrix in zip(lambdas, matrices):
        slow, beta = _slow_mode(matrix.entries, lam)
        alphas.append(-np.log(slow) / period / lam)
        betas.append(beta)

    alpha_table, beta_table = [alphas], [betas]
    for order in (1, 2):
        alpha_table.append(_richardson(alpha_table[-1], LADDER_RATIO, order))
        beta_table.append(_richardson(beta_table[-1], LADDER_RATIO, order))
    alpha_hat, beta_hat = float(alpha_table[-1][-1]), float(beta_table[-1][-1])
    beta0 = closed_form_beta(damping, period)
    diagnostics = {
        'lambdas': lambdas.tolist(),
        'alpha_table': [[float(x) for x in column] for column in alpha_table],
        'beta_table': [[float(x) for x in column] for column in beta_table],
        'alpha_residual': abs(alpha_hat - float(alpha_table[-2][-1])),
        'beta_residual': abs(beta_hat - float(beta_table[-2][-1])),
        'beta_closed_form': beta0,
        'period': period,
        'steps': stats.accepted,
    }
    if not alpha_hat > 0:
        raise EstimatorError(f"non-positive diffusion coefficient {alpha_hat:.6g}")
    logger.info("diffusion constants: alpha=%.8g beta=%.8g (closed-form beta %.8g)", alpha_hat, beta_hat, beta0)
    return DiffusionConstants(alpha_hat, beta_hat, diagnostics)


def liouville_damping(shape):
    """Damping b with 2b(t) = λ′(s)/λ(s)², s = Λ⁻¹(t), on t ≥ Λ(0)."""
    if shape.role != Role.SHAPE:
        raise PreconditionError("the change of variables needs a shape profile")
    return LiouvilleDamping(shape)


@dataclass
class LiouvilleMap:
    shape: object
    tol: float = 1e-12

    def forward(self, s):
        return self.shape.primitive(s)

    def inverse(self, t):
        s = self.shape.inverse_primitive(t)
        residual = np.max(np.abs(self.forward(s) - np.asarray(t)) / (1.0 + np.abs(np.asarray(t))))
        if residual > 1e-10:
            raise PreconditionError(f"inverse primitive residual {residual:.2e} exceeds 1e-10")
        return s

    @property
    def damping(self):
        return liouville_damping(self.shape)

    def map_states(self, s, v, v_dot):
        """u(t) = v(s), u′(t) = v′(s)/λ(s) at t = Λ(s)."""
        return v, v_dot / np.asarray(self.shape.eval(s))


@dataclass
class LiouvilleCheck:
    residual: float
    absolute_residual: float
    horizon: float
    tol: float

    @property
    def passed(self):
        return self.residual <= 10 * self.tol

    def as_dict(self):
        return {'residual': self.residual, 'absolute_residual': self.absolute_residual, 'horizon': self.horizon,
                'tol': self.tol, 'pass': self.passed}


def liouville_verify(shape, lambda_spec, init, horizon, tol=None, samples=201):
    """
    Integrate the increasing-speed mode in original time and the damped mode
    in transformed time t = Λ(s); return the largest state difference over the
    horizon, normalised by the largest state.
    """
    tol = settings.WAVE_LAB['DEFAULT_TOL'] if tol is None else float(tol)
    if horizon <= 0:
        raise PreconditionError("horizon must be positive")
    init = init if isinstance(init, ModeState) else ModeState(*init)
    mapping = LiouvilleMap(shape)
    start = float(mapping.forward(0.0))
    t_grid = start + np.linspace(0.0, horizon, samples)
    s_grid = np.asarray(mapping.inverse(t_grid), dtype=float)
    s_grid[0] = 0.0

    original = integrate_modes([lambda_spec], shape, s_grid, init.v, init.v_dot, tol=tol, workers=1)
    u, u_dot = mapping.map_states(s_grid, original.v[0], original.v_dot[0])
    transformed = integrate_modes([lambda_spec], Constant(1.0), t_grid, u[0], u_dot[0],
                                  damping=mapping.damping, tol=tol, workers=1)
    difference = np.maximum(np.abs(u - transformed.v[0]), np.abs(u_dot - transformed.v_dot[0]))
    scale = max(float(np.max(np.maximum(np.abs(u), np.abs(u_dot)))), np.finfo(float).tiny)
    absolute = float(np.max(difference))
    check = LiouvilleCheck(absolute / scale, absolute, float(horizon), tol)
    logger.info("Liouville check for %s: residual %.3e (tol %.1e)", shape.family, check.residual, tol)
    return check
