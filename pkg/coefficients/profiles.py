"""
Analytic coefficient families for the mode equation

    v'' + 2 b(t) v' + (a(t)^2 |xi|^2 + m(t)^2) v = 0.

Every family evaluates its derivatives in closed form (vectorised over t) and
its primitive in closed form where one exists, otherwise by adaptive
quadrature split at the family's breakpoints.
"""
import logging
from math import comb, e, factorial, pi

import numpy as np
from django.conf import settings
from django.db import models
from scipy import integrate, optimize

from wave_lab.exceptions import CoefficientDomainError, InversionError, OrderExceeded, QuadratureError

from .bump import bump, bump_integral, bump_maximum

logger = logging.getLogger(__name__)


class Family(models.TextChoices):
    CONSTANT = 'constant', 'Constant'
    LOG_SINE = 'log_sine', 'c0 + c1 sin(log(e + t))'
    SINE_POWER = 'sine_power', 'c0 + c1 sin(t^alpha)'
    BUMP_SUM = 'bump_sum', 'Sum of scaled bumps'
    POWER_SHAPE = 'power_shape', '(1 + t)^l'
    INVERSE_DAMPING = 'inverse_damping', 'mu / (1 + t)'
    POWER_DAMPING = 'power_damping', '(1 + t)^-gamma'
    PERIODIC_DAMPING = 'periodic_damping', 'b0 + b1 cos(2 pi t / T)'
    MODULATED_DAMPING = 'modulated_damping', 'mu(t) (1 + sin(t^alpha)) / 2'
    LOG_MODULATED_DAMPING = 'log_modulated_damping', 'mu(t) (1 + sin(t / log(e + t))) / 2'
    PERIODIC_SPEED = 'periodic_speed', 'sqrt(c0^2 + eps cos(2 pi t / T))'
    PRODUCT = 'product', 'Product of two profiles'
    LIOUVILLE_DAMPING = 'liouville_damping', 'Damping of a Liouville-transformed shape'


class Role(models.TextChoices):
    SPEED = 'speed', 'Propagation speed a(t)'
    DAMPING = 'damping', 'Dissipation b(t)'
    MASS = 'mass', 'Mass m(t)'
    SHAPE = 'shape', 'Shape function lambda(t)'


def _quad_tol():
    return settings.WAVE_LAB['QUAD_TOL']


def _quad_segment(func, lower, upper, tol):
    result = integrate.quad(func, lower, upper, epsabs=tol, epsrel=tol, limit=200, full_output=1)
    value, abserr = result[0], result[1]
    # a fourth element is quad's warning message
    if len(result) > 3 and abserr > 100 * max(tol, tol * abs(value)):
        raise QuadratureError(f"quadrature on [{lower:.6g}, {upper:.6g}] did not converge", abserr)
    return value


def cumulative_quad(func, t, start=0.0, breakpoints=(), tol=None):
    """∫_start^t func for every entry of t, split at the breakpoints."""
    tol = _quad_tol() if tol is None else tol
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    knots = np.unique(np.asarray(breakpoints, dtype=float))
    out = np.empty_like(flat)
    total, left = 0.0, float(start)
    for idx in np.argsort(flat, kind='stable'):
        right = float(flat[idx])
        if right > left:
            inner = knots[(knots > left) & (knots < right)]
            edges = np.concatenate(([left], inner, [right]))
            for lo, hi in zip(edges[:-1], edges[1:]):
                total += _quad_segment(func, lo, hi, tol)
            left = right
        out[idx] = total
    return out.reshape(t.shape)


def falling_factorial(x, k):
    out = 1.0
    for j in range(k):
        out *= x - j
    return out


def sine_chain(u, k):
    """D^k sin(u(t)) for k ≤ 4, given the derivative list [u, u', ..., u^(k)]."""
    s, c = np.sin(u[0]), np.cos(u[0])
    if k == 0:
        return s
    if k == 1:
        return c * u[1]
    if k == 2:
        return -s * u[1] ** 2 + c * u[2]
    if k == 3:
        return -c * u[1] ** 3 - 3 * s * u[1] * u[2] + c * u[3]
    if k == 4:
        return s * u[1] ** 4 - 6 * c * u[1] ** 2 * u[2] - 3 * s * u[2] ** 2 - 4 * s * u[1] * u[3] + c * u[4]
    raise ValueError("sine_chain is implemented up to order 4")


def _power_derivatives(t, alpha, k):
    return [falling_factorial(alpha, j) * np.power(t, alpha - j) for j in range(k + 1)]


def _sine_power_zeros(alpha, t0, t1):
    n_lo = int(np.floor(max(t0, 0.0) ** alpha / pi)) + 1
    n_hi = int(np.floor(t1 ** alpha / pi))
    if n_hi < n_lo:
        return []
    return list((np.arange(n_lo, n_hi + 1) * pi) ** (1.0 / alpha))


class CoefficientProfile:
    """A named analytic coefficient family."""

    family = None
    default_role = Role.SPEED
    max_derivative_order = 8
    period = None
    domain_start = 0.0

    def __init__(self, role=None):
        self.role = Role(role) if role else self.default_role

    @property
    def params(self):
        return {}

    @property
    def is_constant(self):
        return False

    def to_spec(self):
        return {
            'family': str(self.family),
            'params': self.params,
            'role': str(self.role),
            'period': self.period,
        }

    def __repr__(self):
        args = ', '.join(f'{key}={value!r}' for key, value in self.params.items())
        return f'{type(self).__name__}({args})'

    def _check_domain(self, t):
        if np.any(t < self.domain_start):
            raise CoefficientDomainError(
                f"{self.family}: evaluated at t={float(np.min(t)):.6g} below domain start {self.domain_start:g}"
            )

    @staticmethod
    def _finish(values, t):
        values = np.broadcast_to(values, t.shape).astype(float)
        return float(values) if t.ndim == 0 else values

    def eval(self, t, k=0):
        """k-th derivative at t (scalar in, float out; array in, array out)."""
        if k < 0 or k > self.max_derivative_order:
            raise OrderExceeded(self.family, k, self.max_derivative_order)
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            values = self._derivative(t, k)
        return self._finish(values, t)

    def __call__(self, t):
        return self.eval(t, 0)

    def squared(self, t):
        value = self.eval(t, 0)
        return value * value

    def primitive(self, t):
        """Λ(t) = 1 + ∫₀ᵗλ for shape profiles, ∫ from the domain start otherwise."""
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        values = self._integral(t)
        if self.role == Role.SHAPE:
            values = 1.0 + values
        return self._finish(values, t)

    def reciprocal_primitive(self, t):
        """∫ ds / coef(s) from the domain start."""
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        return self._finish(self._reciprocal_integral(t), t)

    def inverse_primitive(self, y):
        """Solve primitive(s) = y for s by bracket expansion and Brent's method."""
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1)
        out = np.empty_like(flat)
        base = self.primitive(self.domain_start)
        for i, target in enumerate(flat):
            if target < base - 1e-12 * (1 + abs(base)):
                raise InversionError(f"{self.family}: {target:.6g} lies below primitive({self.domain_start:g})")
            if target <= base:
                out[i] = self.domain_start
                continue
            lower, upper = self.domain_start, self.domain_start + 1.0
            while self.primitive(upper) < target:
                lower, upper = upper, self.domain_start + 2.0 * (upper - self.domain_start)
                if upper > 1e18:
                    raise InversionError(f"{self.family}: primitive does not reach {target:.6g}")
            out[i] = optimize.brentq(lambda s: self.primitive(s) - target, lower, upper, xtol=1e-12, maxiter=500)
        return self._finish(out, y)

    def breakpoints(self, t0, t1):
        """Points in (t0, t1) where quadrature should split (kinks, bump edges, zeros)."""
        return []

    def upper_bound(self, t0, t1):
        """Bound for |coef| on [t0, t1]; sampled unless the family knows it exactly."""
        grid = np.concatenate((np.linspace(t0, t1, 2049), np.asarray(self.breakpoints(t0, t1), dtype=float)))
        return 1.05 * float(np.max(np.abs(self.eval(grid))))

    def _derivative(self, t, k):
        raise NotImplementedError

    def _integral(self, t):
        top = float(np.max(t)) if t.size else self.domain_start
        return cumulative_quad(self.__call__, t, start=self.domain_start,
                               breakpoints=self.breakpoints(self.domain_start, top))

    def _reciprocal_integral(self, t):
        top = float(np.max(t)) if t.size else self.domain_start
        return cumulative_quad(lambda s: 1.0 / self(s), t, start=self.domain_start,
                               breakpoints=self.breakpoints(self.domain_start, top))


class Constant(CoefficientProfile):
    family = Family.CONSTANT

    def __init__(self, c, role=None):
        super().__init__(role)
        self.c = float(c)
        if self.role in (Role.SPEED, Role.SHAPE) and self.c <= 0:
            raise ValueError(f"constant {self.role} must be positive, got {self.c}")
        if self.role == Role.DAMPING and self.c < 0:
            raise ValueError(f"constant damping must be non-negative, got {self.c}")

    @property
    def params(self):
        return {'c': self.c}

    @property
    def is_constant(self):
        return True

    def _derivative(self, t, k):
        return self.c if k == 0 else 0.0

    def _integral(self, t):
        return self.c * (t - self.domain_start)

    def _reciprocal_integral(self, t):
        return (t - self.domain_start) / self.c

    def upper_bound(self, t0, t1):
        return abs(self.c)


class LogSine(CoefficientProfile):
    family = Family.LOG_SINE

    def __init__(self, c0, c1, role=None):
        super().__init__(role)
        self.c0, self.c1 = float(c0), float(c1)
        if self.c0 <= abs(self.c1):
            raise ValueError("log_sine needs c0 > |c1| to stay positive")

    @property
    def params(self):
        return {'c0': self.c0, 'c1': self.c1}

    def _derivative(self, t, k):
        shifted = e + t
        phase = np.log(shifted)
        a_coef, b_coef = 1.0, 0.0
        for j in range(k):
            a_coef, b_coef = -b_coef - j * a_coef, a_coef - j * b_coef
        chain = shifted ** (-k) * (a_coef * np.sin(phase) + b_coef * np.cos(phase))
        return self.c0 + self.c1 * chain if k == 0 else self.c1 * chain

    def _integral(self, t):
        shifted = e + t
        phase = np.log(shifted)
        oscillating = (shifted * (np.sin(phase) - np.cos(phase)) - e * (np.sin(1.0) - np.cos(1.0))) / 2
        return self.c0 * t + self.c1 * oscillating

    def upper_bound(self, t0, t1):
        return self.c0 + abs(self.c1)


class SinePower(CoefficientProfile):
    family = Family.SINE_POWER
    max_derivative_order = 4

    def __init__(self, c0, c1, alpha, role=None):
        super().__init__(role)
        self.c0, self.c1, self.alpha = float(c0), float(c1), float(alpha)
        if self.alpha <= 0:
            raise ValueError("sine_power needs alpha > 0")
        if self.c0 <= abs(self.c1):
            raise ValueError("sine_power needs c0 > |c1| to stay positive")

    @property
    def params(self):
        return {'c0': self.c0, 'c1': self.c1, 'alpha': self.alpha}

    def _derivative(self, t, k):
        chain = sine_chain(_power_derivatives(t, self.alpha, k), k)
        return self.c0 + self.c1 * chain if k == 0 else self.c1 * chain

    def breakpoints(self, t0, t1):
        return _sine_power_zeros(self.alpha, t0, t1)

    def upper_bound(self, t0, t1):
        return self.c0 + abs(self.c1)


class BumpSum(CoefficientProfile):
    """a(t) = 1 + Σ η_j ψ((t − t_j)/δ_j) with t_j = 2^j, δ_j = 2^{jq}, η_j = 2^{j(q−p)}."""

    family = Family.BUMP_SUM
    max_derivative_order = 4

    def __init__(self, p, q, J, role=None):
        super().__init__(role)
        self.p, self.q, self.J = float(p), float(q), int(J)
        if not 0 < self.q < 1:
            raise ValueError("bump_sum needs 0 < q < 1 so that the bumps stay disjoint")
        if self.J < 1:
            raise ValueError("bump_sum needs at least one bump")
        j = np.arange(1, self.J + 1, dtype=float)
        self.centres = 2.0 ** j
        self.widths = 2.0 ** (j * self.q)
        self.heights = 2.0 ** (j * (self.q - self.p))

    @property
    def params(self):
        return {'p': self.p, 'q': self.q, 'J': self.J}

    def _derivative(self, t, k):
        out = np.full(t.shape, 1.0 if k == 0 else 0.0)
        for start, width, height in zip(self.centres, self.widths, self.heights):
            out = out + height * width ** (-k) * bump((t - start) / width, k)
        return out

    def _integral(self, t):
        out = np.array(t, dtype=float, copy=True)
        for start, width, height in zip(self.centres, self.widths, self.heights):
            out = out + height * width * bump_integral((t - start) / width)
        return out

    def breakpoints(self, t0, t1):
        edges = np.concatenate((self.centres, self.centres + self.widths))
        return sorted(float(x) for x in edges if t0 < x < t1)

    def upper_bound(self, t0, t1):
        live = (self.centres < t1) & (self.centres + self.widths > t0)
        peak = float(np.max(self.heights[live])) if np.any(live) else 0.0
        return 1.0 + peak * bump_maximum()


class PowerShape(CoefficientProfile):
    family = Family.POWER_SHAPE
    default_role = Role.SHAPE

    def __init__(self, ell, role=None):
        super().__init__(role)
        self.ell = float(ell)

    @property
    def params(self):
        return {'ell': self.ell}

    def _derivative(self, t, k):
        return falling_factorial(self.ell, k) * (1.0 + t) ** (self.ell - k)

    def _integral(self, t):
        if self.ell == -1.0:
            return np.log1p(t)
        return np.expm1((self.ell + 1.0) * np.log1p(t)) / (self.ell + 1.0)

    def inverse_primitive(self, y):
        if self.role != Role.SHAPE:
            return super().inverse_primitive(y)
        y = np.asarray(y, dtype=float)
        if np.any(y < 1.0 - 1e-12):
            raise InversionError(f"power_shape: Λ ≥ 1, cannot invert {float(np.min(y)):.6g}")
        excess = np.maximum(y - 1.0, 0.0)
        if self.ell == -1.0:
            return self._finish(np.expm1(excess), y)
        return self._finish(np.expm1(np.log1p((self.ell + 1.0) * excess) / (self.ell + 1.0)), y)

    def upper_bound(self, t0, t1):
        return float(max((1.0 + t0) ** self.ell, (1.0 + t1) ** self.ell))


class InverseDamping(CoefficientProfile):
    family = Family.INVERSE_DAMPING
    default_role = Role.DAMPING

    def __init__(self, mu, role=None):
        super().__init__(role)
        self.mu = float(mu)
        if self.mu < 0:
            raise ValueError("inverse_damping needs mu ≥ 0")

    @property
    def params(self):
        return {'mu': self.mu}

    def _derivative(self, t, k):
        return self.mu * (-1.0) ** k * factorial(k) / (1.0 + t) ** (k + 1)

    def _integral(self, t):
        return self.mu * np.log1p(t)

    def _reciprocal_integral(self, t):
        return (t + t * t / 2.0) / self.mu

    def upper_bound(self, t0, t1):
        return self.mu / (1.0 + t0)


class PowerDamping(CoefficientProfile):
    family = Family.POWER_DAMPING
    default_role = Role.DAMPING

    def __init__(self, gamma, role=None):
        super().__init__(role)
        self.gamma = float(gamma)
        if not -1 < self.gamma < 1:
            raise ValueError("power_damping needs gamma in (-1, 1)")

    @property
    def params(self):
        return {'gamma': self.gamma}

    def _derivative(self, t, k):
        return falling_factorial(-self.gamma, k) * (1.0 + t) ** (-self.gamma - k)

    def _integral(self, t):
        return np.expm1((1.0 - self.gamma) * np.log1p(t)) / (1.0 - self.gamma)

    def _reciprocal_integral(self, t):
        return np.expm1((1.0 + self.gamma) * np.log1p(t)) / (1.0 + self.gamma)

    def upper_bound(self, t0, t1):
        return float(max((1.0 + t0) ** -self.gamma, (1.0 + t1) ** -self.gamma))


class _Periodic(CoefficientProfile):
    def __init__(self, T, role=None):
        super().__init__(role)
        self.period = float(T)
        if self.period <= 0:
            raise ValueError("period must be positive")
        self.omega = 2.0 * pi / self.period

    def _phase(self, t):
        return self.omega * np.mod(t, self.period)


class PeriodicDamping(_Periodic):
    family = Family.PERIODIC_DAMPING
    default_role = Role.DAMPING

    def __init__(self, b0, b1, T, role=None):
        super().__init__(T, role)
        self.b0, self.b1 = float(b0), float(b1)
        if self.b0 <= abs(self.b1):
            raise ValueError("periodic_damping needs b0 > |b1|")

    @property
    def params(self):
        return {'b0': self.b0, 'b1': self.b1, 'T': self.period}

    def _derivative(self, t, k):
        wave = self.b1 * self.omega ** k * np.cos(self._phase(t) + k * pi / 2)
        return self.b0 + wave if k == 0 else wave

    def _integral(self, t):
        return self.b0 * t + self.b1 * np.sin(self._phase(t)) / self.omega

    def upper_bound(self, t0, t1):
        return self.b0 + abs(self.b1)


class PeriodicSpeed(_Periodic):
    """a(t) = sqrt(S(t)), S(t) = c0² + ε cos(2πt/T); Hill's equation when b = m = 0."""

    family = Family.PERIODIC_SPEED
    max_derivative_order = 4

    def __init__(self, c0, eps, T, role=None):
        super().__init__(T, role)
        self.c0, self.eps = float(c0), float(eps)
        if self.c0 ** 2 <= abs(self.eps):
            raise ValueError("periodic_speed needs c0² > |eps|")

    @property
    def params(self):
        return {'c0': self.c0, 'eps': self.eps, 'T': self.period}

    def _square_derivative(self, t, k):
        wave = self.eps * self.omega ** k * np.cos(self._phase(t) + k * pi / 2)
        return self.c0 ** 2 + wave if k == 0 else wave

    def squared(self, t):
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        return self._finish(self._square_derivative(t, 0), t)

    def _derivative(self, t, k):
        # differentiate a² = S repeatedly and solve for the highest derivative of a
        s = [self._square_derivative(t, j) for j in range(k + 1)]
        a = [np.sqrt(s[0])]
        if k >= 1:
            a.append(s[1] / (2 * a[0]))
        if k >= 2:
            a.append((s[2] / 2 - a[1] ** 2) / a[0])
        if k >= 3:
            a.append((s[3] / 2 - 3 * a[1] * a[2]) / a[0])
        if k >= 4:
            a.append((s[4] / 2 - 4 * a[1] * a[3] - 3 * a[2] ** 2) / a[0])
        return a[k]

    def upper_bound(self, t0, t1):
        return float(np.sqrt(self.c0 ** 2 + abs(self.eps)))


class SplitDamping(CoefficientProfile):
    """Damping written as 2b = μ + σ with a monotone part μ and an oscillating part σ."""

    default_role = Role.DAMPING

    def mu(self, t):
        raise NotImplementedError

    def sigma(self, t):
        raise NotImplementedError

    def sigma_primitive(self, t):
        t = np.asarray(t, dtype=float)
        self._check_domain(t)
        top = float(np.max(t)) if t.size else 0.0
        values = cumulative_quad(lambda s: float(self.sigma(s)), t, breakpoints=self.breakpoints(0.0, top))
        return self._finish(values, t)


class ModulatedDamping(SplitDamping):
    """2b = μ + σ, μ = μ0/(1+t), σ = μ·sin(t^α)."""

    family = Family.MODULATED_DAMPING
    max_derivative_order = 4

    def __init__(self, mu0, alpha, role=None):
        super().__init__(role)
        self.mu0, self.alpha = float(mu0), float(alpha)
        if self.mu0 < 0:
            raise ValueError("modulated_damping needs mu0 ≥ 0")
        if self.alpha <= 0:
            raise ValueError("modulated_damping needs alpha > 0")

    @property
    def params(self):
        return {'mu0': self.mu0, 'alpha': self.alpha}

    def mu(self, t):
        return self.mu0 / (1.0 + np.asarray(t, dtype=float))

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu(t) * np.sin(t ** self.alpha)

    def _derivative(self, t, k):
        u = _power_derivatives(t, self.alpha, k)
        total = 0.0
        for j in range(k + 1):
            outer = self.mu0 / 2 * (-1.0) ** j * factorial(j) / (1.0 + t) ** (j + 1)
            inner = 1.0 + sine_chain(u, 0) if k == j else sine_chain(u, k - j)
            total = total + comb(k, j) * outer * inner
        return total

    def breakpoints(self, t0, t1):
        return _sine_power_zeros(self.alpha, t0, t1)

    def upper_bound(self, t0, t1):
        return self.mu0 / (1.0 + t0)


class LogModulatedDamping(SplitDamping):
    """2b = μ + σ, μ = μ0/((1+t) log(e+t)), σ = μ·sin(t/log(e+t))."""

    family = Family.LOG_MODULATED_DAMPING
    max_derivative_order = 1

    def __init__(self, mu0=1.0, role=None):
        super().__init__(role)
        self.mu0 = float(mu0)
        if self.mu0 < 0:
            raise ValueError("log_modulated_damping needs mu0 ≥ 0")

    @property
    def params(self):
        return {'mu0': self.mu0}

    def mu(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu0 / ((1.0 + t) * np.log(e + t))

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu(t) * np.sin(t / np.log(e + t))

    def _derivative(self, t, k):
        log_term = np.log(e + t)
        phase = t / log_term
        mu = self.mu0 / ((1.0 + t) * log_term)
        if k == 0:
            return mu * (1.0 + np.sin(phase)) / 2
        mu_dot = -self.mu0 * (log_term + (1.0 + t) / (e + t)) / ((1.0 + t) * log_term) ** 2
        phase_dot = (log_term - t / (e + t)) / log_term ** 2
        return (mu_dot * (1.0 + np.sin(phase)) + mu * np.cos(phase) * phase_dot) / 2

    def breakpoints(self, t0, t1):
        # one oscillation of sin(t / log(e + t)) is never shorter than 2π
        return list(np.arange(np.floor(t0 / pi) * pi + pi, t1, pi))

    def upper_bound(self, t0, t1):
        return self.mu0 / ((1.0 + t0) * np.log(e + t0))


class Product(CoefficientProfile):
    """a(t) = f(t)·g(t), typically a shape λ(t) times a bounded oscillation ω(t)."""

    family = Family.PRODUCT

    def __init__(self, first, second, role=None):
        super().__init__(role)
        self.first, self.second = first, second
        self.max_derivative_order = min(first.max_derivative_order, second.max_derivative_order)
        self.domain_start = max(first.domain_start, second.domain_start)
        if first.period and second.period and np.isclose(first.period, second.period, rtol=1e-14):
            self.period = first.period
        elif first.period and second.is_constant:
            self.period = first.period
        elif second.period and first.is_constant:
            self.period = second.period

    @property
    def params(self):
        return {'factors': [self.first.to_spec(), self.second.to_spec()]}

    def _derivative(self, t, k):
        return sum(comb(k, j) * self.first.eval(t, j) * self.second.eval(t, k - j) for j in range(k + 1))

    def breakpoints(self, t0, t1):
        return sorted(set(self.first.breakpoints(t0, t1)) | set(self.second.breakpoints(t0, t1)))

    def upper_bound(self, t0, t1):
        return self.first.upper_bound(t0, t1) * self.second.upper_bound(t0, t1)


class LiouvilleDamping(CoefficientProfile):
    """
    Damping produced by the change of variables u(t) = v(Λ⁻¹(t)) for a shape λ:

        2 b(t) = λ'(s) / λ(s)²,  s = Λ⁻¹(t),  t ≥ Λ(0).
    """

    family = Family.LIOUVILLE_DAMPING
    default_role = Role.DAMPING
    max_derivative_order = 1

    def __init__(self, shape, role=None):
        super().__init__(role)
        if shape.role != Role.SHAPE:
            raise ValueError("liouville_damping needs a profile with role 'shape'")
        if shape.max_derivative_order < 2:
            raise ValueError("liouville_damping needs second derivatives of the shape")
        self.shape = shape
        self.domain_start = float(shape.primitive(0.0))

    @property
    def params(self):
        return {'shape': self.shape.to_spec()}

    def original_time(self, t):
        return self.shape.inverse_primitive(t)

    def _derivative(self, t, k):
        s = self.shape.inverse_primitive(t)
        lam, lam_dot = self.shape.eval(s, 0), self.shape.eval(s, 1)
        if k == 0:
            return lam_dot / (2 * lam ** 2)
        lam_ddot = self.shape.eval(s, 2)
        return (lam_ddot / (2 * lam ** 2) - lam_dot ** 2 / lam ** 3) / lam

    def _integral(self, t):
        # ∫ b dt = ½ log λ(s) along s = Λ⁻¹(t)
        s = self.shape.inverse_primitive(t)
        return 0.5 * np.log(self.shape.eval(s, 0) / self.shape.eval(0.0, 0))

    def upper_bound(self, t0, t1):
        grid = np.linspace(t0, t1, 257)
        return 1.05 * float(np.max(np.abs(self.eval(grid))))


FAMILIES = {
    Family.CONSTANT: Constant,
    Family.LOG_SINE: LogSine,
    Family.SINE_POWER: SinePower,
    Family.BUMP_SUM: BumpSum,
    Family.POWER_SHAPE: PowerShape,
    Family.INVERSE_DAMPING: InverseDamping,
    Family.POWER_DAMPING: PowerDamping,
    Family.PERIODIC_DAMPING: PeriodicDamping,
    Family.MODULATED_DAMPING: ModulatedDamping,
    Family.LOG_MODULATED_DAMPING: LogModulatedDamping,
    Family.PERIODIC_SPEED: PeriodicSpeed,
}


def build_profile(spec, role=None):
    """Construct a profile from {'family': ..., 'params': {...}, 'role': ...}."""
    family = Family(spec['family'])
    params = dict(spec.get('params') or {})
    role = spec.get('role') or role
    if family == Family.PRODUCT:
        first, second = params['factors']
        return Product(build_profile(first), build_profile(second), role=role)
    if family == Family.LIOUVILLE_DAMPING:
        return LiouvilleDamping(build_profile(params['shape'], role=Role.SHAPE), role=role)
    profile = FAMILIES[family](role=role, **params)
    period = spec.get('period')
    if period is not None and (profile.period is None or not np.isclose(profile.period, float(period))):
        raise ValueError(f"{family}: declared period {period} does not match the family")
    return profile
