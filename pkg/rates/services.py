import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from django.db import models

from coefficients.profiles import CoefficientProfile
from wave_lab.exceptions import DegenerateWindow, InadmissibleExponents, PreconditionError

from .theorems import Admissibility, TheoremId, get_theorem

logger = logging.getLogger(__name__)

R_SQUARED_GATE = 0.95


class ClockKind(models.TextChoices):
    POLY = 'poly', '1 + t'
    SHAPE_PRIMITIVE = 'shape_primitive', 'Λ(t)'
    RECIPROCAL_DAMPING = 'reciprocal_damping', '1 + ∫ ds/b(s)'
    DAMPING_EXPONENTIAL = 'damping_exponential', 'β(t) = exp(∫ b)'
    SHAPE = 'shape', 'λ(t)'


class PredictionKind(models.TextChoices):
    RATE = 'rate', 'Power decay in the clock'
    VANISHING = 'vanishing', 'Weighted quantity tends to 0'
    LIMIT = 'limit', 'Weighted quantity has a non-zero limit'
    NONE = 'none', 'No prediction'


class Quantity(models.TextChoices):
    ENERGY = 'energy', 'Energy'
    ADAPTED_ENERGY = 'adapted_energy', 'Adapted energy'
    U = 'u', 'u'
    GRAD = 'grad', '∇u'
    U_T = 'u_t', 'u_t'
    DEFICIT = 'deficit', 'Distance to the diffusive profile'


@dataclass
class ClockFunction:
    kind: str = ClockKind.POLY
    profile: Optional[CoefficientProfile] = None

    def __post_init__(self):
        self.kind = ClockKind(self.kind)
        if self.kind != ClockKind.POLY and self.profile is None:
            raise PreconditionError(f"clock {self.kind} needs a coefficient profile")

    def log(self, t):
        """log clock(t); the exponential clock never leaves log space."""
        t = np.asarray(t, dtype=float)
        if self.kind == ClockKind.POLY:
            return np.log1p(t)
        if self.kind == ClockKind.DAMPING_EXPONENTIAL:
            return np.asarray(self.profile.primitive(t), dtype=float)
        if self.kind == ClockKind.SHAPE_PRIMITIVE:
            values = self.profile.primitive(t)
        elif self.kind == ClockKind.RECIPROCAL_DAMPING:
            values = 1.0 + np.asarray(self.profile.reciprocal_primitive(t))
        else:
            values = self.profile.eval(t)
        return np.log(np.asarray(values, dtype=float))

    def __call__(self, t):
        return np.exp(self.log(t))

    def check_increasing(self, t):
        if np.any(np.diff(self.log(t)) <= 0):
            raise PreconditionError(f"clock {self.kind} is not strictly increasing on the sampled times")

    def as_dict(self):
        return {'kind': str(self.kind), 'profile': self.profile.to_spec() if self.profile else None}


@dataclass
class DecayFit:
    exponent: float
    log_amplitude: float
    r_squared: float
    window: tuple
    samples: int

    def as_dict(self):
        return {'exponent': self.exponent, 'log_amplitude': self.log_amplitude, 'r2': self.r_squared,
                'window': list(self.window), 'samples': self.samples}


@dataclass
class RatePrediction:
    theorem_id: Optional[str]
    clock: Optional[ClockFunction]
    exponent: Optional[float]
    kind: str = PredictionKind.RATE
    quantity: str = Quantity.ENERGY
    n: int = 3
    p: float = 2.0
    q: float = 2.0
    extra_factor: Optional[str] = None
    extra_profile: Optional[CoefficientProfile] = None
    note: str = ''

    def compensate(self, times, values):
        """Remove the extra factor of the estimate (1/β(t), 1/b(t) or √λ(t)) from a trace."""
        if self.extra_factor is None:
            return values
        if self.extra_factor == '1/beta':
            return values * np.exp(np.asarray(self.extra_profile.primitive(times)))
        if self.extra_factor == 'sqrt_lambda':
            return values / np.sqrt(np.asarray(self.extra_profile.eval(times)))
        if self.extra_factor == '1/b':
            return values * np.asarray(self.extra_profile.eval(times))
        raise PreconditionError(f"unknown extra factor {self.extra_factor}")

    def as_dict(self):
        return {
            'theorem_id': self.theorem_id, 'kind': str(self.kind), 'quantity': str(self.quantity),
            'exponent': self.exponent, 'clock': self.clock.as_dict() if self.clock else None,
            'n': self.n, 'p': self.p, 'q': _json_q(self.q), 'extra_factor': self.extra_factor, 'note': self.note,
        }


def _json_q(q):
    return 'inf' if np.isinf(q) else q


@dataclass
class VerificationReport:
    prediction: RatePrediction
    fitted: Optional[DecayFit]
    passed: Optional[bool]
    tolerance: float
    predicted: Optional[float]
    details: dict = field(default_factory=dict)

    def as_dict(self):
        prediction = self.prediction
        return {
            'theorem_id': prediction.theorem_id,
            'n': prediction.n, 'p': prediction.p, 'q': _json_q(prediction.q),
            'kind': str(prediction.kind),
            'predicted': self.predicted,
            'fitted': self.fitted.exponent if self.fitted else None,
            'r2': self.fitted.r_squared if self.fitted else None,
            'window': list(self.fitted.window) if self.fitted else None,
            'tolerance': self.tolerance,
            'pass': self.passed,
            'details': self.details,
        }


def last_decade(times, decades=1.0):
    times = np.asarray(times, dtype=float)
    return (float((1.0 + times[-1]) / 10 ** decades - 1.0), float(times[-1]))


def _window_mask(times, window):
    lo, hi = window
    if not lo < hi:
        raise DegenerateWindow(f"window ({lo:g}, {hi:g}) is empty")
    if lo < times[0] - 1e-12 or hi > times[-1] + 1e-12:
        raise DegenerateWindow(f"window ({lo:g}, {hi:g}) outside the trace times")
    return (times >= lo - 1e-12) & (times <= hi + 1e-12)


def fit_power_decay(trace, clock=None, window=None):
    """Least-squares slope of log value against log clock; the exponent is minus the slope."""
    return _fit(np.asarray(trace.times), np.asarray(trace.values), clock or ClockFunction(), window)


def _fit(times, values, clock, window):
    window = tuple(window) if window is not None else last_decade(times)
    mask = _window_mask(times, window)
    if mask.sum() < 10:
        raise DegenerateWindow(f"window {window} holds {int(mask.sum())} samples, at least 10 are needed")
    if np.any(values[mask] <= 0) or not np.all(np.isfinite(values[mask])):
        raise PreconditionError("power fits need positive finite values")
    x, y = clock.log(times[mask]), np.log(values[mask])
    if np.ptp(x) <= 1e-12:
        raise DegenerateWindow("the clock does not move across the window")
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(residual ** 2))
    r_squared = 1.0 if total <= 1e-24 * max(1.0, float(np.sum(y ** 2))) else max(0.0, 1.0 - ss_res / total)
    return DecayFit(float(-slope), float(intercept), float(min(r_squared, 1.0)), window, int(mask.sum()))


def _check_admissible(theorem, n, p, q):
    if n not in theorem.dimensions:
        raise InadmissibleExponents(f"{theorem.id} holds for n in {theorem.dimensions}, got n={n}")
    if not 1.0 <= p <= 2.0:
        raise InadmissibleExponents(f"p={p} outside [1, 2]")
    if theorem.admissibility == Admissibility.CONJUGATE:
        expected = np.inf if p == 1.0 else p / (p - 1.0)
        if not (q == expected or np.isclose(q, expected)):
            raise InadmissibleExponents(f"{theorem.id} needs conjugate exponents, got p={p}, q={q}")
    elif not 2.0 <= q <= np.inf:
        raise InadmissibleExponents(f"q={q} outside [2, ∞]")


def _gap(p, q):
    return 1.0 / p - (0.0 if np.isinf(q) else 1.0 / q)


def predict(theorem_id, n=3, p=2.0, q=2.0, k=0, alpha_order=0, quantity=Quantity.ENERGY, damping=None, shape=None):
    """
    Exponent predicted by a theorem for the given dimension and exponents.
    Energy predictions use the L² rate of ∇u squared; norm predictions use the
    L^p-L^q rate of the quantity.
    """
    theorem = get_theorem(theorem_id)
    quantity = Quantity(quantity)
    p, q = float(p), float(q)
    _check_admissible(theorem, n, p, q)
    energy = quantity in (Quantity.ENERGY, Quantity.ADAPTED_ENERGY)
    tid = theorem.id
    base = dict(theorem_id=str(tid), quantity=quantity, n=n, p=p, q=q)

    if tid in (TheoremId.FREE_STRICHARTZ, TheoremId.REISSIG_SMITH):
        exponent = 0.0 if energy else (n - 1) / 2 * _gap(p, q)
        return RatePrediction(clock=ClockFunction(), exponent=exponent, **base)

    if tid == TheoremId.REISSIG_YAGDJIAN:
        if energy:
            return RatePrediction(clock=ClockFunction(ClockKind.SHAPE, shape), exponent=-1.0,
                                  kind=PredictionKind.LIMIT, note='E_λ(t)/λ(t) → non-zero limit', **base)
        return RatePrediction(clock=ClockFunction(ClockKind.SHAPE_PRIMITIVE, shape),
                              exponent=(n - 1) / 2 * _gap(p, q), extra_factor='sqrt_lambda', extra_profile=shape,
                              **base)

    if tid == TheoremId.WIRTH_NONEFFECTIVE:
        if energy:
            return RatePrediction(clock=ClockFunction(ClockKind.DAMPING_EXPONENTIAL, damping), exponent=2.0,
                                  kind=PredictionKind.LIMIT, note='β²(t)E(t) → non-zero limit', **base)
        return RatePrediction(clock=ClockFunction(), exponent=(n - 1) / 2 * _gap(p, q), extra_factor='1/beta',
                              extra_profile=damping, **base)

    if tid == TheoremId.HIROSAWA_NAKAZAWA:
        if not energy:
            raise InadmissibleExponents("the over-damping statement concerns the energy only")
        return RatePrediction(clock=ClockFunction(), exponent=2.0, kind=PredictionKind.VANISHING,
                              note='t²E(t) → 0', **base)

    if tid in (TheoremId.WIRTH_EFFECTIVE, TheoremId.WIRTH_PERIODIC):
        clock = ClockFunction(ClockKind.RECIPROCAL_DAMPING, damping) if tid == TheoremId.WIRTH_EFFECTIVE \
            else ClockFunction()
        if energy:
            exponent = 2.0 * (n / 2 * (1.0 / p - 0.5) + 0.5)
        else:
            extra = {Quantity.U: 0.0, Quantity.GRAD: 0.5, Quantity.U_T: 1.0}.get(quantity)
            if extra is None:
                raise InadmissibleExponents(f"{tid} does not state a rate for {quantity}")
            exponent = n / 2 * _gap(p, q) + extra
            if tid == TheoremId.WIRTH_EFFECTIVE and quantity == Quantity.U_T:
                # ‖u_t‖ carries 1/b(t) on top of the clock power
                return RatePrediction(clock=clock, exponent=exponent, extra_factor='1/b', extra_profile=damping,
                                      **base)
        return RatePrediction(clock=clock, exponent=exponent, **base)

    if tid == TheoremId.MATSUMURA:
        if energy:
            exponent = 2.0 * (n / 2 * (1.0 / p - 0.5) + 0.5)
        else:
            exponent = n / 2 * _gap(p, q) + alpha_order / 2 + k
        return RatePrediction(clock=ClockFunction(), exponent=exponent, **base)

    if tid == TheoremId.NISHIHARA_DIFFUSION:
        return RatePrediction(clock=ClockFunction(), exponent=1.5 * _gap(p, q) + 1.0,
                              **{**base, 'quantity': Quantity.DEFICIT})
    return RatePrediction(clock=ClockFunction(), exponent=1.0, **{**base, 'quantity': Quantity.DEFICIT})


def no_prediction(note, quantity=Quantity.ENERGY):
    return RatePrediction(None, None, None, kind=PredictionKind.NONE, quantity=quantity, note=note)


def theorem_for_inverse_damping(mu):
    """Which statement covers b = μ/(1+t); the band μ ∈ [1/2, 1] has none."""
    if mu < 0.5:
        return TheoremId.WIRTH_NONEFFECTIVE
    if mu > 1.0:
        return TheoremId.HIROSAWA_NAKAZAWA
    return None


def clock_slope(source, target, times):
    """Regression slope of log source-clock against log target-clock over `times`."""
    x, y = target.log(times), source.log(times)
    if np.ptp(x) <= 1e-12:
        raise DegenerateWindow("target clock does not move across the window")
    return float(np.polyfit(x, y, 1)[0])


def convert_prediction(prediction, target, times):
    """Restate a prediction in another clock; β = (1+t)^μ turns exponent 2 in β into 2μ in 1+t."""
    if prediction.clock is None or prediction.clock.kind == target.kind and prediction.clock.profile is target.profile:
        return prediction
    slope = clock_slope(prediction.clock, target, times)
    converted = RatePrediction(**{**prediction.__dict__, 'clock': target, 'exponent': prediction.exponent * slope})
    converted.note = (prediction.note + f' (converted from {prediction.clock.kind}, slope {slope:.6g})').strip()
    return converted


def verify(trace, prediction, tolerance=0.05, window=None, clock=None):
    """
    Compare a trace with a prediction. Rates pass on |d̂ − d| ≤ tolerance and
    r² ≥ 0.95 (the r² gate is skipped when d = 0); vanishing predictions pass
    when clock^d·value at the end is below half its value two decades earlier.
    """
    times = np.asarray(trace.times)
    if prediction.kind == PredictionKind.NONE:
        fit = fit_power_decay(trace, clock or ClockFunction(), window)
        logger.info("exploratory trace (%s): fitted exponent %.4g", prediction.note, fit.exponent)
        return VerificationReport(prediction, fit, None, tolerance, None, {'note': prediction.note})

    window = tuple(window) if window is not None else last_decade(times)
    if clock is not None:
        prediction = convert_prediction(prediction, clock, times[_window_mask(times, window)])
    prediction.clock.check_increasing(times[_window_mask(times, window)])
    values = prediction.compensate(times, np.asarray(trace.values))
    fit = _fit(times, values, prediction.clock, window)

    if prediction.kind == PredictionKind.VANISHING:
        start = last_decade(times, decades=2.0)[0]
        weighted = np.exp(prediction.exponent * prediction.clock.log(times)) * values
        first = weighted[np.searchsorted(times, start - 1e-12)]
        ratio = float(weighted[-1] / first)
        passed = ratio < 0.5
        details = {'weighted_start': float(first), 'weighted_end': float(weighted[-1]), 'ratio': ratio,
                   'from_t': start}
    else:
        deviation = abs(fit.exponent - prediction.exponent)
        gated = prediction.exponent != 0.0
        passed = deviation <= tolerance and (not gated or fit.r_squared >= R_SQUARED_GATE)
        details = {'deviation': deviation, 'r2_gate': R_SQUARED_GATE if gated else None}
    if prediction.note:
        details['note'] = prediction.note
    level = logging.INFO if passed else logging.WARNING
    logger.log(level, "%s: predicted %.4g, fitted %.4g (r²=%.4f) -> %s", prediction.theorem_id,
               prediction.exponent, fit.exponent, fit.r_squared, 'pass' if passed else 'fail')
    return VerificationReport(prediction, fit, bool(passed), tolerance, prediction.exponent, details)


def window_shift_deviation(trace, clock, window=None, shift_decades=0.5):
    """|d̂(window) − d̂(window moved half a decade earlier)|."""
    times = np.asarray(trace.times)
    lo, hi = window if window is not None else last_decade(times)
    factor = 10 ** shift_decades
    shifted = ((1 + lo) / factor - 1, (1 + hi) / factor - 1)
    return abs(fit_power_decay(trace, clock, (lo, hi)).exponent - fit_power_decay(trace, clock, shifted).exponent)


@dataclass
class ScatteringLimit:
    limit_estimate: float
    converged: bool
    relative_variation: float
    nonzero: bool
    window: tuple

    def as_dict(self):
        return {'limit_estimate': self.limit_estimate, 'converged': self.converged,
                'relative_variation': self.relative_variation, 'nonzero': self.nonzero, 'window': list(self.window)}


def limit_weight(clock, times):
    """β² for the exponential clock, 1/λ for the shape clock, 1 without a clock."""
    if clock is None:
        return np.ones_like(times)
    if clock.kind == ClockKind.DAMPING_EXPONENTIAL:
        return np.exp(2.0 * clock.log(times))
    if clock.kind == ClockKind.SHAPE:
        return np.exp(-clock.log(times))
    raise PreconditionError(f"no limit weight for clock {clock.kind}")


def scattering_limit(trace, beta_clock=None, initial_energy=None, rel_tol=0.01):
    """Mean of the weighted energy over the final decade; converged when it varies by less than 1%."""
    times, values = np.asarray(trace.times), np.asarray(trace.values)
    positive = times[times > 0]
    if positive.size < 2 or positive[-1] / positive[0] < 100.0:
        raise DegenerateWindow("scattering limits need a trace spanning at least two decades")
    lo = times[-1] / 10
    mask = times >= lo
    weighted = limit_weight(beta_clock, times[mask]) * values[mask]
    limit = float(np.mean(weighted))
    variation = float(np.ptp(weighted) / abs(limit)) if limit != 0 else float('inf')
    e0 = float(values[0] if initial_energy is None else initial_energy)
    result = ScatteringLimit(limit, variation < rel_tol, variation, limit > 1e-6 * e0, (float(lo), float(times[-1])))
    logger.info("scattering limit %.6g (variation %.2e, converged=%s)", limit, variation, result.converged)
    return result
