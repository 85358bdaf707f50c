import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from django.db import models

from wave_lab.exceptions import DegenerateWindow, PreconditionError

from .profiles import SplitDamping, cumulative_quad

logger = logging.getLogger(__name__)


class ConditionId(models.TextChoices):
    SYMBOL_CLASS = 'symbol-class', 'Symbol-like derivative estimates'
    STABILISATION = 'stabilisation', 'Stabilisation integral'
    DISSIPATION_CLASS = 'dissipation-class', 'Dissipation classification'
    SHAPE_ADMISSIBILITY = 'shape-admissibility', 'Shape admissibility'
    OSCILLATION_PRIMITIVE = 'oscillation-primitive', 'Bounded primitive of the oscillating damping part'


class Verdict(models.TextChoices):
    SATISFIED = 'satisfied', 'Satisfied'
    VIOLATED = 'violated', 'Violated'
    INCONCLUSIVE = 'inconclusive', 'Inconclusive'


class Weight(models.TextChoices):
    INV_T = 'inv_t', '(1 + t)^-(offset + k p)'
    SHAPE_RATIO = 'shape_ratio', 'lambda (lambda / Lambda)^k'
    XI_WEIGHT = 'xi_weight', 'lambda Xi^-(offset + k)'


class DissipationClass(models.TextChoices):
    NON_EFFECTIVE = 'non_effective', 'Non-effective'
    EFFECTIVE = 'effective', 'Effective'
    OVER_DAMPING = 'over_damping', 'Over-damping'
    INCONCLUSIVE = 'inconclusive', 'Inconclusive'


@dataclass
class ConditionReport:
    condition_id: str
    grid: np.ndarray
    constants: dict = field(default_factory=dict)
    fitted_exponent: Optional[float] = None
    verdict: str = Verdict.INCONCLUSIVE
    sup_locations: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def as_dict(self):
        return {
            'condition_id': str(self.condition_id),
            'verdict': str(self.verdict),
            'constants': {str(k): float(v) for k, v in self.constants.items()},
            'sup_locations': {str(k): float(v) for k, v in self.sup_locations.items()},
            'fitted_exponent': None if self.fitted_exponent is None else float(self.fitted_exponent),
            'grid': [float(self.grid[0]), float(self.grid[-1]), int(self.grid.size)],
            'extras': self.extras,
            'warnings': list(self.warnings),
        }


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise PreconditionError("condition grids need at least two samples")
    if np.any(np.diff(grid) <= 0):
        raise PreconditionError("condition grids must be strictly increasing")
    if grid[0] < 0:
        raise PreconditionError("condition grids start at t ≥ 0")
    return grid


def last_decade(grid):
    """Mask of grid points with 1 + t within a factor 10 of the final 1 + t."""
    return (1.0 + grid) >= (1.0 + grid[-1]) / 10.0


def _loglog_slope(x, y):
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if np.count_nonzero(keep) < 2:
        raise DegenerateWindow("fewer than two positive samples in the fit window")
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


def _symbol_weights(profile, weight, grid, shape, xi):
    if weight == Weight.INV_T:
        return np.ones_like(grid), 1.0 + grid
    reference = shape or profile
    if weight == Weight.SHAPE_RATIO:
        lam = np.asarray(reference.eval(grid), dtype=float)
        return lam, np.asarray(reference.primitive(grid), dtype=float) / lam
    if xi is None:
        raise PreconditionError("xi_weight needs an auxiliary profile xi")
    base = np.asarray(shape.eval(grid), dtype=float) if shape is not None else np.ones_like(grid)
    return base, np.asarray(xi.eval(grid), dtype=float)


def check_symbol_class(profile, weight, k_max, grid, shape=None, xi=None, power=1.0, offset=0.0):
    """
    C_k = sup_grid |coef^(k)(t)| / weight_k(t) for k = 1..k_max (and k = 0 when offset > 0).

    weight_k = base(t)·scale(t)^-(offset + k·power), where (base, scale) is
    (1, 1+t) for inv_t, (λ, Λ/λ) for shape_ratio and (λ or 1, Ξ) for xi_weight.
    """
    weight = Weight(weight)
    grid = _check_grid(grid)
    if k_max > profile.max_derivative_order:
        raise PreconditionError(f"k_max={k_max} exceeds max_derivative_order={profile.max_derivative_order}")
    base, scale = _symbol_weights(profile, weight, grid, shape, xi)
    report = ConditionReport(condition_id=ConditionId.SYMBOL_CLASS, grid=grid)
    orders = range(0 if offset > 0 else 1, k_max + 1)
    tail = last_decade(grid)
    for k in orders:
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            ratio = np.abs(profile.eval(grid, k)) / (base * scale ** (-(offset + k * power)))
        ratio = np.where(np.isnan(ratio), np.inf, ratio)
        where = int(np.argmax(ratio))
        report.constants[k] = float(ratio[where])
        report.sup_locations[k] = float(grid[where])
        head = ratio[~tail]
        if head.size and np.isfinite(report.constants[k]) and np.max(head) > 0:
            report.extras.setdefault('tail_to_head', {})[str(k)] = float(np.max(ratio[tail]) / np.max(head))
    values = np.asarray(profile.eval(grid), dtype=float)
    report.extras['observed_bounds'] = [float(np.min(values)), float(np.max(values))]
    if weight != Weight.INV_T:
        # the two-sided bounds c1 λ ≤ a ≤ c2 λ are reported, never assumed
        ratio = values / base
        report.extras['observed_ratio_bounds'] = [float(np.min(ratio)), float(np.max(ratio))]
    finite = all(np.isfinite(c) for c in report.constants.values())
    report.verdict = Verdict.SATISFIED if finite else Verdict.VIOLATED
    report.extras.update({'weight': str(weight), 'power': power, 'offset': offset})
    return report


def stabilisation_measure(profile, limit, grid, shape=None):
    """S(t) = ∫₀ᵗ (λ(s)·)|coef(s) − limit| ds and its growth exponent over the last decade."""
    grid = _check_grid(grid)
    top = float(grid[-1])
    breakpoints = set(profile.breakpoints(0.0, top))
    if shape is None:
        def integrand(s):
            return abs(profile(s) - limit)
    else:
        breakpoints |= set(shape.breakpoints(0.0, top))

        def integrand(s):
            return shape(s) * abs(profile(s) - limit)

    measure = cumulative_quad(integrand, grid, breakpoints=sorted(breakpoints))
    report = ConditionReport(condition_id=ConditionId.STABILISATION, grid=grid, samples={'S': measure})
    report.extras['limit'] = float(limit)
    report.constants[0] = float(measure[-1])
    report.sup_locations[0] = top
    if np.max(np.abs(measure)) <= 1e-14 * (1.0 + top):
        report.fitted_exponent = float('-inf')
        report.verdict = Verdict.SATISFIED
        return report
    tail = last_decade(grid)
    q_hat = _loglog_slope(1.0 + grid[tail], measure[tail])
    report.fitted_exponent = q_hat
    if q_hat < 0.9:
        report.verdict = Verdict.SATISFIED
    elif q_hat > 0.95:
        report.verdict = Verdict.VIOLATED
    logger.debug("stabilisation exponent %.4f for %r (limit %g)", q_hat, profile, limit)
    return report


def classify_dissipation(b, grid):
    """Advisory classification of b(t) from the sampled envelope t·b(t)."""
    grid = _check_grid(grid)
    envelope = grid * np.asarray(b.eval(grid), dtype=float)
    report = ConditionReport(condition_id=ConditionId.DISSIPATION_CLASS, grid=grid, samples={'tb': envelope})
    decades = np.log10((1.0 + grid[-1]) / (1.0 + grid[0]))
    if decades < 3:
        message = f"grid spans {decades:.2f} decades, classification needs three"
        logger.warning(message)
        report.warnings.append(message)
        return DissipationClass.INCONCLUSIVE, report
    tail = last_decade(grid)
    previous = ((1.0 + grid) >= (1.0 + grid[-1]) / 100.0) & ~tail
    tail_max, tail_min = float(np.max(envelope[tail])), float(np.min(envelope[tail]))
    slope = _loglog_slope(grid[tail], envelope[tail])
    report.constants[0] = tail_max
    report.sup_locations[0] = float(grid[tail][np.argmax(envelope[tail])])
    report.fitted_exponent = slope
    report.extras.update({'tail_max': tail_max, 'tail_min': tail_min, 'trend': slope})
    if slope > 0.1 and tail_max > float(np.max(envelope[previous])):
        label = DissipationClass.EFFECTIVE
    elif tail_max < 0.5:
        label = DissipationClass.NON_EFFECTIVE
    elif abs(slope) <= 0.05 and tail_min > 1.0:
        label = DissipationClass.OVER_DAMPING
    else:
        label = DissipationClass.INCONCLUSIVE
    report.verdict = Verdict.INCONCLUSIVE if label == DissipationClass.INCONCLUSIVE else Verdict.SATISFIED
    report.extras['classification'] = str(label)
    return label, report


def check_shape_admissibility(shape, grid):
    """Samples λ'Λ/λ²; admissible shapes keep it in a fixed interval of (0, ∞)."""
    grid = _check_grid(grid)
    lam = np.asarray(shape.eval(grid), dtype=float)
    ratio = np.asarray(shape.eval(grid, 1), dtype=float) * np.asarray(shape.primitive(grid)) / lam ** 2
    report = ConditionReport(condition_id=ConditionId.SHAPE_ADMISSIBILITY, grid=grid, samples={'ratio': ratio})
    lower, upper = float(np.min(ratio)), float(np.max(ratio))
    limsup = float(np.max(ratio[last_decade(grid)]))
    report.constants[0], report.constants[1] = lower, upper
    report.sup_locations[1] = float(grid[np.argmax(ratio)])
    report.extras.update({'bounds': [lower, upper], 'limsup_estimate': limsup, 'limsup_below_two': limsup < 2.0})
    bounded = np.all(np.isfinite(ratio)) and lower > 0
    report.verdict = Verdict.SATISFIED if bounded else Verdict.VIOLATED
    return report


def check_bounded_primitive(damping, grid):
    """Samples sup |∫₀ᵗσ| for a split damping; a bounded sample is evidence, not proof."""
    if not isinstance(damping, SplitDamping):
        raise PreconditionError(f"{damping.family} has no oscillating part")
    grid = _check_grid(grid)
    partial = np.abs(np.asarray(damping.sigma_primitive(grid), dtype=float))
    report = ConditionReport(condition_id=ConditionId.OSCILLATION_PRIMITIVE, grid=grid,
                             samples={'sigma_integral': partial})
    tail = last_decade(grid)
    head_sup = float(np.max(partial[~tail])) if np.any(~tail) else 0.0
    tail_sup = float(np.max(partial[tail]))
    report.constants[0] = max(head_sup, tail_sup)
    report.sup_locations[0] = float(grid[np.argmax(partial)])
    report.extras.update({'head_sup': head_sup, 'tail_sup': tail_sup})
    report.verdict = Verdict.SATISFIED if tail_sup <= 1.01 * head_sup else Verdict.INCONCLUSIVE
    return report
