"""
Assembly of full solutions from mode ensembles.

Fourier convention: û(ξ) = ∫ e^{−ixξ} u(x) dx, u(x) = (2π)^{−n} ∫ e^{ixξ} û(ξ) dξ.
Radial data carry the Plancherel factor (2π)^{−n}|S^{n−1}|ρ^{n−1} in their weights,
so Σ w_i |û_i|² is the squared L² norm.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from math import gamma, pi
from typing import Tuple

import numpy as np
import pandas as pd
from django.db import models

from modes.services import EnergyWeight, mode_energies
from wave_lab.exceptions import GridMismatch, PreconditionError

logger = logging.getLogger(__name__)


class Layout(models.TextChoices):
    RADIAL = 'radial', 'Radial frequencies ρ > 0'
    LINE = 'line', 'Signed uniform ξ-grid (n = 1)'


class Clustering(models.TextChoices):
    GEOMETRIC = 'geometric', 'Geometric with a low-frequency Gauss-Legendre cluster'
    UNIFORM = 'uniform', 'Uniform midpoint nodes'


class TraceKind(models.TextChoices):
    PLAIN = 'plain', 'Energy'
    ADAPTED = 'adapted', 'Adapted energy'
    ACTION = 'action', 'Adiabatic action'
    WEIGHTED = 'weighted', 'Weighted energy'
    NORM = 'norm', 'Norm of a solution component'


class Component(models.TextChoices):
    U = 'u', 'u'
    GRAD = 'grad', 'grad u'
    U_T = 'u_t', 'u_t'


class SynthesisWarning(models.TextChoices):
    UNDER_RESOLVED = 'under_resolved', 'r_max·Δρ > π, the radial grid aliases'
    SUPPORT_TRUNCATED = 'support_truncated', 'field not negligible at the grid edge'


def sphere_area(n):
    """|S^{n−1}|, with |S^0| = 2."""
    return 2 * pi ** (n / 2) / gamma(n / 2)


@dataclass
class SpectralData:
    dimension: int
    nodes: np.ndarray
    weights: np.ndarray
    u1_hat: np.ndarray
    u2_hat: np.ndarray
    layout: str = Layout.RADIAL

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.u1_hat = np.broadcast_to(np.asarray(self.u1_hat, dtype=complex), self.nodes.shape).copy()
        self.u2_hat = np.broadcast_to(np.asarray(self.u2_hat, dtype=complex), self.nodes.shape).copy()
        if self.dimension not in (1, 2, 3):
            raise PreconditionError(f"dimension {self.dimension} not in {{1, 2, 3}}")
        if self.layout == Layout.LINE and self.dimension != 1:
            raise PreconditionError("line layout is one-dimensional")
        if self.nodes.ndim != 1 or self.weights.shape != self.nodes.shape:
            raise GridMismatch("nodes and weights must be one-dimensional and of equal length")
        if np.any(np.diff(self.nodes) <= 0):
            raise GridMismatch("nodes must be sorted and distinct")
        if self.layout == Layout.RADIAL and np.any(self.nodes <= 0):
            raise GridMismatch("radial nodes must be positive")
        if np.any(self.weights <= 0):
            raise GridMismatch("quadrature weights must be positive")
        if not (np.all(np.isfinite(self.u1_hat)) and np.all(np.isfinite(self.u2_hat))):
            raise PreconditionError("spectral amplitudes must be finite")

    @property
    def lambdas(self):
        return self.nodes ** 2

    @property
    def spacing(self):
        return float(np.max(np.diff(self.nodes))) if self.nodes.size > 1 else float('inf')

    def with_amplitudes(self, u1_hat, u2_hat):
        return SpectralData(self.dimension, self.nodes, self.weights, u1_hat, u2_hat, self.layout)

    def data_energy(self):
        """Energy ½(‖∇u₁‖² + ‖u₂‖²) of the Cauchy data."""
        return float(0.5 * np.sum(self.weights * (self.lambdas * np.abs(self.u1_hat) ** 2 + np.abs(self.u2_hat) ** 2)))


@dataclass
class FrequencyGrid:
    rho_max: float = 12.0
    count: int = 512
    clustering: str = Clustering.GEOMETRIC
    rho_min: float = 1e-3
    low_count: int = 32

    def __post_init__(self):
        if not 0 < self.rho_min < self.rho_max:
            raise PreconditionError("frequency grid needs 0 < rho_min < rho_max")
        if self.count < 2:
            raise PreconditionError("frequency grid needs at least two nodes")

    def refined(self):
        return FrequencyGrid(self.rho_max, 2 * self.count, self.clustering, self.rho_min, 2 * self.low_count)

    def radial_quadrature(self):
        """Nodes and plain quadrature weights for ∫₀^{ρ_max} f(ρ) dρ."""
        if self.clustering == Clustering.UNIFORM:
            step = self.rho_max / self.count
            return (np.arange(self.count) + 0.5) * step, np.full(self.count, step)
        nodes = np.geomspace(self.rho_min, self.rho_max, self.count)
        log_step = np.log(self.rho_max / self.rho_min) / (self.count - 1)
        weights = nodes * log_step
        weights[[0, -1]] *= 0.5
        x, w = np.polynomial.legendre.leggauss(self.low_count)
        low_nodes = self.rho_min * (x + 1) / 2
        low_weights = self.rho_min * w / 2
        return np.concatenate((low_nodes, nodes)), np.concatenate((low_weights, weights))

    def plancherel_quadrature(self, dimension):
        nodes, weights = self.radial_quadrature()
        factor = sphere_area(dimension) / (2 * pi) ** dimension
        return nodes, factor * nodes ** (dimension - 1) * weights

    def line_quadrature(self):
        """Symmetric FFT-ordered ξ-grid ξ_j = (j − N/2)Δξ with weights Δξ/(2π)."""
        count = self.count + self.count % 2
        step = 2 * self.rho_max / count
        nodes = (np.arange(count) - count // 2) * step
        return nodes, np.full(count, step / (2 * pi))


def gaussian_data(dimension, grid=None, width=1.0, amplitude1=1.0, amplitude2=0.0, layout=Layout.RADIAL):
    """Data u_j = A_j exp(−|x|²/s²) with û_j = A_j (π s²)^{n/2} exp(−s²|ξ|²/4)."""
    grid = grid or FrequencyGrid()
    if layout == Layout.LINE:
        nodes, weights = grid.line_quadrature()
    else:
        nodes, weights = grid.plancherel_quadrature(dimension)
    profile = (pi * width ** 2) ** (dimension / 2) * np.exp(-(width * nodes) ** 2 / 4)
    return SpectralData(dimension, nodes, weights, amplitude1 * profile, amplitude2 * profile, layout)


@dataclass
class EnergyTrace:
    times: np.ndarray
    values: np.ndarray
    kind: str = TraceKind.PLAIN
    quantity: str = 'energy'
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise GridMismatch("trace times and values differ in length")
        if np.any(self.values < 0):
            raise PreconditionError(f"{self.quantity} trace has negative values")

    def as_dataframe(self):
        return pd.DataFrame({'t': self.times, 'value': self.values})

    def to_csv(self, path):
        self.as_dataframe().to_csv(path, index=False, float_format='%.17g')


@dataclass(frozen=True)
class FieldSnapshot:
    t: float
    grid: np.ndarray
    values: np.ndarray
    dimension: int
    component: str = Component.U
    warnings: Tuple[str, ...] = ()

    def as_dataframe(self):
        label = 'x' if self.dimension == 1 else 'r'
        return pd.DataFrame({label: self.grid, 're': self.values.real, 'im': self.values.imag})

    def to_csv(self, path):
        self.as_dataframe().to_csv(path, index=False, float_format='%.17g')


def check_ensemble(data, ensemble):
    if len(ensemble) != data.nodes.size:
        raise GridMismatch(f"{len(ensemble)} trajectories for {data.nodes.size} nodes")
    if not np.allclose(ensemble.lambdas, data.lambdas, rtol=1e-14, atol=0):
        raise GridMismatch("trajectories were integrated on a different node grid")


def plancherel_energy(data, ensemble, speed=None, kind=TraceKind.PLAIN, weight=None):
    """
    E(t_k) = Σ_i w_i·mode_energy(state_{i,k}). Adapted and action traces use a(t_k);
    weighted traces multiply the plain energy by weight(t).
    """
    check_ensemble(data, ensemble)
    kind = TraceKind(kind)
    times = ensemble.times
    if kind in (TraceKind.ADAPTED, TraceKind.ACTION):
        if speed is None:
            raise PreconditionError(f"{kind.label.lower()} needs the speed (or shape) profile")
        per_node = mode_energies(ensemble.v, ensemble.v_dot, data.lambdas, np.asarray(speed.eval(times)),
                                 EnergyWeight(kind.value))
    else:
        per_node = mode_energies(ensemble.v, ensemble.v_dot, data.lambdas)
    values = data.weights @ per_node
    if kind == TraceKind.WEIGHTED:
        if weight is None:
            raise PreconditionError("weighted energy needs a weight function of t")
        values = values * np.asarray(weight(times), dtype=float)
    return EnergyTrace(times, values, kind, metadata={'nodes': int(data.nodes.size)})


def plancherel_norm(data, ensemble, quantity=Component.U):
    """‖u(t)‖, ‖∇u(t)‖ or ‖u_t(t)‖ in L² from the mode ensemble."""
    check_ensemble(data, ensemble)
    quantity = Component(quantity)
    if quantity == Component.U:
        density = np.abs(ensemble.v) ** 2
    elif quantity == Component.GRAD:
        density = data.lambdas[:, None] * np.abs(ensemble.v) ** 2
    else:
        density = np.abs(ensemble.v_dot) ** 2
    values = np.sqrt(data.weights @ density)
    return EnergyTrace(ensemble.times, values, TraceKind.NORM, quantity=f'L2 {quantity}')


def _component_amplitudes(data, v, v_dot, component):
    component = Component(component)
    if component == Component.U:
        return v
    if component == Component.U_T:
        return v_dot
    if data.layout == Layout.LINE:
        return 1j * data.nodes * v
    raise PreconditionError("radial synthesis of ∇u is not supported; use u or u_t")


def conjugate_grid(data):
    count = data.nodes.size
    step = 2 * pi / (count * (data.nodes[1] - data.nodes[0]))
    return (np.arange(count) - count // 2) * step


def synthesize_1d(data, v, v_dot=None, t=0.0, x_grid=None, component=Component.U):
    """Inverse transform on the conjugate x-grid of a symmetric uniform ξ-grid (FFT)."""
    if data.layout != Layout.LINE:
        raise GridMismatch("synthesize_1d needs line-layout data")
    steps = np.diff(data.nodes)
    if not np.allclose(steps, steps[0], rtol=1e-12) or data.nodes.size % 2:
        raise GridMismatch("ξ-grid must be uniform with an even node count")
    if not np.isclose(data.nodes[data.nodes.size // 2], 0.0, atol=1e-12 * steps[0]):
        raise GridMismatch("ξ-grid must be centred on 0")
    grid = conjugate_grid(data)
    if x_grid is not None and (np.shape(x_grid) != grid.shape or not np.allclose(x_grid, grid, rtol=1e-12)):
        raise GridMismatch("x_grid must be the conjugate grid of the ξ-grid")
    amplitudes = _component_amplitudes(data, np.asarray(v), None if v_dot is None else np.asarray(v_dot), component)
    count = data.nodes.size
    values = steps[0] * count / (2 * pi) * np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(amplitudes)))
    return FieldSnapshot(float(t), grid, values, 1, Component(component))


def analyse_1d(snapshot, data):
    """Forward transform of a 1-D snapshot back onto the ξ-grid of `data`."""
    step = snapshot.grid[1] - snapshot.grid[0]
    return step * np.fft.fftshift(np.fft.fft(np.fft.ifftshift(snapshot.values)))


def synthesize_radial3d(data, amplitudes, r_grid, t=0.0, component=Component.U, block=256):
    """u(r) = Σ_i w_i û_i sin(rρ_i)/(rρ_i); at r = 0 the sinc factor is 1."""
    if data.layout != Layout.RADIAL or data.dimension != 3:
        raise GridMismatch("synthesize_radial3d needs three-dimensional radial data")
    r_grid = np.asarray(r_grid, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=complex)
    if amplitudes.shape != data.nodes.shape:
        raise GridMismatch("one amplitude per node is required")
    warnings = ()
    if r_grid.size and float(np.max(r_grid)) * data.spacing > pi:
        logger.warning("radial synthesis under-resolved: r_max·Δρ = %.3g > π", float(np.max(r_grid)) * data.spacing)
        warnings = (SynthesisWarning.UNDER_RESOLVED.value,)
    weighted = data.weights * amplitudes
    values = np.empty(r_grid.shape, dtype=complex)
    for start in range(0, r_grid.size, block):
        r = r_grid[start:start + block]
        kernel = np.sinc(np.outer(r, data.nodes) / pi)
        values[start:start + block] = kernel @ weighted
    return FieldSnapshot(float(t), r_grid, values, 3, Component(component), warnings)


def support_truncated(snapshot, rel_tol=1e-10):
    """True when the field is still above rel_tol·peak at the outer grid edge(s)."""
    magnitude = np.abs(snapshot.values)
    peak = float(np.max(magnitude)) if magnitude.size else 0.0
    edges = magnitude[[0, -1]] if snapshot.dimension == 1 else magnitude[[-1]]
    return bool(peak > 0 and np.max(edges) > rel_tol * peak)


@dataclass(frozen=True)
class NormResult:
    value: float
    warnings: Tuple[str, ...] = ()


def measure_lq(snapshot, q, dimension=None):
    """
    Trapezoidal L^q norm (4πr² weight for radial 3-D); q = inf returns the maximum.
    The result carries the snapshot's warnings plus support truncation.
    """
    dimension = dimension or snapshot.dimension
    warnings = tuple(snapshot.warnings)
    if support_truncated(snapshot):
        logger.warning("L^q norm at t=%g: field not negligible at the grid edge, support truncated", snapshot.t)
        warnings += (SynthesisWarning.SUPPORT_TRUNCATED.value,)
    magnitude = np.abs(snapshot.values)
    if np.isinf(q):
        return NormResult(float(np.max(magnitude)), warnings)
    if q < 1:
        raise PreconditionError(f"q={q} outside [1, ∞]")
    integrand = magnitude ** q
    if dimension == 3:
        integrand = 4 * pi * snapshot.grid ** 2 * integrand
    elif dimension != 1:
        raise PreconditionError("spatial norms exist for n = 1 and radial n = 3 only")
    return NormResult(float(np.trapz(integrand, snapshot.grid) ** (1.0 / q)), warnings)


def lq_norm(snapshot, q, dimension=None):
    return measure_lq(snapshot, q, dimension).value


def _default_spatial_grid(data, extent=None):
    if data.layout == Layout.LINE:
        return conjugate_grid(data)
    extent = extent or pi / data.spacing
    return np.linspace(0.0, extent, 4097)


def synthesize(data, amplitudes, grid=None, t=0.0, component=Component.U):
    if data.layout == Layout.LINE:
        return synthesize_1d(data, amplitudes, t=t, x_grid=grid)
    return synthesize_radial3d(data, amplitudes, _default_spatial_grid(data) if grid is None else grid, t, component)


def data_norm(data, r_p=0.0, p=2, component='u1', grid=None):
    """‖⟨D⟩^{r_p} u_j‖_{L^p} for p ∈ {1, 2}."""
    if p not in (1, 2):
        raise PreconditionError("data norms are supported for p ∈ {1, 2}")
    amplitudes = data.u1_hat if component == 'u1' else data.u2_hat
    amplitudes = (1.0 + data.lambdas) ** (r_p / 2) * amplitudes
    if p == 2:
        return float(np.sqrt(np.sum(data.weights * np.abs(amplitudes) ** 2)))
    return lq_norm(synthesize(data, amplitudes, grid), 1)


def spatial_energy(gradient, velocity):
    """½(‖∇u‖² + ‖u_t‖²) from two snapshots on the same spatial grid."""
    if gradient.grid.shape != velocity.grid.shape or not np.allclose(gradient.grid, velocity.grid):
        raise GridMismatch("energy snapshots must share their grid")
    return 0.5 * (lq_norm(gradient, 2) ** 2 + lq_norm(velocity, 2) ** 2)


def radial_gradient(snapshot):
    """∂_r u on a uniform radial grid (second-order differences)."""
    return FieldSnapshot(snapshot.t, snapshot.grid, np.gradient(snapshot.values, snapshot.grid, edge_order=2),
                         snapshot.dimension, Component.GRAD, snapshot.warnings)


def dispersive_trace(data, ensemble, q=np.inf, component=Component.U_T, grid=None, time_indices=None):
    """
    ‖component(t)‖_{L^q} at the ensemble times, by spatial synthesis. metadata['warnings']
    counts the samples that raised each synthesis warning.
    """
    check_ensemble(data, ensemble)
    component = Component(component)
    indices = range(ensemble.times.size) if time_indices is None else time_indices
    values, flagged = [], Counter()
    for k in indices:
        amplitudes = _component_amplitudes(data, ensemble.v[:, k], ensemble.v_dot[:, k], component)
        if data.layout == Layout.LINE:
            snapshot = synthesize_1d(data, amplitudes, t=ensemble.times[k], x_grid=grid)
        else:
            snapshot = synthesize_radial3d(data, amplitudes, _default_spatial_grid(data) if grid is None else grid,
                                           ensemble.times[k], component)
        norm = measure_lq(snapshot, q)
        values.append(norm.value)
        flagged.update(norm.warnings)
    times = ensemble.times[list(indices)]
    return EnergyTrace(times, np.asarray(values), TraceKind.NORM, quantity=f'L{q} {component}',
                       metadata={'warnings': dict(sorted(flagged.items()))})


def node_doubling_deviation(first, second):
    """max relative difference of two traces on the same times."""
    if first.times.shape != second.times.shape or not np.allclose(first.times, second.times):
        raise GridMismatch("traces must share their times")
    scale = np.maximum(np.abs(first.values), np.finfo(float).tiny)
    return float(np.max(np.abs(second.values - first.values) / scale))


def trace_frame(traces):
    """Wide DataFrame t, <label>... for traces sharing times."""
    frame = None
    for label, trace in traces.items():
        column = pd.DataFrame({'t': trace.times, label: trace.values})
        frame = column if frame is None else frame.merge(column, on='t', how='outer')
    return frame


__all__ = [
    'Clustering', 'Component', 'EnergyTrace', 'FieldSnapshot', 'FrequencyGrid', 'Layout', 'NormResult',
    'SpectralData', 'SynthesisWarning', 'TraceKind', 'analyse_1d', 'data_norm', 'dispersive_trace', 'gaussian_data',
    'lq_norm', 'measure_lq', 'plancherel_energy', 'plancherel_norm', 'radial_gradient', 'spatial_energy',
    'support_truncated', 'synthesize_1d', 'synthesize_radial3d',
]

