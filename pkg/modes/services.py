import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional

import numpy as np
from django.conf import settings
from django.db import models

from coefficients.profiles import CoefficientProfile
from wave_lab.exceptions import PreconditionError
from wave_lab.parallel import chunked, ordered_map

from .integrator import DormandPrince, IntegrationStats, validate_request

logger = logging.getLogger(__name__)


class EnergyWeight(models.TextChoices):
    PLAIN = 'plain', 'Plain energy'
    ADAPTED = 'adapted', 'Adapted energy'
    ACTION = 'action', 'Adiabatic action'


@dataclass
class ModeParams:
    lambda_spec: float
    speed: CoefficientProfile
    damping: Optional[CoefficientProfile] = None
    mass: Optional[CoefficientProfile] = None

    def __post_init__(self):
        if self.lambda_spec < 0:
            raise PreconditionError(f"lambda_spec={self.lambda_spec} must be ≥ 0")


@dataclass(frozen=True)
class ModeState:
    v: complex
    v_dot: complex


@dataclass
class ModeTrajectory:
    times: np.ndarray
    v: np.ndarray
    v_dot: np.ndarray
    tol_used: float
    stats: IntegrationStats = field(default_factory=IntegrationStats)

    @property
    def states(self):
        return [ModeState(complex(v), complex(w)) for v, w in zip(self.v, self.v_dot)]

    def state_at(self, index):
        return ModeState(complex(self.v[index]), complex(self.v_dot[index]))


@dataclass
class ModeEnsemble:
    """Trajectories of many modes sharing coefficients and output times; v has shape (modes, times)."""
    lambdas: np.ndarray
    times: np.ndarray
    v: np.ndarray
    v_dot: np.ndarray
    tol_used: float
    stats: IntegrationStats = field(default_factory=IntegrationStats)

    def __len__(self):
        return self.lambdas.size

    def trajectory(self, index):
        return ModeTrajectory(self.times, self.v[index], self.v_dot[index], self.tol_used)


@dataclass
class FundamentalMatrix:
    entries: np.ndarray
    t0: float
    t1: float

    @property
    def det(self):
        return float(np.linalg.det(self.entries))

    @property
    def trace(self):
        return float(np.trace(self.entries))

    def apply(self, state):
        v, w = self.entries @ np.array([state.v, state.v_dot])
        return ModeState(complex(v), complex(w))


def _defaults(tol, workers, chunk_size):
    config = settings.WAVE_LAB
    return (
        config['DEFAULT_TOL'] if tol is None else float(tol),
        config['WORKERS'] if workers is None else workers,
        config['CHUNK_SIZE'] if chunk_size is None else chunk_size,
    )


def _run_chunks(solver, lambdas, y0, times, workers, chunk_size):
    chunks = chunked(lambdas.size, chunk_size)

    def work(rows):
        index = np.arange(rows.start, rows.stop)
        return solver.integrate(lambdas[index], y0[index], times)

    results = ordered_map(work, chunks, workers)
    states = np.concatenate([states for states, _ in results]) if results else np.empty((0, times.size) + y0.shape[1:])
    stats = reduce(IntegrationStats.merge, (stats for _, stats in results), IntegrationStats())
    return states, stats


def integrate_modes(lambdas, speed, times, init_v, init_v_dot, damping=None, mass=None, tol=None,
                    workers=None, chunk_size=None):
    """
    Integrate one mode per spectral parameter from complex initial data.

    Modes are cut into fixed chunks of `chunk_size`; each chunk is one
    vectorised integration and chunks run on the bounded worker pool. The
    chunking never depends on `workers`, so results are identical for any
    thread count.
    """
    tol, workers, chunk_size = _defaults(tol, workers, chunk_size)
    times = validate_request(times, tol)
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lambdas < 0):
        raise PreconditionError("spectral parameters must be ≥ 0")
    init_v = np.broadcast_to(np.asarray(init_v, dtype=complex), lambdas.shape)
    init_v_dot = np.broadcast_to(np.asarray(init_v_dot, dtype=complex), lambdas.shape)
    y0 = np.empty((lambdas.size, 2, 2))
    y0[:, 0, 0], y0[:, 0, 1] = init_v.real, init_v.imag
    y0[:, 1, 0], y0[:, 1, 1] = init_v_dot.real, init_v_dot.imag

    solver = DormandPrince(speed, damping, mass, tol=tol)
    states, stats = _run_chunks(solver, lambdas, y0, times, workers, chunk_size)
    v = states[:, :, 0, 0] + 1j * states[:, :, 0, 1]
    v_dot = states[:, :, 1, 0] + 1j * states[:, :, 1, 1]
    logger.info("integrated %d modes to t=%g (%d steps)", lambdas.size, times[-1], stats.accepted)
    return ModeEnsemble(lambdas, times, v, v_dot, tol, stats)


def integrate_mode(params, init, output_times, tol=None):
    ensemble = integrate_modes(
        [params.lambda_spec], params.speed, output_times, init.v, init.v_dot,
        damping=params.damping, mass=params.mass, tol=tol, workers=1,
    )
    trajectory = ensemble.trajectory(0)
    trajectory.stats = ensemble.stats
    return trajectory


def fundamental_matrices(lambdas, speed, t0, t1, damping=None, mass=None, tol=None, workers=None, chunk_size=None):
    """X(t1; t0) for every spectral parameter; columns are the solutions from (1, 0) and (0, 1)."""
    tol, workers, chunk_size = _defaults(tol, workers, chunk_size)
    if not t1 > t0:
        raise PreconditionError(f"fundamental matrix needs t1 > t0, got [{t0}, {t1}]")
    times = validate_request([t0, t1], tol)
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    y0 = np.zeros((lambdas.size, 2, 2))
    y0[:, 0, 0] = 1.0
    y0[:, 1, 1] = 1.0
    solver = DormandPrince(speed, damping, mass, tol=tol)
    states, stats = _run_chunks(solver, lambdas, y0, times, workers, chunk_size)
    return [FundamentalMatrix(states[i, -1].copy(), float(t0), float(t1)) for i in range(lambdas.size)], stats


def fundamental_matrix(params, t0, t1, tol=None):
    matrices, _ = fundamental_matrices([params.lambda_spec], params.speed, t0, t1,
                                       damping=params.damping, mass=params.mass, tol=tol, workers=1)
    return matrices[0]


def abel_determinant(damping, t0, t1):
    """exp(−2∫_{t0}^{t1} b); the determinant every fundamental matrix must have."""
    if damping is None:
        return 1.0
    return float(np.exp(-2.0 * (damping.primitive(t1) - damping.primitive(t0))))


def mode_energies(v, v_dot, lambdas, a_values=1.0, weight=EnergyWeight.PLAIN):
    """Vectorised mode energy; lambdas broadcast against v, a_values against the time axis."""
    weight = EnergyWeight(weight)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim == 1 and np.ndim(v) == 2:
        lambdas = lambdas[:, None]
    if weight == EnergyWeight.PLAIN:
        return 0.5 * (lambdas * np.abs(v) ** 2 + np.abs(v_dot) ** 2)
    a_values = np.asarray(a_values, dtype=float)
    if weight == EnergyWeight.ACTION:
        # ½(aλ|v|² + |v̇|²/a) is the adiabatic invariant of a slowly varying speed
        return 0.5 * (a_values * lambdas * np.abs(v) ** 2 + np.abs(v_dot) ** 2 / a_values)
    return 0.5 * (a_values ** 2 * lambdas * np.abs(v) ** 2 + np.abs(v_dot) ** 2)


def mode_energy(state, lambda_spec, a_value=1.0, weight=EnergyWeight.PLAIN):
    weight = EnergyWeight(weight)
    if weight != EnergyWeight.PLAIN and a_value <= 0:
        raise PreconditionError(f"{weight.label.lower()} needs a_value > 0")
    return float(mode_energies(state.v, state.v_dot, lambda_spec, a_value, weight))
