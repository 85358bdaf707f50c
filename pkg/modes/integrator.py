"""
Vectorised Dormand-Prince 5(4) integrator for batches of mode equations

    v'' + 2 b(t) v' + (a(t)^2 lambda + m(t)^2) v = 0.

A batch holds one row per spectral parameter. Every row has its own time,
step size and PI step control, so a row's result never depends on the other
rows it is batched with. The columns of a row (real and imaginary part, or the
two canonical solutions of a fundamental matrix) share their steps.
"""
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from wave_lab.exceptions import PreconditionError, StepSizeUnderflow, ToleranceNotAchieved

logger = logging.getLogger(__name__)

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1, D3, D4, D5, D6, D7 = (
    -12715105075 / 11282082432,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)

# PI step control
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
SAFE = 0.9
FAC_MIN, FAC_MAX = 0.2, 10.0
TINY = 1e-300


@dataclass
class IntegrationStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0

    def merge(self, other):
        return IntegrationStats(
            self.accepted + other.accepted,
            self.rejected + other.rejected,
            self.evaluations + other.evaluations,
        )

    def as_dict(self):
        return {'accepted_steps': self.accepted, 'rejected_steps': self.rejected, 'rhs_evaluations': self.evaluations}


def _maxabs(y):
    return np.max(np.abs(y), axis=(1, 2))


class DormandPrince:
    def __init__(self, speed, damping=None, mass=None, tol=None, max_step_factor=None, max_steps=None,
                 max_rejects=None):
        config = settings.WAVE_LAB
        self.speed, self.damping, self.mass = speed, damping, mass
        self.tol = config['DEFAULT_TOL'] if tol is None else float(tol)
        self.max_step_factor = config['MAX_STEP_FACTOR'] if max_step_factor is None else max_step_factor
        self.max_steps = config['MAX_STEPS'] if max_steps is None else max_steps
        self.max_rejects = config['MAX_REJECTS'] if max_rejects is None else max_rejects

    def rhs(self, t, y, lam):
        """Right-hand side for rows y[:, 0] = v, y[:, 1] = v' at per-row times t."""
        stiffness = np.asarray(self.speed.squared(t)) * lam
        if self.mass is not None:
            stiffness = stiffness + np.asarray(self.mass.squared(t))
        out = np.empty_like(y)
        out[:, 0, :] = y[:, 1, :]
        out[:, 1, :] = -stiffness[:, None] * y[:, 0, :]
        if self.damping is not None:
            out[:, 1, :] -= 2.0 * np.asarray(self.damping.eval(t))[:, None] * y[:, 1, :]
        return out

    def max_steps_for(self, lam, t0, t1):
        """Oscillation guard: h ≤ factor / (1 + max frequency over [t0, t1])."""
        a_max = self.speed.upper_bound(t0, t1)
        m_max = self.mass.upper_bound(t0, t1) if self.mass is not None else 0.0
        return self.max_step_factor / (1.0 + np.sqrt(a_max ** 2 * lam + m_max ** 2))

    def integrate(self, lam, y0, times):
        """
        Integrate rows y0 (shape rows × 2 × columns) from times[0] and return the
        states at every output time (rows × len(times) × 2 × columns).
        """
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        times = np.asarray(times, dtype=float)
        y = np.array(y0, dtype=float, copy=True)
        rows, n_out = lam.size, times.size
        states = np.empty((rows, n_out) + y.shape[1:])
        states[:, 0] = y
        stats = IntegrationStats()
        if n_out == 1 or rows == 0:
            return states, stats

        t0, t_end = float(times[0]), float(times[-1])
        h_max = self.max_steps_for(lam, t0, t_end)
        t = np.full(rows, t0)
        k1 = self.rhs(t, y, lam)
        stats.evaluations += rows
        d0, d1 = _maxabs(y), _maxabs(k1)
        h = np.where((d0 > 1e-5) & (d1 > 1e-5), 0.01 * d0 / np.maximum(d1, TINY), 1e-6)
        h = np.minimum(h, h_max)
        facold = np.full(rows, 1e-4)
        last_rejected = np.zeros(rows, dtype=bool)
        rejects = np.zeros(rows, dtype=int)
        steps = np.zeros(rows, dtype=int)
        next_out = np.ones(rows, dtype=int)
        done = next_out >= n_out

        while not np.all(done):
            act = np.flatnonzero(~done)
            ta, ya, la, k1a = t[act], y[act], lam[act], k1[act]
            remaining = t_end - ta
            # land on t_end exactly instead of leaving a sliver
            final = h[act] >= remaining * (1.0 - 1e-12)
            ha = np.where(final, remaining, h[act])
            underflow = ha < 16 * np.finfo(float).eps * np.maximum(np.abs(ta), 1.0)
            if np.any(underflow):
                row = act[np.argmax(underflow)]
                raise StepSizeUnderflow(float(t[row]), float(h[row]))

            hc = ha[:, None, None]
            k2 = self.rhs(ta + C2 * ha, ya + hc * (A21 * k1a), la)
            k3 = self.rhs(ta + C3 * ha, ya + hc * (A31 * k1a + A32 * k2), la)
            k4 = self.rhs(ta + C4 * ha, ya + hc * (A41 * k1a + A42 * k2 + A43 * k3), la)
            k5 = self.rhs(ta + C5 * ha, ya + hc * (A51 * k1a + A52 * k2 + A53 * k3 + A54 * k4), la)
            k6 = self.rhs(ta + ha, ya + hc * (A61 * k1a + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), la)
            y1 = ya + hc * (A71 * k1a + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
            t_new = np.where(final, t_end, ta + ha)
            k7 = self.rhs(t_new, y1, la)
            stats.evaluations += 6 * act.size

            error = hc * (E1 * k1a + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            scale = self.tol * np.maximum(np.maximum(_maxabs(ya), _maxabs(y1)), TINY)
            err = _maxabs(error) / scale
            err = np.where(np.isfinite(err) & np.all(np.isfinite(y1), axis=(1, 2)), err, np.inf)

            fac11 = np.where(np.isfinite(err), err, 1e10) ** EXPO1
            accepted = err <= 1.0
            fac = np.clip(fac11 / facold[act] ** BETA / SAFE, 1.0 / FAC_MAX, 1.0 / FAC_MIN)
            h_new = ha / fac

            acc_rows, rej_rows = act[accepted], act[~accepted]
            stats.accepted += int(accepted.sum())
            stats.rejected += int((~accepted).sum())

            # rejected rows retry with a smaller step
            h[rej_rows] = ha[~accepted] / np.minimum(1.0 / FAC_MIN, fac11[~accepted] / SAFE)
            last_rejected[rej_rows] = True
            rejects[rej_rows] += 1
            if np.any(rejects[rej_rows] > self.max_rejects):
                row = rej_rows[np.argmax(rejects[rej_rows])]
                raise ToleranceNotAchieved(float(t[row]), f"{rejects[row]} consecutive step rejections")

            if acc_rows.size:
                self._store_outputs(states, times, next_out, acc_rows, ta[accepted], t_new[accepted], ha[accepted],
                                    ya[accepted], y1[accepted], k1a[accepted], k3[accepted], k4[accepted],
                                    k5[accepted], k6[accepted], k7[accepted])
                grown = h_new[accepted]
                h[acc_rows] = np.where(last_rejected[acc_rows], np.minimum(grown, ha[accepted]), grown)
                h[acc_rows] = np.minimum(h[acc_rows], h_max[acc_rows])
                t[acc_rows] = t_new[accepted]
                y[acc_rows] = y1[accepted]
                k1[acc_rows] = k7[accepted]
                facold[acc_rows] = np.maximum(err[accepted], 1e-4)
                last_rejected[acc_rows] = False
                rejects[acc_rows] = 0
                steps[acc_rows] += 1
                if np.any(steps[acc_rows] > self.max_steps):
                    row = acc_rows[np.argmax(steps[acc_rows])]
                    raise ToleranceNotAchieved(float(t[row]), f"step budget of {self.max_steps} exhausted")
            done = next_out >= n_out

        logger.debug("integrated %d rows to t=%g: %d accepted, %d rejected steps",
                     rows, t_end, stats.accepted, stats.rejected)
        return states, stats

    @staticmethod
    def _store_outputs(states, times, next_out, rows, t_old, t_new, h, y_old, y_new, k1, k3, k4, k5, k6, k7):
        """Dense output (fourth order) at every requested time inside the accepted steps."""
        hc = h[:, None, None]
        ydiff = y_new - y_old
        bspl = hc * k1 - ydiff
        r4 = ydiff - hc * k7 - bspl
        r5 = hc * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
        last = times.size - 1
        pending = np.arange(rows.size)
        while pending.size:
            idx = next_out[rows[pending]]
            inside = (idx <= last) & (times[np.minimum(idx, last)] <= t_new[pending])
            pending = pending[inside]
            if not pending.size:
                break
            idx = next_out[rows[pending]]
            theta = ((times[idx] - t_old[pending]) / h[pending])[:, None, None]
            at_end = theta >= 1.0
            dense = y_old[pending] + theta * (ydiff[pending] + (1 - theta) * (
                bspl[pending] + theta * (r4[pending] + (1 - theta) * r5[pending])))
            states[rows[pending], idx] = np.where(at_end, y_new[pending], dense)
            next_out[rows[pending]] += 1


def validate_request(times, tol):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise PreconditionError("output times must be a non-empty sequence")
    if np.any(np.diff(times) <= 0):
        raise PreconditionError("output times must be strictly increasing")
    if times[0] < 0:
        raise PreconditionError("output times start at t0 ≥ 0")
    if not 1e-13 <= tol <= 1e-4:
        raise PreconditionError(f"tol={tol:g} outside [1e-13, 1e-4]")
    return times
