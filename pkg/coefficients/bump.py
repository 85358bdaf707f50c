"""Smooth bump ψ(s) = κ·exp(−1/(s(1−s))) on (0, 1), normalised to ∫₀¹ψ = 1/2."""
from functools import lru_cache
from math import factorial

import numpy as np
from scipy import integrate

# exp(h) underflows to zero well before h reaches this value
_UNDERFLOW = -700.0


def _raw(s):
    return np.exp(-1.0 / (s * (1.0 - s)))


@lru_cache(maxsize=1)
def bump_normalisation():
    """κ such that ∫₀¹ κ·exp(−1/(s(1−s))) ds = 1/2."""
    value, _ = integrate.quad(_raw, 0.0, 1.0, epsabs=1e-16, epsrel=1e-13, limit=200)
    return 0.5 / value


def _log_derivatives(s, k):
    """Derivatives h, h', ..., h^(k) of h(s) = −1/s − 1/(1−s)."""
    out = [-1.0 / s - 1.0 / (1.0 - s)]
    for j in range(1, k + 1):
        out.append(-((-1.0) ** j) * factorial(j) / s ** (j + 1) - factorial(j) / (1.0 - s) ** (j + 1))
    return out


def bump(s, k=0):
    """k-th derivative (k ≤ 4) of ψ at s, zero outside (0, 1)."""
    if k > 4:
        raise ValueError("bump derivatives are implemented up to order 4")
    s = np.asarray(s, dtype=float)
    result = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    if not np.any(inside):
        return result
    si = s[inside]
    h = _log_derivatives(si, k)
    live = h[0] > _UNDERFLOW
    phi = np.where(live, np.exp(np.where(live, h[0], 0.0)), 0.0)
    if k == 0:
        factor = 1.0
    elif k == 1:
        factor = h[1]
    elif k == 2:
        factor = h[2] + h[1] ** 2
    elif k == 3:
        factor = h[3] + 3 * h[1] * h[2] + h[1] ** 3
    else:
        factor = h[4] + 4 * h[1] * h[3] + 3 * h[2] ** 2 + 6 * h[1] ** 2 * h[2] + h[1] ** 4
    values = np.where(live, phi * np.where(live, factor, 0.0), 0.0)
    result[inside] = bump_normalisation() * values
    return result


def bump_integral(s):
    """∫₀^s ψ, with s clipped to [0, 1]; equals 1/2 for s ≥ 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    flat = s.reshape(-1)
    out = np.empty_like(flat)
    kappa = bump_normalisation()
    for i, upper in enumerate(flat):
        if upper <= 0.0:
            out[i] = 0.0
        elif upper >= 1.0:
            out[i] = 0.5
        else:
            value, _ = integrate.quad(_raw, 0.0, upper, epsabs=1e-16, epsrel=1e-13, limit=200)
            out[i] = kappa * value
    return out.reshape(s.shape)


def bump_maximum():
    return bump_normalisation() * np.exp(-4.0)
