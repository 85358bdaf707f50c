"""
Catalogue of the decay statements the rates module can check.

Each entry names the hypotheses on the coefficients, the quantity that is
checked and the clock in which the exponent is stated.
"""
from dataclasses import asdict, dataclass
from typing import Tuple

from django.db import models


class TheoremId(models.TextChoices):
    FREE_STRICHARTZ = 'free_strichartz', 'Free wave equation'
    REISSIG_SMITH = 'reissig_smith', 'Bounded oscillating speed'
    REISSIG_YAGDJIAN = 'reissig_yagdjian', 'Increasing speed'
    WIRTH_NONEFFECTIVE = 'wirth_noneffective', 'Non-effective dissipation'
    HIROSAWA_NAKAZAWA = 'hirosawa_nakazawa', 'Over-damping'
    WIRTH_EFFECTIVE = 'wirth_effective', 'Effective dissipation'
    WIRTH_PERIODIC = 'wirth_periodic', 'Periodic dissipation'
    MATSUMURA = 'matsumura', 'Constant dissipation'
    NISHIHARA_DIFFUSION = 'nishihara_diffusion', 'Diffusion phenomenon, constant dissipation'
    WIRTH_DIFFUSION = 'wirth_diffusion', 'Diffusion phenomenon, periodic dissipation'


class Admissibility(models.TextChoices):
    CONJUGATE = 'conjugate', '1 ≤ p ≤ 2, 1/p + 1/q = 1'
    DIFFUSIVE = 'diffusive', '1 ≤ p ≤ 2 ≤ q ≤ ∞'


@dataclass(frozen=True)
class Theorem:
    id: str
    title: str
    hypotheses: Tuple[str, ...]
    statement: str
    checked_quantity: str
    clock: str
    admissibility: str
    dimensions: Tuple[int, ...] = (1, 2, 3)

    def as_dict(self):
        data = asdict(self)
        data['hypotheses'] = list(self.hypotheses)
        data['dimensions'] = list(self.dimensions)
        return data


_CATALOG = (
    Theorem(
        TheoremId.FREE_STRICHARTZ, 'Free wave equation',
        ('a ≡ 1', 'b ≡ 0', 'm ≡ 0'),
        'L^p-L^q norms of u_t and ∇u decay like (1+t)^{-(n-1)/2 (1/p-1/q)}; the energy is conserved.',
        'energy or L^q norm of u_t', 'poly', Admissibility.CONJUGATE,
    ),
    Theorem(
        TheoremId.REISSIG_SMITH, 'Bounded oscillating speed',
        ('0 < a_min ≤ a(t) ≤ a_max', '|D_t^k a| ≤ C_k (1+t)^{-k} for k ≤ 2 (symbol class)',
         'stabilisation measure of order q < 1'),
        'The free L^p-L^q decay rate persists with a bounded speed that oscillates slowly enough.',
        'energy, adiabatic action or L^q norm of u_t', 'poly', Admissibility.CONJUGATE,
    ),
    Theorem(
        TheoremId.REISSIG_YAGDJIAN, 'Increasing speed',
        ('a(t) = λ(t)ω(t) with λ′Λ/λ² bounded, limsup < 2', 'ω bounded, positive, stabilising',
         'symbol estimates in the weight λ/Λ'),
        'Norms decay like √λ(t) Λ(t)^{-(n-1)/2 (1/p-1/q)}; '
        'the adapted energy divided by λ(t) has a non-zero limit.',
        'adapted energy / λ(t) or L^q norm of u_t', 'shape_primitive', Admissibility.CONJUGATE,
    ),
    Theorem(
        TheoremId.WIRTH_NONEFFECTIVE, 'Non-effective dissipation',
        ('b ≥ 0 of symbol class', 'limsup (1+t) b(t) < 1/2'),
        'Free decay rates with the extra factor 1/β(t); β(t)²E(t) tends to a non-zero limit.',
        'β²·energy', 'damping_exponential', Admissibility.CONJUGATE,
    ),
    Theorem(
        TheoremId.HIROSAWA_NAKAZAWA, 'Over-damping',
        ('b(t) = μ/(1+t) with μ > 1',),
        't²E(t) → 0 for b(t) = μ/(1+t), μ > 1 (over-damping example μ = 2); the exponent 2 cannot be improved.',
        't²·energy', 'poly', Admissibility.CONJUGATE,
    ),
    Theorem(
        TheoremId.WIRTH_EFFECTIVE, 'Effective dissipation',
        ('b positive, monotone, t b(t) → ∞', '1/b ∉ L¹', 'symbol estimates for b'),
        'Norms of u, ∇u, u_t decay like the heat equation in the clock 1+∫ds/b: '
        'exponent n/2 (1/p-1/q) + 0, 1/2, 1, '
        'with the extra factor 1/b(t) for u_t.',
        'energy or L^q norms of u, ∇u, u_t', 'reciprocal_damping', Admissibility.DIFFUSIVE,
    ),
    Theorem(
        TheoremId.WIRTH_PERIODIC, 'Periodic dissipation',
        ('b absolutely continuous, periodic and positive almost everywhere',),
        'Heat-like decay n/2 (1/p-1/q) + 0, 1/2, 1 for u, ∇u, u_t in the polynomial clock.',
        'energy or L^q norms of u, ∇u, u_t', 'poly', Admissibility.DIFFUSIVE,
    ),
    Theorem(
        TheoremId.MATSUMURA, 'Constant dissipation',
        ('b ≡ const > 0', 'data in L^p ∩ H^s'),
        '‖D_t^k ∂^α u‖ decays like (1+t)^{-n/2 (1/p-1/q) - |α|/2 - k}.',
        'L^q norms of D_t^k ∂^α u', 'poly', Admissibility.DIFFUSIVE,
    ),
    Theorem(
        TheoremId.NISHIHARA_DIFFUSION, 'Diffusion phenomenon, constant dissipation',
        ('n = 3', 'b ≡ 1/2 (2b = 1)'),
        'u minus the heat solution and the damped free-wave term decays like (1+t)^{-3/2 (1/p-1/q) - 1}.',
        'L^q norm of the deficit', 'poly', Admissibility.DIFFUSIVE, (3,),
    ),
    Theorem(
        TheoremId.WIRTH_DIFFUSION, 'Diffusion phenomenon, periodic dissipation',
        ('b periodic and positive almost everywhere',),
        'u is asymptotic to the heat solution with diffusion constant α in time βt; '
        'the L² deficit gains one power of t.',
        'L² norm of the deficit', 'poly', Admissibility.DIFFUSIVE,
    ),
)


def theorem_catalog():
    return {theorem.id: theorem for theorem in _CATALOG}


def get_theorem(theorem_id):
    return theorem_catalog()[TheoremId(theorem_id)]
