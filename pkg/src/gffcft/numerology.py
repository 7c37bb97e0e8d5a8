"""SLE/CFT parameter bundle and its exact closed-form conversions.

The theories are parametrized by b (central charge c = 1 - 12 b^2) or
equivalently by the SLE parameter kappa:

    a = (sqrt(b^2 + 2) - b)/2,   2a(a + b) = 1,    kappa = 2/a^2,
    h = (6 - kappa)/(2 kappa),   h' = (3 kappa - 8)/16,
    eta = -kappa/4,              eta' = -4/kappa,   kappa*kappa' = 16.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class Numerology:
    kappa: float
    a: float
    b: float
    c: float
    h: float
    h_prime: float
    eta: float
    eta_prime: float
    kappa_prime: float

    @property
    def degenerate_exponents(self) -> tuple:
        """The four level-two singular exponents (sigma, uses_eta_prime, null)."""
        a, b = self.a, self.b
        return (
            (a, False, True),
            (2 * b - a, False, False),
            (-a - b, True, True),
            (3 * b + a, True, False),
        )


def numerology(kappa: float) -> Numerology:
    """Full parameter bundle for a given kappa > 0."""
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    a = math.sqrt(2.0 / kappa)
    b = math.sqrt(kappa / 8.0) - a
    return Numerology(
        kappa=kappa,
        a=a,
        b=b,
        c=1.0 - 12.0 * b * b,
        h=(6.0 - kappa) / (2.0 * kappa),
        h_prime=(3.0 * kappa - 8.0) / 16.0,
        eta=-kappa / 4.0,
        eta_prime=-4.0 / kappa,
        kappa_prime=16.0 / kappa,
    )


def numerology_from_b(b: float) -> Numerology:
    """Inverse parametrization through a(b) = (sqrt(b^2 + 2) - b)/2."""
    a = (math.sqrt(b * b + 2.0) - b) / 2.0
    return numerology(2.0 / (a * a))


# The seven special cases tabulated in the half-plane CFT literature,
# as exact values: kappa -> (b^2 with sign, a^2, h, -eta).
TABLE_KAPPAS = (Fraction(2), Fraction(8), Fraction(8, 3), Fraction(6),
                Fraction(3), Fraction(16, 3), Fraction(4))


def exact_table_row(kappa: Fraction) -> dict:
    """Closed-form row {b, a, h, minus_eta} for a rational kappa.

    b and a are returned as (sign, square) pairs so the comparison against
    floating point can be made exactly: b = sign * sqrt(square).
    """
    k = Fraction(kappa)
    a2 = Fraction(2) / k
    b_sign = 1 if k > 4 else (-1 if k < 4 else 0)
    return {
        "kappa": k,
        "b_sign": b_sign,
        "b_squared": k / 8 - 1 + 2 / k,
        "a_squared": a2,
        "h": (6 - k) / (2 * k),
        "minus_eta": k / 4,
    }
