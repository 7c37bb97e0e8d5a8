"""Closed-form geometry of the upper half-plane.

Everything here is exact rational/log arithmetic in the four Wirtinger
variables zeta, zeta_bar, z, z_bar:

* the Dirichlet Green's function  G(zeta, z) = log|zeta - conj(z)| - log|zeta - z|
  and all of its mixed partials, kept as ``KernelSum`` objects (sums of
  coef/(varA - varB)^n plus coef*log(varA - varB) terms) closed under
  differentiation;
* conformal radius data  C = 2*Im z,  c = log C,  and the vanishing
  half-plane Schwarzian;
* chart maps (Moebius or truncated power series) with pre-Schwarzian
  N_h = (log h')' and Schwarzian  S_h = N_h' - N_h^2/2,  plus the four
  transformation laws used to move field values between charts.

Points carry an explicit interior/boundary flag so that near-boundary
interior probes are never silently reclassified.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import BoundaryPointError, CoincidentPointsError, DegenerateMapError

# Formal Wirtinger variables of a two-point kernel.
ZETA = "zeta"
ZETABAR = "zetabar"
Z = "z"
ZBAR = "zbar"
_VARS = (ZETA, ZETABAR, Z, ZBAR)


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class HalfPlanePoint:
    """A point of the closed half-plane with an explicit role flag."""

    value: complex
    boundary: bool = False

    def __post_init__(self):
        if self.boundary:
            if self.value.imag != 0.0:
                raise ValueError(f"boundary point must be real, got {self.value}")
        elif self.value.imag <= 0.0:
            raise ValueError(f"interior point needs Im z > 0, got {self.value}")

    @staticmethod
    def interior(z: complex) -> "HalfPlanePoint":
        return HalfPlanePoint(complex(z), boundary=False)

    @staticmethod
    def on_boundary(x: float) -> "HalfPlanePoint":
        return HalfPlanePoint(complex(x, 0.0), boundary=True)


def _as_point(p) -> HalfPlanePoint:
    if isinstance(p, HalfPlanePoint):
        return p
    z = complex(p)
    return HalfPlanePoint(z, boundary=(z.imag == 0.0))


# ---------------------------------------------------------------------------
# kernel sums


@dataclass(frozen=True)
class KernelSum:
    """Sum of coef/(varA - varB)^power terms plus coef*log(varA - varB) terms.

    Closed under Wirtinger differentiation in any of the four variables;
    evaluation substitutes zeta_bar = conj(zeta), z_bar = conj(z).
    """

    terms: tuple = ()            # (coef, varA, varB, power>=1)
    log_terms: tuple = ()        # (coef, varA, varB)

    def diff(self, var: str) -> "KernelSum":
        if var not in _VARS:
            raise ValueError(f"unknown variable {var!r}")
        out = []
        for coef, va, vb, n in self.terms:
            sign = 1.0 if va == var else -1.0 if vb == var else 0.0
            if sign:
                out.append((-n * coef * sign, va, vb, n + 1))
        for coef, va, vb in self.log_terms:
            sign = 1.0 if va == var else -1.0 if vb == var else 0.0
            if sign:
                out.append((coef * sign, va, vb, 1))
        return KernelSum(terms=tuple(out))

    def diff_many(self, zeta_orders=(0, 0), z_orders=(0, 0)) -> "KernelSum":
        k = self
        for var, m in ((ZETA, zeta_orders[0]), (ZETABAR, zeta_orders[1]),
                       (Z, z_orders[0]), (ZBAR, z_orders[1])):
            for _ in range(m):
                k = k.diff(var)
        return k

    def __add__(self, other: "KernelSum") -> "KernelSum":
        return KernelSum(self.terms + other.terms, self.log_terms + other.log_terms)

    def scaled(self, c: complex) -> "KernelSum":
        return KernelSum(
            tuple((c * a, va, vb, n) for a, va, vb, n in self.terms),
            tuple((c * a, va, vb) for a, va, vb in self.log_terms),
        )

    def evaluate(self, zeta: complex, z: complex) -> complex:
        vals = {ZETA: zeta, ZETABAR: zeta.conjugate(), Z: z, ZBAR: z.conjugate()}
        total = 0j
        for coef, va, vb, n in self.terms:
            d = vals[va] - vals[vb]
            if d == 0:
                raise CoincidentPointsError(f"kernel pole: {va} == {vb}")
            total += coef / d ** n
        for coef, va, vb in self.log_terms:
            d = vals[va] - vals[vb]
            if d == 0:
                raise CoincidentPointsError(f"log singularity: {va} == {vb}")
            total += coef * cmath.log(d)
        return total


# 2G = log(zeta - zbar) + log(zetabar - z) - log(zeta - z) - log(zetabar - zbar)
_TWO_G = KernelSum(log_terms=(
    (1.0, ZETA, ZBAR),
    (1.0, ZETABAR, Z),
    (-1.0, ZETA, Z),
    (-1.0, ZETABAR, ZBAR),
))

_kernel_cache: dict = {}


def green(p1, p2) -> float:
    """Dirichlet Green's function G(zeta, z) = log|zeta - conj z| - log|zeta - z|."""
    a, b = _as_point(p1), _as_point(p2)
    if a.value == b.value:
        raise CoincidentPointsError("green() needs distinct points")
    if a.boundary or b.boundary:
        return 0.0
    zeta, z = a.value, b.value
    return math.log(abs(zeta - z.conjugate())) - math.log(abs(zeta - z))


def green_mixed_partial(orders_zeta=(0, 0), orders_z=(0, 0)) -> KernelSum:
    """Return 2 * d^a_zeta d^b_zetabar d^g_z d^d_zbar G as a KernelSum.

    Total order zero returns the log kernel 2G itself.
    """
    key = (tuple(orders_zeta), tuple(orders_z))
    if key not in _kernel_cache:
        _kernel_cache[key] = _TWO_G.diff_many(orders_zeta, orders_z)
    return _kernel_cache[key]


def conformal_radius_data(p) -> tuple:
    """(C, c, dc, S) at an interior point in the identity chart of H.

    C = 2*Im z is the conformal radius, c = log C, dc = 1/(z - conj z) its
    holomorphic Wirtinger derivative, and S = -12 d_zeta d_z u vanishes
    identically in the half-plane.
    """
    pt = _as_point(p)
    if pt.boundary:
        raise BoundaryPointError("conformal radius is an interior quantity")
    z = pt.value
    C = 2.0 * z.imag
    return C, math.log(C), 1.0 / (z - z.conjugate()), 0j


# ---------------------------------------------------------------------------
# chart maps


class ChartMap:
    """A conformal chart transition map with derivatives up to third order."""

    def value(self, z: complex) -> complex:
        raise NotImplementedError

    def derivatives(self, z: complex) -> tuple:
        """(h(z), h'(z), h''(z), h'''(z))."""
        raise NotImplementedError

    @staticmethod
    def mobius(a: complex, b: complex, c: complex, d: complex) -> "MobiusMap":
        return MobiusMap(a, b, c, d)

    @staticmethod
    def affine(a: complex, b: complex) -> "MobiusMap":
        return MobiusMap(a, b, 0.0, 1.0)

    @staticmethod
    def power_series(coeffs: Sequence[complex], center: complex = 0.0) -> "PowerSeriesMap":
        return PowerSeriesMap(tuple(complex(c) for c in coeffs), complex(center))


class MobiusMap(ChartMap):
    """h(z) = (az + b)/(cz + d), stored with the unit-determinant convention."""

    def __init__(self, a, b, c, d):
        det = a * d - b * c
        if det == 0:
            raise DegenerateMapError("Moebius map needs ad - bc != 0")
        s = 1.0 / cmath.sqrt(complex(det))
        self.a, self.b, self.c, self.d = a * s, b * s, c * s, d * s

    def value(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivatives(self, z):
        den = self.c * z + self.d
        if den == 0:
            raise DegenerateMapError("Moebius pole at evaluation point")
        h = (self.a * z + self.b) / den
        h1 = 1.0 / den ** 2          # ad - bc = 1
        h2 = -2.0 * self.c / den ** 3
        h3 = 6.0 * self.c ** 2 / den ** 4
        return h, h1, h2, h3


class PowerSeriesMap(ChartMap):
    """Truncated power series h(z) = sum a_k (z - z0)^k, degree >= 5.

    Derivatives are those of the truncation, so N_h and S_h are exact at the
    center and polynomial-exact everywhere else.
    """

    def __init__(self, coeffs, center=0j):
        if len(coeffs) < 6:
            raise ValueError("need degree >= 5 for exact Schwarzian data")
        self.coeffs = coeffs
        self.center = center

    def _horner(self, coeffs, w):
        acc = 0j
        for c in reversed(coeffs):
            acc = acc * w + c
        return acc

    def value(self, z):
        return self._horner(self.coeffs, z - self.center)

    def derivatives(self, z):
        w = z - self.center
        c = self.coeffs
        d1 = [k * c[k] for k in range(1, len(c))]
        d2 = [k * d1[k] for k in range(1, len(d1))]
        d3 = [k * d2[k] for k in range(1, len(d2))]
        return (self._horner(c, w), self._horner(d1, w),
                self._horner(d2, w), self._horner(d3, w))


def schwarzian(h: ChartMap, z: complex) -> tuple:
    """Pre-Schwarzian and Schwarzian derivatives (N_h, S_h) at z."""
    _, h1, h2, h3 = h.derivatives(z)
    if h1 == 0:
        raise DegenerateMapError("h'(z) = 0: not conformal at z")
    n = h2 / h1
    s = h3 / h1 - 1.5 * n * n
    # S_h = N_h' - N_h^2/2 with N_h' = h3/h1 - (h2/h1)^2
    return n, s


# transformation laws ------------------------------------------------------


@dataclass(frozen=True)
class Differential:
    lam: complex
    lam_star: complex = 0.0


@dataclass(frozen=True)
class PreSchwarzianForm:
    mu: complex


@dataclass(frozen=True)
class SchwarzianForm:
    mu: complex


@dataclass(frozen=True)
class PrePreSchwarzianForm:
    mu: complex


TransformLaw = Differential | PreSchwarzianForm | SchwarzianForm | PrePreSchwarzianForm


def transform_value(law: TransformLaw, h: ChartMap, value_at_hz: complex, z: complex) -> complex:
    """Pull a field value back from the target chart through the transition h.

    differential:          f = (h')^lam (conj h')^lam* f~(h(z))
    pre-Schwarzian form:   f = h' f~(h(z)) + mu N_h
    Schwarzian form:       f = (h')^2 f~(h(z)) + mu S_h
    pre-pre-Schwarzian:    f = f~(h(z)) + mu log h'
    """
    _, h1, h2, h3 = h.derivatives(z)
    if h1 == 0:
        raise DegenerateMapError("h'(z) = 0: not conformal at z")
    if isinstance(law, Differential):
        fac = 1.0 + 0j
        if law.lam != 0:
            fac *= cmath.exp(law.lam * cmath.log(h1))
        if law.lam_star != 0:
            fac *= cmath.exp(law.lam_star * cmath.log(h1.conjugate()))
        return fac * value_at_hz
    n = h2 / h1
    if isinstance(law, PreSchwarzianForm):
        return h1 * value_at_hz + law.mu * n
    if isinstance(law, SchwarzianForm):
        s = h3 / h1 - 1.5 * n * n
        return h1 * h1 * value_at_hz + law.mu * s
    if isinstance(law, PrePreSchwarzianForm):
        return value_at_hz + law.mu * cmath.log(h1)
    raise TypeError(f"unknown transformation law {law!r}")


def compose_derivatives(g: ChartMap, h: ChartMap, z: complex) -> tuple:
    """Chain-rule derivatives of g o h at z, as a (value, d1, d2, d3) tuple."""
    hv, h1, h2, h3 = h.derivatives(z)
    gv, g1, g2, g3 = g.derivatives(hv)
    f1 = g1 * h1
    f2 = g2 * h1 ** 2 + g1 * h2
    f3 = g3 * h1 ** 3 + 3.0 * g2 * h1 * h2 + g1 * h3
    return gv, f1, f2, f3


class ComposedMap(ChartMap):
    """g o h, with derivatives from the chain rule."""

    def __init__(self, g: ChartMap, h: ChartMap):
        self.g, self.h = g, h

    def value(self, z):
        return self.g.value(self.h.value(z))

    def derivatives(self, z):
        return compose_derivatives(self.g, self.h, z)
