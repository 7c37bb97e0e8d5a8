"""Operator-product-expansion coefficients by contour integration.

Laurent coefficients of analytic correlators are extracted with the
M-point trapezoid rule on circles (spectrally accurate for analytic
integrands).  Virasoro modes L_n are the residue operators

    L_n(z) = (1/2 pi i) oint (zeta - z)^{n+1} T(zeta) d zeta,

realized as OPE coefficients T *_{-n-2} X; commutators are nested double
contours.  The module also houses the central-charge measurement and the
level-two degeneracy / singular-vector residuals.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import InputError, WindowError
from .numerology import Numerology, numerology
from .vertex import (
    StarProduct,
    VertexNode,
    star_closed_form,
    star_second_derivative,
    _assign,
)
from .wick import (
    Background,
    Charge,
    CorrelationQuery,
    FieldExpr,
    J,
    QueryEntry,
    Term,
    ZERO_BACKGROUND,
    charge_expr,
    correlate,
    monomial,
    stress_tensor,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LaurentWindow:
    center: complex
    radius: float
    samples: int = 256
    n_min: int = -6
    n_max: int = 4

    def __post_init__(self):
        if self.radius <= 0:
            raise WindowError("window radius must be positive")
        if self.samples & (self.samples - 1):
            raise WindowError("sample count must be a power of two")
        if self.n_max - self.n_min + 1 > self.samples // 2:
            raise WindowError("coefficient range too wide for the sample count")

    def validate_against(self, avoid: Iterable[complex]):
        z = self.center
        if z.imag > 0 and self.radius >= z.imag:
            raise WindowError("window circle leaves the half-plane")
        for p in avoid:
            p = complex(p)
            for q in (p, p.conjugate()):
                if q == z:
                    continue
                if abs(q - z) <= self.radius:
                    raise WindowError(f"window of radius {self.radius} swallows node {q}")


def laurent_extract(f: Callable[[complex], complex], window: LaurentWindow) -> dict:
    """c_n = (1/2 pi i) oint f(zeta) (zeta - z)^(-n-1) d zeta by the trapezoid rule."""
    z, r, m = window.center, window.radius, window.samples
    ring = [r * cmath.exp(2j * math.pi * k / m) for k in range(m)]
    vals = [f(z + w) for w in ring]
    out = {}
    for n in range(window.n_min, window.n_max + 1):
        acc = 0j
        for w, v in zip(ring, vals):
            acc += v * w ** (-n)
        out[n] = acc / m
    return out


def _as_expr(y) -> FieldExpr:
    if isinstance(y, Charge):
        return charge_expr(y)
    if isinstance(y, Term):
        return (y,)
    return tuple(y)


def _check_holomorphic(x: FieldExpr):
    for t in x:
        if any(f.dbar for f in t.factors):
            raise InputError("OPE extraction needs a holomorphic left factor")
        if t.charge is not None and t.charge.mu_star != 0:
            raise InputError("OPE extraction needs a holomorphic left factor")


def default_radius(z: complex, probe_points: Iterable[complex], frac: float = 0.3) -> float:
    z = complex(z)
    limit = z.imag if z.imag > 0 else math.inf
    for p in probe_points:
        p = complex(p)
        limit = min(limit, abs(p - z), abs(p.conjugate() - z))
    if not math.isfinite(limit):
        raise WindowError("cannot infer a radius for a boundary center without probes")
    return frac * limit


def correlator_in_zeta(x: FieldExpr, fixed: Sequence, background: Background = ZERO_BACKGROUND,
                       cap: int = 14) -> Callable[[complex], complex]:
    """zeta -> E[X(zeta) * fixed string], with `fixed` a list of (point, expr)."""
    fixed_entries = [QueryEntry(p, e) for p, e in fixed]

    def f(zeta: complex) -> complex:
        return correlate(CorrelationQuery([QueryEntry(zeta, x)] + fixed_entries,
                                          background=background, cap=cap))

    return f


def ope_coeff(x: FieldExpr, n: int, y, z: complex, probe: Sequence = (),
              background: Background = ZERO_BACKGROUND,
              radius: float | None = None, samples: int = 256) -> complex:
    """E[(X *_n Y)(z) * probe] through Laurent extraction of the correlator."""
    _check_holomorphic(_as_expr(x))
    z = complex(z)
    fixed = [(z, _as_expr(y))] + [(p, _as_expr(e)) for p, e in probe]
    r = radius if radius is not None else default_radius(z, [p for p, _ in probe])
    window = LaurentWindow(z, r, samples, n_min=min(n, -5), n_max=max(n, 3))
    window.validate_against([p for p, _ in fixed if p != z])
    f = correlator_in_zeta(_as_expr(x), fixed, background)
    return laurent_extract(f, window)[n]


def virasoro_mode(n: int, x, z: complex, probe: Sequence = (), b: float = 0.0,
                  background: Background = ZERO_BACKGROUND,
                  radius: float | None = None, samples: int = 256) -> complex:
    """E[(L_n X)(z) * probe] = T *_(-n-2) X."""
    return ope_coeff(stress_tensor(b), -n - 2, x, z, probe,
                     background=background, radius=radius, samples=samples)


# ---------------------------------------------------------------------------
# commutators by nested contours


def _ring(z: complex, r: float, m: int):
    return [z + r * cmath.exp(2j * math.pi * k / m) for k in range(m)]


def commutator_residual(kind: str, m: int, n: int, x, z: complex, probe: Sequence = (),
                        b: float = 0.0, r1: float | None = None, r2: float | None = None,
                        samples: int = 128) -> complex:
    """E[([A_m, A_n] X)(z) probe] minus the algebra's right-hand side.

    kind 'T': [L_m, L_n] = (m - n) L_{m+n} + (c/12) m (m^2-1) delta_{m+n,0};
    kind 'J': [j_m, j_n] = n delta_{m+n,0}.
    Cost is samples^2 correlator evaluations (the expensive path).
    """
    if kind not in ("T", "J"):
        raise InputError("commutator kind must be 'T' or 'J'")
    z = complex(z)
    xexpr = _as_expr(x)
    probe = [(p, _as_expr(e)) for p, e in probe]
    lim = default_radius(z, [p for p, _ in probe], frac=1.0)
    r1 = r1 if r1 is not None else 0.15 * lim
    r2 = r2 if r2 is not None else 0.35 * lim
    if not r1 < r2 < lim:
        raise WindowError("need r1 < r2 < distance to the nearest singularity")
    yexpr = stress_tensor(b) if kind == "T" else monomial(J)
    outer = _ring(z, r2, samples)
    inner = _ring(z, r1, samples)
    fixed = [QueryEntry(z, xexpr)] + [QueryEntry(p, e) for p, e in probe]
    grid = [[correlate(CorrelationQuery([QueryEntry(zeta, yexpr), QueryEntry(eta, yexpr)] + fixed))
             for eta in inner] for zeta in outer]
    # weights: T-modes use (zeta-z)^(m+1) d zeta, J-modes (zeta-z)^m d zeta
    shift = 2 if kind == "T" else 1
    wm_out = [(zeta - z) ** (m + shift) for zeta in outer]
    wn_in = [(eta - z) ** (n + shift) for eta in inner]
    wn_out = [(zeta - z) ** (n + shift) for zeta in outer]
    wm_in = [(eta - z) ** (m + shift) for eta in inner]
    a_mn = 0j
    a_nm = 0j
    for i in range(samples):
        row = grid[i]
        acc1 = 0j
        acc2 = 0j
        for k in range(samples):
            acc1 += wn_in[k] * row[k]
            acc2 += wm_in[k] * row[k]
        a_mn += wm_out[i] * acc1
        a_nm += wn_out[i] * acc2
    a_mn /= samples * samples
    a_nm /= samples * samples
    ex = correlate(CorrelationQuery(fixed))
    if kind == "T":
        rhs = 0j
        if m != n:
            rhs += (m - n) * virasoro_mode(m + n, xexpr, z, probe, b=b, radius=r2, samples=samples)
        if m + n == 0:
            c = 1.0 - 12.0 * b * b
            rhs += (c / 12.0) * m * (m * m - 1) * ex
    else:
        rhs = (n * ex) if m + n == 0 else 0j
    return (a_mn - a_nm) - rhs


# ---------------------------------------------------------------------------
# central charge and degeneracy


def central_charge_measure(b: float, z: complex = 1j, radius: float = 0.35,
                           samples: int = 256) -> float:
    """c = 2 * (n = -4 Laurent coefficient of E[T(zeta) T(z)]) at z = i."""
    t = stress_tensor(b)
    f = correlator_in_zeta(t, [(z, t)])
    window = LaurentWindow(complex(z), radius, samples)
    return 2.0 * laurent_extract(f, window)[-4].real


def _vertex_probe_entries(probe: Sequence[VertexNode]):
    return [(n.point, charge_expr(n.charge())) for n in probe]


def degeneracy_residual(kappa: float, z: complex, probe: Sequence[VertexNode] = (),
                        a_shift: float = 0.0, samples: int = 256,
                        radius: float | None = None) -> complex:
    """T *_0 V_star^{ia} minus (1/2a^2) d^2 V_star^{ia}, within correlations.

    Vanishes exactly when 2a(a+b) = 1; ``a_shift`` detunes the charge for
    negative controls.
    """
    nm = numerology(kappa)
    a = nm.a + a_shift
    z = complex(z)
    node = VertexNode(a, 0.0, z)
    lhs = ope_coeff(stress_tensor(nm.b), 0, node.charge(), z,
                    probe=_vertex_probe_entries(probe), radius=radius, samples=samples)
    nodes = [node] + list(probe)
    rhs = star_second_derivative(nodes, False, a, j=0) / (2.0 * a * a)
    return lhs - rhs


def singular_vector_residual(kappa: float, use_eta_prime: bool, sigma: float,
                             z: complex, probe: Sequence[VertexNode] = (),
                             samples: int = 256, radius: float | None = None) -> complex:
    """E[([L_{-2} + eta L_{-1}^2] V^{i sigma})(z) probe]; zero iff degenerate."""
    nm = numerology(kappa)
    eta = nm.eta_prime if use_eta_prime else nm.eta
    z = complex(z)
    node = VertexNode(sigma, 0.0, z)
    l2 = ope_coeff(stress_tensor(nm.b), 0, node.charge(), z,
                   probe=_vertex_probe_entries(probe), radius=radius, samples=samples)
    d2 = star_second_derivative([node] + list(probe), False, nm.a, j=0)
    return l2 + eta * d2


# ---------------------------------------------------------------------------
# nested OPE products (Leibniz checks)


def nested_ope_left(x, m: int, y, n: int, zfield, z: complex, probe: Sequence = (),
                    r1: float = 0.1, r2: float = 0.3, samples: int = 64) -> complex:
    """E[(X *_m (Y *_n Z))(z) probe]: X on the outer ring, Y on the inner."""
    z = complex(z)
    fixed = [QueryEntry(z, _as_expr(zfield))] + [QueryEntry(p, _as_expr(e)) for p, e in probe]
    total = 0j
    for zeta in _ring(z, r2, samples):
        acc = 0j
        for eta in _ring(z, r1, samples):
            val = correlate(CorrelationQuery(
                [QueryEntry(zeta, _as_expr(x)), QueryEntry(eta, _as_expr(y))] + fixed))
            acc += (eta - z) ** (-n) * val
        total += (zeta - z) ** (-m) * acc
    return total / samples ** 2


def nested_ope_right(x, m: int, y, n: int, zfield, z: complex, probe: Sequence = (),
                     r1: float = 0.05, r2: float = 0.3, samples: int = 64) -> complex:
    """E[((X *_m Y) *_n Z)(z) probe]: X on small rings around the Y ring."""
    z = complex(z)
    fixed = [QueryEntry(z, _as_expr(zfield))] + [QueryEntry(p, _as_expr(e)) for p, e in probe]
    total = 0j
    for eta in _ring(z, r2, samples):
        acc = 0j
        for zeta in _ring(eta, r1, samples):
            val = correlate(CorrelationQuery(
                [QueryEntry(zeta, _as_expr(x)), QueryEntry(eta, _as_expr(y))] + fixed))
            acc += (zeta - eta) ** (-m) * val
        total += (eta - z) ** (-n) * acc
    return total / samples ** 2
