"""Closed-form SLE martingale-observables and their defining integrals.

The catalogue entries evaluate M in (H, 0, infinity) from the Loewner flow
state (w, w', S_w) of each probe point, in the fixed identity chart of the
starting domain:

    differential:      M_t(z) = (w')^lam (conj w')^lam* M(w)
    Schwarzian form:   M_t(z) = (w')^2 M(w) + mu S_w
    harmonic 1-point:  M_t(z) = 2a arg w - 2b arg w'

Reference probabilities (Schramm's left-passage formula, Cardy's boundary
hitting and crossing integrals, screening integrals) are computed with
Gauss quadrature after factoring out the algebraic endpoint singularities.
All normalization constants the theory leaves free are fixed to 1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import InputError, IntegrabilityError
from .numerology import Numerology, numerology
from .vertex import vertex_dims

TWO_PI = 2.0 * math.pi


def _quad_complex(f, a, b, **kw):
    re = quad(lambda t: f(t).real, a, b, **kw)[0]
    im = quad(lambda t: f(t).imag, a, b, **kw)[0]
    return complex(re, im)


# ---------------------------------------------------------------------------
# Schramm's left-passage formula


def _sin_power_integral(p: float, theta: float) -> float:
    """integral_0^theta (sin t)^p dt for p > -1, 0 <= theta <= pi/2."""
    if theta == 0.0:
        return 0.0
    # peel off the algebraic singularity at t = 0: (sin t)^p = t^p (sin t / t)^p
    val, _ = quad(lambda t: (math.sin(t) / t) ** p if t > 0 else 1.0,
                  0.0, theta, weight="alg", wvar=(p, 0.0))
    return val


def schramm_left_passage(kappa: float, theta: float) -> float:
    """P(z left of the trace) for z = e^{i theta}: the normalized sine integral."""
    if not 0.0 < kappa < 8.0:
        raise InputError("Schramm's formula needs kappa in (0, 8)")
    if not 0.0 <= theta <= math.pi:
        raise InputError("theta must lie in [0, pi]")
    p = 8.0 / kappa - 2.0
    half = _sin_power_integral(p, math.pi / 2.0)
    if theta <= math.pi / 2.0:
        return _sin_power_integral(p, theta) / (2.0 * half)
    return 1.0 - _sin_power_integral(p, math.pi - theta) / (2.0 * half)


# ---------------------------------------------------------------------------
# Cardy's boundary-hitting integral


def _cardy_incomplete(kappa: float, u: float) -> float:
    """integral_0^u t^(8/kappa - 2) (1 - t)^(-4/kappa) dt for u in [0, 1]."""
    p = 8.0 / kappa - 2.0
    q = -4.0 / kappa
    if u == 0.0:
        return 0.0
    if u < 1.0:
        val, _ = quad(lambda t: (1.0 - t) ** q, 0.0, u, weight="alg", wvar=(p, 0.0))
        return val
    val, _ = quad(lambda t: 1.0, 0.0, 1.0, weight="alg", wvar=(p, q))
    return val


def cardy_boundary_hit(kappa: float, u: float) -> float:
    """P(trace hits [x - eps, x]) with u = eps/x, normalized to 1 at u = 1."""
    if not 4.0 < kappa < 8.0:
        raise InputError("Cardy's hitting formula needs kappa in (4, 8)")
    if not 0.0 <= u <= 1.0:
        raise InputError("u = eps/x must lie in [0, 1]")
    return _cardy_incomplete(kappa, u) / _cardy_incomplete(kappa, 1.0)


# ---------------------------------------------------------------------------
# Cardy's crossing (triangle) observable


def _triangle_numerator(kappa: float, z: complex, s0: float) -> complex:
    """integral_0^z zeta^(-4/k) (zeta + s0)^(8/k - 2) d zeta on the straight path.

    The substitution zeta = z v^p with p = kappa/(kappa - 4) removes the
    origin singularity exactly, leaving a smooth integrand.
    """
    p = kappa / (kappa - 4.0)
    e2 = 8.0 / kappa - 2.0
    pref = cmath.exp((1.0 - 4.0 / kappa) * cmath.log(z)) * p

    def f(v):
        return cmath.exp(e2 * cmath.log(z * v ** p + s0))

    return pref * _quad_complex(f, 0.0, 1.0, limit=200)


def _triangle_denominator(kappa: float, s0: float) -> float:
    """integral_0^inf t^(-4/k) (t + s0)^(8/k - 2) dt by two-piece quadrature."""
    a = 1.0 - 4.0 / kappa
    e2 = 8.0 / kappa - 2.0
    # t in (0, s0]: algebraic singularity at 0
    v1, _ = quad(lambda t: (t + s0) ** e2, 0.0, s0, weight="alg", wvar=(a - 1.0, 0.0))
    # t in [s0, inf): substitute t = s0 / r, r in (0, 1]
    v2, _ = quad(lambda r: (s0 / r) ** (-4.0 / kappa) * (s0 / r + s0) ** e2 * s0 / r ** 2
                 if r > 0 else 0.0, 0.0, 1.0, limit=200)
    return v1 + v2


def cardy_triangle(kappa: float, z: complex, eta: float) -> tuple:
    """(P(tau_z = tau_eta), P(tau_z > tau_eta)) for interior z and eta < 0.

    N maps (H, 0, eta, infinity) onto a triangle with vertices N(0) = 0,
    N(infinity) = 1 and Re N(eta) = 1/2; the probabilities are Cardy's
    harmonic-coordinate expressions in N.
    """
    if not kappa > 4.0:
        raise InputError("crossing probabilities need kappa > 4")
    z = complex(z)
    if z.imag <= 0:
        raise InputError("z must be interior")
    if not eta < 0:
        raise InputError("eta must lie on the negative real axis")
    s0 = -float(eta)
    den = _triangle_denominator(kappa, s0)
    n_z = _triangle_numerator(kappa, z, s0) / den
    # N(eta) along the boundary arc from 0, approached from H
    inc, _ = quad(lambda t: 1.0, 0.0, s0,
                  weight="alg", wvar=(-4.0 / kappa, 8.0 / kappa - 2.0))
    n_eta = cmath.exp(1j * math.pi * (1.0 - 4.0 / kappa)) * inc / den
    p_eq = n_z.imag / n_eta.imag
    p_gt = n_z.real - n_z.imag / (2.0 * n_eta.imag)
    return p_eq, p_gt


# ---------------------------------------------------------------------------
# Beffara's one-point estimate


def beffara_1pt(kappa: float, z: complex) -> float:
    """y^(kappa/8 + 8/kappa - 2) |z|^(1 - 8/kappa), the trace-proximity shape."""
    if not 0.0 < kappa < 8.0:
        raise InputError("Beffara's observable needs kappa in (0, 8)")
    z = complex(z)
    if z.imag <= 0:
        raise InputError("z must be interior")
    return z.imag ** (kappa / 8.0 + 8.0 / kappa - 2.0) * abs(z) ** (1.0 - 8.0 / kappa)


# ---------------------------------------------------------------------------
# the observable catalogue


def _green_h(w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    return np.log(np.abs(w1 - np.conj(w2))) - np.log(np.abs(w1 - w2))


@dataclass
class ObservableSpec:
    id: str
    kappa: float
    n_points: int
    kind: str                      # scalar | differential | schwarzian | harmonic | bosonic2
    lam: float = 0.0
    lam_star: float = 0.0
    lam_q: float = 0.0
    mu: float = 0.0                # order, for forms
    generator: Optional[tuple] = None  # vertex exponents behind the dims
    _eval: Callable = None

    def evaluate_states(self, states: Sequence) -> np.ndarray:
        """states: [(w, w', S_w)] per probe point, numpy arrays over paths."""
        return self._eval(states)

    def initial_value(self, group: Sequence[complex]) -> complex:
        states = [(np.array([complex(z)]), np.array([1.0 + 0j]), np.array([0j]))
                  for z in group]
        return complex(self.evaluate_states(states)[0])


def _cpow_arr(base: np.ndarray, e: complex) -> np.ndarray:
    return np.exp(e * np.log(base))


CATALOGUE_IDS = ("wedge", "strip", "halfplane-deriv", "schramm-sheffield-1pt",
                 "hatT-1pt", "beffara", "bosonic-2pt")


def catalogue(obs_id: str, kappa: float) -> ObservableSpec:
    """The named martingale-observable at its SLE parameter."""
    nm = numerology(kappa)
    a, b, h, c = nm.a, nm.b, nm.h, nm.c
    if obs_id == "wedge":
        beta = 1.0 - 4.0 / kappa

        def ev(states):
            w, _, _ = states[0]
            return _cpow_arr(w, beta)

        return ObservableSpec(obs_id, kappa, 1, "scalar", 0.0, 0.0, beta,
                              generator=(2 * b, 0.0), _eval=ev)
    if obs_id == "strip":
        lam = 8.0 / kappa - 1.0

        def ev(states):
            w, wp, _ = states[0]
            return _cpow_arr(wp, lam) * _cpow_arr(w, -lam)

        return ObservableSpec(obs_id, kappa, 1, "differential", lam, 0.0, 0.0,
                              generator=(2 * (b - a), 0.0), _eval=ev)
    if obs_id == "halfplane-deriv":
        lam = 3.0 / kappa - 0.5

        def ev(states):
            w, wp, _ = states[0]
            return _cpow_arr(wp, lam) * _cpow_arr(w, -2.0 * lam)

        return ObservableSpec(obs_id, kappa, 1, "differential", lam, 0.0, -lam,
                              generator=(2 * b - a, 0.0), _eval=ev)
    if obs_id == "schramm-sheffield-1pt":
        def ev(states):
            w, wp, _ = states[0]
            return 2.0 * a * np.angle(w) - 2.0 * b * np.angle(wp) + 0j

        return ObservableSpec(obs_id, kappa, 1, "harmonic", 0.0, 0.0, 0.0,
                              _eval=ev)
    if obs_id == "hatT-1pt":
        def ev(states):
            w, wp, sw = states[0]
            return wp * wp * (h / (w * w)) + (c / 12.0) * sw

        return ObservableSpec(obs_id, kappa, 1, "schwarzian", 2.0, 0.0, 0.0,
                              mu=c / 12.0, _eval=ev)
    if obs_id == "beffara":
        lam = (1.0 - kappa / 8.0) / 2.0
        expo_y = kappa / 8.0 + 8.0 / kappa - 2.0
        expo_r = 1.0 - 8.0 / kappa

        def ev(states):
            w, wp, _ = states[0]
            m = np.imag(w) ** expo_y * np.abs(w) ** expo_r
            return np.abs(wp) ** (2.0 * lam) * m + 0j

        return ObservableSpec(obs_id, kappa, 1, "differential", lam, lam, 0.0,
                              generator=(b - a, b - a), _eval=ev)
    if obs_id == "bosonic-2pt":
        def ev(states):
            (w1, wp1, _), (w2, wp2, _) = states
            phi1 = 2.0 * a * np.angle(w1) - 2.0 * b * np.angle(wp1)
            phi2 = 2.0 * a * np.angle(w2) - 2.0 * b * np.angle(wp2)
            return 2.0 * _green_h(w1, w2) + phi1 * phi2 + 0j

        return ObservableSpec(obs_id, kappa, 2, "bosonic2", 0.0, 0.0, 0.0,
                              _eval=ev)
    raise InputError(f"unknown observable id {obs_id!r}; know {CATALOGUE_IDS}")


def perturbed(spec: ObservableSpec, dlam: float = 0.1) -> ObservableSpec:
    """Dimension-detuned copy of a differential observable (negative control)."""
    if spec.kind not in ("differential", "scalar"):
        raise InputError("perturb a differential or scalar observable")
    if spec.id == "wedge":
        beta = spec.lam_q + dlam

        def ev(states):
            w, _, _ = states[0]
            return _cpow_arr(w, beta)
    else:
        base = catalogue(spec.id, spec.kappa)

        def ev(states):
            _, wp, _ = states[0]
            return base.evaluate_states(states) * _cpow_arr(wp, dlam)
    return ObservableSpec(spec.id + "+dlam", spec.kappa, spec.n_points,
                          spec.kind, spec.lam + dlam, spec.lam_star,
                          spec.lam_q, _eval=ev)


# ---------------------------------------------------------------------------
# Friedrich-Werner recursion

_fw_cache: dict = {}


def _fw_symbolic(kappa_key, n: int):
    """Symbolic R(x_1, ..., x_n) from the boundary Ward recursion."""
    import sympy as sp

    if (kappa_key, n) in _fw_cache:
        return _fw_cache[(kappa_key, n)]
    if isinstance(kappa_key, float):
        kap = sp.Float(kappa_key, 30)
    else:
        fr = Fraction(kappa_key)
        kap = sp.Rational(fr.numerator, fr.denominator)
    h = (6 - kap) / (2 * kap)
    c = (3 * kap - 8) * (6 - kap) / (2 * kap)
    xs = sp.symbols(f"x1:{n + 1}")
    if n == 0:
        expr = sp.Integer(1)
    else:
        z, rest = xs[0], xs[1:]
        prev = _fw_symbolic(kappa_key, n - 1)
        prev_subs = prev.subs({sp.Symbol(f"x{i + 1}"): rest[i] for i in range(n - 1)},
                              simultaneous=True) if n > 1 else prev
        expr = h / z ** 2 * prev_subs
        for j, xj in enumerate(rest):
            dj = sp.diff(prev_subs, xj)
            expr += (-1 / z + 1 / (z - xj)) * dj + 2 / (z - xj) ** 2 * prev_subs
        if n >= 2:
            prev2 = _fw_symbolic(kappa_key, n - 2)
            for j, xj in enumerate(rest):
                others = rest[:j] + rest[j + 1:]
                sub2 = prev2.subs({sp.Symbol(f"x{i + 1}"): others[i]
                                   for i in range(n - 2)}, simultaneous=True) \
                    if n > 2 else prev2
                expr += c / 2 * sub2 / (z - xj) ** 4
        expr = sp.together(expr)
    _fw_cache[(kappa_key, n)] = expr
    return expr


def fw_recursion(kappa, xs: Sequence) -> float:
    """R(x_1, ..., x_n) = E-hat[T(x_1) ... T(x_n)] on the boundary, recursively.

    Rational kappa and x's are carried exactly through the symbolic recursion
    (the formula differentiates its own output); floats fall back to
    high-precision floating arithmetic.
    """
    import sympy as sp

    xs = list(xs)
    if len(set(xs)) != len(xs) or any(x == 0 for x in xs):
        raise InputError("points must be distinct and nonzero")
    try:
        kappa_key = Fraction(kappa).limit_denominator(10 ** 9)
        if abs(float(kappa_key) - float(kappa)) > 1e-15 * abs(float(kappa)):
            kappa_key = float(kappa)
    except (TypeError, ValueError):
        kappa_key = float(kappa)
    expr = _fw_symbolic(kappa_key, len(xs))
    subs = {}
    for i, x in enumerate(xs):
        try:
            fr = Fraction(x)
            subs[sp.Symbol(f"x{i + 1}")] = sp.Rational(fr.numerator, fr.denominator)
        except (TypeError, ValueError):
            subs[sp.Symbol(f"x{i + 1}")] = sp.Float(x, 30)
    return float(expr.subs(subs, simultaneous=True))


# ---------------------------------------------------------------------------
# screening integrals


def _pow_from_h(x: float, e: float) -> complex:
    """x^e for real x, approached from the upper half-plane."""
    if x > 0:
        return x ** e
    return (-x) ** e * cmath.exp(1j * math.pi * e)


def screening_observable(sigma1: float, sigma2: float, s: float, arc: str,
                         eta1: float, eta2: float, kappa: float) -> complex:
    """Boundary 2-point observable by integrating a weight-one screening charge.

    N(eta1, eta2; zeta) = eta1^(s1 a) eta2^(s2 a) zeta^(s a)
                          (eta1 - eta2)^(s1 s2) (zeta - eta1)^(s1 s)
                          (zeta - eta2)^(s2 s),
    integrated in zeta over one of the plain boundary arcs 'eta1-eta2',
    'eta2-q', 'eta1-q' (the last one running through the negative axis).
    """
    nm = numerology(kappa)
    a = nm.a
    if not (abs(s + 2 * a) < 1e-9 or abs(s - 2 * (a + nm.b) ) < 1e-9):
        raise InputError("screening charge must have s = -2a or s = 2a + 2b")
    if not 0 < eta1 < eta2:
        raise InputError("need boundary points 0 < eta1 < eta2")
    e_q = s * (a + sigma1 + sigma2)

    def check(name, value):
        if value <= -1.0:
            raise IntegrabilityError(f"divergent endpoint {name}: exponent {value}")

    pref = (_pow_from_h(eta1, sigma1 * a) * _pow_from_h(eta2, sigma2 * a)
            * _pow_from_h(eta1 - eta2, sigma1 * sigma2))

    def integrand(z: float) -> complex:
        return (_pow_from_h(z, s * a) * _pow_from_h(z - eta1, sigma1 * s)
                * _pow_from_h(z - eta2, sigma2 * s))

    def quad_tail(A: float) -> complex:
        # integral_A^inf of the integrand, which decays like zeta^e_q
        p_sing = max(-e_q - 2.0, 0.0)
        return _quad_complex(lambda r: integrand(A / r) * A * r ** e_q if r > 0 else 0.0,
                             0.0, 1.0, weight="alg", wvar=(p_sing, 0.0)) \
            if p_sing > 0 else \
            _quad_complex(lambda r: integrand(A / r) * A / r ** 2 if r > 0 else 0.0,
                          0.0, 1.0, limit=200)

    if arc == "eta1-eta2":
        check("eta1", sigma1 * s)
        check("eta2", sigma2 * s)
        mid = 0.5 * (eta1 + eta2)
        v1 = _quad_complex(lambda t: integrand(eta1 + t) / t ** (sigma1 * s),
                           0.0, mid - eta1, weight="alg", wvar=(sigma1 * s, 0.0))
        v2 = _quad_complex(lambda t: integrand(eta2 - t) / t ** (sigma2 * s),
                           0.0, eta2 - mid, weight="alg", wvar=(sigma2 * s, 0.0))
        return pref * (v1 + v2)
    if arc == "eta2-q":
        check("eta2", sigma2 * s)
        if not e_q < -1.0:
            raise IntegrabilityError(f"divergent endpoint q: exponent {e_q}")
        v1 = _quad_complex(lambda t: integrand(eta2 + t) / t ** (sigma2 * s),
                           0.0, eta2, weight="alg", wvar=(sigma2 * s, 0.0))
        return pref * (v1 + quad_tail(2.0 * eta2))
    if arc == "eta1-q":
        # from eta1 through p = 0 and the negative axis out to q = infinity
        check("eta1", sigma1 * s)
        check("p", s * a)
        if not e_q < -1.0:
            raise IntegrabilityError(f"divergent endpoint q: exponent {e_q}")
        v1 = _quad_complex(
            lambda t: integrand(eta1 - t) / (t ** (sigma1 * s) * (eta1 - t) ** (s * a)),
            0.0, eta1, weight="alg", wvar=(sigma1 * s, s * a))
        v2 = _quad_complex(lambda t: integrand(-t) / t ** (s * a),
                           0.0, 1.0, weight="alg", wvar=(s * a, 0.0))
        v3 = _quad_complex(lambda r: integrand(-1.0 / r) / r ** 2 if r > 0 else 0.0,
                           0.0, 1.0, limit=200)
        return -pref * (v1 + v2 + v3)
    raise InputError("arc must be one of 'eta1-eta2', 'eta2-q', 'eta1-q'")
