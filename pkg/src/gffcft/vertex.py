"""Closed-form vertex-field expectations and linear-equation residuals.

Star products of rooted vertex fields have expectations that factor into
powers of the pairwise differences

    E prod_j O^{(sigma_j, sigma*_j)}(z_j) =
        prod_j M_j  prod_{j<k} (z_j-z_k)^{s_j s_k} (zb_j-zb_k)^{s*_j s*_k}
                               (z_j-zb_k)^{s_j s*_k} (zb_j-z_k)^{s*_j s_k}

with M_j = (z_j - zb_j)^{s_j s*_j} and, under the boundary-condition
insertion at p = 0, extra factors z_j^{s_j a} zb_j^{s*_j a}.  This module
keeps such products symbolically (products of powers of linear forms) so
first and second derivatives are exact, and uses them to verify Ward's
equations in H, Cardy's boundary equations, and the KZ equations.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import CoincidentPointsError, InputError
from .halfplane import _as_point
from .numerology import Numerology, numerology
from .wick import (
    Charge,
    CorrelationQuery,
    QueryEntry,
    FieldExpr,
    Term,
    _cpow,
    charge_expr,
    correlate,
    expr_add,
    field_derivative,
    monomial,
    stress_tensor,
)

# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class VertexNode:
    sigma: float
    sigma_star: float
    point: complex

    def charge(self) -> Charge:
        return Charge.rooted_vertex(self.sigma, self.sigma_star)


@dataclass(frozen=True)
class StarProduct:
    nodes: tuple
    insertion: bool = False

    def __init__(self, nodes: Iterable[VertexNode], insertion: bool = False):
        object.__setattr__(self, "nodes", tuple(nodes))
        object.__setattr__(self, "insertion", insertion)
        pts = [complex(n.point) for n in self.nodes]
        if len(set(pts)) != len(pts):
            raise CoincidentPointsError("star product needs distinct nodes")

    @property
    def total_charge(self) -> float:
        return sum(n.sigma + n.sigma_star for n in self.nodes)


def vertex_dims(sigma: float, sigma_star: float, b: float) -> tuple:
    """Conformal dimensions (lam, lam_star) and spin of O^{(sigma, sigma*)}."""
    lam = sigma * sigma / 2.0 - sigma * b
    lam_star = sigma_star * sigma_star / 2.0 - sigma_star * b
    return lam, lam_star, lam - lam_star


def lambda_q(sp: StarProduct, nm: Numerology) -> float:
    """Boundary dimension at q: (a - b) Sigma + Sigma^2 / 2."""
    s = sp.total_charge
    return (nm.a - nm.b) * s + 0.5 * s * s


# ---------------------------------------------------------------------------
# products of powers of linear forms, with exact Wirtinger derivatives

# A variable is ("z", j) or ("zb", j); a linear form is (const, {var: coef}).


def _lin_value(lin, assign) -> complex:
    const, coeffs = lin
    return const + sum(c * assign[v] for v, c in coeffs.items())


@dataclass(frozen=True)
class RationalSum:
    """Sum of coef / lin^power terms; closed under d/d(var)."""

    terms: tuple = ()

    def deriv(self, var) -> "RationalSum":
        out = []
        for coef, lin, p in self.terms:
            c = lin[1].get(var, 0)
            if c:
                out.append((-p * coef * c, lin, p + 1))
        return RationalSum(tuple(out))

    def value(self, assign) -> complex:
        total = 0j
        for coef, lin, p in self.terms:
            total += coef / _lin_value(lin, assign) ** p
        return total

    def __add__(self, other):
        return RationalSum(self.terms + other.terms)


class PowerProduct:
    """prod_i lin_i ^ e_i with principal branches."""

    def __init__(self, factors=()):
        self.factors = list(factors)  # (exponent, lin)

    def add(self, exponent, lin):
        if exponent != 0:
            self.factors.append((exponent, (lin[0], dict(lin[1]))))

    def value(self, assign) -> complex:
        out = 1.0 + 0j
        for e, lin in self.factors:
            out *= _cpow(_lin_value(lin, assign), e)
        return out

    def dlog(self, var) -> RationalSum:
        terms = []
        for e, lin in self.factors:
            c = lin[1].get(var, 0)
            if c:
                terms.append((e * c, (lin[0], lin[1]), 1))
        return RationalSum(tuple(terms))


def _vz(j):
    return ("z", j)


def _vzb(j):
    return ("zb", j)


def _lin(*pairs, const=0.0):
    return (const, {v: c for v, c in pairs})


def _assign(points: Sequence[complex]) -> dict:
    out = {}
    for j, z in enumerate(points):
        z = complex(z)
        out[_vz(j)] = z
        out[_vzb(j)] = z.conjugate()
    return out


def star_closed_form(nodes: Sequence[VertexNode], insertion: bool, a: float) -> PowerProduct:
    """The closed-form expectation of a star product as a PowerProduct."""
    pp = PowerProduct()
    for j, n in enumerate(nodes):
        s, ss = n.sigma, n.sigma_star
        if insertion:
            pp.add(s * a, _lin((_vz(j), 1.0)))
            pp.add(ss * a, _lin((_vzb(j), 1.0)))
        pp.add(s * ss, _lin((_vz(j), 1.0), (_vzb(j), -1.0)))
    for j in range(len(nodes)):
        for k in range(j + 1, len(nodes)):
            sj, sjs = nodes[j].sigma, nodes[j].sigma_star
            sk, sks = nodes[k].sigma, nodes[k].sigma_star
            pp.add(sj * sk, _lin((_vz(j), 1.0), (_vz(k), -1.0)))
            pp.add(sjs * sks, _lin((_vzb(j), 1.0), (_vzb(k), -1.0)))
            pp.add(sj * sks, _lin((_vz(j), 1.0), (_vzb(k), -1.0)))
            pp.add(sjs * sk, _lin((_vzb(j), 1.0), (_vz(k), -1.0)))
    return pp


def star_correlator(sp: StarProduct, nm: Numerology) -> complex:
    """E (or E-hat, when sp.insertion) of the star product in id_H."""
    pp = star_closed_form(sp.nodes, sp.insertion, nm.a)
    return pp.value(_assign([n.point for n in sp.nodes]))


def nonchiral_vertex_form(sigmas: Sequence[float]) -> PowerProduct:
    """Closed form of E prod_j V^{i sigma_j}(z_j) (OPE-normalized, no insertion).

    Uses the manifestly real representation prod (2y_j)^(-s_j^2) times the
    Gibbs factors exp(-2 s_j s_k G)."""
    pp = PowerProduct()
    for j, s in enumerate(sigmas):
        # 2y = -i z + i zbar
        pp.add(-s * s, _lin((_vz(j), -1j), (_vzb(j), 1j)))
    for j in range(len(sigmas)):
        for k in range(j + 1, len(sigmas)):
            e = -sigmas[j] * sigmas[k]
            pp.add(e, _lin((_vz(j), 1.0), (_vzb(k), -1.0)))
            pp.add(e, _lin((_vzb(j), 1.0), (_vz(k), -1.0)))
            pp.add(-e, _lin((_vz(j), 1.0), (_vz(k), -1.0)))
            pp.add(-e, _lin((_vzb(j), 1.0), (_vzb(k), -1.0)))
    return pp


# ---------------------------------------------------------------------------
# Ward's equations in the half-plane


@dataclass(frozen=True)
class WardEntry:
    """One differential in a Ward string: an engine expression plus dimensions.

    For the OPE-normalized vertex V^{i sigma}, ``norm_sigma`` carries the
    (2y)^(-sigma^2) normalization whose log-derivative feeds the d_j terms.
    """

    expr: FieldExpr
    lam: complex
    lam_star: complex
    point: complex
    norm_sigma: float = 0.0

    @staticmethod
    def vertex(sigma: float, point: complex, b: float) -> "WardEntry":
        lam, lam_star, _ = vertex_dims(sigma, -sigma, b)
        # V^{i sigma} = C^{-sigma^2} e^{o i sigma Phi}; lam* of the non-chiral
        # vertex is sigma^2/2 + sigma b = dims of the (sigma, -sigma) pair.
        return WardEntry(charge_expr(Charge.wick_exponential(1j * sigma)),
                         lam, lam_star, complex(point), norm_sigma=sigma)

    @staticmethod
    def basic(expr: FieldExpr, lam: complex, lam_star: complex, point: complex) -> "WardEntry":
        return WardEntry(tuple(expr), lam, lam_star, complex(point))


def _norm_factor(entries) -> complex:
    out = 1.0 + 0j
    for e in entries:
        if e.norm_sigma:
            y = complex(e.point).imag
            out *= (2.0 * y) ** (-e.norm_sigma ** 2)
    return out


def _corr(entries, exprs) -> complex:
    return correlate(CorrelationQuery(
        [QueryEntry(e.point, x) for e, x in zip(entries, exprs)]))


def ward_residual(string: Sequence[WardEntry], zeta: complex, b: float = 0.0) -> complex:
    """E[T(zeta) X] minus the Ward sum over the nodes of X; expected ~ 0.

    All derivatives are analytic: d_j E[X] is evaluated through the Leibniz
    action of d on the engine expression plus the normalization log-derivative.
    """
    zeta = complex(zeta)
    entries = list(string)
    norm = _norm_factor(entries)
    exprs = [e.expr for e in entries]
    t_entry = QueryEntry(zeta, stress_tensor(b))
    lhs = norm * correlate(CorrelationQuery(
        [t_entry] + [QueryEntry(e.point, x) for e, x in zip(entries, exprs)]))
    ex = norm * _corr(entries, exprs)
    rhs = 0j
    for j, e in enumerate(entries):
        z = complex(e.point)
        zb = z.conjugate()
        dj = norm * _corr(entries, exprs[:j] + [field_derivative(exprs[j])] + exprs[j + 1:])
        djb = norm * _corr(entries, exprs[:j] + [field_derivative(exprs[j], bar=True)] + exprs[j + 1:])
        if e.norm_sigma:
            s2 = e.norm_sigma ** 2
            dj += -s2 / (z - zb) * ex
            djb += s2 / (z - zb) * ex
        rhs += dj / (zeta - z) + e.lam * ex / (zeta - z) ** 2
        rhs += djb / (zeta - zb) + e.lam_star * ex / (zeta - zb) ** 2
    return lhs - rhs


# ---------------------------------------------------------------------------
# Cardy and KZ residuals


def cardy_residual(sp: StarProduct, nm: Numerology) -> complex:
    """[(sum_j d_j + dbar_j)^2 - 2 a^2 L_{v0}] applied to E-hat of sp; ~ 0."""
    if not sp.insertion:
        raise InputError("Cardy's equations live in the insertion theory")
    nodes = sp.nodes
    if not nodes:
        return 0j
    pp = star_closed_form(nodes, True, nm.a)
    assign = _assign([n.point for n in nodes])
    m = pp.value(assign)

    all_vars = [v for j in range(len(nodes)) for v in (_vz(j), _vzb(j))]
    dlogs = {v: pp.dlog(v) for v in all_vars}
    s_val = sum(dlogs[v].value(assign) for v in all_vars)
    ds_val = 0j
    for v in all_vars:
        for w in all_vars:
            ds_val += dlogs[v].deriv(w).value(assign)
    lhs = (s_val * s_val + ds_val) * m

    lie = 0j
    for j, n in enumerate(nodes):
        z = complex(n.point)
        zb = z.conjugate()
        lam, lam_star, _ = vertex_dims(n.sigma, n.sigma_star, nm.b)
        dj = dlogs[_vz(j)].value(assign) * m
        djb = dlogs[_vzb(j)].value(assign) * m
        lie += -dj / z + lam * m / z ** 2 - djb / zb + lam_star * m / zb ** 2
    return lhs - 2.0 * nm.a ** 2 * lie


def kz_residual(sigmas: Sequence[float], points: Sequence[complex], j: int) -> complex:
    """d_{z_j} E[X] minus the KZ bracket times E[X] for X = prod V^{i sigma_k}."""
    pts = [complex(p) for p in points]
    if len(set(pts)) != len(pts):
        raise CoincidentPointsError("KZ nodes must be distinct")
    pp = nonchiral_vertex_form(sigmas)
    assign = _assign(pts)
    ex = pp.value(assign)
    dj = pp.dlog(_vz(j)).value(assign) * ex
    z = pts[j]
    bracket = -sigmas[j] ** 2 / (z - z.conjugate())
    for k, (s, w) in enumerate(zip(sigmas, pts)):
        if k == j:
            continue
        bracket += sigmas[j] * s * (1.0 / (z - w) - 1.0 / (z - w.conjugate()))
    return dj - bracket * ex


# ---------------------------------------------------------------------------
# star-product derivative helpers (used by the degeneracy checks)


def star_second_derivative(nodes: Sequence[VertexNode], insertion: bool,
                           a: float, j: int = 0) -> complex:
    """Exact d^2/d z_j^2 of the closed-form star correlator."""
    pp = star_closed_form(nodes, insertion, a)
    assign = _assign([n.point for n in nodes])
    m = pp.value(assign)
    d = pp.dlog(_vz(j))
    dv = d.value(assign)
    ddv = d.deriv(_vz(j)).value(assign)
    return (dv * dv + ddv) * m


# ---------------------------------------------------------------------------
# JSON interface


def star_product_from_json(doc: dict):
    try:
        nodes = tuple(VertexNode(float(n["sigma"]), float(n["sigmaStar"]),
                                 complex(n["point"][0], n["point"][1]))
                      for n in doc["nodes"])
        sp = StarProduct(nodes, bool(doc.get("insertion", False)))
        nm = numerology(float(doc["kappa"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad star-product document: {exc}") from exc
    return sp, nm


def star_product_to_json(sp: StarProduct, nm: Numerology) -> dict:
    return {
        "nodes": [{"sigma": n.sigma, "sigmaStar": n.sigma_star,
                   "point": [complex(n.point).real, complex(n.point).imag]}
                  for n in sp.nodes],
        "insertion": sp.insertion,
        "kappa": nm.kappa,
    }
