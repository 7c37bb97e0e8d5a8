"""Symbolic Fock-space fields and exact correlator evaluation by Wick pairing.

A correlation query is an ordered string of nodes, each carrying a Wick
monomial in derivatives of the free boson Phi and/or an exponential charge
(either a plain Wick exponential e^{o alpha Phi} or a chiral vertex charge
rooted at infinity).  Evaluation enumerates Feynman diagrams: every basic
field occurrence is either contracted with an occurrence from a different
node or absorbed by a charge node; diagrams with unpaired occurrences drop
out since Wick monomials are centered.

Deterministic mean shifts (boundary-condition insertions, point insertions,
central-charge modification) enter as a ``Background``: each basic field X
is replaced by (X_centered + m) with m the matching derivative of the
background's harmonic mean, and charge nodes pick up closed-form coupling
factors.  All formulas are evaluated in the identity chart of H.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable, Optional, Sequence

from .errors import CapExceededError, CoincidentPointsError, InputError
from .halfplane import (
    KernelSum,
    HalfPlanePoint,
    ZETA, ZETABAR, Z, ZBAR,
    _as_point,
    green,
    green_mixed_partial,
)


class BranchWarning(UserWarning):
    """A complex power was taken with its base near the negative real axis."""


def _cpow(base: complex, expo: complex) -> complex:
    """Principal-branch power with a warning close to the branch cut."""
    if expo == 0:
        return 1.0 + 0j
    if base == 0:
        raise CoincidentPointsError("zero base in charge prefactor")
    if base.real < 0 and abs(base.imag) <= 1e-12 * abs(base):
        if expo != int(expo.real) or expo.imag != 0:
            warnings.warn("power base on the negative real axis; principal branch used",
                          BranchWarning, stacklevel=3)
    return cmath.exp(expo * cmath.log(base))


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, order=True)
class BasicField:
    """d^d dbar^dbar Phi;  (0,0) is Phi itself, (1,0) is the current J."""

    d: int = 0
    dbar: int = 0

    def __post_init__(self):
        if self.d < 0 or self.dbar < 0:
            raise ValueError("derivative orders must be nonnegative")

    def conj(self) -> "BasicField":
        return BasicField(self.dbar, self.d)


PHI = BasicField(0, 0)
J = BasicField(1, 0)
JBAR = BasicField(0, 1)


@dataclass(frozen=True)
class Charge:
    """Exponential charge node.

    rooted=False: Wick exponential e^{o alpha Phi} with mu = mu_star = alpha.
    rooted=True:  chiral vertex charge rooted at q = infinity; the node
    (mu, mu_star) = (i sigma, -i sigma_star) realizes the rooted vertex with
    exponents (sigma, sigma_star).
    """

    mu: complex
    mu_star: complex
    rooted: bool = False

    def __post_init__(self):
        if not self.rooted and self.mu != self.mu_star:
            raise ValueError("non-chiral charge needs mu == mu_star")

    @property
    def sigma(self) -> complex:
        return -1j * self.mu

    @property
    def sigma_star(self) -> complex:
        return 1j * self.mu_star

    def conj(self) -> "Charge":
        return Charge(self.mu_star.conjugate(), self.mu.conjugate(), self.rooted)

    @staticmethod
    def wick_exponential(alpha: complex) -> "Charge":
        return Charge(complex(alpha), complex(alpha), rooted=False)

    @staticmethod
    def rooted_vertex(sigma: complex, sigma_star: complex = 0.0) -> "Charge":
        return Charge(1j * complex(sigma), -1j * complex(sigma_star), rooted=True)


@dataclass(frozen=True)
class Term:
    """coefficient * (factor_1 o ... o factor_k) [o exponential charge]."""

    coef: complex = 1.0
    factors: tuple = ()
    charge: Optional[Charge] = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(sorted(self.factors)))

    def conj(self) -> "Term":
        return Term(complex(self.coef).conjugate(),
                    tuple(f.conj() for f in self.factors),
                    self.charge.conj() if self.charge else None)


FieldExpr = tuple  # tuple[Term, ...]


def monomial(*factors: BasicField, coef: complex = 1.0) -> FieldExpr:
    return (Term(coef, tuple(factors)),)


def charge_expr(charge: Charge, coef: complex = 1.0) -> FieldExpr:
    return (Term(coef, (), charge),)


def expr_scale(expr: FieldExpr, c: complex) -> FieldExpr:
    return tuple(replace(t, coef=t.coef * c) for t in expr)


def expr_add(*exprs: FieldExpr) -> FieldExpr:
    out = []
    for e in exprs:
        out.extend(e)
    return tuple(out)


def expr_conj(expr: FieldExpr) -> FieldExpr:
    return tuple(t.conj() for t in expr)


def stress_tensor(b: float = 0.0) -> FieldExpr:
    """T = -1/2 J o J + i b dJ, the Virasoro field in the identity chart of H."""
    t = monomial(J, J, coef=-0.5)
    if b:
        t = expr_add(t, monomial(BasicField(2, 0), coef=1j * b))
    return t


def field_derivative(expr, bar: bool = False) -> FieldExpr:
    """Apply d (or dbar) by the Leibniz rule; d e^{o a Phi} = a J o e^{o a Phi}."""
    if isinstance(expr, Term):
        expr = (expr,)
    out = []
    for t in expr:
        fs = t.factors
        for i, f in enumerate(fs):
            bumped = BasicField(f.d, f.dbar + 1) if bar else BasicField(f.d + 1, f.dbar)
            out.append(Term(t.coef, fs[:i] + (bumped,) + fs[i + 1:], t.charge))
        if t.charge is not None:
            w = t.charge.mu_star if bar else t.charge.mu
            if w != 0:
                out.append(Term(t.coef * w, fs + ((JBAR,) if bar else (J,)), t.charge))
    return tuple(out)


# ---------------------------------------------------------------------------
# backgrounds


class Background:
    """Zero background: the plain Gaussian free field expectation E."""

    def mean_deriv(self, d: int, dbar: int, z: complex) -> complex:
        return 0j

    def u(self, z: complex) -> complex:
        return 0j

    def charge_factor(self, charge: Charge, z: complex) -> complex:
        return 1.0 + 0j

    def describe(self) -> dict:
        return {"type": "none"}


ZERO_BACKGROUND = Background()


class BModBackground(Background):
    """Central-charge modification by b: mean -2b arg w' vanishes in id_H."""

    def __init__(self, b: float):
        self.b = b

    def describe(self):
        return {"type": "bmod", "b": self.b}


class InsertionBackground(Background):
    """Boundary-condition change at (p, q) = (0, infinity): u = 2a arg z."""

    def __init__(self, a: float):
        self.a = a

    def mean_deriv(self, d, dbar, z):
        a = self.a
        if d == 0 and dbar == 0:
            return self.u(z)
        if dbar == 0:
            return -1j * a * (-1.0) ** (d - 1) * math.factorial(d - 1) / z ** d
        if d == 0:
            zb = z.conjugate()
            return 1j * a * (-1.0) ** (dbar - 1) * math.factorial(dbar - 1) / zb ** dbar
        return 0j

    def u(self, z):
        return complex(2.0 * self.a * cmath.phase(z))

    def charge_factor(self, charge, z):
        # Pairing with the boundary charge at p = 0: z^(sigma a) zbar^(sigma* a).
        return _cpow(z, charge.sigma * self.a) * _cpow(z.conjugate(), charge.sigma_star * self.a)

    def describe(self):
        return {"type": "insertion", "a": self.a}


class PointInsertionBackground(Background):
    """Interior insertion of e^{o alpha Phi(z0)}: the mean shifts by 2 alpha G(., z0)."""

    def __init__(self, alpha: complex, z0: complex):
        self.alpha = complex(alpha)
        self.z0 = complex(z0)

    def mean_deriv(self, d, dbar, z):
        k = green_mixed_partial((d, dbar), (0, 0))
        return self.alpha * k.evaluate(z, self.z0)

    def u(self, z):
        return 2.0 * self.alpha * green(z, self.z0)

    def charge_factor(self, charge, z):
        if not charge.rooted:
            return cmath.exp(charge.mu * self.u(z))
        ins = Charge.wick_exponential(self.alpha)
        return _pair_charge_factor(charge, z, ins, self.z0)

    def describe(self):
        return {"type": "pointInsertion", "alpha": _c2l(self.alpha), "z0": _c2l(self.z0)}


# ---------------------------------------------------------------------------
# pairings


def pair_basic(f1: BasicField, p1, f2: BasicField, p2) -> complex:
    """E[f1(zeta) f2(z)] = 2 d^j_zeta d^k_z G(zeta, z), Wirtinger orders from the fields."""
    a, b = _as_point(p1), _as_point(p2)
    if a.value == b.value:
        raise CoincidentPointsError("pair_basic needs distinct points")
    if f1 == PHI and f2 == PHI:
        # real closed form; the complex-log kernel can straddle branch cuts
        return complex(2.0 * green(a, b))
    k = green_mixed_partial((f1.d, f1.dbar), (f2.d, f2.dbar))
    return k.evaluate(a.value, b.value)


# Rooted pairing kernels: K = E[Phi(zeta) Phi+(z)] and its anti-chiral mirror,
# with all q-terms dropped (root at infinity).
_K_HOL = KernelSum(log_terms=((1.0, Z, ZETABAR), (-1.0, Z, ZETA)))
_K_ANTI = KernelSum(log_terms=((1.0, ZBAR, ZETA), (-1.0, ZBAR, ZETABAR)))
_rooted_cache: dict = {}


def _rooted_kernels(d: int, dbar: int):
    if (d, dbar) not in _rooted_cache:
        _rooted_cache[(d, dbar)] = (
            _K_HOL.diff_many((d, dbar), (0, 0)),
            _K_ANTI.diff_many((d, dbar), (0, 0)),
        )
    return _rooted_cache[(d, dbar)]


def pair_charge(f: BasicField, p, charge: Charge, pc) -> complex:
    """One-contraction coefficient of a basic field against an exponential node."""
    a, b = _as_point(p), _as_point(pc)
    if a.value == b.value:
        raise CoincidentPointsError("pair_charge needs distinct points")
    if not charge.rooted:
        if f == PHI:
            return charge.mu * 2.0 * green(a, b)
        k = green_mixed_partial((f.d, f.dbar), (0, 0))
        return charge.mu * k.evaluate(a.value, b.value)
    k_hol, k_anti = _rooted_kernels(f.d, f.dbar)
    out = 0j
    if charge.mu != 0:
        out += charge.mu * k_hol.evaluate(a.value, b.value)
    if charge.mu_star != 0:
        out += charge.mu_star * k_anti.evaluate(a.value, b.value)
    return out


def _pair_charge_factor(c1: Charge, z1: complex, c2: Charge, z2: complex) -> complex:
    """Multiplicative pairing of two exponential nodes.

    Plain exponentials pair through the real Gibbs factor exp(2 a1 a2 G);
    any pair involving a chiral charge uses the closed-form product
    (z1-z2)^(s1 s2) (z1bar-z2bar)^(s1* s2*) (z1-z2bar)^(s1 s2*) (z1bar-z2)^(s1* s2).
    """
    if not c1.rooted and not c2.rooted:
        return cmath.exp(2.0 * c1.mu * c2.mu * green(z1, z2))
    s1, s1s = c1.sigma, c1.sigma_star
    s2, s2s = c2.sigma, c2.sigma_star
    z1b, z2b = z1.conjugate(), z2.conjugate()
    out = _cpow(z1 - z2, s1 * s2)
    out *= _cpow(z1b - z2b, s1s * s2s)
    out *= _cpow(z1 - z2b, s1 * s2s)
    out *= _cpow(z1b - z2, s1s * s2)
    return out


def charge_prefactor(charges: Sequence, background: Background = ZERO_BACKGROUND) -> complex:
    """Expectation of the bare exponential string (no basic-field contractions).

    ``charges`` is a sequence of (Charge, point) pairs.  Rooted nodes carry
    the self-normalization (z - zbar)^(sigma sigma*); the background supplies
    the coupling factor of each node (boundary insertion: z^(sigma a) etc.).
    """
    pts = [_as_point(p) for _, p in charges]
    for i in range(len(pts)):
        for k in range(i + 1, len(pts)):
            if pts[i].value == pts[k].value:
                raise CoincidentPointsError("charge nodes must sit at distinct points")
    out = 1.0 + 0j
    for (c, _), p in zip(charges, pts):
        z = p.value
        ss = c.sigma * c.sigma_star
        if c.rooted and ss != 0:
            out *= _cpow(z - z.conjugate(), ss)
        if not c.rooted:
            out *= cmath.exp(c.mu * background.u(z))
        else:
            out *= background.charge_factor(c, z)
    for i in range(len(charges)):
        for k in range(i + 1, len(charges)):
            out *= _pair_charge_factor(charges[i][0], pts[i].value,
                                       charges[k][0], pts[k].value)
    return out


# ---------------------------------------------------------------------------
# queries and diagrams


@dataclass
class QueryEntry:
    point: HalfPlanePoint
    expr: FieldExpr

    def __init__(self, point, expr):
        self.point = _as_point(point)
        if isinstance(expr, Term):
            expr = (expr,)
        self.expr = tuple(expr)


@dataclass
class CorrelationQuery:
    entries: list
    background: Background = ZERO_BACKGROUND
    cap: int = 14

    def __init__(self, entries, background=ZERO_BACKGROUND, cap=14):
        self.entries = [e if isinstance(e, QueryEntry) else QueryEntry(*e) for e in entries]
        self.background = background
        self.cap = cap
        seen = set()
        for e in self.entries:
            z = e.point.value
            if z in seen:
                raise CoincidentPointsError(f"duplicate node at {z}")
            seen.add(z)


@dataclass
class Diagram:
    """A partial pairing: edges between occurrences, absorptions into charges."""

    edges: tuple          # ((occ_i, occ_j), ...) by occurrence index
    absorptions: tuple    # ((occ_i, charge_entry_index), ...)
    unpaired: tuple       # occurrence indices left unmatched
    annihilated: bool     # True iff unpaired is nonempty


def _iter_occurrences(entries, combo):
    """Occurrences [(entry_idx, BasicField, point)] and charges [(entry_idx, Charge, point)]."""
    occs, charges = [], []
    for i, (entry, term) in enumerate(zip(entries, combo)):
        for f in term.factors:
            occs.append((i, f, entry.point))
        if term.charge is not None:
            charges.append((i, term.charge, entry.point))
    return occs, charges


def _matching_sum(occs, charges) -> complex:
    """Sum over complete diagrams of the product of contraction values.

    The recursion always resolves the first open occurrence, scanning partner
    occurrences in index order and then charge nodes in index order, which
    fixes a canonical evaluation order for reproducibility.
    """
    if not occs:
        return 1.0 + 0j
    (e0, f0, p0), rest = occs[0], occs[1:]
    total = 0j
    for idx, (e1, f1, p1) in enumerate(rest):
        if e1 == e0:
            continue
        v = pair_basic(f0, p0, f1, p1)
        if v != 0:
            total += v * _matching_sum(rest[:idx] + rest[idx + 1:], charges)
    for ec, c, pc in charges:
        if ec == e0:
            continue
        v = pair_charge(f0, p0, c, pc)
        if v != 0:
            total += v * _matching_sum(rest, charges)
    return total


def _mean_expansions(term: Term, point, background):
    """Yield (scalar, kept_factors) over all centered/mean splittings of one term."""
    fs = term.factors
    means = [background.mean_deriv(f.d, f.dbar, point.value) for f in fs]
    if not any(m != 0 for m in means):
        yield 1.0 + 0j, fs
        return
    for keep in product((True, False), repeat=len(fs)):
        scalar = 1.0 + 0j
        kept = []
        dead = False
        for f, m, k in zip(fs, means, keep):
            if k:
                kept.append(f)
            else:
                if m == 0:
                    dead = True
                    break
                scalar *= m
        if not dead:
            yield scalar, tuple(kept)


def correlate(query: CorrelationQuery) -> complex:
    """E (or E-hat under a nonzero background) of the query string."""
    entries = query.entries
    nfields = max((sum(len(t.factors) for t in combo)
                   for combo in product(*(e.expr for e in entries))), default=0)
    if nfields > query.cap:
        raise CapExceededError(f"{nfields} basic fields exceeds cap {query.cap}")
    bg = query.background
    total = 0j
    for combo in product(*(e.expr for e in entries)):
        coef = 1.0 + 0j
        for t in combo:
            coef *= t.coef
        if coef == 0:
            continue
        _, charges = _iter_occurrences(entries, combo)
        pref = charge_prefactor([(c, p) for _, c, p in charges], bg)
        for split in product(*(_mean_expansions(t, e.point, bg)
                               for t, e in zip(combo, entries))):
            scalar = 1.0 + 0j
            occs = []
            for i, (s, kept) in enumerate(split):
                scalar *= s
                for f in kept:
                    occs.append((i, f, entries[i].point))
            total += coef * pref * scalar * _matching_sum(occs, charges)
    return total


def enumerate_diagrams(query: CorrelationQuery) -> list:
    """All partial pairings of the string's basic-field occurrences.

    Exposed for the brute-force oracle; annihilated diagrams (with unpaired
    occurrences) are included and flagged.  Entries must be single terms.
    """
    combo = []
    for e in query.entries:
        if len(e.expr) != 1:
            raise InputError("enumerate_diagrams needs single-term entries")
        combo.append(e.expr[0])
    occs, charges = _iter_occurrences(query.entries, combo)
    n = len(occs)
    out = []

    def rec(i, open_set, edges, absorbs):
        if i == n:
            unpaired = tuple(sorted(open_set))
            out.append(Diagram(tuple(edges), tuple(absorbs), unpaired, bool(unpaired)))
            return
        if i not in open_set:
            rec(i + 1, open_set, edges, absorbs)
            return
        # leave i unpaired
        rec(i + 1, open_set - {i}, edges, absorbs)
        for k in sorted(open_set):
            if k > i and occs[k][0] != occs[i][0]:
                rec(i + 1, open_set - {i, k}, edges + [(i, k)], absorbs)
        for ci, (ec, _, _) in enumerate(charges):
            if ec != occs[i][0]:
                rec(i + 1, open_set - {i}, edges, absorbs + [(i, ci)])

    rec(0, frozenset(range(n)), [], [])
    return out


def conjugate_query(query: CorrelationQuery) -> CorrelationQuery:
    """Conjugate all fields and charges, leaving the points fixed."""
    return CorrelationQuery(
        [QueryEntry(e.point, expr_conj(e.expr)) for e in query.entries],
        background=query.background, cap=query.cap)


# ---------------------------------------------------------------------------
# JSON interface


def _c2l(z: complex):
    return [z.real, z.imag]


def _l2c(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    return complex(v[0], v[1])


def background_from_json(doc: dict) -> Background:
    kind = (doc or {}).get("type", "none")
    if kind == "none":
        return ZERO_BACKGROUND
    if kind == "bmod":
        return BModBackground(float(doc["b"]))
    if kind == "insertion":
        return InsertionBackground(float(doc["a"]))
    if kind == "pointInsertion":
        return PointInsertionBackground(_l2c(doc["alpha"]), _l2c(doc["z0"]))
    raise InputError(f"unknown background type {kind!r}")


def query_from_json(doc: dict) -> CorrelationQuery:
    """Parse the CLI query document: {nodes: [...], background: {...}}."""
    try:
        nodes = doc["nodes"]
    except (TypeError, KeyError) as exc:
        raise InputError("query document needs a 'nodes' list") from exc
    entries = []
    for i, node in enumerate(nodes):
        try:
            kind = node["kind"]
            point = _l2c(node["point"])
            factors = tuple(BasicField(int(d), int(db))
                            for d, db in node.get("factors", []))
            if kind == "monomial":
                charge = None
            elif kind == "charge":
                charge = Charge(_l2c(node.get("mu", 0)),
                                _l2c(node.get("muStar", node.get("mu", 0))),
                                bool(node.get("rooted", False)))
            else:
                raise InputError(f"node {i}: unknown kind {kind!r}")
            coef = _l2c(node.get("coef", 1.0))
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"node {i}: {exc}") from exc
        entries.append(QueryEntry(point, (Term(coef, factors, charge),)))
    return CorrelationQuery(entries, background_from_json(doc.get("background")),
                            cap=int(doc.get("cap", 14)))


def query_to_json(query: CorrelationQuery) -> dict:
    nodes = []
    for e in query.entries:
        if len(e.expr) != 1:
            raise InputError("only single-term entries serialize to JSON")
        t = e.expr[0]
        node = {
            "kind": "charge" if t.charge is not None else "monomial",
            "factors": [[f.d, f.dbar] for f in t.factors],
            "point": _c2l(e.point.value),
            "coef": _c2l(complex(t.coef)),
        }
        if t.charge is not None:
            node["mu"] = _c2l(t.charge.mu)
            node["muStar"] = _c2l(t.charge.mu_star)
            node["rooted"] = t.charge.rooted
        nodes.append(node)
    return {"nodes": nodes, "background": query.background.describe(), "cap": query.cap}
