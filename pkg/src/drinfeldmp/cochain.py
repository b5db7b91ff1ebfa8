"""Integer harmonic cochains on a quotient graph.

A cuspidal cochain is stored by its values on the positive finite-part edge
orbits; it vanishes on the half-line edges, is alternating, and satisfies
the weighted harmonicity sum at every vertex orbit. The module computes the
saturated integer basis of the cuspidal space, the Petersson pairing, Hecke
operators, Fourier coefficients and expansions, degeneracy maps between
levels, and the normalized eigencochain attached to an elliptic curve.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

from .btgraph import QuotientGraph, apply_matrix_vertex, vertex, vertex_parent
from .ff import FqPoly, field, monic_irreducibles, pdeg, pdivmod, pgcd, pmod, pmul, pnormalize
from .intlinalg import frac_solve, integer_kernel
from .laurent import Laurent

NU_STANDARD = "standard"
NU_LITERAL = "literal"


class CochainError(RuntimeError):
    pass


def nu(y, q=None, convention=NU_LITERAL):
    """The unit-sum character reading the pi^1 digit of y.

    Literal convention: -1 when the digit vanishes, q-1 otherwise. The
    standard convention swaps the two cases; which one feeds the Fourier
    machinery is decided by the Hecke eigenvalue identities.
    """
    if isinstance(y, Laurent):
        qq = y.field.q if q is None else q
        a1 = y.digit(1)
    else:
        raise TypeError("nu expects a Laurent number")
    if convention == NU_LITERAL:
        return -1 if a1 == 0 else qq - 1
    return qq - 1 if a1 == 0 else -1


class HarmonicCochain:
    """Integer cochain on the positive finite-part edge orbits of a graph."""

    __slots__ = ("graph", "values")

    def __init__(self, graph: QuotientGraph, values):
        self.graph = graph
        self.values = {e: int(v) for e, v in values.items() if v}

    def value(self, edge_id, direction=1):
        return direction * self.values.get(edge_id, 0)

    def value_at_tree_edge(self, v_from, v_to):
        eid, direction = self.graph.oriented_class(v_from, v_to)
        return self.value(eid, direction)

    def value_at_standard_edge(self, j, y: Laurent):
        """Value on the positive edge named by (pi^j, y)."""
        v = vertex(j, y)
        return self.value_at_tree_edge(v, vertex_parent(v))

    def is_harmonic(self):
        G = self.graph
        for v in G.vertices:
            if not v.star:
                continue
            total = 0
            for eid, direction, m in v.star:
                total += m * self.value(eid, direction)
            if total:
                return False
        return True

    def support(self):
        return sorted(self.values)

    def content(self):
        g = 0
        for v in self.values.values():
            g = gcd(g, v)
        return g

    def vector(self, edge_order=None):
        order = edge_order or [e.idx for e in self.graph.finite_edges()]
        return [self.values.get(e, 0) for e in order]

    def __add__(self, other):
        out = dict(self.values)
        for e, v in other.values.items():
            out[e] = out.get(e, 0) + v
        return HarmonicCochain(self.graph, out)

    def __sub__(self, other):
        out = dict(self.values)
        for e, v in other.values.items():
            out[e] = out.get(e, 0) - v
        return HarmonicCochain(self.graph, out)

    def __neg__(self):
        return HarmonicCochain(self.graph, {e: -v for e, v in self.values.items()})

    def scaled(self, k):
        return HarmonicCochain(self.graph, {e: k * v for e, v in self.values.items()})

    def __eq__(self, other):
        return isinstance(other, HarmonicCochain) and other.values == self.values

    def __repr__(self):
        return f"HarmonicCochain({self.values})"

    def to_json(self):
        return {str(e): v for e, v in sorted(self.values.items())}


def harmonicity_matrix(G: QuotientGraph):
    """Rows: weighted star sums at vertex orbits; columns: finite edges."""
    edge_order = [e.idx for e in G.finite_edges()]
    col = {e: i for i, e in enumerate(edge_order)}
    rows = []
    for v in G.vertices:
        if not v.star:
            continue
        row = [0] * len(edge_order)
        touched = False
        for eid, direction, m in v.star:
            if eid in col:
                row[col[eid]] += direction * m
                touched = True
        if touched:
            rows.append(row)
    return rows, edge_order


def cuspidal_basis(G: QuotientGraph):
    """Saturated integer basis of the cuspidal harmonic cochains."""
    rows, edge_order = harmonicity_matrix(G)
    if not edge_order:
        return []
    kern = integer_kernel(rows) if rows else [[1 if i == j else 0 for i in range(len(edge_order))] for j in range(len(edge_order))]
    basis = [
        HarmonicCochain(G, {edge_order[i]: x for i, x in enumerate(vec) if x})
        for vec in kern
    ]
    if len(basis) != G.genus:
        raise CochainError(
            f"cuspidal rank {len(basis)} does not match genus {G.genus}"
        )
    for phi in basis:
        if not phi.is_harmonic():
            raise CochainError("kernel vector fails harmonicity")
    return basis


def petersson(phi: HarmonicCochain, psi: HarmonicCochain) -> Fraction:
    """The inner product, an exact rational: sum over positive finite orbits
    of phi*psi / |stabilizer|."""
    if phi.graph is not psi.graph:
        raise CochainError("cochains live on different graphs")
    total = Fraction(0)
    for e in phi.graph.finite_edges():
        a = phi.values.get(e.idx, 0)
        b = psi.values.get(e.idx, 0)
        if a and b:
            total += Fraction(a * b, e.stab_order)
    return total


# ---------------------------------------------------------------------------
# Hecke operators
# ---------------------------------------------------------------------------


def hecke_triples(F, m, n):
    """The (a, b, d) with a d = m, a monic coprime to n, deg b < deg d."""
    out = []
    dm = pdeg(m)
    for da in range(dm + 1):
        for a in monic_divisor_candidates(F, m, da):
            quo, rem = pdivmod(F, m, a)
            if rem:
                continue
            if pdeg(pgcd(F, a, n)) != 0:
                continue
            d = quo
            bs = _all_polys_below(F, pdeg(d))
            for b in bs:
                out.append((a, b, d))
    return out


def monic_divisor_candidates(F, m, da):
    from .ff import penum_monic

    if da == 0:
        return [(1,)]
    if da > pdeg(m):
        return []
    return penum_monic(F, da)


def _all_polys_below(F, d):
    """All polynomials of degree < d (just 0 when d <= 0)."""
    if d <= 0:
        return [()]
    q = F.q
    out = []
    for idx in range(q**d):
        coeffs = []
        x = idx
        for _ in range(d):
            coeffs.append(x % q)
            x //= q
        out.append(pnormalize(coeffs))
    return out


def hecke_on_cochain(m, phi: HarmonicCochain) -> HarmonicCochain:
    """The Hecke operator at the monic polynomial m coprime to the level."""
    G = phi.graph
    F = G.F
    mc = m.c if isinstance(m, FqPoly) else pnormalize(m)
    if pdeg(pgcd(F, mc, G.ctx.n)) != 0:
        raise CochainError("Hecke index must be coprime to the level")
    triples = hecke_triples(F, mc, G.ctx.n)
    values = {}
    for e in G.finite_edges():
        v_from, v_to = e.rep_edge
        total = 0
        for a, b, d in triples:
            g = (a, b, (), d)
            w_from = apply_matrix_vertex(F, g, v_from)
            w_to = apply_matrix_vertex(F, g, v_to)
            total += phi.value_at_tree_edge(w_from, w_to)
        values[e.idx] = total
    out = HarmonicCochain(G, values)
    if not out.is_harmonic():
        raise CochainError("Hecke image fails harmonicity")
    return out


def hecke_matrix(m, basis):
    """Integer matrix of the Hecke operator in the given cuspidal basis."""
    G = basis[0].graph
    edge_order = [e.idx for e in G.finite_edges()]
    cols = []
    A = [[phi.values.get(e, 0) for phi in basis] for e in edge_order]
    for phi in basis:
        img = hecke_on_cochain(m, phi)
        b = [img.values.get(e, 0) for e in edge_order]
        x = frac_solve(A, b)
        if x is None:
            raise CochainError("Hecke image is outside the cuspidal space")
        col = []
        for xi in x:
            if xi.denominator != 1:
                raise CochainError("Hecke operator does not preserve the lattice")
            col.append(int(xi))
        cols.append(col)
    g = len(basis)
    return [[cols[j][i] for j in range(g)] for i in range(g)]


# ---------------------------------------------------------------------------
# Fourier coefficients and expansion
# ---------------------------------------------------------------------------


def _y_orbit_reps(F, depth):
    """Tails sum a_i pi^i, 1 <= i <= depth, first nonzero digit 1, plus 0."""
    out = [Laurent.zero(F)]
    q = F.q
    for lead in range(1, depth + 1):
        free = depth - lead
        for idx in range(q**free):
            dd = {lead: 1}
            x = idx
            for t in range(free):
                c = x % q
                x //= q
                if c:
                    dd[lead + 1 + t] = c
            out.append(Laurent.from_digit_dict(F, dd))
    return out


def fourier_coefficient(phi: HarmonicCochain, m, convention=NU_STANDARD) -> Fraction:
    """The coefficient attached to the monic polynomial m, an exact rational."""
    G = phi.graph
    F = G.F
    q = G.q
    mc = m.c if isinstance(m, FqPoly) else pnormalize(m)
    d = pdeg(mc)
    if d < 0 or mc[-1] != 1:
        raise CochainError("Fourier index must be monic")
    j = 2 + d
    ml = Laurent.from_poly(F, mc)
    total = 0
    for y in _y_orbit_reps(F, 1 + d):
        val = phi.value_at_standard_edge(j, y)
        if not val:
            continue
        if y.is_zero():
            w = nu(y, q, convention) if convention == NU_LITERAL else 1
        else:
            w = nu(ml * y, q, convention)
        total += val * w
    return Fraction(total, q ** (1 + d))


class FourierTable:
    """Coefficients c(phi, m) for monic m up to a degree cap."""

    def __init__(self, phi: HarmonicCochain, max_degree, convention=NU_STANDARD):
        self.graph = phi.graph
        self.convention = convention
        self.max_degree = max_degree
        F = phi.graph.F
        self.coeffs = {}
        from .ff import penum_monic

        for d in range(max_degree + 1):
            for mc in penum_monic(F, d):
                self.coeffs[mc] = fourier_coefficient(phi, FqPoly(F, mc), convention)

    def coefficient(self, mc):
        mc = mc.c if isinstance(mc, FqPoly) else pnormalize(mc)
        return self.coeffs[mc]

    def to_json(self):
        from .ff import format_poly

        return {
            "convention": self.convention,
            "coefficients": {
                format_poly(mc): str(c) for mc, c in sorted(self.coeffs.items())
            },
        }


def fourier_expansion_value(table: FourierTable, j, y: Laurent, convention=None) -> Fraction:
    """Evaluate the expansion at the edge (pi^j, y); needs the table to degree j-2."""
    conv = convention or table.convention
    G = table.graph
    F = G.F
    q = G.q
    if j - 2 > table.max_degree:
        raise CochainError("Fourier table too shallow for this edge")
    total = Fraction(0)
    from .ff import penum_monic

    for k in range(0, j - 1):
        scale = Fraction(q ** (k + 2 - j)) if k + 2 >= j else Fraction(1, q ** (j - 2 - k))
        inner = 0
        for fc in penum_monic(F, k):
            c = table.coeffs[fc]
            if c:
                inner += c * nu(Laurent.from_poly(F, fc) * y, q, conv)
        total += scale * inner
    return total


# ---------------------------------------------------------------------------
# degeneracy maps and the new space
# ---------------------------------------------------------------------------


def degeneracy_map(a, phi_prime: HarmonicCochain, G: QuotientGraph) -> HarmonicCochain:
    """Pull a level-n' cochain up to level n through the matrix diag(a, 1).

    Requires n' | n and a | (n / n'); the image is again harmonic.
    """
    F = G.F
    ac = a.c if isinstance(a, FqPoly) else pnormalize(a)
    nprime = phi_prime.graph.ctx.n
    quo, rem = pdivmod(F, G.ctx.n, nprime)
    if rem or pdeg(nprime) == pdeg(G.ctx.n):
        raise CochainError("level of the source must properly divide the target level")
    quo2, rem2 = pdivmod(F, quo, ac)
    if rem2:
        raise CochainError("twisting polynomial must divide the level quotient")
    g = (ac, (), (), (1,))
    values = {}
    for e in G.finite_edges():
        v_from, v_to = e.rep_edge
        w_from = apply_matrix_vertex(F, g, v_from)
        w_to = apply_matrix_vertex(F, g, v_to)
        values[e.idx] = phi_prime.value_at_tree_edge(w_from, w_to)
    out = HarmonicCochain(G, values)
    if not out.is_harmonic():
        raise CochainError("degeneracy image fails harmonicity")
    return out


def new_space_basis(G: QuotientGraph, old_images):
    """Saturated basis of the orthogonal complement of the old images."""
    basis = cuspidal_basis(G)
    if not old_images:
        return basis
    edge_order = [e.idx for e in G.finite_edges()]
    rows = []
    for old in old_images:
        rows.append([old.values.get(e, 0) and old.values.get(e, 0) for e in edge_order])
    # orthogonality w.r.t. the weighted pairing: scale columns by 1/|Gamma_e|
    weights = {e.idx: e.stab_order for e in G.finite_edges()}
    lam = 1
    for e in edge_order:
        lam = lam * weights[e] // gcd(lam, weights[e])
    constraint = []
    for old in old_images:
        constraint.append(
            [old.values.get(e, 0) * (lam // weights[e]) for e in edge_order]
        )
    coords = integer_kernel(constraint)
    out = []
    span_rows = [[phi.values.get(e, 0) for e in edge_order] for phi in basis]
    for vec in coords:
        # vec is in edge coordinates; keep those inside the cuspidal space
        x = frac_solve([[span_rows[j][i] for j in range(len(basis))] for i in range(len(edge_order))], vec)
        if x is None:
            continue
        out.append(HarmonicCochain(G, {edge_order[i]: v for i, v in enumerate(vec) if v}))
    return out


# ---------------------------------------------------------------------------
# the eigencochain attached to a curve
# ---------------------------------------------------------------------------


def small_good_primes(F, n, count):
    """The first monic irreducibles coprime to n, by degree then order."""
    out = []
    d = 1
    while len(out) < count and d <= 6:
        for P in monic_irreducibles(F.q, d):
            if pmod(F, n, P):
                out.append(FqPoly(F, P))
                if len(out) == count:
                    break
        d += 1
    return out


def newform_for_curve(G: QuotientGraph, E, primes_to_test=3):
    """The normalized eigencochain of the curve, its Fourier table, and the
    unit character convention validated by the eigenvalue identities.

    Returns (phi, table, convention, checks) where checks lists the tested
    primes with their eigenvalues.
    """
    from .curve import lambda_p

    F = G.F
    basis = cuspidal_basis(G)
    if not basis:
        raise CochainError("no cuspidal cochains at this level; wrong conductor?")
    primes = small_good_primes(F, G.ctx.n, primes_to_test)
    edge_order = [e.idx for e in G.finite_edges()]
    stacked = []
    lam = {}
    mats = {}
    for P in primes:
        lamP = lambda_p(E, P)
        lam[P.c] = lamP
        M = hecke_matrix(P, basis)
        mats[P.c] = M
        g = len(basis)
        for i in range(g):
            row = [M[i][j] - (lamP if i == j else 0) for j in range(g)]
            stacked.append(row)
    kern = integer_kernel(stacked)
    if len(kern) != 1:
        raise CochainError(
            f"joint eigenspace has rank {len(kern)}; the level is not the "
            f"finite conductor of this curve"
        )
    coeffs = kern[0]
    phi = HarmonicCochain(G, {})
    for c, b in zip(coeffs, basis):
        if c:
            phi = phi + b.scaled(c)
    if phi.content() != 1:
        raise CochainError("eigencochain is not primitive")
    chosen = None
    for convention in (NU_STANDARD, NU_LITERAL):
        c1 = fourier_coefficient(phi, FqPoly(F, (1,)), convention)
        if abs(c1) != 1:
            continue
        cand = phi if c1 == 1 else -phi
        ok = True
        for P in primes:
            cP = fourier_coefficient(cand, P, convention)
            if cP * (G.q ** P.degree) != lam[P.c]:
                ok = False
                break
        if ok:
            chosen = (cand, convention)
            break
    if chosen is None:
        raise CochainError("no unit character convention satisfies the eigenvalue identities")
    phi, convention = chosen
    table = FourierTable(phi, max(p.degree for p in primes), convention)
    checks = [(P, lam[P.c]) for P in primes]
    return phi, table, convention, checks
