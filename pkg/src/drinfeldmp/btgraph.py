"""The quotient of the Bruhat-Tits tree by a Hecke congruence group.

Vertices of the tree are classes of matrices [[pi^j, y], [0, 1]] with y a
finite pi-tail taken modulo pi^j; the positive edge with the same name runs
from (j, y) to (j-1, y mod pi^{j-1}) and points at the end at infinity. The
group of unit-determinant polynomial matrices with lower left entry
divisible by n acts on the left. This module builds the finite part of the
quotient, its half-line ends, stabilizer orders, edge orbit weights, a
spanning tree with identification matrices, and the pairing between ends
and cusp orbits on the projective line.

Equivalence testing reduces gamma . v1 = v2 to valuation conditions on the
rows of gamma that bound every entry, so the witness searches below
enumerate a finite box and a miss proves inequivalence. Two accelerations
keep the boxes small: a descent to a depth-minimal form (pull a vertex up
through the best approximation of its tail by a fraction with denominator
divisible by n), and, on the ray toward a cusp s, conjugation by a fixed
unimodular matrix sending infinity to s, which forces witnesses to be
upper triangular and reduces stabilizers to one linear congruence.
"""

from __future__ import annotations

from .ff import (
    FqPoly,
    P1Point,
    field,
    format_poly,
    mat_det,
    mat_mul,
    matrix_apply_p1,
    padd,
    pdeg,
    pdivmod,
    penum_monic,
    pexgcd,
    pgcd,
    pmod,
    pmul,
    pneg,
    pnormalize,
    pscale,
    psub,
)
from .laurent import INF_PREC, Laurent


class GraphBuildError(RuntimeError):
    pass


IDENTITY = ((1,), (), (), (1,))


# ---------------------------------------------------------------------------
# vertices: (j, tail) with tail an exact Laurent reduced below pi^j
# ---------------------------------------------------------------------------


def vertex(j, y: Laurent):
    return (j, y.truncate_exact(j))


def vkey(v):
    j, y = v
    return (j, tuple(sorted(y.digit_dict().items())))


def vertex_parent(v):
    j, y = v
    return vertex(j - 1, y)


def vertex_children(F, v):
    j, y = v
    out = []
    for a in range(F.q):
        child = y + Laurent.make(F, j, [a], INF_PREC) if a else y
        out.append(vertex(j + 1, child))
    return out


def vertex_neighbors(F, v):
    return [vertex_parent(v)] + vertex_children(F, v)


def poly_to_laurent(F, c):
    return Laurent.from_poly(F, c)


def apply_matrix_vertex(F, mat, v):
    """Image of a vertex under a unit-determinant polynomial matrix."""
    a, b, c, d = mat
    j, y = v
    pij = Laurent.pi_power(F, j)
    al, bl, cl, dl = (poly_to_laurent(F, x) for x in (a, b, c, d))
    A = al * pij
    B = al * y + bl
    C = cl * pij
    D = cl * y + dl
    det = A * D - B * C
    vdet = det.val
    vC = C.val if not C.is_zero() else None
    vD = D.val if not D.is_zero() else None
    if vD is not None and (vC is None or vD <= vC):
        jj = vdet - 2 * vD
        yy = B.div(D, jj) if not B.is_zero() else Laurent.zero(F)
    else:
        jj = vdet - 2 * vC
        yy = A.div(C, jj) if not A.is_zero() else Laurent.zero(F)
    return vertex(jj, yy)


def tail_poly_part(y: Laurent):
    """Digits at nonpositive pi-exponents, as a polynomial in T."""
    dd = y.digit_dict()
    ks = [-i for i in dd if i <= 0]
    if not ks:
        return ()
    out = [0] * (max(ks) + 1)
    for i, c in dd.items():
        if i <= 0:
            out[-i] = c
    return pnormalize(out)


# ---------------------------------------------------------------------------
# complete bounded search for witnesses gamma . v1 = v2
# ---------------------------------------------------------------------------


def _digits_nonzero_in(y: Laurent, lo, hi):
    return any(lo <= i < hi and c for i, c in y.digit_dict().items())


def _forced_poly_below(F, w: Laurent, thresh):
    """The polynomials d with v(w + d) >= thresh: (forced part, free degree).

    None when impossible; free degree -1 means the forced part is the only
    solution, otherwise any polynomial of at most that degree may be added.
    """
    if _digits_nonzero_in(w, 1, thresh):
        return None
    forced = {}
    cut = min(0, thresh - 1)
    for i, c in w.digit_dict().items():
        if i <= cut and c:
            forced[-i] = F.neg(c)
    if forced:
        out = [0] * (max(forced) + 1)
        for k, c in forced.items():
            out[k] = c
        forced_poly = pnormalize(out)
    else:
        forced_poly = ()
    return forced_poly, (-thresh if thresh <= 0 else -1)


def _polys_up_to(F, d):
    if d < 0:
        return [()]
    q = F.q
    out = []
    for idx in range(q ** (d + 1)):
        coeffs = []
        m = idx
        for _ in range(d + 1):
            coeffs.append(m % q)
            m //= q
        out.append(pnormalize(coeffs))
    return out


def mat_scalar_normalize(F, mat):
    """Scale so the first nonzero of the bottom row, else the top row, is monic."""
    a, b, c, d = mat
    for entry in (c, d, a, b):
        if entry:
            u = F.inv(entry[-1])
            if u == 1:
                return mat
            return (pscale(F, a, u), pscale(F, b, u), pscale(F, c, u), pscale(F, d, u))
    raise ValueError("zero matrix")


class GroupContext:
    """The pair (q, level polynomial n), with derived constants."""

    def __init__(self, q, n):
        self.F = field(q)
        self.q = q
        self.n = n.c if isinstance(n, FqPoly) else pnormalize(n)
        if pdeg(self.n) < 1 or self.n[-1] != 1:
            raise ValueError("level must be monic and non constant")
        self.deg_n = pdeg(self.n)

    def level_poly(self):
        return FqPoly(self.F, self.n)

    def c_candidates(self, max_deg, include_zero=True):
        out = [()] if include_zero else []
        if max_deg >= self.deg_n:
            for h in _polys_up_to(self.F, max_deg - self.deg_n):
                if h:
                    out.append(pmul(self.F, self.n, h))
        return out


def _solutions(ctx: GroupContext, v1, v2, collect_all):
    F = ctx.F
    j1, y1 = v1
    j2, y2 = v2
    if (j1 - j2) % 2 != 0:
        return []
    m = (j1 - j2) // 2
    J = (j1 + j2) // 2
    out = []
    verified = 0
    for c in ctx.c_candidates(J):
        cl = poly_to_laurent(F, c)
        w_d = cl * y1 if c else Laurent.zero(F)
        sol_d = _forced_poly_below(F, w_d, m)
        if sol_d is None:
            continue
        d_forced, d_free = sol_d
        w_a = -(y2 * cl) if c else Laurent.zero(F)
        sol_a = _forced_poly_below(F, w_a, -m)
        if sol_a is None:
            continue
        a_forced, a_free = sol_a
        for da in _polys_up_to(F, d_free):
            d = padd(F, d_forced, da)
            cy1d = w_d + poly_to_laurent(F, d)
            y2cy1d = y2 * cy1d
            for aa in _polys_up_to(F, a_free):
                a = padd(F, a_forced, aa)
                if not a:
                    continue
                w_b = poly_to_laurent(F, a) * y1 - y2cy1d
                sol_b = _forced_poly_below(F, w_b, J)
                if sol_b is None:
                    continue
                b_forced, b_free = sol_b
                for bb in _polys_up_to(F, b_free):
                    b = padd(F, b_forced, bb)
                    det = psub(F, pmul(F, a, d), pmul(F, b, c))
                    if pdeg(det) != 0:
                        continue
                    gamma = (a, b, c, d)
                    if verified < 64:
                        verified += 1
                        if apply_matrix_vertex(F, gamma, v1) != v2:
                            raise AssertionError("witness conditions out of sync")
                    if not collect_all:
                        return [gamma]
                    out.append(mat_scalar_normalize(F, gamma))
    if collect_all:
        return list({tuple(g): g for g in out}.values())
    return out


def vertex_equiv(ctx: GroupContext, v1, v2):
    """A group element with gamma . v1 = v2, or None; the search is complete."""
    got = _solutions(ctx, v1, v2, collect_all=False)
    return got[0] if got else None


def stabilizer_elements(ctx: GroupContext, v):
    """All stabilizer elements of the vertex, one per scalar class."""
    return _solutions(ctx, v, v, collect_all=True)


def stabilizer(ctx_or_graph, x):
    """Order and element list of the projective stabilizer of a vertex."""
    ctx = ctx_or_graph.ctx if isinstance(ctx_or_graph, QuotientGraph) else ctx_or_graph
    els = stabilizer_elements(ctx, x)
    return len(els), els


# ---------------------------------------------------------------------------
# descent to a depth-minimal form
# ---------------------------------------------------------------------------


def _parabolic_reduce(ctx, v):
    """Kill nonpositive digits of the tail and make its leading digit 1."""
    F = ctx.F
    j, y = v
    gamma = IDENTITY
    pp = tail_poly_part(y)
    if pp:
        b = pneg(F, pp)
        gamma = ((1,), b, (), (1,))
        y = (y + poly_to_laurent(F, b)).truncate_exact(j)
    dd = y.digit_dict()
    if dd:
        lead = dd[min(dd)]
        if lead != 1:
            u = F.inv(lead)
            gamma = mat_mul(F, ((u,), (), (), (1,)), gamma)
            y = Laurent.from_digit_dict(F, {i: F.mul(u, c) for i, c in dd.items()})
    return vertex(j, y), gamma


def canonical_descent(ctx: GroupContext, v):
    """(depth-minimal vertex, gamma) with gamma . v = result.

    The depth of gamma . v depends only on the bottom row of gamma, and a
    strict decrease forces the unique d = -polypart(c y); scanning all
    candidate c proves minimality when no move is found.
    """
    F = ctx.F
    cur, gamma = _parabolic_reduce(ctx, v)
    while True:
        j, y = cur
        if j <= 0:
            break
        best = None
        for c in ctx.c_candidates(j - 1, include_zero=False):
            w = poly_to_laurent(F, c) * y
            d = pneg(F, tail_poly_part(w))
            rem = w + poly_to_laurent(F, d)
            vstar = rem.val if not rem.is_zero() else INF_PREC
            drop = min(j - pdeg(c), vstar)
            if drop < 1:
                continue
            g, _, _ = pexgcd(F, c, d)
            if pdeg(g) != 0:
                continue
            key = (j - 2 * drop, pdeg(c), tuple(reversed(c)), tuple(reversed(d)))
            if best is None or key < best[0]:
                best = (key, c, d)
        if best is None:
            break
        _, c, d = best
        _, u, vv = pexgcd(F, c, d)
        # u*c + vv*d = 1, so [[vv, -u], [c, d]] has determinant 1
        step = (vv, pneg(F, u), c, d)
        cur = apply_matrix_vertex(F, step, cur)
        gamma = mat_mul(F, step, gamma)
        cur, g2 = _parabolic_reduce(ctx, cur)
        if g2 != IDENTITY:
            gamma = mat_mul(F, g2, gamma)
    return cur, gamma


def _mat_inv_unit(F, m):
    a, b, c, d = m
    det = mat_det(F, m)
    assert pdeg(det) == 0
    u = F.inv(det[0])
    return (pscale(F, d, u), pscale(F, pneg(F, b), u), pscale(F, pneg(F, c), u), pscale(F, a, u))


# ---------------------------------------------------------------------------
# cusps
# ---------------------------------------------------------------------------


def _complete_to_unimodular(F, s: P1Point):
    """A determinant-1 polynomial matrix whose first column is (num, den)."""
    if s.is_infinity():
        return IDENTITY
    a, c = s.num, s.den
    if not a:
        return ((), pneg(F, (1,)), (1,), ())
    g, u, v = pexgcd(F, a, c)
    assert g == (1,), "projective point is not in lowest terms"
    # u*a + v*c = 1 and det [[a, -v], [c, u]] = a*u + v*c = 1
    return (a, pneg(F, v), c, u)


def _solve_linear_congruence(F, A, B, n):
    """(b0, modulus) with {b : A b = B mod n} = b0 + modulus*A, or None."""
    A = pmod(F, A, n)
    B = pmod(F, B, n)
    if not A:
        return ((), (1,)) if not B else None
    g, u, _ = pexgcd(F, A, n)
    quo, rem = pdivmod(F, B, g)
    if rem:
        return None
    modulus = pdivmod(F, n, g)[0]
    b0 = pmod(F, pmul(F, quo, u), modulus) if pdeg(modulus) > 0 else ()
    return b0, modulus


def cusp_equiv(ctx: GroupContext, s1: P1Point, s2: P1Point):
    """Witness matrix with gamma . s1 = s2, or None.

    gamma = X2 [[u, w], [0, z]] X1^{-1} parameterizes the maps sending s1 to
    s2; membership in the group is one linear congruence in w.
    """
    F = ctx.F
    n = ctx.n
    a1, b1, c1, d1 = _complete_to_unimodular(F, s1)
    a2, b2, c2, d2 = _complete_to_unimodular(F, s2)
    cc = pmul(F, c1, c2)
    for u in F.units:
        for z in F.units:
            lhs = psub(F, pscale(F, pmul(F, c2, d1), u), pscale(F, pmul(F, c1, d2), z))
            sol = _solve_linear_congruence(F, cc, lhs, n)
            if sol is None:
                continue
            w = sol[0]
            M = ((u,), w, (), (z,))
            X1inv = (d1, pneg(F, b1), pneg(F, c1), a1)
            gamma = mat_mul(F, mat_mul(F, (a2, b2, c2, d2), M), X1inv)
            if pmod(F, gamma[2], n):
                continue
            if pdeg(mat_det(F, gamma)) != 0:
                continue
            if matrix_apply_p1(gamma, s1) == s2:
                return gamma
    return None


def cusps(ctx: GroupContext):
    """Canonical representatives of the cusp orbits, infinity first."""
    F = ctx.F
    candidates = [P1Point.infinity(F), P1Point(F, (), (1,))]
    for dc in range(1, ctx.deg_n + 1):
        for den in penum_monic(F, dc):
            for num in _polys_up_to(F, dc - 1):
                if num and pdeg(pgcd(F, num, den)) == 0:
                    candidates.append(P1Point(F, num, den))
    candidates.sort(key=lambda s: s.sort_key())
    reps = []
    for s in candidates:
        if not any(cusp_equiv(ctx, s, r) is not None for r in reps):
            reps.append(s)
    return reps


def cusp_tail(F, s: P1Point, j):
    """The depth-j vertex on the ray toward the finite cusp s."""
    from .laurent import from_rational

    x = from_rational(s.as_rational(), j + 1)
    return vertex(j, x.truncate(j) if not x.is_exact() else x)


# ---------------------------------------------------------------------------
# the quotient graph
# ---------------------------------------------------------------------------


class VertexOrbit:
    __slots__ = (
        "idx",
        "lift",
        "canon",
        "desc",
        "ray",
        "stab_order",
        "level",
        "star",
        "neighbor_map",
        "end_id",
    )

    def __init__(self, idx, lift, canon, desc, level):
        self.idx = idx
        self.lift = lift
        self.canon = canon
        self.desc = desc  # desc . lift = canon
        self.ray = None  # (cusp index, k) when lift = X_s . (-k, 0)
        self.stab_order = None
        self.level = level
        self.star = []  # (edge_id, direction, m)
        self.neighbor_map = {}  # vkey(lift neighbor) -> (edge_id, direction)
        self.end_id = None


class EdgeOrbit:
    __slots__ = (
        "idx",
        "origin",
        "terminus",
        "m_origin",
        "m_terminus",
        "stab_order",
        "in_tree",
        "finite",
        "gen_matrix",
        "rep_edge",
    )

    def __init__(self, idx, origin, terminus, m_origin, stab_order, in_tree, rep_edge):
        self.idx = idx
        self.origin = origin
        self.terminus = terminus
        self.m_origin = m_origin
        self.m_terminus = None
        self.stab_order = stab_order
        self.in_tree = in_tree
        self.finite = False
        self.gen_matrix = None
        self.rep_edge = rep_edge


class CuspData:
    __slots__ = ("s", "X", "Xinv", "cs", "ds")

    def __init__(self, F, s):
        self.s = s
        self.X = _complete_to_unimodular(F, s)
        self.Xinv = _mat_inv_unit(F, self.X)
        self.cs = self.X[2]
        self.ds = self.X[3]


class QuotientGraph:
    def __init__(self, ctx: GroupContext, depth):
        self.ctx = ctx
        self.F = ctx.F
        self.q = ctx.q
        self.depth = depth
        self.vertices = []
        self.edges = []
        self.ends = []
        self.cusp_list = []
        self.cusp_data = []
        self.generators = []
        self._canon_index = {}
        self._stab_memo = {}
        self._neq_memo = set()

    @property
    def genus(self):
        fv = sum(1 for v in self.vertices if v.end_id is None)
        fe = sum(1 for e in self.edges if e.finite)
        return fe - fv + 1

    def finite_edges(self):
        return [e for e in self.edges if e.finite]

    def stab_elements(self, orbit_idx):
        got = self._stab_memo.get(orbit_idx)
        if got is None:
            got = stabilizer_elements(self.ctx, self.vertices[orbit_idx].lift)
            self._stab_memo[orbit_idx] = got
        return got

    # ray fast path -------------------------------------------------------
    def ray_form(self, v):
        """(cusp index, k) when v = X_s . (-k, 0) with k past the level degree."""
        for i, cd in enumerate(self.cusp_data):
            w = apply_matrix_vertex(self.F, cd.Xinv, v)
            if w[0] <= -(self.ctx.deg_n + 1) and w[1].is_zero():
                return (i, -w[0])
        return None

    def _ray_stab_order(self, ci, k):
        """Projective stabilizer order of X_s . (-k, 0); exact for k > deg n.

        In conjugated coordinates the stabilizer is upper triangular
        [[a, b], [0, 1]] with one congruence cs^2 b = cs ds (a - 1) mod n.
        """
        F = self.F
        n = self.ctx.n
        cd = self.cusp_data[ci]
        if not cd.cs:
            return (self.q - 1) * self.q ** (k + 1)
        cs2 = pmul(F, cd.cs, cd.cs)
        total = 0
        for a in F.units:
            rhs = pscale(F, pmul(F, cd.cs, cd.ds), F.sub(a, 1))
            sol = _solve_linear_congruence(F, cs2, rhs, n)
            if sol is None:
                continue
            dm = pdeg(sol[1]) if sol[1] != (1,) else 0
            assert k + 1 - dm > 0
            total += self.q ** (k + 1 - dm)
        return total

    def _ray_star(self, vorb):
        """Stars on a cusp ray: the deeper neighbor alone, the rest together."""
        F = self.F
        ci, k = vorb.ray
        cd = self.cusp_data[ci]
        order = self._ray_stab_order(ci, k)
        deeper = apply_matrix_vertex(F, cd.X, vertex(-(k + 1), Laurent.zero(F)))
        nbrs = vertex_neighbors(F, vorb.lift)
        nkeys = [vkey(w) for w in nbrs]
        dkey = vkey(deeper)
        if dkey not in nkeys:
            raise GraphBuildError("conjugated ray continuation is not a neighbor")
        rest = [kk for kk in nkeys if kk != dkey]
        classes = [
            {"members": [dkey], "rep": deeper},
            {"members": rest, "rep": nbrs[nkeys.index(rest[0])]},
        ]
        return order, classes

    def _ray_ray_equiv(self, v, vi_ray, orb):
        """Witness between two ray vertices, or None; complete for this case.

        Any witness is X_{s'} [[a, b], [0, d]] X_s^{-1} with constant a, d
        and deg b <= k, subject to one linear congruence mod n.
        """
        F = self.F
        n = self.ctx.n
        ci, k = vi_ray
        cj, k2 = orb.ray
        if k != k2:
            return None
        cd1, cd2 = self.cusp_data[ci], self.cusp_data[cj]
        for a in F.units:
            for d in F.units:
                # gamma_21 = a c' ds - d d' cs - cs c' b  with X = X_s, X' = X_s'
                A = pmul(F, cd1.cs, cd2.cs)
                B = psub(
                    F,
                    pscale(F, pmul(F, cd2.cs, cd1.ds), a),
                    pscale(F, pmul(F, cd1.cs, cd2.ds), d),
                )
                sol = _solve_linear_congruence(F, A, B, n)
                if sol is None:
                    continue
                b0, modulus = sol
                if pdeg(b0) > k:
                    continue
                M = ((a,), b0, (), (d,))
                gamma = mat_mul(F, mat_mul(F, cd2.X, M), cd1.Xinv)
                if pmod(F, gamma[2], n) or pdeg(mat_det(F, gamma)) != 0:
                    continue
                if apply_matrix_vertex(F, gamma, v) == orb.lift:
                    return gamma
        return None

    # canonicalization ------------------------------------------------------
    def _register_canon(self, key, idx, to_lift):
        self._canon_index[key] = (idx, to_lift)

    def try_canonicalize(self, v):
        """(orbit index, witness gamma with gamma . v = lift) or None."""
        ctx = self.ctx
        F = self.F
        canon, desc = canonical_descent(ctx, v)
        key = vkey(canon)
        hit = self._canon_index.get(key)
        if hit is not None:
            idx, to_lift = hit
            return idx, mat_mul(F, to_lift, desc)
        cj = canon[0]
        ray = self.ray_form(canon)
        for orb in self.vertices:
            # depth-minimal forms of one orbit share their depth
            if orb.canon[0] != cj:
                continue
            pair = (key, vkey(orb.canon))
            if pair in self._neq_memo:
                continue
            if ray is not None and orb.ray is not None:
                eps = self._ray_ray_equiv(canon, ray, orb)
                if eps is None:
                    self._neq_memo.add(pair)
                    continue
                self._register_canon(key, orb.idx, eps)
                return orb.idx, mat_mul(F, eps, desc)
            eps = vertex_equiv(ctx, canon, orb.canon)
            if eps is None:
                self._neq_memo.add(pair)
                continue
            to_lift = mat_mul(F, _mat_inv_unit(F, orb.desc), eps)
            self._register_canon(key, orb.idx, to_lift)
            return orb.idx, mat_mul(F, to_lift, desc)
        return None

    def canonicalize(self, v):
        got = self.try_canonicalize(v)
        if got is None:
            raise GraphBuildError("vertex falls outside the built graph; deepen")
        return got

    def oriented_class(self, v_from, v_to):
        """Quotient (edge id, direction) of the oriented tree edge v_from -> v_to."""
        idx, wit = self.canonicalize(v_from)
        w = apply_matrix_vertex(self.F, wit, v_to)
        entry = self.vertices[idx].neighbor_map.get(vkey(w))
        if entry is None:
            raise GraphBuildError("edge endpoint maps outside the processed star")
        return entry

    # serialization ---------------------------------------------------------
    def to_json(self):
        def vert_s(v):
            j, y = v
            return {"j": j, "tail": sorted(y.digit_dict().items())}

        return {
            "schema": 1,
            "q": self.q,
            "n": format_poly(self.ctx.n),
            "depth": self.depth,
            "genus": self.genus,
            "vertices": [
                {
                    "id": v.idx,
                    "lift": vert_s(v.lift),
                    "stab_order": v.stab_order,
                    "level": v.level,
                    "end": v.end_id,
                    "star": [list(x) for x in v.star],
                }
                for v in self.vertices
            ],
            "edges": [
                {
                    "id": e.idx,
                    "origin": e.origin,
                    "terminus": e.terminus,
                    "m_origin": e.m_origin,
                    "m_terminus": e.m_terminus,
                    "stab_order": e.stab_order,
                    "in_tree": e.in_tree,
                    "finite": e.finite,
                    "gen_matrix": None
                    if e.gen_matrix is None
                    else [format_poly(x) for x in e.gen_matrix],
                }
                for e in self.edges
            ],
            "ends": [{"chain": end["chain"], "cusp": str(end["cusp"])} for end in self.ends],
            "cusps": [str(s) for s in self.cusp_list],
            "generators": [
                {"matrix": [format_poly(x) for x in mat], "edge": eid}
                for mat, eid in self.generators
            ],
        }

    def to_dot(self):
        lines = ["graph quotient {"]
        for v in self.vertices:
            j, _ = v.lift
            shape = "circle" if v.end_id is None else "doublecircle"
            lines.append(f'  v{v.idx} [label="v{v.idx} (j={j})", shape={shape}];')
        for e in self.edges:
            style = "solid" if e.finite else "dashed"
            lines.append(
                f'  v{e.origin} -- v{e.terminus} '
                f'[style={style}, label="m=({e.m_origin},{e.m_terminus}) |Ge|={e.stab_order}"];'
            )
        lines.append("}")
        return "\n".join(lines)


def build_quotient_graph(q, n, depth=None):
    """Quotient graph at level n, growing depth until the ends are certified."""
    ctx = GroupContext(q, n)
    want = depth if depth is not None else 3 * ctx.deg_n + 4
    last_err = None
    while want <= 40:
        try:
            return _build_once(ctx, want)
        except GraphBuildError as err:
            last_err = err
            want += 3
    raise GraphBuildError(f"depth growth cap reached: {last_err}")


def _build_once(ctx: GroupContext, depth):
    F = ctx.F
    q = ctx.q
    G = QuotientGraph(ctx, depth)
    G.cusp_list = cusps(ctx)
    G.cusp_data = [CuspData(F, s) for s in G.cusp_list]
    root = vertex(0, Laurent.zero(F))
    canon0, desc0 = canonical_descent(ctx, root)
    v0 = VertexOrbit(0, root, canon0, desc0, 0)
    v0.ray = G.ray_form(root)
    G.vertices.append(v0)
    G._register_canon(vkey(canon0), 0, _mat_inv_unit(F, desc0))
    pending = {}
    queue = [0]
    qpos = 0
    while qpos < len(queue):
        vi = queue[qpos]
        qpos += 1
        vorb = G.vertices[vi]
        if vorb.level >= depth:
            continue
        if vorb.ray is not None:
            order, classes = G._ray_star(vorb)
        else:
            stab = G.stab_elements(vi)
            order = len(stab)
            nbrs = vertex_neighbors(F, vorb.lift)
            nkeys = [vkey(w) for w in nbrs]
            cls_of = {}
            classes = []
            for i, w in enumerate(nbrs):
                if nkeys[i] in cls_of:
                    continue
                orbit_keys = {nkeys[i]}
                for g in stab:
                    orbit_keys.add(vkey(apply_matrix_vertex(F, g, w)))
                members = [kk for kk in nkeys if kk in orbit_keys]
                ci = len(classes)
                classes.append({"members": members, "rep": w})
                for kk in members:
                    cls_of[kk] = ci
            if sum(len(c["members"]) for c in classes) != q + 1:
                raise GraphBuildError("star partition does not cover the star")
        vorb.stab_order = order
        for cls in classes:
            m = len(cls["members"])
            w = cls["rep"]
            linked = None
            for kk in cls["members"]:
                if (vi, kk) in pending:
                    linked = pending.pop((vi, kk))
                    break
            if linked is not None:
                e = G.edges[linked]
                e.m_terminus = m
                if order % m or e.stab_order != order // m:
                    raise GraphBuildError("edge stabilizer mismatch between sides")
                for kk in cls["members"]:
                    vorb.neighbor_map[kk] = (e.idx, -1)
                vorb.star.append((e.idx, -1, m))
                continue
            if order % m:
                raise GraphBuildError("orbit size does not divide stabilizer order")
            est = order // m
            got = G.try_canonicalize(w)
            if got is None:
                ui = len(G.vertices)
                canon_w, desc_w = canonical_descent(ctx, w)
                newv = VertexOrbit(ui, w, canon_w, desc_w, vorb.level + 1)
                newv.ray = G.ray_form(w)
                G.vertices.append(newv)
                G._register_canon(vkey(canon_w), ui, _mat_inv_unit(F, desc_w))
                queue.append(ui)
                eid = len(G.edges)
                G.edges.append(EdgeOrbit(eid, vi, ui, m, est, True, (vorb.lift, w)))
                pending[(ui, vkey(vorb.lift))] = eid
            else:
                known, wit = got
                eid = len(G.edges)
                G.edges.append(EdgeOrbit(eid, vi, known, m, est, False, (vorb.lift, w)))
                G.edges[eid].gen_matrix = _mat_inv_unit(F, wit)
                rv = apply_matrix_vertex(F, wit, vorb.lift)
                if known == vi and vkey(rv) in cls["members"]:
                    raise GraphBuildError("edge inversion detected")
                if G.vertices[known].neighbor_map.get(vkey(rv)) is not None:
                    raise GraphBuildError("reverse side of an edge already assigned")
                pending[(known, vkey(rv))] = eid
            for kk in cls["members"]:
                vorb.neighbor_map[kk] = (eid, +1)
            vorb.star.append((eid, +1, m))
    processed = {v.idx for v in G.vertices if v.star}
    for (ui, _k), _eid in pending.items():
        if ui in processed:
            raise GraphBuildError("dangling reverse edge on a processed vertex")
    _classify_ends(G, processed)
    _pair_cusps(G)
    _mark_finite_and_generators(G)
    return G


def _classify_ends(G: QuotientGraph, processed):
    q = G.q
    ray_like = set()
    for v in G.vertices:
        if v.idx in processed and len(v.star) == 2:
            if sorted(x[2] for x in v.star) == [1, q]:
                ray_like.add(v.idx)
    frontier = {v.idx for v in G.vertices if v.idx not in processed}
    nbrs = {v.idx: set() for v in G.vertices}
    for e in G.edges:
        nbrs[e.origin].add(e.terminus)
        nbrs[e.terminus].add(e.origin)
    for x in frontier:
        if not nbrs[x] & (ray_like | frontier):
            raise GraphBuildError("frontier vertex not attached to a ray; deepen")
    adj = {i: set() for i in ray_like}
    for e in G.edges:
        if e.origin in ray_like and e.terminus in ray_like and e.origin != e.terminus:
            adj[e.origin].add(e.terminus)
            adj[e.terminus].add(e.origin)
    seen = set()
    comps = []
    for i in sorted(ray_like):
        if i in seen:
            continue
        comp, stack = [], [i]
        seen.add(i)
        while stack:
            x = stack.pop()
            comp.append(x)
            for yv in adj[x]:
                if yv not in seen:
                    seen.add(yv)
                    stack.append(yv)
        comps.append(sorted(comp))
    W = G.ctx.deg_n + 2

    def touches_frontier(x):
        return bool(nbrs[x] & frontier) or x in frontier

    chains = []
    for comp in comps:
        if len(comp) == 1:
            chain = comp
        else:
            endpoints = [x for x in comp if len(adj[x]) <= 1]
            if len(endpoints) != 2:
                raise GraphBuildError("ray component is not a path")
            chain = [endpoints[0]]
            prev = None
            while True:
                cur = chain[-1]
                nxt = [x for x in adj[cur] if x != prev]
                if not nxt:
                    break
                prev = cur
                chain.append(nxt[0])
        t0, t1 = touches_frontier(chain[0]), touches_frontier(chain[-1])
        if not (t0 or t1):
            raise GraphBuildError("ray component trapped inside the graph")
        if t0 and t1 and len(chain) >= 2:
            split_at = min(range(len(chain)), key=lambda k: (G.vertices[chain[k]].level, k))
            left = list(reversed(chain[:split_at]))
            right = chain[split_at + 1 :]
            if len(left) < W or len(right) < W:
                raise GraphBuildError("split ray too short; deepen")
            chains.extend([left, right])
        else:
            if t0:
                chain = list(reversed(chain))
            if len(chain) < W:
                raise GraphBuildError("ray too short to certify an end; deepen")
            chains.append(chain)
    for chain in chains:
        eid = len(G.ends)
        G.ends.append({"chain": chain, "cusp": None})
        for x in chain:
            G.vertices[x].end_id = eid
    # frontier vertices continue a ray; attach them to its end
    changed = True
    while changed:
        changed = False
        for x in sorted(frontier):
            v = G.vertices[x]
            if v.end_id is not None:
                continue
            hits = {G.vertices[y].end_id for y in nbrs[x] if G.vertices[y].end_id is not None}
            if len(hits) == 1:
                v.end_id = hits.pop()
                changed = True
            elif len(hits) > 1:
                raise GraphBuildError("frontier vertex touches two ends; deepen")
    for x in frontier:
        if G.vertices[x].end_id is None:
            raise GraphBuildError("frontier vertex not assignable to an end; deepen")


def _pair_cusps(G: QuotientGraph):
    F = G.F
    if len(G.cusp_list) != len(G.ends):
        raise GraphBuildError(f"{len(G.ends)} ends vs {len(G.cusp_list)} cusps; deepen")
    chain_of = {}
    for i, end in enumerate(G.ends):
        for x in end["chain"]:
            chain_of[x] = i
    used = set()
    for s in G.cusp_list:
        if s.is_infinity():
            probes = [vertex(-k, Laurent.zero(F)) for k in range(1, G.depth)]
        else:
            probes = [cusp_tail(F, s, j) for j in range(1, G.depth)]
        hits = []
        for v in probes:
            got = G.try_canonicalize(v)
            if got is not None and got[0] in chain_of:
                hits.append(chain_of[got[0]])
        matched = None
        for i in range(len(hits) - 2):
            if hits[i] == hits[i + 1] == hits[i + 2]:
                matched = hits[i]
                break
        if matched is None or matched in used:
            raise GraphBuildError(f"cusp {s} does not match a distinct end")
        used.add(matched)
        G.ends[matched]["cusp"] = s
    if len(used) != len(G.ends):
        raise GraphBuildError("end/cusp pairing is not a bijection")


def _mark_finite_and_generators(G: QuotientGraph):
    for e in G.edges:
        vo, vt = G.vertices[e.origin], G.vertices[e.terminus]
        e.finite = vo.end_id is None and vt.end_id is None and e.m_terminus is not None
    for e in G.edges:
        if e.finite and not e.in_tree:
            G.generators.append((e.gen_matrix, e.idx))
    if G.genus != len(G.generators):
        raise GraphBuildError(
            f"cycle rank {G.genus} vs {len(G.generators)} identification matrices"
        )
