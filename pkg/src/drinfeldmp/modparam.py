"""The modular parametrization pipeline.

Builds the cycle generators of the level group modulo its commutators and
torsion, expresses the eigencochain of a curve as an integer word in them,
evaluates theta quotients at every cusp, and assembles the full report:
lattice generator, degree, cusp values with certified torsion orders.
"""

from __future__ import annotations

import time
from fractions import Fraction

from .btgraph import (
    GraphBuildError,
    QuotientGraph,
    apply_matrix_vertex,
    build_quotient_graph,
    vertex,
)
from .cochain import (
    CochainError,
    FourierTable,
    HarmonicCochain,
    cuspidal_basis,
    fourier_coefficient,
    hecke_matrix,
    newform_for_curve,
    petersson,
    small_good_primes,
)
from .curve import (
    CurveError,
    WeierstrassCurve,
    conductor,
    invariants,
    j_of_tate_parameter,
    tate_parameter_from_j,
    torsion_bound,
)
from .ff import FqPoly, P1Point, field, format_poly, mat_det, pdeg
from .intlinalg import frac_solve
from .laurent import Laurent, from_rational


class ModParamError(RuntimeError):
    pass


class GroupWord:
    """An element of the free part of the abelianized level group.

    Stored as an exponent vector over the cycle generator basis, each
    generator carried with its explicit matrix.
    """

    __slots__ = ("exponents", "generators")

    def __init__(self, exponents, generators):
        self.exponents = list(exponents)
        self.generators = generators

    def __repr__(self):
        return f"GroupWord({self.exponents})"

    def to_json(self):
        return {
            "exponents": self.exponents,
            "generators": [[format_poly(x) for x in g] for g in self.generators],
        }


def tree_geodesic(F, v, w):
    """Consecutive vertex pairs along the geodesic from v to w in the tree."""
    j1, y1 = v
    j2, y2 = w
    diff = y1 - y2
    agree = diff.val if not diff.is_zero() else 10**9
    jstar = min(j1, j2, agree)
    up1 = [v]
    cur = v
    while cur[0] > jstar:
        cur = (cur[0] - 1, cur[1].truncate_exact(cur[0] - 1))
        up1.append(cur)
    up2 = [w]
    cur = w
    while cur[0] > jstar:
        cur = (cur[0] - 1, cur[1].truncate_exact(cur[0] - 1))
        up2.append(cur)
    if up1[-1] != up2[-1]:
        raise ModParamError("geodesic endpoints do not meet")
    full = up1 + list(reversed(up2))[1:]
    return list(zip(full[:-1], full[1:]))


def phi_alpha_direct(G: QuotientGraph, alpha) -> HarmonicCochain:
    """The cochain of a group element through the signed geodesic count.

    Counts, with stabilizer weights, how the geodesic from the base vertex
    to its image crosses each edge orbit; this is the direct defining sum
    and serves as the independent oracle for the cycle construction.
    """
    F = G.F
    x0 = G.vertices[0].lift
    ax0 = apply_matrix_vertex(F, alpha, x0)
    tally = {}
    for v, w in tree_geodesic(F, x0, ax0):
        eid, direction = G.oriented_class(v, w)
        tally[eid] = tally.get(eid, 0) + direction
    values = {}
    for eid, t in tally.items():
        if not t:
            continue
        e = G.edges[eid]
        if not e.finite:
            raise ModParamError("geodesic tally does not vanish on an end edge")
        values[eid] = e.stab_order * t
    out = HarmonicCochain(G, values)
    if not out.is_harmonic():
        raise ModParamError("direct cochain fails harmonicity")
    return out


def cycle_cochain(G: QuotientGraph, edge_id) -> HarmonicCochain:
    """The primitive harmonic cochain supported on the cycle through a
    non-tree edge, oriented positively along that edge.

    An independent construction used to cross-check phi_alpha_direct.
    """
    e0 = G.edges[edge_id]
    if e0.in_tree or not e0.finite:
        raise ModParamError("cycle construction needs a finite non-tree edge")
    parent = {}
    order = {0: 0}
    queue = [0]
    tree_adj = {}
    for e in G.edges:
        if e.in_tree:
            tree_adj.setdefault(e.origin, []).append((e.terminus, e.idx))
            tree_adj.setdefault(e.terminus, []).append((e.origin, e.idx))
    pos = 0
    while pos < len(queue):
        x = queue[pos]
        pos += 1
        for y, eid in tree_adj.get(x, []):
            if y not in order:
                order[y] = len(order)
                parent[y] = (x, eid)
                queue.append(y)
    path_o = _tree_path_to_root(parent, e0.origin)
    path_t = _tree_path_to_root(parent, e0.terminus)
    common = set(x for x, _ in path_o) & set(x for x, _ in path_t)
    cycle_edges = [(edge_id, +1)]
    for x, eid in path_t:
        if x in common:
            break
        cycle_edges.append((eid, _tree_dir(G, eid, toward_root=True)))
    stop = next(x for x, _ in path_t if x in common)
    back = []
    for x, eid in path_o:
        if x == stop:
            break
        back.append((eid, -_tree_dir(G, eid, toward_root=True)))
    cycle_edges.extend(reversed(back))
    # harmonicity around the cycle pins the ratios; solve the kernel on it
    cols = {eid: i for i, (eid, _) in enumerate(cycle_edges)}
    rows = []
    verts = set()
    for eid, _ in cycle_edges:
        verts.add(G.edges[eid].origin)
        verts.add(G.edges[eid].terminus)
    for vx in sorted(verts):
        row = [0] * len(cols)
        for eid, direction, m in G.vertices[vx].star:
            if eid in cols:
                row[cols[eid]] += direction * m
        rows.append(row)
    from .intlinalg import integer_kernel

    kern = integer_kernel(rows)
    if len(kern) != 1:
        raise ModParamError("cycle support does not carry a unique cochain")
    vec = kern[0]
    if vec[0] < 0:
        vec = [-x for x in vec]
    out = HarmonicCochain(G, {eid: vec[i] for (eid, _), i in zip(cycle_edges, range(len(vec))) if vec[i]})
    if not out.is_harmonic():
        raise ModParamError("cycle cochain fails harmonicity")
    return out


def _tree_path_to_root(parent, x):
    out = []
    while x in parent:
        px, eid = parent[x]
        out.append((x, eid))
        x = px
    out.append((x, None))
    return [(a, b) for a, b in out if b is not None] + [(x, None)]


def _tree_dir(G, eid, toward_root):
    # direction of the stored forward side relative to walking toward the root
    return -1 if toward_root else 1


def generator_basis(G: QuotientGraph):
    """The cycle generators with their direct cochains; length is the genus."""
    out = []
    for mat, eid in G.generators:
        det = mat_det(G.F, mat)
        if pdeg(det) != 0:
            raise ModParamError("generator matrix determinant is not a unit")
        out.append((mat, phi_alpha_direct(G, mat)))
    if len(out) != G.genus:
        raise ModParamError("generator count does not match the genus")
    return out


def j_inverse(phi: HarmonicCochain, basis) -> GroupWord:
    """Integer exponents with phi = sum n_i . j(alpha_i); exact solve."""
    G = phi.graph
    edge_order = [e.idx for e in G.finite_edges()]
    A = [[cochain.values.get(e, 0) for (_, cochain) in basis] for e in edge_order]
    b = [phi.values.get(e, 0) for e in edge_order]
    x = frac_solve(A, b)
    if x is None:
        raise ModParamError("cochain is not in the span of the generator cochains")
    exps = []
    for xi in x:
        if xi.denominator != 1:
            raise ModParamError("cochain is not an integer word in the generators")
        exps.append(int(xi))
    # verify exactly
    acc = HarmonicCochain(G, {})
    for n_i, (_, cochain) in zip(exps, basis):
        if n_i:
            acc = acc + cochain.scaled(n_i)
    if acc != phi:
        raise ModParamError("generator word does not reproduce the cochain")
    return GroupWord(exps, [mat for mat, _ in basis])


def degree_of_phi(phi: HarmonicCochain, mu: int) -> int:
    """The degree <phi, phi> / mu; the division must be exact."""
    pp = petersson(phi, phi)
    deg = pp / mu
    if deg.denominator != 1:
        raise ModParamError(f"<phi,phi> = {pp} is not divisible by mu = {mu}")
    return int(deg)


# ---------------------------------------------------------------------------
# the full pipeline
# ---------------------------------------------------------------------------


class ParametrizationReport:
    def __init__(self):
        self.data = {}

    def __getitem__(self, k):
        return self.data[k]

    def to_json(self):
        return self.data


def compute_parametrization(E: WeierstrassCurve, n, config=None):
    """End-to-end: conductor checks, newform, lattice, degree, cusp orders.

    config keys (all optional): depth, eps_exp, torsion_depth, precision.
    """
    from . import theta

    cfg = dict(config or {})
    F = E.field
    q = F.q
    t_start = time.monotonic()
    timings = {}
    nc = n.c if isinstance(n, FqPoly) else n
    n = FqPoly(F, nc)

    inv = invariants(E)
    if E.is_isotrivial():
        raise ModParamError("curve is isotrivial; no parametrization here")
    t0 = time.monotonic()
    n_computed, reductions = conductor(E)
    timings["conductor"] = time.monotonic() - t0
    inf_red = [r for r in reductions if r.place.name == "inf"][0]
    if inf_red.kind != "split_mult":
        raise ModParamError(
            f"reduction at infinity is {inf_red.kind}; split multiplicative needed"
        )
    if n_computed.c != n.c:
        raise ModParamError(
            f"supplied level {n} differs from the computed finite conductor {n_computed}"
        )

    t0 = time.monotonic()
    G = build_quotient_graph(q, n, cfg.get("depth"))
    timings["graph"] = time.monotonic() - t0

    t0 = time.monotonic()
    phi, table, convention, checks = newform_for_curve(G, E)
    timings["newform"] = time.monotonic() - t0

    basis = generator_basis(G)
    word = j_inverse(phi, basis)

    mu_expected = -E.j.v_infinity()
    pp = petersson(phi, phi)

    t0 = time.monotonic()
    eps_exp = cfg.get("eps_exp")
    lattice = theta.lattice_generator(word, G, eps_exp=eps_exp)
    timings["lattice"] = time.monotonic() - t0
    if lattice.mu != mu_expected:
        raise ModParamError(
            f"lattice valuation {lattice.mu} does not match -v(j) = {mu_expected}"
        )
    deg = degree_of_phi(phi, lattice.mu)

    # independent series for the parameter, compared on the overlap
    t_res = None
    try:
        tE = tate_parameter_from_j(E.j, min(lattice.t.prec, 3 * lattice.mu))
        agree = lattice.t.agrees_with(tE)
        t_res = {"series": str(tE), "agrees": bool(agree)}
        if not agree:
            raise ModParamError("lattice generator disagrees with the curve parameter")
    except CurveError:
        pass

    t0 = time.monotonic()
    D = cfg.get("torsion_depth", 5 * pdeg(n.c))
    B = torsion_bound(E, n, D)
    timings["torsion_bound"] = time.monotonic() - t0

    t0 = time.monotonic()
    cusp_rows = []
    for s in G.cusp_list:
        if s.is_infinity():
            cusp_rows.append(
                {"cusp": "inf", "value": "1", "error_exp": None, "order": 1, "divides": B}
            )
            continue
        val = theta.evaluate_u_word(word, s, G, eps_exp=eps_exp)
        order, cert = theta.reduce_mod_lattice(val, lattice, B)
        cusp_rows.append(
            {
                "cusp": str(s),
                "value": str(val.value),
                "error_exp": val.err_exp,
                "order": order,
                "divides": B,
                "certificate": cert,
            }
        )
    timings["cusps"] = time.monotonic() - t0

    for row in cusp_rows:
        if B % row["order"]:
            raise ModParamError("reported order does not divide the torsion bound")

    report = ParametrizationReport()
    report.data = {
        "version": 1,
        "q": q,
        "curve": E.coeff_string(),
        "level": format_poly(n.c),
        "j": str(E.j),
        "v_infinity_j": E.j.v_infinity(),
        "reductions": [r.to_json() for r in reductions],
        "genus": G.genus,
        "cusps": [str(s) for s in G.cusp_list],
        "newform": phi.to_json(),
        "nu_convention": convention,
        "fourier_prefix": table.to_json(),
        "hecke_checks": [
            {"prime": str(P), "lambda": lam} for P, lam in checks
        ],
        "word": word.to_json(),
        "petersson": str(pp),
        "t": str(lattice.t),
        "mu": lattice.mu,
        "t_vs_curve_series": t_res,
        "degree": deg,
        "torsion_bound": B,
        "torsion_depth": D,
        "omega": "T^-2 * rho",
        "cusp_values": cusp_rows,
        "timings": {k: round(v, 3) for k, v in timings.items()},
        "elapsed": round(time.monotonic() - t_start, 3),
    }
    return report
