"""Elliptic curves over F_q(T): invariants, reduction types, point counts.

Coefficients live in A = F_q[T]. Reduction data at a finite place or at
infinity comes from a characteristic-free run of Tate's algorithm over the
completed local field; point counts over residue fields are exhaustive but
vectorized, and the orders of cusp images are bounded through the gcd of
counts at primes congruent to 1 modulo the level.
"""

from __future__ import annotations

import json
import os
from fractions import Fraction

import numpy as np

from .ff import (
    FqPoly,
    RationalFunction,
    ResidueField,
    field,
    format_poly,
    monic_irreducibles,
    irreducibles_with_condition,
    pdeg,
    pdivmod,
    pfactor,
    pmod,
    pmul,
    pnormalize,
    pscale,
)
from .laurent import INF_PREC, Laurent, from_rational


class CurveError(RuntimeError):
    pass


def _int_scale(F, f, k):
    return pscale(F, f, k % F.p if F.e == 1 else (k % F.p))


class WeierstrassCurve:
    """A model y^2 + a1 x y + a3 y = x^3 + a2 x^2 + a4 x + a6 over F_q[T]."""

    def __init__(self, a1, a2, a3, a4, a6):
        self.field = a1.field if isinstance(a1, FqPoly) else a2.field
        coeffs = []
        for a in (a1, a2, a3, a4, a6):
            coeffs.append(a.c if isinstance(a, FqPoly) else pnormalize(a))
        self.a1, self.a2, self.a3, self.a4, self.a6 = coeffs
        F = self.field
        self.b2 = padd_many(F, [pmul(F, self.a1, self.a1), _int_scale(F, self.a2, 4)])
        self.b4 = padd_many(
            F, [_int_scale(F, self.a4, 2), pmul(F, self.a1, self.a3)]
        )
        self.b6 = padd_many(F, [pmul(F, self.a3, self.a3), _int_scale(F, self.a6, 4)])
        self.b8 = padd_many(
            F,
            [
                pmul(F, pmul(F, self.a1, self.a1), self.a6),
                _int_scale(F, pmul(F, self.a2, self.a6), 4),
                _int_scale(F, pmul(F, pmul(F, self.a1, self.a3), self.a4), -1),
                pmul(F, self.a2, pmul(F, self.a3, self.a3)),
                _int_scale(F, pmul(F, self.a4, self.a4), -1),
            ],
        )
        self.c4 = padd_many(
            F, [pmul(F, self.b2, self.b2), _int_scale(F, self.b4, -24)]
        )
        self.delta = padd_many(
            F,
            [
                _int_scale(F, pmul(F, pmul(F, self.b2, self.b2), self.b8), -1),
                _int_scale(F, pmul(F, self.b4, pmul(F, self.b4, self.b4)), -8),
                _int_scale(F, pmul(F, self.b6, self.b6), -27),
                _int_scale(F, pmul(F, self.b2, pmul(F, self.b4, self.b6)), 9),
            ],
        )
        if not self.delta:
            raise CurveError("singular curve: the discriminant vanishes")
        c43 = pmul(F, self.c4, pmul(F, self.c4, self.c4))
        self.j = RationalFunction(F, c43, self.delta)

    @classmethod
    def parse(cls, spec, F):
        """Parse "a1=T;a2=0;a3=0;a4=0;a6=T^2" (missing entries are zero)."""
        vals = {"a1": (), "a2": (), "a3": (), "a4": (), "a6": ()}
        for part in spec.split(";"):
            part = part.strip()
            if not part:
                continue
            key, _, rhs = part.partition("=")
            key = key.strip()
            if key not in vals:
                raise CurveError(f"unknown coefficient {key!r}")
            from .ff import parse_poly

            vals[key] = parse_poly(rhs.strip(), F)
        return cls(
            FqPoly(F, vals["a1"]),
            FqPoly(F, vals["a2"]),
            FqPoly(F, vals["a3"]),
            FqPoly(F, vals["a4"]),
            FqPoly(F, vals["a6"]),
        )

    def coeff_polys(self):
        return [FqPoly(self.field, a) for a in (self.a1, self.a2, self.a3, self.a4, self.a6)]

    def coeff_string(self):
        names = ("a1", "a2", "a3", "a4", "a6")
        return ";".join(
            f"{n}={format_poly(a)}"
            for n, a in zip(names, (self.a1, self.a2, self.a3, self.a4, self.a6))
        )

    def is_isotrivial(self):
        return self.j.is_constant()

    def v_infinity_j(self):
        return self.j.v_infinity()

    def __repr__(self):
        return f"WeierstrassCurve({self.coeff_string()})"


def padd_many(F, polys):
    from .ff import padd

    out = ()
    for f in polys:
        out = padd(F, out, f)
    return out


def invariants(E: WeierstrassCurve):
    """The standard quantities of the model, exactly."""
    F = E.field
    return {
        "b2": FqPoly(F, E.b2),
        "b4": FqPoly(F, E.b4),
        "b6": FqPoly(F, E.b6),
        "b8": FqPoly(F, E.b8),
        "c4": FqPoly(F, E.c4),
        "delta": FqPoly(F, E.delta),
        "j": E.j,
        "v_infinity_j": E.j.v_infinity() if not E.j.is_zero() else None,
    }


# ---------------------------------------------------------------------------
# local places
# ---------------------------------------------------------------------------


class FinitePlace:
    def __init__(self, F, P):
        self.F = F
        self.P = P.c if isinstance(P, FqPoly) else pnormalize(P)
        self.k = ResidueField(FqPoly(F, self.P))
        self.pi = RationalFunction(F, self.P)
        self.name = format_poly(self.P)
        self.degree = pdeg(self.P)

    def val(self, x: RationalFunction):
        if x.is_zero():
            return INF_PREC
        return x.v_at(FqPoly(self.F, self.P))

    def residue(self, x: RationalFunction):
        if x.is_zero():
            return 0
        if self.val(x) > 0:
            return 0
        num = pmod(self.F, x.num, self.P)
        den = pmod(self.F, x.den, self.P)
        from .ff import pinvmod

        r = pmul(self.F, num, pinvmod(self.F, den, self.P))
        return self.k.reduce_poly(r)

    def lift(self, a):
        return RationalFunction(self.F, self.k.decode(a))

    def __repr__(self):
        return f"Place({self.name})"


class _ConstField:
    """The base field dressed with the residue-field interface."""

    def __init__(self, F):
        self.F = F
        self.q = F.q

    def elements(self):
        return range(self.F.q)

    def add(self, a, b):
        return self.F.add(a, b)

    def sub(self, a, b):
        return self.F.sub(a, b)

    def mul(self, a, b):
        return self.F.mul(a, b)

    def neg(self, a):
        return self.F.neg(a)

    def inv(self, a):
        return self.F.inv(a)

    def pow(self, a, k):
        return self.F.pow(a, k)


class InfinitePlace:
    def __init__(self, F):
        self.F = F
        self.k = _ConstField(F)
        self.pi = RationalFunction(F, (1,), (0, 1))
        self.name = "inf"
        self.degree = 1

    def val(self, x: RationalFunction):
        if x.is_zero():
            return INF_PREC
        return x.v_infinity()

    def residue(self, x: RationalFunction):
        if x.is_zero() or self.val(x) > 0:
            return 0
        return self.F.mul(x.num[-1], self.F.inv(x.den[-1]))

    def lift(self, a):
        return RationalFunction(self.F, (a,) if a else ())

    def __repr__(self):
        return "Place(inf)"


# ---------------------------------------------------------------------------
# Tate's algorithm
# ---------------------------------------------------------------------------


def _k_synthetic_div(k, coeffs, r):
    """coeffs / (X - r): quotient coefficients, low degree first."""
    rev = list(reversed(coeffs))
    out = []
    acc = 0
    for c in rev:
        acc = k.add(c, k.mul(acc, r))
        out.append(acc)
    rem = out.pop()
    out.reverse()
    return out, rem


def k_roots(k, coeffs):
    """{root: multiplicity} over k for a nonzero k-coefficient polynomial."""
    work = list(coeffs)
    while work and work[-1] == 0:
        work.pop()
    out = {}
    changed = True
    while len(work) > 1 and changed:
        changed = False
        for r in k.elements():
            quo, rem = _k_synthetic_div(k, work, r)
            if rem == 0:
                out[r] = out.get(r, 0) + 1
                work = quo
                changed = True
                break
    return out


def _has_distinct_roots(k, coeffs):
    roots = k_roots(k, coeffs)
    return all(m == 1 for m in roots.values())


def _repeated_root(k, coeffs):
    for r, m in k_roots(k, coeffs).items():
        if m >= 2:
            return r
    return None


KODAIRA_COMPONENTS = {
    "I0": 1,
    "II": 1,
    "III": 2,
    "IV": 3,
    "I0*": 5,
    "IV*": 7,
    "III*": 8,
    "II*": 9,
}


class ReductionData:
    __slots__ = ("place", "kind", "exponent", "kodaira", "v_delta_min", "split")

    def __init__(self, place, kind, exponent, kodaira, v_delta_min, split=None):
        self.place = place
        self.kind = kind
        self.exponent = exponent
        self.kodaira = kodaira
        self.v_delta_min = v_delta_min
        self.split = split

    def __repr__(self):
        tag = f" ({'split' if self.split else 'nonsplit'})" if self.split is not None else ""
        return f"ReductionData({self.place.name}: {self.kind}{tag}, {self.kodaira}, f={self.exponent})"

    def to_json(self):
        return {
            "place": self.place.name,
            "type": self.kind + ("" if self.split is None else ("_split" if self.split else "_nonsplit")),
            "kodaira": self.kodaira,
            "exponent": self.exponent,
            "v_delta_min": self.v_delta_min,
        }


class _LocalModel:
    """Weierstrass coefficients as rational functions, transformed in place."""

    def __init__(self, F, coeffs):
        self.F = F
        self.a1, self.a2, self.a3, self.a4, self.a6 = coeffs

    def binvariants(self):
        F = self.F
        two = RationalFunction(F, (2 % F.p,))
        four = RationalFunction(F, (4 % F.p,))
        b2 = self.a1 * self.a1 + four * self.a2
        b4 = two * self.a4 + self.a1 * self.a3
        b6 = self.a3 * self.a3 + four * self.a6
        b8 = (
            self.a1 * self.a1 * self.a6
            + four * self.a2 * self.a6
            - self.a1 * self.a3 * self.a4
            + self.a2 * self.a3 * self.a3
            - self.a4 * self.a4
        )
        cst = lambda m: RationalFunction(F, (m % F.p,))
        delta = (
            cst(-1 % F.p) * b2 * b2 * b8
            - cst(8) * b4 * b4 * b4
            - cst(27) * b6 * b6
            + cst(9) * b2 * b4 * b6
        )
        return b2, b4, b6, b8, delta

    def translate(self, r=None, s=None, t=None):
        """x -> x + r, y -> y + s x + t (any subset)."""
        F = self.F
        zero = RationalFunction(F, ())
        r = r if r is not None else zero
        s = s if s is not None else zero
        t = t if t is not None else zero
        two = RationalFunction(F, (2 % F.p,))
        three = RationalFunction(F, (3 % F.p,))
        a1, a2, a3, a4, a6 = self.a1, self.a2, self.a3, self.a4, self.a6
        self.a1 = a1 + two * s
        self.a2 = a2 - s * a1 + three * r - s * s
        self.a3 = a3 + r * a1 + two * t
        self.a4 = a4 - s * a3 + two * r * a2 - (t + r * s) * a1 + three * r * r - two * s * t
        self.a6 = a6 + r * a4 + r * r * a2 + r * r * r - t * a3 - t * t - r * t * a1

    def rescale_down(self, pi):
        self.a1 = self.a1 / pi
        self.a2 = self.a2 / (pi * pi)
        self.a3 = self.a3 / (pi * pi * pi)
        self.a4 = self.a4 / (pi * pi * pi * pi)
        self.a6 = self.a6 / (pi * pi * pi * pi * pi * pi)


def tate_algorithm(E: WeierstrassCurve, place):
    """Kodaira type, conductor exponent and minimal discriminant valuation."""
    F = E.field
    k = place.k
    pi = place.pi
    coeffs = [RationalFunction(F, a) for a in (E.a1, E.a2, E.a3, E.a4, E.a6)]
    # make the model integral at the place
    s = 0
    for i, a in zip((1, 2, 3, 4, 6), coeffs):
        if not a.is_zero():
            v = place.val(a)
            if v < 0:
                need = (-v + i - 1) // i
                s = max(s, need)
    if s:
        upow = [pi] * 0
        u = pi
        scaled = []
        for i, a in zip((1, 2, 3, 4, 6), coeffs):
            b = a
            for _ in range(i * s):
                b = b * pi
            scaled.append(b)
        coeffs = scaled
    M = _LocalModel(F, coeffs)

    while True:
        b2, b4, b6, b8, delta = M.binvariants()
        n = place.val(delta)
        if n == 0:
            return ReductionData(place, "good", 0, "I0", 0)
        # move the singular point of the reduction to the origin
        sing = _find_singular_point(place, M)
        if sing is None:
            return ReductionData(place, "good", 0, "I0", n)
        r0, t0 = sing
        M.translate(r=place.lift(r0), t=place.lift(t0))
        b2, b4, b6, b8, delta = M.binvariants()
        if place.val(b2) == 0:
            # multiplicative: the tangent quadratic decides splitness
            quad = [place.residue(RationalFunction(F, ()) - M.a2), place.residue(M.a1), 1]
            split = bool(k_roots(k, quad))
            kind = "split_mult" if split else "nonsplit_mult"
            return ReductionData(place, kind, 1, f"I{n}", n, split)
        if place.val(M.a6) < 2:
            return ReductionData(place, "additive", n + 1 - 1, "II", n)
        if place.val(b8) < 3:
            return ReductionData(place, "additive", n + 1 - 2, "III", n)
        if place.val(b6) < 3:
            return ReductionData(place, "additive", n + 1 - 3, "IV", n)
        # normalize so that pi | a1, a2;  pi^2 | a3, a4;  pi^3 | a6
        if F.p == 2:
            s_bar = _k_sqrt(k, place.residue(M.a2))
        else:
            half = k.inv(2 % F.p)
            s_bar = k.neg(k.mul(half, place.residue(M.a1)))
        M.translate(s=place.lift(s_bar))
        a3_1 = M.a3 / pi
        a6_2 = M.a6 / (pi * pi)
        if F.p == 2:
            t_bar = _k_sqrt(k, place.residue(a6_2))
        else:
            half = k.inv(2 % F.p)
            t_bar = k.neg(k.mul(half, place.residue(a3_1)))
        M.translate(t=place.lift(t_bar) * pi)
        assert place.val(M.a1) >= 1 and place.val(M.a2) >= 1
        assert place.val(M.a3) >= 2 and place.val(M.a4) >= 2 and place.val(M.a6) >= 3
        cubic = [
            place.residue(M.a6 / (pi * pi * pi)),
            place.residue(M.a4 / (pi * pi)),
            place.residue(M.a2 / pi),
            1,
        ]
        roots = k_roots(k, cubic)
        mults = sorted(roots.values(), reverse=True)
        if not mults or mults[0] == 1:
            _, _, _, _, delta = M.binvariants()
            n = place.val(delta)
            return ReductionData(place, "additive", n + 1 - 5, "I0*", n)
        if mults[0] == 2:
            dbl = next(r for r, m in roots.items() if m == 2)
            M.translate(r=place.lift(dbl) * pi)
            return _type_In_star(place, M)
        triple = next(r for r, m in roots.items() if m == 3)
        M.translate(r=place.lift(triple) * pi)
        quad = [
            k.neg(place.residue(M.a6 / (pi * pi * pi * pi))),
            place.residue(M.a3 / (pi * pi)),
            1,
        ]
        rr = _repeated_root(k, quad)
        if rr is None:
            _, _, _, _, delta = M.binvariants()
            n = place.val(delta)
            return ReductionData(place, "additive", n + 1 - 7, "IV*", n)
        M.translate(t=place.lift(rr) * pi * pi)
        if place.val(M.a4) < 4:
            _, _, _, _, delta = M.binvariants()
            n = place.val(delta)
            return ReductionData(place, "additive", n + 1 - 8, "III*", n)
        if place.val(M.a6) < 6:
            _, _, _, _, delta = M.binvariants()
            n = place.val(delta)
            return ReductionData(place, "additive", n + 1 - 9, "II*", n)
        M.rescale_down(pi)


def _type_In_star(place, M):
    """The I_n* subprocedure; entered with the double root at the origin."""
    F = M.F
    k = place.k
    pi = place.pi
    m = 1
    pim = pi
    while True:
        # quadratic in Y
        quad_y = [
            k.neg(place.residue(M.a6 / _pipow(pi, 2 * m + 2))),
            place.residue(M.a3 / _pipow(pi, m + 1)),
            1,
        ]
        rr = _repeated_root(k, quad_y)
        if rr is None:
            nu = 2 * m - 1
            _, _, _, _, delta = M.binvariants()
            n = place.val(delta)
            return ReductionData(place, "additive", n + 1 - (nu + 5), f"I{nu}*", n)
        M.translate(t=place.lift(rr) * _pipow(pi, m + 1))
        quad_x = [
            place.residue(M.a6 / _pipow(pi, 2 * m + 3)),
            place.residue(M.a4 / _pipow(pi, m + 2)),
            place.residue(M.a2 / pi),
        ]
        rr2 = _repeated_root(k, quad_x)
        if rr2 is None:
            nu = 2 * m
            _, _, _, _, delta = M.binvariants()
            n = place.val(delta)
            return ReductionData(place, "additive", n + 1 - (nu + 5), f"I{nu}*", n)
        M.translate(r=place.lift(rr2) * _pipow(pi, m + 1))
        m += 1


def _k_sqrt(k, a):
    for r in k.elements():
        if k.mul(r, r) == a:
            return r
    raise CurveError("no square root in the residue field")


def _pipow(pi, m):
    out = RationalFunction(pi.field, (1,))
    for _ in range(m):
        out = out * pi
    return out


def _find_singular_point(place, M):
    """The singular point of the reduced curve over k, or None if smooth."""
    k = place.k
    a1 = place.residue(M.a1)
    a2 = place.residue(M.a2)
    a3 = place.residue(M.a3)
    a4 = place.residue(M.a4)
    a6 = place.residue(M.a6)
    three = 3 % place.F.p
    two = 2 % place.F.p
    for x in k.elements():
        x2 = k.mul(x, x)
        for y in k.elements():
            f = k.sub(
                k.add(k.add(k.mul(y, y), k.mul(k.mul(a1, x), y)), k.mul(a3, y)),
                k.add(k.add(k.mul(x2, x), k.mul(a2, x2)), k.add(k.mul(a4, x), a6)),
            )
            if f != 0:
                continue
            fx = k.sub(
                k.mul(a1, y),
                k.add(
                    k.add(_k_int_mul(k, three, x2), _k_int_mul(k, two, k.mul(a2, x))),
                    a4,
                ),
            )
            fy = k.add(k.add(_k_int_mul(k, two, y), k.mul(a1, x)), a3)
            if fx == 0 and fy == 0:
                return x, y
    return None


def _k_int_mul(k, m, a):
    out = 0
    for _ in range(m):
        out = k.add(out, a)
    return out


def reduction_type(E: WeierstrassCurve, place) -> ReductionData:
    """Reduction data at a finite irreducible place or at infinity."""
    F = E.field
    if isinstance(place, (FqPoly, tuple)):
        place = FinitePlace(F, place)
    elif place == "inf" or isinstance(place, InfinitePlace):
        place = place if isinstance(place, InfinitePlace) else InfinitePlace(F)
    return tate_algorithm(E, place)


def conductor(E: WeierstrassCurve):
    """(finite part as FqPoly, reduction data per bad place incl. infinity)."""
    F = E.field
    data = []
    n = (1,)
    for P in sorted(pfactor(F, E.delta), key=lambda f: (len(f), tuple(reversed(f)))):
        red = reduction_type(E, FinitePlace(F, P))
        data.append(red)
        for _ in range(red.exponent):
            n = pmul(F, n, P)
    inf = reduction_type(E, InfinitePlace(F))
    data.append(inf)
    return FqPoly(F, n), data


# ---------------------------------------------------------------------------
# point counting
# ---------------------------------------------------------------------------

_COUNT_CACHE = {}


def _cache_dir():
    base = os.environ.get("DRINFELDMP_CACHE_DIR")
    if not base:
        base = os.path.join(os.path.expanduser("~"), ".cache", "drinfeldmp")
    os.makedirs(base, exist_ok=True)
    return base


def _count_cache_load(key):
    if key in _COUNT_CACHE:
        return _COUNT_CACHE[key]
    path = os.path.join(_cache_dir(), "counts.json")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, ValueError):
        data = {}
    _COUNT_CACHE.update(data)
    return _COUNT_CACHE.get(key)

def _count_cache_store(key, value):
    _COUNT_CACHE[key] = value
    path = os.path.join(_cache_dir(), "counts.json")
    tmp = path + ".tmp"
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, ValueError):
        data = {}
    data[key] = value
    with open(tmp, "w") as fh:
        json.dump(data, fh)
    os.replace(tmp, path)


def count_points(E: WeierstrassCurve, P, use_cache=True) -> int:
    """Points of the reduced curve over A/P, the point at infinity included.

    Exhaustive over the residue field, vectorized; at a multiplicative place
    the count is of all rational points of the reduced cubic.
    """
    F = E.field
    Pc = P.c if isinstance(P, FqPoly) else pnormalize(P)
    d = pdeg(Pc)
    if d > 20:
        raise CurveError("residue field degree beyond the counting cap")
    key = f"{F.q}|{E.coeff_string()}|{format_poly(Pc)}"
    if use_cache:
        got = _count_cache_load(key)
        if got is not None:
            return got
    if F.e == 1 and F.p == 2:
        out = _count_char2(E, Pc, d)
    elif F.e == 1:
        out = _count_odd(E, Pc, d)
    else:
        out = _count_slow(E, Pc)
    if use_cache:
        _count_cache_store(key, out)
    return out


def _count_slow(E, Pc):
    F = E.field
    k = ResidueField(FqPoly(F, Pc))
    a1 = k.reduce_poly(E.a1)
    a2 = k.reduce_poly(E.a2)
    a3 = k.reduce_poly(E.a3)
    a4 = k.reduce_poly(E.a4)
    a6 = k.reduce_poly(E.a6)
    total = 1
    for x in k.elements():
        x2 = k.mul(x, x)
        rhs = k.add(k.add(k.mul(x2, x), k.mul(a2, x2)), k.add(k.mul(a4, x), a6))
        h = k.add(k.mul(a1, x), a3)
        for y in k.elements():
            lhs = k.add(k.mul(y, y), k.mul(h, y))
            if lhs == rhs:
                total += 1
    return total


def _bits_reduce_table(Pc, d):
    """redtable[h] = (h << d) mod P as d-bit ints, for all h < 2^d."""
    pbits = 0
    for i, c in enumerate(Pc):
        if c:
            pbits |= 1 << i
    # T^{d+i} mod P
    cur = pbits & ((1 << d) - 1)  # T^d mod P  (since P monic)
    tops = []
    for _ in range(d):
        tops.append(cur)
        cur <<= 1
        if cur >> d & 1:
            cur ^= pbits
        cur &= (1 << d) - 1
        # note: shifting then conditionally reducing keeps degree < d
    table = np.zeros(1 << d, dtype=np.uint64)
    size = 1
    for i in range(d):
        table[size : 2 * size] = table[:size] ^ np.uint64(tops[i])
        size *= 2
    return table


def _clmul_reduce(a, b, d, redtable):
    """Carryless product of two vectors of field elements, reduced mod P."""
    res = np.zeros_like(a)
    for i in range(d):
        mask = ((b >> np.uint64(i)) & np.uint64(1)).astype(np.uint64)
        res ^= (a * mask) << np.uint64(i)
    lo = res & np.uint64((1 << d) - 1)
    hi = res >> np.uint64(d)
    return lo ^ redtable[hi]


def _spread_table():
    t = np.zeros(256, dtype=np.uint64)
    for v in range(256):
        s = 0
        for i in range(8):
            if v >> i & 1:
                s |= 1 << (2 * i)
        t[v] = s
    return t


_SPREAD = _spread_table()


def _square_vec_char2(a, d, redtable):
    s = _SPREAD[a & np.uint64(255)]
    s ^= _SPREAD[(a >> np.uint64(8)) & np.uint64(255)] << np.uint64(16)
    s ^= _SPREAD[(a >> np.uint64(16)) & np.uint64(255)] << np.uint64(32)
    lo = s & np.uint64((1 << d) - 1)
    hi = s >> np.uint64(d)
    return lo ^ redtable[hi]


def _inv_vec_char2(b, d, red):
    """b^(2^d - 2) via the addition chain on 2^(d-1) - 1 exponents."""
    # e_k = b^(2^k - 1); combine e_{k1+k2} = e_{k1}^(2^{k2}) * e_{k2}
    chain = {0: np.ones_like(b), 1: b}

    def get(k):
        if k in chain:
            return chain[k]
        half = k // 2
        e = get(half)
        t = e
        for _ in range(half):
            t = _square_vec_char2(t, d, red)
        t = _clmul_reduce(t, e, d, red)
        if k % 2:
            t = _square_vec_char2(t, d, red)
            t = _clmul_reduce(t, b, d, red)
        chain[k] = t
        return t

    em = get(d - 1)  # b^(2^(d-1) - 1)
    return _square_vec_char2(em, d, red)  # b^(2^d - 2)


def _count_char2(E, Pc, d):
    F = E.field

    def enc(poly):
        v = 0
        for i, c in enumerate(pmod(F, poly, Pc)):
            if c:
                v |= 1 << i
        return np.uint64(v)

    red = _bits_reduce_table(Pc, d)
    N = 1 << d
    x = np.arange(N, dtype=np.uint64)
    A1, A2, A3, A4, A6 = (enc(a) for a in (E.a1, E.a2, E.a3, E.a4, E.a6))
    one = np.ones(N, dtype=np.uint64)
    x2 = _square_vec_char2(x, d, red)
    x3 = _clmul_reduce(x2, x, d, red)
    b = _clmul_reduce(one * A1, x, d, red) ^ A3
    c = x3 ^ _clmul_reduce(one * A2, x2, d, red) ^ _clmul_reduce(one * A4, x, d, red) ^ A6
    binv = _inv_vec_char2(b.copy(), d, red)
    binv2 = _square_vec_char2(binv, d, red)
    w = _clmul_reduce(c, binv2, d, red)
    tr = np.zeros_like(w)
    cur = w.copy()
    for _ in range(d):
        tr ^= cur
        cur = _square_vec_char2(cur, d, red)
    nz = b != 0
    cnt = np.where(nz, 2 * (tr == 0), 1)
    return int(cnt[nz].sum() + (~nz).sum()) + 1


def _count_odd(E, Pc, d):
    F = E.field
    p = F.p
    # top-digit reduction row: T^d mod P
    top = pmod(F, pmod(F, (0,) * d + (1,), Pc), Pc)
    TOP = np.array([top[i] if i < len(top) else 0 for i in range(d)], dtype=np.int16)

    def shift_reduce(u):
        """u * T mod P, digitwise."""
        out = np.empty_like(u)
        out[:, 1:] = u[:, :-1]
        out[:, 0] = 0
        carry = u[:, d - 1 : d]
        return (out + carry * TOP[None, :]) % p

    def mul_vecs(u, v):
        acc = (u[:, 0:1] * v) % p
        w = v
        for i in range(1, d):
            w = shift_reduce(w)
            acc = (acc + u[:, i : i + 1] * w) % p
        return acc

    def enc_const(poly):
        r = pmod(F, poly, Pc)
        return np.array([r[i] if i < len(r) else 0 for i in range(d)], dtype=np.int16)

    def mul_const(u, cdig):
        acc = (cdig[0] * u) % p
        w = u
        for i in range(1, d):
            w = shift_reduce(w)
            if cdig[i]:
                acc = (acc + int(cdig[i]) * w) % p
        return acc

    N = p**d
    idx = np.arange(N)
    digits = np.empty((N, d), dtype=np.int16)
    m = idx.copy()
    for i in range(d):
        digits[:, i] = m % p
        m //= p
    x = digits
    A1, A2, A3, A4, A6 = (enc_const(a) for a in (E.a1, E.a2, E.a3, E.a4, E.a6))
    x2 = mul_vecs(x, x)
    x3 = mul_vecs(x2, x)
    g = (x3 + mul_const(x2, A2) + mul_const(x, A4) + A6[None, :]) % p
    h = (mul_const(x, A1) + A3[None, :]) % p
    w = (4 * g + mul_vecs(h, h)) % p
    powers = (p ** np.arange(d)).astype(np.int64)
    enc_w = (w.astype(np.int64)) @ powers
    enc_sq = (x2.astype(np.int64)) @ powers
    is_sq = np.zeros(N, dtype=bool)
    is_sq[enc_sq] = True
    chi = np.where(enc_w == 0, 0, np.where(is_sq[enc_w], 1, -1))
    return int(N + 1 + chi.sum())


def lambda_p(E: WeierstrassCurve, P) -> int:
    """Good: q^deg + 1 - count; split mult: 1; nonsplit: -1; additive: 0."""
    F = E.field
    Pc = P.c if isinstance(P, FqPoly) else pnormalize(P)
    red = reduction_type(E, FinitePlace(F, Pc))
    if red.kind == "good":
        return F.q ** pdeg(Pc) + 1 - count_points(E, FqPoly(F, Pc))
    if red.kind == "split_mult":
        return 1
    if red.kind == "nonsplit_mult":
        return -1
    return 0


def torsion_bound(E: WeierstrassCurve, n, D: int) -> int:
    """gcd of point counts at good primes P = 1 mod n with deg P <= D.

    Primes dividing the discriminant are skipped; at least two contributing
    primes are required.
    """
    from math import gcd as _gcd

    F = E.field
    nc = n.c if isinstance(n, FqPoly) else pnormalize(n)
    one = FqPoly(F, (1,))
    primes = irreducibles_with_condition(F.q, D, FqPoly(F, nc), one)
    B = 0
    used = 0
    for P in primes:
        if not pmod(F, E.delta, P.c):
            continue
        cnt = count_points(E, P)
        B = _gcd(B, cnt)
        used += 1
    if used < 2:
        raise CurveError(f"fewer than two qualifying primes below degree {D}")
    return B


# ---------------------------------------------------------------------------
# the Tate parameter from the j-invariant
# ---------------------------------------------------------------------------


def _j_series_integer(nterms):
    """Coefficients j_0, j_1, ... of j(u) - 1/u as exact integers."""
    N = nterms + 2
    # E4 = 1 + 240 sum sigma_3(n) u^n
    e4 = [0] * N
    e4[0] = 1
    for nn in range(1, N):
        s3 = sum(d**3 for d in range(1, nn + 1) if nn % d == 0)
        e4[nn] = 240 * s3
    e4c = _poly_mul_trunc(_poly_mul_trunc(e4, e4, N), e4, N)
    # Delta = u prod (1-u^n)^24; here: eta24 = prod (1-u^n)^24 truncated
    eta24 = [0] * N
    eta24[0] = 1
    for nn in range(1, N):
        term = [0] * N
        term[0] = 1
        term[nn] = -1
        for _ in range(24):
            eta24 = _poly_mul_trunc(eta24, term, N)
        # repeated multiplication keeps integers exact
    jfull = _poly_div_trunc(e4c, eta24, N)
    # j(u) = (1/u) * jfull(u) = 1/u + j_0 + j_1 u + ...
    return jfull[1 : nterms + 1], jfull


def _poly_mul_trunc(a, b, N):
    out = [0] * N
    for i, x in enumerate(a):
        if x:
            for jj in range(0, N - i):
                y = b[jj]
                if y:
                    out[i + jj] += x * y
    return out


def _poly_div_trunc(a, b, N):
    assert b[0] == 1
    out = [0] * N
    rem = list(a)
    for i in range(N):
        c = rem[i]
        out[i] = c
        if c:
            for jj in range(0, N - i):
                rem[i + jj] -= c * b[jj]
    return out


_REVERSED_J_CACHE = {}


def reversed_j_coefficients(nterms):
    """d(1..nterms) with u = sum d(k) / j^k, as exact integers."""
    got = _REVERSED_J_CACHE.get(nterms)
    if got is not None:
        return got
    js, _ = _j_series_integer(nterms + 2)
    # w(u) := 1/j(u) = u / (1 + sum js[i] u^{i+1}); invert the series in u
    N = nterms + 1
    denom = [1] + [js[i] for i in range(N - 1)]
    winv = _poly_div_trunc([1] + [0] * (N - 1), denom, N)
    w = [0] + [winv[i] for i in range(N - 1)]  # w(u) = u * winv(u)
    # revert w: find u(w) = sum d_k w^k with d_1 = 1
    dcoef = [0, 1]
    for kk in range(2, N):
        # coefficient of w^kk in u(w) determined by [u^kk] w(u(w)) = 0
        comp = _compose_trunc(w, dcoef + [0], kk + 1)
        corr = -comp[kk]
        dcoef.append(corr)
        # after appending, [u^kk] of w(u(w)) becomes zero since w starts u + ...
    out = dcoef[1 : nterms + 1]
    _REVERSED_J_CACHE[nterms] = out
    return out


def _compose_trunc(outer, inner, N):
    """outer(inner(w)) truncated to N coefficients; inner has no constant term."""
    out = [0] * N
    power = [0] * N
    power[0] = 1
    for i, c in enumerate(outer):
        if i >= N:
            break
        if c:
            for t in range(N):
                out[t] += c * power[t]
        power = _poly_mul_trunc(power, inner, N)
    return out


def tate_parameter_from_j(j: RationalFunction, N: int, nterms=20) -> Laurent:
    """The lattice parameter as a series in pi, from the reciprocal j series."""
    F = j.field
    if j.is_zero() or j.v_infinity() >= 0:
        raise CurveError("the j-invariant must have a pole at infinity")
    mu = -j.v_infinity()
    if N > nterms * mu:
        raise CurveError("requested precision beyond the series cap")
    dcoefs = reversed_j_coefficients(nterms)
    jinv = from_rational(RationalFunction(F, j.den, j.num), N + mu + 2)
    out = Laurent.zero(F, N)
    power = jinv
    for k in range(1, nterms + 1):
        dk = dcoefs[k - 1] % F.p
        if dk:
            out = out + power.truncate(N) * Laurent.make(F, 0, [dk], INF_PREC)
        if k < nterms:
            power = (power * jinv).truncate(N + mu + 2)
    return out.truncate(N)


def j_of_tate_parameter(t: Laurent, N: int, nterms=20) -> Laurent:
    """Resubstitution j(t) = 1/t + sum j_k t^k, for the round-trip check."""
    F = t.field
    js, _ = _j_series_integer(nterms)
    out = t.inverse(prec=N)
    power = Laurent.one(F)
    for k in range(nterms):
        ck = js[k] % F.p
        if ck:
            out = out + power.truncate(N) * Laurent.make(F, 0, [ck], INF_PREC)
        power = (power * t).truncate(N + 1)
    return out.truncate(N)
