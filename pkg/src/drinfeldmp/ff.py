"""Exact arithmetic in F_q, its quadratic extension, A = F_q[T] and K = F_q(T).

Field elements are plain ints and field operations are table lookups, so the
polynomial and series inner loops elsewhere in the package stay cheap.
Polynomials are immutable tuples of coefficients, lowest degree first, with
no trailing zeros; the zero polynomial is the empty tuple and its degree is
the sentinel -inf.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache

NEG_INF = float("-inf")

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def factor_prime_power(q):
    """Split q = p^e with p prime; raises ValueError for non prime powers."""
    if q < 2:
        raise ValueError("field size must be at least 2")
    for p in _SMALL_PRIMES:
        if q % p == 0:
            e, m = 0, q
            while m % p == 0:
                m //= p
                e += 1
            if m != 1:
                raise ValueError(f"{q} is not a prime power")
            return p, e
    raise ValueError(f"unsupported field size {q}")


class Fq:
    """The field with q = p^e elements, elements encoded as ints in [0, q).

    For e > 1 an element encodes an F_p polynomial in base p, reduced modulo
    the first monic irreducible of degree e in the coefficient-tuple order
    (c_{e-1}, ..., c_0).
    """

    def __init__(self, q):
        p, e = factor_prime_power(q)
        if q > 64:
            raise ValueError("field size beyond table-backed range")
        self.q = q
        self.p = p
        self.e = e
        self.zero = 0
        self.one = 1
        if e == 1:
            self.modulus_digits = None
            mul = [(a * b) % p for a in range(q) for b in range(q)]
            add = [(a + b) % p for a in range(q) for b in range(q)]
        else:
            self.modulus_digits = self._first_irreducible_modulus(p, e)
            add = [self._digit_add(a, b) for a in range(q) for b in range(q)]
            mul = [self._poly_mod_mul(a, b) for a in range(q) for b in range(q)]
        self.MUL = mul
        self.ADD = add
        self.NEG = [self._neg_from_add(a) for a in range(q)]
        self.SUB = [add[a * q + self.NEG[b]] for a in range(q) for b in range(q)]
        inv = [0] * q
        for a in range(1, q):
            for b in range(1, q):
                if mul[a * q + b] == 1:
                    inv[a] = b
                    break
        self.INV = inv
        self.units = tuple(range(1, q))

    def _digit_add(self, a, b):
        p, e = self.p, self.e
        out, mult = 0, 1
        for _ in range(e):
            out += ((a % p + b % p) % p) * mult
            a //= p
            b //= p
            mult *= p
        return out

    def _neg_from_add(self, a):
        for b in range(self.q):
            if self._raw_add(a, b) == 0:
                return b
        raise AssertionError

    def _raw_add(self, a, b):
        return self.ADD[a * self.q + b]

    @staticmethod
    def _fp_poly_mul(fa, fb, p):
        out = [0] * (len(fa) + len(fb) - 1) if fa and fb else []
        for i, x in enumerate(fa):
            if x:
                for j, y in enumerate(fb):
                    out[i + j] = (out[i + j] + x * y) % p
        while out and out[-1] == 0:
            out.pop()
        return out

    @classmethod
    def _first_irreducible_modulus(cls, p, e):
        # modulus = x^e + c_{e-1} x^{e-1} + ... + c_0, first by (c_{e-1},...,c_0)
        import itertools

        for top in itertools.product(range(p), repeat=e):
            coeffs = list(reversed(top)) + [1]  # low to high
            if cls._fp_poly_irreducible(coeffs, p):
                return tuple(coeffs)
        raise AssertionError("no irreducible found")

    @classmethod
    def _fp_poly_irreducible(cls, coeffs, p):
        # brute root/factor test; degrees here are tiny
        deg = len(coeffs) - 1
        if deg <= 0:
            return False
        import itertools

        for d in range(1, deg // 2 + 1):
            for tail in itertools.product(range(p), repeat=d):
                div = list(tail) + [1]
                if cls._fp_poly_mod(coeffs, div, p) == []:
                    return False
        return True

    @staticmethod
    def _fp_poly_mod(f, g, p):
        f = list(f)
        while len(f) >= len(g):
            if f[-1] == 0:
                f.pop()
                continue
            c = f[-1] * pow(g[-1], -1, p) % p
            shift = len(f) - len(g)
            for i, gc in enumerate(g):
                f[shift + i] = (f[shift + i] - c * gc) % p
            while f and f[-1] == 0:
                f.pop()
        return f

    def _int_to_digits(self, a):
        p = self.p
        return [(a // p**i) % p for i in range(self.e)]

    def _digits_to_int(self, d):
        p = self.p
        return sum(c % p * p**i for i, c in enumerate(d))

    def _poly_mod_mul(self, a, b):
        p = self.p
        prod = self._fp_poly_mul(self._int_to_digits(a), self._int_to_digits(b), p)
        rem = self._fp_poly_mod(prod + [], list(self.modulus_digits), p)
        return self._digits_to_int(rem)

    # element operations -------------------------------------------------
    def add(self, a, b):
        return self.ADD[a * self.q + b]

    def sub(self, a, b):
        return self.SUB[a * self.q + b]

    def mul(self, a, b):
        return self.MUL[a * self.q + b]

    def neg(self, a):
        return self.NEG[a]

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of 0")
        return self.INV[a]

    def pow(self, a, k):
        out = 1
        base = a
        if k < 0:
            base = self.inv(a)
            k = -k
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def __repr__(self):
        return f"Fq({self.q})"

    def __eq__(self, other):
        return isinstance(other, Fq) and not isinstance(other, FqQuad) and other.q == self.q

    def __hash__(self):
        return hash(("Fq", self.q))


class FqQuad:
    """F_{q^2} = F_q[x]/(m) with m the first monic irreducible quadratic.

    Elements are ints u + q*v standing for u + v*rho, rho the class of x.
    Elements below q are exactly the base field, so promotion is free.
    """

    def __init__(self, base: Fq):
        q = base.q
        if q > 9:
            raise ValueError("quadratic extension tables capped at q <= 9")
        self.base = base
        self.q = q * q
        self.zero = 0
        self.one = 1
        c1, c0 = self._first_irreducible_quadratic(base)
        # rho^2 = r1*rho + r0
        self.r1 = base.neg(c1)
        self.r0 = base.neg(c0)
        self.rho = q  # (u, v) = (0, 1)
        n = self.q
        self.ADD = [0] * (n * n)
        self.MUL = [0] * (n * n)
        for a in range(n):
            ua, va = a % q, a // q
            for b in range(n):
                ub, vb = b % q, b // q
                self.ADD[a * n + b] = base.add(ua, ub) + q * base.add(va, vb)
                uv = base.mul(va, vb)
                u = base.add(base.mul(ua, ub), base.mul(self.r0, uv))
                v = base.add(base.add(base.mul(ua, vb), base.mul(va, ub)), base.mul(self.r1, uv))
                self.MUL[a * n + b] = u + q * v
        self.NEG = [base.neg(a % q) + q * base.neg(a // q) for a in range(n)]
        self.SUB = [self.ADD[a * n + self.NEG[b]] for a in range(n) for b in range(n)]
        inv = [0] * n
        for a in range(1, n):
            for b in range(1, n):
                if self.MUL[a * n + b] == 1:
                    inv[a] = b
                    break
        self.INV = inv
        self.units = tuple(range(1, n))

    @staticmethod
    def _first_irreducible_quadratic(base: Fq):
        q = base.q
        for c1 in range(q):
            for c0 in range(q):
                # x^2 + c1 x + c0 irreducible iff no root in F_q
                if all(
                    base.add(base.add(base.mul(x, x), base.mul(c1, x)), c0) != 0
                    for x in range(q)
                ):
                    return c1, c0
        raise AssertionError

    def split(self, a):
        """Return (u, v) with a = u + v*rho."""
        return a % self.base.q, a // self.base.q

    def join(self, u, v):
        return u + self.base.q * v

    def conj(self, a):
        # rho-bar = r1 - rho
        u, v = self.split(a)
        return self.join(self.base.add(u, self.base.mul(v, self.r1)), self.base.neg(v))

    def add(self, a, b):
        return self.ADD[a * self.q + b]

    def sub(self, a, b):
        return self.SUB[a * self.q + b]

    def mul(self, a, b):
        return self.MUL[a * self.q + b]

    def neg(self, a):
        return self.NEG[a]

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of 0")
        return self.INV[a]

    def pow(self, a, k):
        out = 1
        base = a if k >= 0 else self.inv(a)
        k = abs(k)
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def __repr__(self):
        return f"FqQuad({self.base.q})"

    def __eq__(self, other):
        return isinstance(other, FqQuad) and other.base == self.base

    def __hash__(self):
        return hash(("FqQuad", self.base.q))


@lru_cache(maxsize=None)
def field(q) -> Fq:
    return Fq(q)


@lru_cache(maxsize=None)
def quad_field(q) -> FqQuad:
    return FqQuad(field(q))


# ---------------------------------------------------------------------------
# raw polynomial helpers: coefficient tuples, lowest degree first
# ---------------------------------------------------------------------------

PZERO = ()


def pnormalize(c):
    c = tuple(c)
    n = len(c)
    while n and c[n - 1] == 0:
        n -= 1
    return c[:n]


def pdeg(f):
    return len(f) - 1 if f else NEG_INF


def pconst(c):
    return (c,) if c else ()


def pX(k=1):
    return (0,) * k + (1,)


def padd(F, f, g):
    if len(f) < len(g):
        f, g = g, f
    out = list(f)
    for i, c in enumerate(g):
        out[i] = F.add(out[i], c)
    return pnormalize(out)


def pneg(F, f):
    return tuple(F.neg(c) for c in f)


def psub(F, f, g):
    return padd(F, f, pneg(F, g))


def pmul(F, f, g):
    if not f or not g:
        return PZERO
    out = [0] * (len(f) + len(g) - 1)
    MUL, ADD, q = F.MUL, F.ADD, F.q
    for i, x in enumerate(f):
        if x:
            xq = x * q
            for j, y in enumerate(g):
                if y:
                    k = i + j
                    out[k] = ADD[out[k] * q + MUL[xq + y]]
    return pnormalize(out)


def pscale(F, f, c):
    if c == 0:
        return PZERO
    if c == 1:
        return f
    return pnormalize(F.mul(x, c) for x in f)


def pshift(f, k):
    """Multiply by T^k (k >= 0)."""
    if not f:
        return f
    return (0,) * k + tuple(f)


def pdivmod(F, f, g):
    if not g:
        raise ZeroDivisionError("polynomial division by zero")
    f = list(f)
    dq = len(f) - len(g)
    if dq < 0:
        return PZERO, pnormalize(f)
    quot = [0] * (dq + 1)
    ginv = F.inv(g[-1])
    for shift in range(dq, -1, -1):
        c = F.mul(f[shift + len(g) - 1], ginv)
        if c:
            quot[shift] = c
            for i, gc in enumerate(g):
                if gc:
                    f[shift + i] = F.sub(f[shift + i], F.mul(c, gc))
    return pnormalize(quot), pnormalize(f[: len(g) - 1])


def pmod(F, f, g):
    return pdivmod(F, f, g)[1]


def pmonic(F, f):
    if not f:
        return f
    return pscale(F, f, F.inv(f[-1]))


def pgcd(F, f, g):
    while g:
        f, g = g, pmod(F, f, g)
    return pmonic(F, f)


def pexgcd(F, f, g):
    """Return (d, u, v) with d = gcd monic and u*f + v*g = d."""
    r0, r1 = f, g
    u0, u1 = pconst(1), PZERO
    v0, v1 = PZERO, pconst(1)
    while r1:
        q, r = pdivmod(F, r0, r1)
        r0, r1 = r1, r
        u0, u1 = u1, psub(F, u0, pmul(F, q, u1))
        v0, v1 = v1, psub(F, v0, pmul(F, q, v1))
    if not r0:
        return PZERO, PZERO, PZERO
    c = F.inv(r0[-1])
    return pscale(F, r0, c), pscale(F, u0, c), pscale(F, v0, c)


def pinvmod(F, f, m):
    d, u, _ = pexgcd(F, f, m)
    if pdeg(d) != 0:
        raise ZeroDivisionError("element not invertible modulo m")
    return pmod(F, u, m)


def peval(F, f, x):
    out = 0
    for c in reversed(f):
        out = F.add(F.mul(out, x), c)
    return out


def pkey(f):
    """Deterministic sort key: by degree, then coefficients from the top."""
    return (len(f), tuple(reversed(f)))


def penum_monic(F, d):
    """All monic degree-d polynomials, in base-q counting order of the tail."""
    q = F.q
    out = []
    for idx in range(q**d):
        coeffs = []
        m = idx
        for _ in range(d):
            coeffs.append(m % q)
            m //= q
        coeffs.append(1)
        out.append(tuple(coeffs))
    return out


@lru_cache(maxsize=None)
def monic_irreducibles(q, d):
    """Monic irreducibles of degree exactly d, by trial division (cached)."""
    F = field(q)
    if d <= 0:
        return ()
    out = []
    for f in penum_monic(F, d):
        if _is_irreducible_cached(F, f):
            out.append(f)
    return tuple(out)


def _is_irreducible_cached(F, f):
    d = len(f) - 1
    if d <= 0:
        return False
    if d == 1:
        return True
    for k in range(1, d // 2 + 1):
        for g in monic_irreducibles(F.q, k):
            if not pmod(F, f, g):
                return False
    return True


def pis_irreducible(F, f):
    if not f or pdeg(f) <= 0:
        return False
    return _is_irreducible_cached(F, pmonic(F, f))


def pfactor(F, f):
    """Factor into monic irreducibles by trial division: dict prime -> mult."""
    if not f:
        raise ValueError("cannot factor 0")
    f = pmonic(F, f)
    out = {}
    d = 1
    while pdeg(f) > 0:
        progressed = False
        for g in monic_irreducibles(F.q, d):
            while True:
                quo, rem = pdivmod(F, f, g)
                if rem:
                    break
                out[g] = out.get(g, 0) + 1
                f = quo
                progressed = True
            if pdeg(f) < 2 * d:
                break
        if pdeg(f) > 0 and pdeg(f) < 2 * d:
            out[f] = out.get(f, 0) + 1
            break
        if not progressed and d > pdeg(f):
            break
        d += 1
    return out


def pvaluation(F, f, P):
    """Multiplicity of the irreducible P in f (f nonzero)."""
    if not f:
        raise ValueError("valuation of 0")
    v = 0
    while True:
        quo, rem = pdivmod(F, f, P)
        if rem:
            return v
        f = quo
        v += 1


# ---------------------------------------------------------------------------
# polynomial text format: "T^3+2*T^2", terms any order, '*' optional
# ---------------------------------------------------------------------------

_TERM_RE = re.compile(r"^([0-9]+)?\s*\*?\s*(T(?:\^([0-9]+))?)?$")


def format_poly(f, var="T"):
    if not f:
        return "0"
    parts = []
    for k in range(len(f) - 1, -1, -1):
        c = f[k]
        if not c:
            continue
        if k == 0:
            parts.append(str(c))
        else:
            tp = var if k == 1 else f"{var}^{k}"
            parts.append(tp if c == 1 else f"{c}*{tp}")
    return "+".join(parts)


def parse_poly(s, F):
    s = s.replace(" ", "")
    if s in ("", "0"):
        return PZERO
    s = s.replace("-", "+-")
    coeffs = {}
    for term in s.split("+"):
        if not term:
            continue
        sign = 1
        if term.startswith("-"):
            sign = -1
            term = term[1:]
        m = _TERM_RE.match(term)
        if not m or (m.group(1) is None and m.group(2) is None):
            raise ValueError(f"cannot parse polynomial term {term!r}")
        c = int(m.group(1)) if m.group(1) is not None else 1
        if m.group(2) is None:
            k = 0
        elif m.group(3) is not None:
            k = int(m.group(3))
        else:
            k = 1
        cval = c % F.p if F.e == 1 else c % F.q
        if sign < 0:
            cval = F.neg(cval)
        coeffs[k] = F.add(coeffs.get(k, 0), cval)
    out = [0] * (max(coeffs) + 1)
    for k, c in coeffs.items():
        out[k] = c
    return pnormalize(out)


# ---------------------------------------------------------------------------
# FqPoly / RationalFunction / P1Point wrappers
# ---------------------------------------------------------------------------


class FqPoly:
    """Polynomial in A = F_q[T]; thin wrapper over a coefficient tuple."""

    __slots__ = ("field", "c")

    def __init__(self, field_obj, coeffs):
        self.field = field_obj
        self.c = pnormalize(coeffs)

    @classmethod
    def parse(cls, s, field_obj):
        return cls(field_obj, parse_poly(s, field_obj))

    @property
    def degree(self):
        return pdeg(self.c)

    def is_zero(self):
        return not self.c

    def is_monic(self):
        return bool(self.c) and self.c[-1] == 1

    def monic(self):
        return FqPoly(self.field, pmonic(self.field, self.c))

    def __add__(self, other):
        return FqPoly(self.field, padd(self.field, self.c, other.c))

    def __sub__(self, other):
        return FqPoly(self.field, psub(self.field, self.c, other.c))

    def __neg__(self):
        return FqPoly(self.field, pneg(self.field, self.c))

    def __mul__(self, other):
        return FqPoly(self.field, pmul(self.field, self.c, other.c))

    def __divmod__(self, other):
        q, r = pdivmod(self.field, self.c, other.c)
        return FqPoly(self.field, q), FqPoly(self.field, r)

    def __mod__(self, other):
        return FqPoly(self.field, pmod(self.field, self.c, other.c))

    def __floordiv__(self, other):
        return FqPoly(self.field, pdivmod(self.field, self.c, other.c)[0])

    def __eq__(self, other):
        return isinstance(other, FqPoly) and other.c == self.c and other.field == self.field

    def __hash__(self):
        return hash((self.field.q, self.c))

    def __str__(self):
        return format_poly(self.c)

    def __repr__(self):
        return f"FqPoly(q={self.field.q}, {format_poly(self.c)})"


def poly_gcd(f: FqPoly, g: FqPoly) -> FqPoly:
    """Monic gcd; poly_gcd(f, 0) = monic f and gcd(0, 0) = 0."""
    return FqPoly(f.field, pgcd(f.field, f.c, g.c))


def enumerate_monic(q, d):
    """Exactly q^d monic polynomials of degree d, in a fixed order."""
    if d < 0:
        raise ValueError("degree must be nonnegative")
    F = q if isinstance(q, Fq) else field(q)
    return [FqPoly(F, c) for c in penum_monic(F, d)]


def irreducibles_with_condition(q, max_degree, modulus: FqPoly, residue: FqPoly):
    """Monic irreducibles P with deg P <= max_degree and P = residue mod modulus.

    Requires gcd(residue, modulus) to be a unit; the result may be empty.
    Ordered by ascending degree, then by coefficient order.
    """
    F = modulus.field
    if pdeg(pgcd(F, residue.c, modulus.c)) > 0:
        raise ValueError("residue not coprime to modulus")
    out = []
    dm = pdeg(modulus.c)
    res = pmod(F, residue.c, modulus.c)
    for d in range(1, max_degree + 1):
        if d < dm:
            for f in monic_irreducibles(F.q, d):
                if pmod(F, f, modulus.c) == res:
                    out.append(FqPoly(F, f))
        else:
            # P = residue + modulus*h, deg P = d: scan h
            for h in penum_monic(F, d - dm) if d > dm else _h_candidates_same_degree(F, d, dm):
                f = padd(F, res, pmul(F, modulus.c, h))
                if pdeg(f) == d and f[-1] == 1 and pis_irreducible(F, f):
                    out.append(FqPoly(F, f))
    out.sort(key=lambda P: pkey(P.c))
    out.sort(key=lambda P: P.degree)
    return out


def _h_candidates_same_degree(F, d, dm):
    # deg(res + mod*h) = d = dm needs h constant
    return [pconst(c) for c in range(1, F.q)]


class ResidueField:
    """A/(P) for irreducible P; elements are ints encoding base-q digit tuples."""

    def __init__(self, P: FqPoly):
        F = P.field
        if not pis_irreducible(F, P.c):
            raise ValueError("residue field modulus must be irreducible")
        self.P = P
        self.base = F
        self.deg = P.degree
        self.q = F.q**self.deg
        self.zero = 0
        self.one = 1
        self._inv_cache = {}

    def encode(self, coeffs):
        q = self.base.q
        return sum(c * q**i for i, c in enumerate(coeffs))

    def decode(self, a):
        q = self.base.q
        return pnormalize([(a // q**i) % q for i in range(self.deg)])

    def elements(self):
        return range(self.q)

    def reduce_poly(self, f):
        return self.encode(pmod(self.base, f, self.P.c))

    def add(self, a, b):
        F, q = self.base, self.base.q
        out = 0
        for i in range(self.deg):
            out += F.add((a // q**i) % q, (b // q**i) % q) * q**i
        return out

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def neg(self, a):
        F, q = self.base, self.base.q
        out = 0
        for i in range(self.deg):
            out += F.neg((a // q**i) % q) * q**i
        return out

    def mul(self, a, b):
        prod = pmul(self.base, self.decode(a), self.decode(b))
        return self.reduce_poly(prod)

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of 0")
        got = self._inv_cache.get(a)
        if got is None:
            got = self.encode(pinvmod(self.base, self.decode(a), self.P.c))
            self._inv_cache[a] = got
        return got

    def pow(self, a, k):
        out = 1
        base = a if k >= 0 else self.inv(a)
        k = abs(k)
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    @property
    def units(self):
        return range(1, self.q)

    def __len__(self):
        return self.q

    def __repr__(self):
        return f"ResidueField({self.P})"


def residue_field_elements(P: FqPoly):
    """All q^deg(P) residues mod the irreducible P, with their field."""
    k = ResidueField(P)
    return list(k.elements()), k


class RationalFunction:
    """Element of K = F_q(T) in lowest terms with monic denominator."""

    __slots__ = ("field", "num", "den")

    def __init__(self, field_obj, num, den=(1,)):
        if isinstance(num, FqPoly):
            num = num.c
        if isinstance(den, FqPoly):
            den = den.c
        num = pnormalize(num)
        den = pnormalize(den)
        if not den:
            raise ZeroDivisionError("denominator is zero")
        if num:
            g = pgcd(field_obj, num, den)
            if pdeg(g) > 0:
                num = pdivmod(field_obj, num, g)[0]
                den = pdivmod(field_obj, den, g)[0]
            u = field_obj.inv(den[-1])
            num = pscale(field_obj, num, u)
            den = pscale(field_obj, den, u)
        else:
            den = (1,)
        self.field = field_obj
        self.num = num
        self.den = den

    @classmethod
    def from_poly(cls, f: FqPoly):
        return cls(f.field, f.c)

    def is_zero(self):
        return not self.num

    def is_constant(self):
        return pdeg(self.num) <= 0 and pdeg(self.den) == 0

    def v_infinity(self):
        """Valuation at the place 1/T: deg(den) - deg(num)."""
        if not self.num:
            raise ValueError("valuation of 0")
        return pdeg(self.den) - pdeg(self.num)

    def v_at(self, P: FqPoly):
        if not self.num:
            raise ValueError("valuation of 0")
        F = self.field
        return pvaluation(F, self.num, P.c) - pvaluation(F, self.den, P.c)

    def __add__(self, other):
        other = self._coerce(other)
        F = self.field
        num = padd(F, pmul(F, self.num, other.den), pmul(F, other.num, self.den))
        return RationalFunction(F, num, pmul(F, self.den, other.den))

    def __neg__(self):
        return RationalFunction(self.field, pneg(self.field, self.num), self.den)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        other = self._coerce(other)
        F = self.field
        return RationalFunction(F, pmul(F, self.num, other.num), pmul(F, self.den, other.den))

    def __truediv__(self, other):
        other = self._coerce(other)
        if not other.num:
            raise ZeroDivisionError
        F = self.field
        return RationalFunction(F, pmul(F, self.num, other.den), pmul(F, self.den, other.num))

    def _coerce(self, other):
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, FqPoly):
            return RationalFunction(self.field, other.c)
        raise TypeError(f"cannot coerce {other!r}")

    def __eq__(self, other):
        return (
            isinstance(other, RationalFunction)
            and other.num == self.num
            and other.den == self.den
        )

    def __hash__(self):
        return hash((self.field.q, self.num, self.den))

    def __str__(self):
        if self.den == (1,):
            return format_poly(self.num)
        return f"({format_poly(self.num)})/({format_poly(self.den)})"

    __repr__ = __str__


class P1Point:
    """Point of P^1(K): coprime pair (num, den), den monic, or (1, 0) for infinity."""

    __slots__ = ("field", "num", "den")

    def __init__(self, field_obj, num, den):
        if isinstance(num, FqPoly):
            num = num.c
        if isinstance(den, FqPoly):
            den = den.c
        num = pnormalize(num)
        den = pnormalize(den)
        if not num and not den:
            raise ValueError("(0 : 0) is not a projective point")
        if not den:
            num = (1,)
        else:
            g = pgcd(field_obj, num, den) if num else den
            if pdeg(g) > 0:
                num = pdivmod(field_obj, num, g)[0] if num else num
                den = pdivmod(field_obj, den, g)[0]
            u = field_obj.inv(den[-1])
            num = pscale(field_obj, num, u)
            den = pscale(field_obj, den, u)
        self.field = field_obj
        self.num = num
        self.den = den

    @classmethod
    def infinity(cls, field_obj):
        return cls(field_obj, (1,), ())

    @classmethod
    def from_rational(cls, x: RationalFunction):
        return cls(x.field, x.num, x.den)

    @classmethod
    def parse(cls, s, field_obj):
        s = s.strip()
        if s in ("inf", "infinity", "oo"):
            return cls.infinity(field_obj)
        if "/" in s:
            a, b = s.split("/")
            return cls(field_obj, parse_poly(a, field_obj), parse_poly(b, field_obj))
        return cls(field_obj, parse_poly(s, field_obj), (1,))

    def is_infinity(self):
        return not self.den

    def as_rational(self):
        if self.is_infinity():
            raise ValueError("infinity is not in K")
        return RationalFunction(self.field, self.num, self.den)

    def sort_key(self):
        if self.is_infinity():
            return (0, 0, (), 0, ())
        return (1, len(self.den), tuple(reversed(self.den)), len(self.num), tuple(reversed(self.num)))

    def __eq__(self, other):
        return isinstance(other, P1Point) and other.num == self.num and other.den == self.den

    def __hash__(self):
        return hash((self.field.q, self.num, self.den))

    def __str__(self):
        if self.is_infinity():
            return "inf"
        if self.den == (1,):
            return format_poly(self.num)
        n = format_poly(self.num)
        d = format_poly(self.den)
        if len(self.num) > 1:
            n = f"({n})"
        if sum(1 for c in self.den if c) > 1:
            d = f"({d})"
        return f"{n}/{d}"

    __repr__ = __str__


def matrix_apply_p1(mat, s: P1Point) -> P1Point:
    """Fractional linear action of a polynomial matrix on P^1(K)."""
    F = s.field
    a, b, c, d = mat
    if isinstance(a, FqPoly):
        a, b, c, d = a.c, b.c, c.c, d.c
    num = padd(F, pmul(F, a, s.num), pmul(F, b, s.den))
    den = padd(F, pmul(F, c, s.num), pmul(F, d, s.den))
    return P1Point(F, num, den)


def mat_mul(F, m1, m2):
    a1, b1, c1, d1 = m1
    a2, b2, c2, d2 = m2
    return (
        padd(F, pmul(F, a1, a2), pmul(F, b1, c2)),
        padd(F, pmul(F, a1, b2), pmul(F, b1, d2)),
        padd(F, pmul(F, c1, a2), pmul(F, d1, c2)),
        padd(F, pmul(F, c1, b2), pmul(F, d1, d2)),
    )


def mat_det(F, m):
    a, b, c, d = m
    return psub(F, pmul(F, a, d), pmul(F, b, c))


def mat_inv_unit(F, m):
    """Inverse of a GL_2(A) matrix with unit determinant, up to nothing: exact."""
    a, b, c, d = m
    det = mat_det(F, m)
    if pdeg(det) != 0:
        raise ValueError("matrix determinant is not a unit")
    u = F.inv(det[0])
    return (
        pscale(F, d, u),
        pscale(F, pneg(F, b), u),
        pscale(F, pneg(F, c), u),
        pscale(F, a, u),
    )


def norm_fraction(q, exp):
    """The q-power q**exp as an exact Fraction."""
    if exp >= 0:
        return Fraction(q**exp)
    return Fraction(1, q**(-exp))
