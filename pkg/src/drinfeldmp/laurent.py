"""Precision-tracked Laurent series in pi = 1/T over F_q or F_{q^2}.

A series carries its valuation, a digit window, and an absolute precision N
(the value is known modulo pi^N). Exact values use a large precision
sentinel. Arithmetic propagates precision pessimistically:
N(x+y) = min(Nx, Ny) and N(x*y) = min(Nx + v(y), Ny + v(x)).
"""

from __future__ import annotations

from fractions import Fraction

from .ff import Fq, FqQuad, RationalFunction, pdeg, pnormalize

INF_PREC = 10**9


def _is_exact(prec):
    return prec >= INF_PREC // 2


class PrecisionError(ArithmeticError):
    pass


class Laurent:
    """One Laurent number: field, valuation, digit tuple, absolute precision.

    Invariants: prec = val + len(digits) unless exact (then trailing zeros are
    stripped and prec = INF_PREC); a nonzero number has digits[0] != 0; a
    number that is zero at its precision has digits = () and val = prec.
    """

    __slots__ = ("field", "val", "digits", "prec")

    def __init__(self, field, val, digits, prec):
        self.field = field
        self.val = val
        self.digits = digits
        self.prec = prec

    # construction --------------------------------------------------------
    @classmethod
    def make(cls, field, val, digits, prec=INF_PREC):
        digits = list(digits)
        if _is_exact(prec):
            prec = INF_PREC
            while digits and digits[-1] == 0:
                digits.pop()
        else:
            want = prec - val
            if want <= 0:
                return cls(field, prec, (), prec)
            if len(digits) > want:
                digits = digits[:want]
            elif _is_exact(0) is False and len(digits) < want:
                digits = digits + [0] * (want - len(digits))
        k = 0
        while k < len(digits) and digits[k] == 0:
            k += 1
        if k == len(digits):
            if _is_exact(prec):
                return cls(field, INF_PREC, (), INF_PREC)
            return cls(field, prec, (), prec)
        return cls(field, val + k, tuple(digits[k:]), prec)

    @classmethod
    def zero(cls, field, prec=INF_PREC):
        p = INF_PREC if _is_exact(prec) else prec
        return cls(field, p, (), p)

    @classmethod
    def one(cls, field):
        return cls(field, 0, (1,), INF_PREC)

    @classmethod
    def pi_power(cls, field, k):
        return cls(field, k, (1,), INF_PREC)

    @classmethod
    def from_poly(cls, field, coeffs):
        """Exact image of a polynomial in T = 1/pi."""
        coeffs = pnormalize(coeffs)
        if not coeffs:
            return cls.zero(field)
        d = len(coeffs) - 1
        return cls.make(field, -d, list(reversed(coeffs)), INF_PREC)

    @classmethod
    def from_digit_dict(cls, field, dd, prec=INF_PREC):
        if not dd:
            return cls.zero(field, prec)
        lo = min(dd)
        hi = max(dd)
        digits = [dd.get(i, 0) for i in range(lo, hi + 1)]
        return cls.make(field, lo, digits, prec)

    # predicates ----------------------------------------------------------
    def is_exact(self):
        return _is_exact(self.prec)

    def is_zero(self):
        """Zero at the available precision (exact zero has prec = INF)."""
        return not self.digits

    def is_exact_zero(self):
        return not self.digits and self.is_exact()

    # reads ----------------------------------------------------------------
    def norm_exp(self):
        """log_q |x| = -valuation. Raises for a zero-at-precision value."""
        if not self.digits:
            if self.is_exact():
                raise ValueError("norm of exact zero is 0, not a q-power")
            raise PrecisionError("norm indeterminate: zero at precision")
        return -self.val

    def digit(self, i):
        """Coefficient of pi^i; raises if i is beyond the known precision."""
        if i >= self.prec:
            raise PrecisionError(f"digit pi^{i} beyond precision {self.prec}")
        if not self.digits or i < self.val:
            return 0
        k = i - self.val
        return self.digits[k] if k < len(self.digits) else 0

    def digit_dict(self):
        return {self.val + i: c for i, c in enumerate(self.digits) if c}

    # arithmetic ------------------------------------------------------------
    def _promote(self, other):
        if self.field == other.field:
            return self, other
        f1, f2 = self.field, other.field
        if isinstance(f2, FqQuad) and f2.base == f1:
            return Laurent(f2, self.val, self.digits, self.prec), other
        if isinstance(f1, FqQuad) and f1.base == f2:
            return self, Laurent(f1, other.val, other.digits, other.prec)
        raise TypeError("incompatible coefficient fields")

    def __add__(self, other):
        a, b = self._promote(other)
        F = a.field
        prec = min(a.prec, b.prec)
        if not a.digits and not b.digits:
            return Laurent.zero(F, prec)
        if not a.digits:
            return Laurent.make(F, b.val, list(b.digits), prec)
        if not b.digits:
            return Laurent.make(F, a.val, list(a.digits), prec)
        lo = min(a.val, b.val)
        hi = max(a.val + len(a.digits), b.val + len(b.digits))
        if not _is_exact(prec):
            hi = min(hi, prec)
        out = [0] * (hi - lo)
        for i, c in enumerate(a.digits):
            k = a.val + i - lo
            if k < len(out):
                out[k] = c
        ADD, q = F.ADD, F.q
        for i, c in enumerate(b.digits):
            k = b.val + i - lo
            if k < len(out):
                out[k] = ADD[out[k] * q + c]
        return Laurent.make(F, lo, out, prec)

    def __neg__(self):
        NEG = self.field.NEG
        return Laurent(self.field, self.val, tuple(NEG[c] for c in self.digits), self.prec)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        a, b = self._promote(other)
        F = a.field
        if not a.digits or not b.digits:
            # N(x*y) = min(Nx + v(y), Ny + v(x)) with v read as N for a zero
            va = a.val if a.digits else a.prec
            vb = b.val if b.digits else b.prec
            if a.is_exact_zero() or b.is_exact_zero():
                return Laurent.zero(F)
            return Laurent.zero(F, min(a.prec + vb, b.prec + va))
        prec = min(a.prec + b.val, b.prec + a.val)
        la, lb = len(a.digits), len(b.digits)
        width = la + lb - 1
        if not _is_exact(prec):
            width = min(width, prec - (a.val + b.val))
        out = [0] * width
        MUL, ADD, q = F.MUL, F.ADD, F.q
        for i, x in enumerate(a.digits):
            if x:
                xq = x * q
                jmax = min(lb, width - i)
                for j in range(jmax):
                    y = b.digits[j]
                    if y:
                        k = i + j
                        out[k] = ADD[out[k] * q + MUL[xq + y]]
        return Laurent.make(F, a.val + b.val, out, prec)

    def inverse(self, prec=None):
        """Multiplicative inverse; relative precision is preserved.

        For exact inputs a target precision must be given unless the input is
        a single pi-power times a unit.
        """
        if not self.digits:
            raise PrecisionError("cannot invert a value that is zero at precision")
        F = self.field
        rel = self.prec - self.val if not self.is_exact() else None
        if prec is not None:
            want = prec + self.val  # relative digits needed for abs prec of inverse
            rel = want if rel is None else min(rel, want)
        if rel is None:
            if len(self.digits) == 1:
                inv0 = F.inv(self.digits[0])
                return Laurent(F, -self.val, (inv0,), INF_PREC)
            raise PrecisionError("inverse of a general exact series needs a target precision")
        rel = max(rel, 1)
        # digit-by-digit long division of 1 by self
        d0 = self.digits[0]
        inv0 = F.inv(d0)
        out = [0] * rel
        rem = {0: 1}  # remainder digits, offset relative to self.val
        MUL, ADD, q = F.MUL, F.ADD, F.q
        SUB = F.SUB
        for k in range(rel):
            r = rem.get(k, 0)
            c = MUL[r * q + inv0]
            out[k] = c
            if c:
                for j, dj in enumerate(self.digits):
                    if dj and k + j < rel + 1:
                        t = k + j
                        rem[t] = SUB[rem.get(t, 0) * q + MUL[c * q + dj]]
        return Laurent.make(F, -self.val, out, -self.val + rel)

    def __truediv__(self, other):
        a, b = self._promote(other)
        target = None
        if a.is_exact() and b.is_exact():
            target = None if len(b.digits) <= 1 else INF_PREC
        if target is INF_PREC:
            raise PrecisionError("exact division with infinite tail needs truncation")
        return a * b.inverse()

    def div(self, other, prec):
        """Division truncated to absolute precision prec."""
        a, b = self._promote(other)
        if a.is_zero():
            return Laurent.zero(a.field, prec)
        inv = b.inverse(prec=prec - a.val)
        return (a * inv).truncate(prec)

    def power(self, k):
        if k == 0:
            return Laurent.one(self.field)
        base = self if k > 0 else self.inverse()
        k = abs(k)
        out = None
        while k:
            if k & 1:
                out = base if out is None else out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def truncate(self, prec):
        """Forget digits at and beyond pi^prec."""
        if prec >= self.prec:
            return self
        return Laurent.make(self.field, self.val if self.digits else prec,
                            list(self.digits), prec)

    def truncate_exact(self, cutoff):
        """Exact value with digits below pi^cutoff only (reduction mod pi^cutoff O)."""
        if not self.is_exact() and self.prec < cutoff:
            raise PrecisionError(
                f"digits below pi^{cutoff} not fully known (precision {self.prec})"
            )
        prefix = list(self.digits[: max(0, cutoff - self.val)])
        if not prefix:
            return Laurent.zero(self.field)
        return Laurent.make(self.field, self.val, prefix, INF_PREC)

    def shift(self, k):
        """Multiply by pi^k."""
        if not self.digits:
            return Laurent.zero(self.field, self.prec + k if not self.is_exact() else INF_PREC)
        return Laurent(self.field, self.val + k, self.digits,
                       self.prec + k if not self.is_exact() else INF_PREC)

    # comparisons -----------------------------------------------------------
    def agrees_with(self, other, upto=None):
        """Equality of all digits below min(precisions, upto)."""
        a, b = self._promote(other)
        lim = min(a.prec, b.prec)
        if upto is not None:
            lim = min(lim, upto)
        d = a - b
        return d.is_zero() or d.val >= lim

    def __eq__(self, other):
        if not isinstance(other, Laurent):
            return NotImplemented
        a, b = self._promote(other)
        return (a.val, a.digits, a.prec) == (b.val, b.digits, b.prec)

    def __hash__(self):
        return hash((self.val, self.digits, self.prec))

    # text / JSON -------------------------------------------------------------
    def __str__(self):
        parts = []
        for i, c in enumerate(self.digits):
            if not c:
                continue
            e = self.val + i
            if e == 0:
                parts.append(str(c))
            else:
                pi = "pi" if e == 1 else f"pi^{e}"
                parts.append(pi if c == 1 else f"{c}*{pi}")
        if not self.is_exact():
            parts.append(f"O(pi^{self.prec})")
        if not parts:
            return "0"
        return " + ".join(parts)

    __repr__ = __str__

    def to_json(self):
        return {
            "valuation": self.val if self.digits else None,
            "coeffs": list(self.digits),
            "precision": None if self.is_exact() else self.prec,
        }

    @classmethod
    def from_json(cls, field, obj):
        prec = obj["precision"]
        prec = INF_PREC if prec is None else prec
        if not obj["coeffs"]:
            return cls.zero(field, prec)
        return cls.make(field, obj["valuation"], obj["coeffs"], prec)


def parse_series(s, field):
    """Parse the text format "pi^4 + 2*pi^5 + O(pi^6)" back into a Laurent."""
    s = s.strip()
    if s == "0":
        return Laurent.zero(field)
    prec = INF_PREC
    dd = {}
    for term in s.replace("-", "+-").split("+"):
        term = term.strip()
        if not term:
            continue
        neg = term.startswith("-")
        if neg:
            term = term[1:].strip()
        if term.startswith("O("):
            inner = term[2:-1]
            prec = _parse_pi_power(inner)
            continue
        if "*" in term:
            c_s, p_s = term.split("*")
            c = int(c_s)
            e = _parse_pi_power(p_s)
        elif term.startswith("pi"):
            c = 1
            e = _parse_pi_power(term)
        else:
            c = int(term)
            e = 0
        c %= field.q
        if neg:
            c = field.neg(c)
        dd[e] = field.add(dd.get(e, 0), c)
    return Laurent.from_digit_dict(field, dd, prec)


def _parse_pi_power(s):
    s = s.strip()
    if s == "pi":
        return 1
    if s.startswith("pi^"):
        return int(s[3:])
    raise ValueError(f"cannot parse pi power {s!r}")


def from_rational(x: RationalFunction, N: int) -> Laurent:
    """Expansion of x in powers of pi; exact when the denominator is c*T^k."""
    F = x.field
    if not x.num:
        return Laurent.zero(F)
    num = Laurent.from_poly(F, x.num)
    den = x.den
    nontrivial = sum(1 for c in den if c) > 1
    if not nontrivial:
        # den = T^k after canonicalization
        return num.shift(len(den) - 1)
    denl = Laurent.from_poly(F, den)
    return num.div(denl, N)


def from_p1(s, N):
    from .ff import P1Point

    assert isinstance(s, P1Point) and not s.is_infinity()
    return from_rational(s.as_rational(), N)


class OmegaPoint:
    """Point z = a + b*rho of the quadratic upper half-plane slice.

    Stored as a single series over F_{q^2}; the imaginary norm |z|_i is the
    norm of the rho-component b, which must not vanish at precision.
    """

    __slots__ = ("field2", "z")

    def __init__(self, field2: FqQuad, z: Laurent):
        if z.field != field2:
            z = Laurent(field2, z.val, z.digits, z.prec)
        self.field2 = field2
        self.z = z
        if self.b_series().is_zero():
            raise ValueError("rho-component vanishes: point lies in K_infinity")

    @classmethod
    def from_components(cls, field2, a: Laurent, b: Laurent):
        q = field2.base.q
        prec = min(a.prec, b.prec)
        dd = {}
        for i, c in a.digit_dict().items():
            dd[i] = c
        for i, c in b.digit_dict().items():
            dd[i] = field2.add(dd.get(i, 0), q * c)
        return cls(field2, Laurent.from_digit_dict(field2, dd, prec))

    def _component(self, which):
        q = self.field2.base.q
        base = self.field2.base
        dd = {}
        for i, c in self.z.digit_dict().items():
            u, v = c % q, c // q
            val = u if which == 0 else v
            if val:
                dd[i] = val
        out = Laurent.from_digit_dict(base, dd, self.z.prec)
        return out

    def a_series(self):
        return self._component(0)

    def b_series(self):
        return self._component(1)

    def norm_exp(self):
        return self.z.norm_exp()

    def im_exp(self):
        return self.b_series().norm_exp()

    def __str__(self):
        return f"OmegaPoint({self.z})"


def standard_omega(q) -> OmegaPoint:
    """omega = T^{-2} * rho, the reference interior point."""
    F2 = __import__("drinfeldmp.ff", fromlist=["quad_field"]).quad_field(q)
    z = Laurent.make(F2, 2, [F2.rho], INF_PREC)
    return OmegaPoint(F2, z)


def norm(z) -> Fraction:
    """|z| as an exact power of q (Fraction); 0 for an exact zero."""
    if isinstance(z, OmegaPoint):
        q = z.field2.base.q
        return _qpow(q, -z.z.val)
    if isinstance(z, Laurent):
        if z.is_exact_zero():
            return Fraction(0)
        qf = z.field
        q = qf.base.q if isinstance(qf, FqQuad) else qf.q
        return _qpow(q, z.norm_exp())
    raise TypeError


def im_norm(z: OmegaPoint) -> Fraction:
    q = z.field2.base.q
    return _qpow(q, -z.b_series().val)


def _qpow(q, e):
    return Fraction(q**e) if e >= 0 else Fraction(1, q**(-e))


def mobius_apply(mat, z: OmegaPoint) -> OmegaPoint:
    """(a z + b) / (c z + d) for a polynomial matrix acting on Omega."""
    F2 = z.field2
    a, b, c, d = (_poly_laurent(F2, x) for x in mat)
    num = a * z.z + b
    den = c * z.z + d
    if den.is_zero():
        raise PrecisionError("c*z + d vanishes at the working precision")
    rel = den.prec - den.val if not den.is_exact() else None
    target = num.prec - den.val if not num.is_exact() else None
    if target is None and rel is None:
        # both exact: pick enough digits to stay exact only if den is a pi-power
        if len(den.digits) == 1:
            return OmegaPoint(F2, num * den.inverse())
        raise PrecisionError("exact Moebius image needs a working precision on z")
    prec = min(x for x in (target, (num.val - den.val) + rel if rel else None) if x is not None)
    return OmegaPoint(F2, num.div(den, prec))


def _poly_laurent(F2, x):
    if isinstance(x, Laurent):
        return x
    coeffs = x.c if hasattr(x, "c") else x
    return Laurent.from_poly(F2, coeffs)
