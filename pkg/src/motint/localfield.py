"""Concrete local fields at desk scale: p-adic numbers and Laurent series.

Elements are uniformizer expansions; an element is either exact (a
rational for the p-adic field, a finite Laurent polynomial over F_p for
the series field) or a digit window ``[v, v+N)`` with pessimistic
precision tracking.  The additive characters implemented are the family
agreeing with ``exp(2*pi*i/p * trace(residue))`` on the valuation ring:
a canonical member together with twists by characters trivial on the
ring, parameterized by a twist element read modulo its support depth.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction

from .linform import OrdKey
from .presburger import Cmp, ModEq
from .expr import CosetIn, ResEq, ResNeq
from .terms import VTerm


class ZeroAtPrecision(ArithmeticError):
    """ord/ac requested on an element that vanishes at its precision."""


class InsufficientPrecision(ArithmeticError):
    pass


class HenselCapExceeded(ValueError):
    pass


MAX_P = 1 << 20


@dataclass(frozen=True)
class LocalField:
    kind: str  # 'qp' | 'fpt'
    p: int

    def __post_init__(self):
        if self.p < 2 or self.p > MAX_P:
            raise ValueError(f"residue characteristic {self.p} out of range")
        for d in range(2, min(self.p, 1000)):
            if d * d > self.p:
                break
            if self.p % d == 0:
                raise ValueError(f"{self.p} is not prime")

    def describe(self):
        return {"kind": self.kind, "p": self.p}

    def __str__(self):
        return f"Q_{self.p}" if self.kind == "qp" else f"F_{self.p}((t))"


def _vp(n, p):
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True)
class PadicElement:
    """One element: exact payload or a digit window.

    Exact p-adic elements carry a Fraction; exact series elements carry
    a tuple of (exponent, digit) pairs.  Windowed elements carry the
    start valuation and the digit tuple; the element is known modulo
    the uniformizer to the window end only.
    """

    field: LocalField
    exact: bool
    payload: object  # Fraction | tuple[(k, digit)] | (v, digits)

    # ---- constructors -------------------------------------------------------

    @staticmethod
    def from_rational(field, q):
        q = Fraction(q)
        if field.kind == "qp":
            return PadicElement(field, True, q)
        if q == 0:
            return PadicElement(field, True, ())
        a, b = q.numerator, q.denominator
        if b % field.p == 0:
            raise ZeroDivisionError(f"{q} has no residue mod {field.p}")
        d = (a * pow(b, -1, field.p)) % field.p
        return PadicElement(field, True, ((0, d),) if d else ())

    @staticmethod
    def from_wpoly(field, w):
        """Exact element from a uniformizer Laurent polynomial."""
        return _from_wpoly_cached(field, tuple(w))

    @staticmethod
    def _from_wpoly_direct(field, w):
        if field.kind == "qp":
            total = Fraction(0)
            for k, c in w:
                total += Fraction(c) * Fraction(field.p) ** k
            return PadicElement(field, True, total)
        out = {}
        for k, c in w:
            c = Fraction(c)
            if c.denominator % field.p == 0:
                raise ZeroDivisionError(f"coefficient {c} has no residue mod {field.p}")
            d = (c.numerator * pow(c.denominator, -1, field.p)) % field.p
            if d:
                out[k] = (out.get(k, 0) + d) % field.p
        return PadicElement(field, True, tuple(sorted((k, d) for k, d in out.items() if d)))

    @staticmethod
    def from_digits(field, v, digits, exact=True):
        """Element from an expansion window starting at valuation v."""
        digits = tuple(int(d) % field.p for d in digits)
        if exact:
            if field.kind == "qp":
                total = Fraction(0)
                for i, d in enumerate(digits):
                    total += d * Fraction(field.p) ** (v + i)
                return PadicElement(field, True, total)
            return PadicElement(field, True,
                                tuple((v + i, d) for i, d in enumerate(digits) if d))
        return PadicElement(field, False, (v, digits))

    @staticmethod
    def zero(field):
        return PadicElement(field, True, Fraction(0) if field.kind == "qp" else ())

    # ---- inspection ---------------------------------------------------------

    def is_exact_zero(self):
        if not self.exact:
            return False
        return self.payload == 0 if self.field.kind == "qp" else not self.payload

    def ord(self):
        """Valuation; None for the exact zero, error for windowed zero."""
        if self.exact:
            if self.is_exact_zero():
                return None
            if self.field.kind == "qp":
                q = self.payload
                return _vp(q.numerator, self.field.p) - _vp(q.denominator, self.field.p)
            return min(k for k, _ in self.payload)
        v, digits = self.payload
        for i, d in enumerate(digits):
            if d:
                return v + i
        raise ZeroAtPrecision(f"zero at precision {v + len(digits)}")

    def ac(self):
        """Leading expansion digit; 0 for the exact zero."""
        if self.is_exact_zero():
            return 0
        return self.digit(self.ord())

    def digit(self, i):
        """The base-p digit at uniformizer exponent i."""
        p = self.field.p
        if self.exact:
            if self.field.kind == "fpt":
                return dict(self.payload).get(i, 0)
            q = self.payload
            if q == 0:
                return 0
            v = self.ord()
            if i < v:
                return 0
            # digit of the unit part u = q / p^v at position i - v
            u = q / Fraction(p) ** v
            k = i - v + 1
            val = (u.numerator * pow(u.denominator, -1, p ** k)) % p ** k
            return (val // p ** (i - v)) % p
        v, digits = self.payload
        if i < v:
            return 0
        if i >= v + len(digits):
            raise InsufficientPrecision(f"digit {i} beyond window end {v + len(digits)}")
        return digits[i - v]

    def prec_end(self):
        """First uniformizer exponent whose digit is unknown (None=exact)."""
        if self.exact:
            return None
        v, digits = self.payload
        return v + len(digits)

    def window(self, lo, hi):
        return tuple(self.digit(i) for i in range(lo, hi))

    def to_rational(self):
        """Exact p-adic payload as a rational (qp only)."""
        if self.field.kind != "qp" or not self.exact:
            raise ValueError("rational value available for exact p-adic elements only")
        return self.payload

    # ---- arithmetic ---------------------------------------------------------

    def _as_window(self, lo, hi):
        return [self.digit(i) for i in range(lo, hi)]

    def __add__(self, other):
        other = self._coerce(other)
        f = self.field
        if self.exact and other.exact:
            if f.kind == "qp":
                return PadicElement(f, True, self.payload + other.payload)
            d = dict(self.payload)
            for k, c in other.payload:
                d[k] = (d.get(k, 0) + c) % f.p
            return PadicElement(f, True, tuple(sorted((k, c) for k, c in d.items() if c)))
        lo = min(x for x in (self._lo(), other._lo()))
        hi = min(x for x in (self._hi(), other._hi()))
        if hi <= lo:
            return PadicElement(f, False, (hi, ()))
        a = self._as_window(lo, hi)
        b = other._as_window(lo, hi)
        if f.kind == "fpt":
            digits = [(x + y) % f.p for x, y in zip(a, b)]
        else:
            digits, carry = [], 0
            for x, y in zip(a, b):
                s = x + y + carry
                digits.append(s % f.p)
                carry = s // f.p
        return PadicElement(f, False, (lo, tuple(digits)))._trim()

    def __neg__(self):
        f = self.field
        if self.exact:
            if f.kind == "qp":
                return PadicElement(f, True, -self.payload)
            return PadicElement(f, True, tuple((k, (-c) % f.p) for k, c in self.payload))
        v, digits = self.payload
        if f.kind == "fpt":
            return PadicElement(f, False, (v, tuple((-d) % f.p for d in digits)))
        out, borrow = [], 0
        for d in digits:
            s = -d - borrow
            out.append(s % f.p)
            borrow = 1 if d + borrow > 0 else 0
        return PadicElement(f, False, (v, tuple(out)))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        other = self._coerce(other)
        f = self.field
        if self.exact and other.exact:
            if f.kind == "qp":
                return PadicElement(f, True, self.payload * other.payload)
            d = {}
            for k1, c1 in self.payload:
                for k2, c2 in other.payload:
                    k = k1 + k2
                    d[k] = (d.get(k, 0) + c1 * c2) % f.p
            return PadicElement(f, True, tuple(sorted((k, c) for k, c in d.items() if c)))
        try:
            va = self.ord()
            vb = other.ord()
        except ZeroAtPrecision:
            ends = [self._hi(), other._hi()]
            lo2 = min(self._lo(), other._lo())
            return PadicElement(f, False, (min(e + lo2 for e in ends), ()))
        if va is None or vb is None:
            return PadicElement.zero(f)
        hi = min(self._hi() + vb, other._hi() + va)
        lo = va + vb
        digits = [0] * (hi - lo)
        for i in range(va, min(self._hi(), hi - vb)):
            di = self.digit(i)
            if not di:
                continue
            for k in range(vb, min(other._hi(), hi - i)):
                pos = i + k - lo
                if 0 <= pos < len(digits):
                    digits[pos] += di * other.digit(k)
        if f.kind == "fpt":
            digits = [d % f.p for d in digits]
        else:
            carry = 0
            for idx in range(len(digits)):
                s = digits[idx] + carry
                digits[idx] = s % f.p
                carry = s // f.p
        return PadicElement(f, False, (lo, tuple(digits)))._trim()

    def __pow__(self, n):
        out = PadicElement.from_rational(self.field, 1)
        for _ in range(n):
            out = out * self
        return out

    def _coerce(self, other):
        if isinstance(other, PadicElement):
            if other.field != self.field:
                raise ValueError("mixed fields")
            return other
        return PadicElement.from_rational(self.field, other)

    def _lo(self):
        if self.exact:
            o = self.ord()
            return 0 if o is None else o
        return self.payload[0]

    def _hi(self):
        if self.exact:
            return 1 << 30
        v, digits = self.payload
        return v + len(digits)

    def _trim(self):
        if self.exact:
            return self
        v, digits = self.payload
        i = 0
        while i < len(digits) and digits[i] == 0:
            i += 1
        return PadicElement(self.field, False, (v + i, digits[i:]))

    def truncate(self, end):
        """Forget digits at positions >= end (a strictly coarser element)."""
        lo = self._lo()
        if end <= lo:
            return PadicElement(self.field, False, (end, ()))
        return PadicElement(self.field, False, (lo, self.window(lo, end)))._trim()

    def __str__(self):
        if self.is_exact_zero():
            return "0"
        try:
            v = self.ord()
        except ZeroAtPrecision:
            return f"O(w^{self.prec_end()})"
        hi = self.prec_end()
        show = min(v + 8, hi) if hi is not None else v + 8
        digits = self.window(v, show)
        tail = "..." if (hi is None or hi > show) else ""
        unc = f" + O(w^{hi})" if hi is not None else ""
        return f"w^{v}*[{','.join(map(str, digits))}{tail}]{unc}"

    __repr__ = __str__


from functools import lru_cache


@lru_cache(maxsize=4096)
def _from_wpoly_cached(field, w):
    return PadicElement._from_wpoly_direct(field, w)


@lru_cache(maxsize=4096)
def coeff_at(c, p):
    """Cached exact specialization of a ring coefficient at L = p."""
    return c.specialize(p)


# ---------------------------------------------------------------------------
# m-th power membership and Hensel exponents.
# ---------------------------------------------------------------------------

def hensel_exponent(field, m, cap=64):
    """Least e >= 1 with every unit ≡ 1 mod w^e an m-th power."""
    m = int(m)
    if m < 1:
        raise ValueError("power index must be >= 1")
    if m == 1:
        return 1
    p = field.p
    if m % p:
        return 1
    if field.kind == "fpt":
        raise HenselCapExceeded(
            f"p-th power units are nowhere dense in characteristic {p}"
        )
    s = _vp(m, p)
    e = s + 2 if p == 2 else s + 1
    if e > cap:
        raise HenselCapExceeded(f"exponent {e} above cap {cap}")
    return e


def _unit_power_residues(field, m):
    """Unit residues mod w^E that are m-th powers, with E = 2*ord(m)+2."""
    p = field.p
    s = 0 if m % p else _vp(m, p)
    E = 2 * s + 2
    if field.kind == "fpt":
        E = 2
    mod = p ** E
    out = set()
    if field.kind == "qp":
        for x in range(1, mod):
            if x % p:
                out.add(pow(x, m, mod))
    else:
        # residues are pairs of digits (a0, a1), a0 != 0
        for a0 in range(1, p):
            for a1 in range(p):
                y = {0: a0, 1: a1}
                prod = {0: 1}
                for _ in range(m):
                    nxt = {}
                    for k1, c1 in prod.items():
                        for k2, c2 in y.items():
                            if k1 + k2 < 2:
                                nxt[k1 + k2] = (nxt.get(k1 + k2, 0) + c1 * c2) % p
                    prod = nxt
                out.add((prod.get(0, 0), prod.get(1, 0)))
    return E, out


_POWER_CACHE = {}


def is_mth_power(x, m):
    """Whether the exact nonzero element is an m-th power in the field."""
    if not x.exact:
        raise InsufficientPrecision("power membership needs an exact element")
    if x.is_exact_zero():
        return False
    m = int(m)
    if m == 1:
        return True
    field = x.field
    p = field.p
    v = x.ord()
    if v % m:
        return False
    if field.kind == "fpt" and m % p == 0:
        s = _vp(m, p)
        q = p ** s
        # x must be supported on q-divisible exponents; descend via the
        # inverse Frobenius twist (coefficients are fixed by it over F_p)
        if any(k % q for k, _ in x.payload):
            return False
        down = PadicElement(field, True, tuple((k // q, c) for k, c in x.payload))
        return is_mth_power(down, m // q)
    key = (field.kind, p, m)
    if key not in _POWER_CACHE:
        _POWER_CACHE[key] = _unit_power_residues(field, m)
    E, allowed = _POWER_CACHE[key]
    if field.kind == "qp":
        u = x.to_rational() / Fraction(p) ** v
        a, b = u.numerator, u.denominator
        r = (a * pow(b, -1, p ** E)) % p ** E
        return r in allowed
    d = dict((k - v, c) for k, c in x.payload)
    return (d.get(0, 0) % p, d.get(1, 0) % p) in allowed


def in_coset(x, lam, m):
    """Membership x ∈ lam * (m-th powers)."""
    if lam.is_exact_zero():
        raise ZeroDivisionError("coset with zero scaling")
    if x.is_exact_zero():
        return False
    if x.field.kind == "qp":
        quot = PadicElement(x.field, True, x.to_rational() / lam.to_rational())
        return is_mth_power(quot, m)
    # series division: multiply by the inverse expansion to enough depth
    vl = lam.ord()
    depth = max(4, 2 * _vp(m, x.field.p) + 2 + 2)
    inv = _fpt_invert(lam, depth)
    quot = x * inv
    # quot is exact enough: membership uses finitely many digits
    return is_mth_power(_fpt_exactify(quot, x.ord() - vl + depth), m)


def _fpt_invert(lam, depth):
    """Exact inverse of a series element to the given digit depth."""
    p = lam.field.p
    v = lam.ord()
    d = {k - v: c for k, c in lam.payload}
    a0inv = pow(d[0], -1, p)
    inv = {0: a0inv}
    for k in range(1, depth + 1):
        s = 0
        for i in range(1, k + 1):
            s += d.get(i, 0) * inv.get(k - i, 0)
        inv[k] = (-a0inv * s) % p
    return PadicElement(lam.field, True,
                        tuple(sorted((k - v, c) for k, c in inv.items() if c)))


def _fpt_exactify(x, end):
    if x.exact:
        return x
    v, digits = x.payload
    return PadicElement(x.field, True,
                        tuple((v + i, d) for i, d in enumerate(digits) if d and v + i < end))


# ---------------------------------------------------------------------------
# Characters.
# ---------------------------------------------------------------------------

TWO_PI_I = 2j * cmath.pi


@dataclass(frozen=True)
class CharacterSpec:
    """A character of the standard family: canonical member times the
    twist ``psi_0(c*x)`` with psi_0 trivial on the valuation ring.  Only
    ``c`` modulo w^depth matters for integrands supported in
    ord >= -depth."""

    field: LocalField
    twist: PadicElement  # ord >= 0 (or exact zero)
    depth: int = 0

    @staticmethod
    def canonical(field):
        return CharacterSpec(field, PadicElement.zero(field), 0)

    @staticmethod
    def from_digits(field, digits):
        digits = tuple(digits)
        return CharacterSpec(field, PadicElement.from_digits(field, 0, digits), len(digits))

    def describe(self):
        d = self.twist
        if d.is_exact_zero():
            return {"twist": "0", "depth": self.depth}
        return {"twist": str(self.twist), "depth": self.depth}


def _frac_part_qp(q, p):
    """Fractional part of a rational in Z[1/p] ∩ [0,1) modulo Z."""
    s = _vp(q.denominator, p)
    if s == 0:
        return Fraction(0)
    scale = p ** s
    b = q.denominator // scale
    num = (q.numerator * pow(b, -1, scale)) % scale
    return Fraction(num, scale)


def psi_eval(ch, x):
    """Value of the character at an element, as a complex unit.

    The canonical p-adic member is exp(2*pi*i*{x/p}) with {.} the p-adic
    fractional part; the series member is exp(2*pi*i/p * sum of digits
    at nonpositive exponents).  Twists multiply by psi_0(c*x).
    """
    f = ch.field
    p = f.p
    if x.is_exact_zero():
        return 1.0 + 0j
    if f.kind == "qp":
        if x.exact:
            total = _frac_part_qp(x.to_rational() / p, p)
            if not ch.twist.is_exact_zero():
                total += _frac_part_qp((ch.twist * x).to_rational(), p)
            return cmath.exp(TWO_PI_I * float(total))
        v = x._lo()
        if x._hi() < 1:
            raise InsufficientPrecision("window must reach the unit digit")
        total = Fraction(0)
        for i in range(v, 1):
            total += x.digit(i) * Fraction(p) ** (i - 1)
        total = _frac_part_qp(total, p) if total.denominator > 1 else Fraction(0)
        val = cmath.exp(TWO_PI_I * float(total))
        if not ch.twist.is_exact_zero():
            y = ch.twist * x
            tw = Fraction(0)
            if y._hi() < 0:
                raise InsufficientPrecision("twist needs digits below the unit digit")
            for i in range(y._lo(), 0):
                tw += y.digit(i) * Fraction(p) ** i
            val *= cmath.exp(TWO_PI_I * float(_frac_part_qp(tw, p)))
        return val
    # series field
    def nonpos_digit_sum(y, shift):
        if y.exact:
            return sum(c for k, c in y.payload if k <= shift) % p
        if y._hi() <= shift:
            raise InsufficientPrecision("window must reach the unit digit")
        return sum(y.digit(i) for i in range(y._lo(), shift + 1)) % p
    total = nonpos_digit_sum(x, 0)
    if not ch.twist.is_exact_zero():
        y = ch.twist * x
        if y.exact:
            total = (total + dict(y.payload).get(-1, 0)) % p
        else:
            total = (total + (y.digit(-1) if y._lo() <= -1 else 0)) % p
    return cmath.exp(TWO_PI_I * total / p)


# ---------------------------------------------------------------------------
# Pointwise interpretation of expressions.
# ---------------------------------------------------------------------------

def eval_vterm(v, K, point, memo=None):
    if memo is not None:
        got = memo.get(("v", v))
        if got is not None:
            return got
    total = PadicElement.zero(K)
    for mono, w in v.monos:
        part = PadicElement.from_wpoly(K, w)
        for name, e in mono:
            part = part * (point[name] ** e)
        total = total + part
    if memo is not None:
        memo[("v", v)] = total
    return total


def _ord_of(v, K, point, memo):
    if memo is not None and ("o", v) in memo:
        return memo[("o", v)]
    got = eval_vterm(v, K, point, memo).ord()
    if memo is not None:
        memo[("o", v)] = got
    return got


def eval_rterm(r, K, point, res_env, memo=None):
    p = K.p
    total = 0
    for mono, c in r.monos:
        if c.denominator % p == 0:
            raise ZeroDivisionError(f"coefficient {c} has no residue mod {p}")
        part = (c.numerator * pow(c.denominator, -1, p)) % p
        for atom, e in mono:
            if atom[0] == "var":
                val = res_env[atom[1]]
            else:
                val = eval_vterm(atom[1], K, point, memo).ac()
            if e < 0:
                if val % p == 0:
                    raise ZeroDivisionError("inverse of a zero residue")
                val = pow(val, -1, p)
                e = -e
            part = part * pow(val, e, p) % p
        total = (total + part) % p
    return total


_INF = float("inf")


def eval_linform(lf, K, point, int_env, memo=None):
    total = Fraction(lf.const)
    inf_weight = 0
    for k, c in lf.coeffs:
        if isinstance(k, OrdKey):
            v = _ord_of(k.term, K, point, memo)  # may raise ZeroAtPrecision
            if v is None:
                inf_weight += 1 if c > 0 else -1
                continue
            total += c * v
        else:
            total += c * int_env[k]
    if inf_weight > 0:
        return _INF
    if inf_weight < 0:
        return -_INF
    return total


def eval_atom(a, K, ch, point, res_env, int_env, memo=None):
    if a is True or a is False:
        return a
    if isinstance(a, (Cmp, ModEq)):
        v = eval_linform(a.lf, K, point, int_env, memo)
        if v in (_INF, -_INF):
            if isinstance(a, ModEq):
                return False
            return {"le": v < 0, "eq": False, "ne": True}[a.op]
        if isinstance(a, Cmp):
            return {"le": v <= 0, "eq": v == 0, "ne": v != 0}[a.op]
        return v % a.n == 0
    if isinstance(a, ResEq):
        return eval_rterm(a.r, K, point, res_env, memo) == 0
    if isinstance(a, ResNeq):
        return eval_rterm(a.r, K, point, res_env, memo) != 0
    if isinstance(a, CosetIn):
        x = eval_vterm(a.v, K, point, memo)
        lam = eval_vterm(a.lam, K, point, memo)
        return in_coset(x, lam, a.m)
    raise TypeError(f"unknown condition {a!r}")


def interpret(e, K, ch, point, int_env=None, res_env=None, opaque=()):
    """Value of the expression at one point, as a complex number.

    ``point`` assigns PadicElements to valued variables; residue
    variables take integers mod p and integer variables integers.
    Free residue sums enumerate the residue field.  Opaque coset
    factors (from partially symbolic integration) multiply in their
    numeric density.
    """
    p = K.p
    int_env = dict(int_env or {})
    res_env = dict(res_env or {})
    memo = {}
    total = 0j
    for t in e.terms:
        coeff = complex(coeff_at(t.coeff, p))
        names = list(t.res_sums)
        assignments = _enumerate_res(names, p)
        for assign in assignments:
            env = dict(res_env)
            env.update(assign)
            okay = True
            for a in t.conds:
                if not eval_atom(a, K, ch, point, env, int_env, memo):
                    okay = False
                    break
            if not okay:
                continue
            le = eval_linform(t.lexp, K, point, int_env, memo)
            if le == -_INF:
                continue  # L^(-inf) = 0 at a vanishing-term point
            if le == _INF:
                raise InsufficientPrecision("exponent diverges at a vanishing term")
            val = coeff * float(p) ** float(le)
            if not t.exp_arg.is_zero():
                val *= psi_eval(ch, eval_vterm(t.exp_arg, K, point, memo))
            if not t.res_arg.is_zero():
                val *= cmath.exp(TWO_PI_I * eval_rterm(t.res_arg, K, point, env, memo) / p)
            total += val
    for fac in opaque:
        total *= coset_density(K, eval_vterm(fac.lam, K, point), fac.m)
    return total


def is_character_free(e):
    return all(t.exp_arg.is_zero() and t.res_arg.is_zero() for t in e.terms)


def interpret_exact(e, K, point, int_env=None, res_env=None, opaque=()):
    """Exact rational value of a character-free expression at one point."""
    p = K.p
    int_env = dict(int_env or {})
    res_env = dict(res_env or {})
    memo = {}
    total = Fraction(0)
    for t in e.terms:
        if not t.exp_arg.is_zero() or not t.res_arg.is_zero():
            raise ValueError("expression carries characters; exact value unavailable")
        coeff = coeff_at(t.coeff, p)
        for assign in _enumerate_res(list(t.res_sums), p):
            env = dict(res_env)
            env.update(assign)
            if not all(eval_atom(a, K, None, point, env, int_env, memo) for a in t.conds):
                continue
            le = eval_linform(t.lexp, K, point, int_env, memo)
            if le == -_INF:
                continue
            if le == _INF or Fraction(le).denominator != 1:
                raise InsufficientPrecision("non-integer exponent at the point")
            total += coeff * Fraction(p) ** int(le)
    for fac in opaque:
        total *= coset_density(K, eval_vterm(fac.lam, K, point), fac.m)
    return total


def _enumerate_res(names, p):
    if not names:
        return [{}]
    out = [{}]
    for n in names:
        out = [dict(d, **{n: v}) for d in out for v in range(p)]
    return out


def coset_density(K, lam, m):
    """Fraction of a unit shell lying in lam * (m-th powers).

    The density is the same on every shell of admissible valuation, so
    it is computed on the shell of ord(lam) by counting unit residues.
    """
    p = K.p
    s = 0 if m % p else _vp(m, p)
    E = 2 * s + 2
    v = lam.ord()
    count = 0
    totalu = 0
    for digits in _unit_windows(p, E):
        u = PadicElement.from_digits(K, v, digits, exact=True)
        totalu += 1
        if in_coset(u, lam, m):
            count += 1
    return Fraction(count, totalu)


def _unit_windows(p, depth):
    import itertools
    for first in range(1, p):
        for rest in itertools.product(range(p), repeat=depth - 1):
            yield (first,) + rest
