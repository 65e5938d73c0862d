"""Exact arithmetic in the coefficient ring of the engine.

Values live in ``Z[L, L^-1, (1/(1-L^-i))_{i>0}]`` extended by positive
integer constant denominators.  An element is stored as a fraction

    numerator / (const_den * prod (1 - L^-i)^mult)

with an integer-coefficient Laurent polynomial on top.  ``normalize``
produces a canonical form, so structural equality of normalized elements
coincides with equality as ring elements.  Specializing ``L`` to a
rational ``q > 1`` is always finite because no factor ``1 - q^-i``
vanishes there.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce
from math import gcd, lcm


class NonAdmissibleDenominator(ValueError):
    """Denominator factor outside the allowed (1 - L^-i) / integer shapes."""


# ---------------------------------------------------------------------------
# Laurent/plain polynomial helpers on dicts {exponent: Fraction}.
# ---------------------------------------------------------------------------

def _trim(p):
    return {e: c for e, c in p.items() if c}


def _padd(a, b):
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0) + c
    return _trim(out)


def _pmul(a, b):
    out = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            key = e1 + e2
            out[key] = out.get(key, 0) + c1 * c2
    return _trim(out)


def _pscale(a, c):
    return _trim({e: v * c for e, v in a.items()})


def _pdivmod(a, b):
    """Division of plain polynomials (no negative exponents) over Q."""
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    rem = dict(a)
    db = max(b)
    lb = b[db]
    quo = {}
    while rem:
        da = max(rem)
        if da < db:
            break
        c = Fraction(rem[da], 1) / lb
        quo[da - db] = c
        for e, v in b.items():
            key = da - db + e
            rem[key] = rem.get(key, 0) - c * v
        rem = _trim(rem)
    return _trim(quo), rem


def _pgcd(a, b):
    """Monic gcd of plain polynomials over Q."""
    a, b = _trim(a), _trim(b)
    while b:
        _, r = _pdivmod(a, b)
        a, b = b, r
    if not a:
        return {}
    lead = a[max(a)]
    return {e: c / lead for e, c in a.items()}


def _x_pow_minus_1(i):
    return {i: Fraction(1), 0: Fraction(-1)}


@lru_cache(maxsize=None)
def _cyclotomic(d):
    """d-th cyclotomic polynomial, computed by exact division."""
    p = _x_pow_minus_1(d)
    for e in range(1, d):
        if d % e == 0:
            q, r = _pdivmod(p, dict(_cyclotomic(e)))
            assert not r
            p = q
    return tuple(sorted(p.items()))


def _cyc(d):
    return dict(_cyclotomic(d))


# ---------------------------------------------------------------------------
# The element class.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LRat:
    """Canonical element of the coefficient ring.

    ``num`` is the integer Laurent polynomial as a sorted tuple of
    ``(exponent, coefficient)``; ``den`` lists the ``(i, multiplicity)``
    of each ``(1 - L^-i)`` factor sorted by ``i``; ``const_den`` is a
    positive integer coprime to the numerator content.  Instances are
    produced canonical by :func:`normalize`; do not construct by hand.
    """

    num: tuple
    den: tuple
    const_den: int

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        other = coerce(other)
        den = _merge_dens(self.den, other.den)
        c = lcm(self.const_den, other.const_den)
        a = _scale_to(self, den, c)
        b = _scale_to(other, den, c)
        return normalize(_padd(a, b), den, c)

    __radd__ = __add__

    def __neg__(self):
        return LRat(tuple((e, -c) for e, c in self.num), self.den, self.const_den)

    def __sub__(self, other):
        return self + (-coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = coerce(other)
        den = tuple(sorted(_den_counter(self.den, other.den).items()))
        return normalize(
            _pmul(dict(self.num), dict(other.num)),
            den,
            self.const_den * other.const_den,
        )

    __rmul__ = __mul__

    def __pow__(self, n):
        if n < 0:
            raise ValueError("negative powers are not closed in the ring")
        out = ONE
        for _ in range(n):
            out = out * self
        return out

    def __bool__(self):
        return bool(self.num)

    # -- inspection ----------------------------------------------------------

    def is_zero(self):
        return not self.num

    def specialize(self, q):
        """Evaluate at L = q as an exact rational; requires q > 1."""
        q = Fraction(q)
        if q <= 1:
            raise ValueError("specialization requires q > 1")
        top = sum(Fraction(c) * q ** e for e, c in self.num)
        bot = Fraction(self.const_den)
        for i, m in self.den:
            bot *= (1 - q ** (-i)) ** m
        return top / bot

    def as_json(self):
        return {
            "num": [[c, e] for e, c in self.num],
            "den": [[i, m] for i, m in self.den],
            "const_den": self.const_den,
        }

    def __str__(self):
        if not self.num:
            return "0"
        parts = []
        for e, c in sorted(self.num, reverse=True):
            term = str(c) if e == 0 else (f"{c}*L^{e}" if c not in (1, -1) else ("-" if c == -1 else "") + f"L^{e}")
            parts.append(term)
        num = " + ".join(parts).replace("+ -", "- ")
        if self.const_den == 1 and not self.den:
            return num
        dparts = [] if self.const_den == 1 else [str(self.const_den)]
        for i, m in self.den:
            f = f"(1-L^-{i})"
            dparts.append(f if m == 1 else f + f"^{m}")
        return f"({num})/" + "*".join(dparts)

    __repr__ = __str__


def _den_counter(*dens):
    out = {}
    for den in dens:
        for i, m in den:
            out[i] = out.get(i, 0) + m
    return out


def _merge_dens(a, b):
    da, db = dict(a), dict(b)
    return tuple(sorted((i, max(da.get(i, 0), db.get(i, 0))) for i in set(da) | set(db)))


def _scale_to(x, den, c):
    """Numerator of x rewritten over the common denominator (den, c)."""
    have = _den_counter(x.den)
    p = _pscale(dict(x.num), Fraction(c, x.const_den))
    for i, m in den:
        extra = m - have.get(i, 0)
        for _ in range(extra):
            p = _pmul(p, {0: Fraction(1), -i: Fraction(-1)})
    return p


def coerce(x):
    if isinstance(x, LRat):
        return x
    if isinstance(x, int):
        return normalize({0: Fraction(x)}, (), 1)
    if isinstance(x, Fraction):
        return normalize({0: x}, (), 1)
    raise TypeError(f"cannot coerce {x!r} into the coefficient ring")


def normalize(num, den=(), const_den=1):
    """Canonical form of ``num / (const_den * prod (1-L^-i)^m)``.

    ``num`` maps exponents to rational coefficients; ``den`` is an
    iterable of ``(i, mult)``.  The element is rewritten with the least
    product of ``(1-L^-i)`` factors that still holds the reduced
    denominator, chosen greedily from the largest cyclotomic index down,
    which makes the output unique per ring element.
    """
    num = {int(e): Fraction(c) for e, c in dict(num).items() if c}
    den_ct = {}
    for i, m in den:
        if i <= 0 or m < 0:
            raise NonAdmissibleDenominator(f"factor (1-L^-{i})^{m}")
        if m:
            den_ct[i] = den_ct.get(i, 0) + m
    const_den = int(const_den)
    if const_den == 0:
        raise NonAdmissibleDenominator("zero constant denominator")
    if const_den < 0:
        const_den, num = -const_den, {e: -c for e, c in num.items()}
    if not num:
        return LRat((), (), 1)

    # Clear L-shifts: num / prod(1-L^-i)^m == num * L^shift / prod(L^i-1)^m.
    shift = sum(i * m for i, m in den_ct.items())
    vmin = min(num)
    poly = {e - vmin: c for e, c in num.items()}      # plain polynomial now
    lpow = vmin + shift

    q_poly = {0: Fraction(1)}
    for i, m in den_ct.items():
        for _ in range(m):
            q_poly = _pmul(q_poly, _x_pow_minus_1(i))

    g = _pgcd(poly, q_poly)
    poly, _ = _pdivmod(poly, g)
    q_red, _ = _pdivmod(q_poly, g)

    # Multiplicity of each relevant cyclotomic in the reduced denominator.
    divisors = sorted({d for i in den_ct for d in range(1, i + 1) if i % d == 0}, reverse=True)
    need = {}
    for d in divisors:
        while True:
            quo, rem = _pdivmod(q_red, _cyc(d))
            if rem:
                break
            q_red = quo
            need[d] = need.get(d, 0) + 1
    assert q_red == {0: Fraction(1)} or max(q_red) == 0

    # Greedy cover by (L^i - 1) factors, largest index first.
    cover = {}
    for d in divisors:
        got = sum(m for i, m in cover.items() if i % d == 0)
        deficit = need.get(d, 0) - got
        if deficit > 0:
            cover[d] = cover.get(d, 0) + deficit

    new_den_poly = {0: Fraction(1)}
    for i, m in cover.items():
        for _ in range(m):
            new_den_poly = _pmul(new_den_poly, _x_pow_minus_1(i))
    # new numerator = poly * (new_den_poly / reduced_den)
    red_den = _rebuild_all(need)
    lift, rem = _pdivmod(new_den_poly, red_den)
    assert not rem
    poly = _pmul(poly, lift)

    # Integer content vs const_den.
    denom_lcm = reduce(lcm, (c.denominator for c in poly.values()), 1)
    poly = {e: c * denom_lcm for e, c in poly.items()}
    const_den *= denom_lcm
    content = reduce(gcd, (int(c) for c in poly.values()), 0)
    g0 = gcd(content, const_den)
    if g0 > 1:
        poly = {e: c / g0 for e, c in poly.items()}
        const_den //= g0

    new_shift = sum(i * m for i, m in cover.items())
    out_num = tuple(sorted((e + lpow - new_shift, int(c)) for e, c in poly.items()))
    return LRat(out_num, tuple(sorted(cover.items())), const_den)


def _rebuild_all(need):
    p = {0: Fraction(1)}
    for d, m in need.items():
        for _ in range(m):
            p = _pmul(p, _cyc(d))
    return p


def from_l_power(k):
    """The monomial L^k."""
    return normalize({k: Fraction(1)}, (), 1)


def geometric(i):
    """1 / (1 - L^-i)."""
    return normalize({0: Fraction(1)}, ((i, 1),), 1)


ZERO = normalize({}, (), 1)
ONE = normalize({0: Fraction(1)}, (), 1)
L = from_l_power(1)
