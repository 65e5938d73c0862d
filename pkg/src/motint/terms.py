"""Polynomial terms of the valued-field and residue sorts.

``VTerm`` is a multivariate polynomial over valued-field variables whose
constants are exact rationals times integer powers of the formal
uniformizer ``w``.  ``RTerm`` is a polynomial over residue-sort atoms:
residue variables, rational constants (read mod p at specialization),
and opaque ``ac(v)`` atoms for valued terms ``v``.  Both are immutable
and kept in expanded normal form, so structural equality is equality of
normal forms.

ac() atoms of products factor multiplicatively; ac of a sum stays
opaque.  Since ac values are units, ``ac`` atoms may carry negative
exponents; residue variables may not (they can vanish).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


MAX_VAR_DEGREE = 6


class DegreeCapExceeded(ValueError):
    pass


class NotInvertible(ValueError):
    pass


# ---------------------------------------------------------------------------
# Coefficients: Laurent polynomials in the uniformizer, {k: Fraction}.
# ---------------------------------------------------------------------------

def _w_trim(w):
    return tuple(sorted((k, c) for k, c in w if c))


def w_const(c, k=0):
    c = Fraction(c)
    return ((k, c),) if c else ()


def _w_add(a, b):
    d = dict(a)
    for k, c in b:
        d[k] = d.get(k, Fraction(0)) + c
    return _w_trim(d.items())


def _w_mul(a, b):
    d = {}
    for k1, c1 in a:
        for k2, c2 in b:
            d[k1 + k2] = d.get(k1 + k2, Fraction(0)) + c1 * c2
    return _w_trim(d.items())


def _w_neg(a):
    return tuple((k, -c) for k, c in a)


def w_ord(a):
    """Generic valuation of a constant: min uniformizer exponent."""
    return min(k for k, _ in a) if a else None


def w_ac(a):
    """Generic angular component of a constant (rational, read mod p)."""
    if not a:
        return Fraction(0)
    k = w_ord(a)
    return dict(a)[k]


def w_str(a):
    if not a:
        return "0"
    parts = []
    for k, c in sorted(a):
        if k == 0:
            parts.append(str(c))
        else:
            wpow = "w" if k == 1 else f"w^{k}"
            if c == 1:
                parts.append(wpow)
            elif c == -1:
                parts.append(f"-{wpow}")
            else:
                parts.append(f"{c}*{wpow}")
    return " + ".join(parts).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# Valued-field terms.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VTerm:
    """Expanded polynomial: tuple of (monomial, coefficient) pairs.

    A monomial is a sorted tuple of (variable, exponent>=1); the
    coefficient is a uniformizer Laurent polynomial.
    """

    monos: tuple

    # construction -----------------------------------------------------------

    @staticmethod
    def _make(d):
        monos = []
        for mono, w in d.items():
            w = _w_trim(w)
            if not w:
                continue
            for v, e in mono:
                if e > MAX_VAR_DEGREE:
                    raise DegreeCapExceeded(f"degree {e} of {v} exceeds {MAX_VAR_DEGREE}")
            monos.append((mono, w))
        return VTerm(tuple(sorted(monos)))

    @staticmethod
    def const(c, k=0):
        return VTerm._make({(): list(w_const(c, k))} if c else {})

    @staticmethod
    def from_wpoly(w):
        return VTerm._make({(): list(w)})

    @staticmethod
    def var(name):
        return VTerm._make({((name, 1),): list(w_const(1))})

    @staticmethod
    def uniformizer(k=1):
        return VTerm.const(1, k)

    # ring structure ----------------------------------------------------------

    def __add__(self, other):
        other = vcoerce(other)
        d = {m: w for m, w in self.monos}
        for m, w in other.monos:
            d[m] = _w_add(d.get(m, ()), w)
        return VTerm._make(d)

    __radd__ = __add__

    def __neg__(self):
        return VTerm(tuple((m, _w_neg(w)) for m, w in self.monos))

    def __sub__(self, other):
        return self + (-vcoerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = vcoerce(other)
        d = {}
        for m1, w1 in self.monos:
            for m2, w2 in other.monos:
                m = _mono_mul(m1, m2)
                d[m] = _w_add(d.get(m, ()), _w_mul(w1, w2))
        return VTerm._make(d)

    __rmul__ = __mul__

    def __pow__(self, n):
        if n < 0:
            raise ValueError("negative powers of valued terms")
        out = VTerm.const(1)
        for _ in range(n):
            out = out * self
        return out

    # inspection ---------------------------------------------------------------

    def is_zero(self):
        return not self.monos

    def is_constant(self):
        return all(m == () for m, _ in self.monos)

    def constant_wpoly(self):
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self.monos[0][1] if self.monos else ()

    def variables(self):
        return sorted({v for m, _ in self.monos for v, _ in m})

    def degree_in(self, var):
        return max((dict(m).get(var, 0) for m, _ in self.monos), default=0)

    def coeffs_in(self, var):
        """View as a polynomial in ``var``: {degree: VTerm free of var}."""
        out = {}
        for m, w in self.monos:
            md = dict(m)
            e = md.pop(var, 0)
            rest = tuple(sorted(md.items()))
            out.setdefault(e, {})
            out[e][rest] = _w_add(out[e].get(rest, ()), w)
        return {e: VTerm._make(d) for e, d in out.items() if VTerm._make(d).monos or e == 0}

    @staticmethod
    def from_coeffs(var, coeffs):
        total = VTerm.const(0)
        for e, c in coeffs.items():
            total = total + c * VTerm.var(var) ** e if e else total + c
        return total

    def substitute(self, var, repl):
        repl = vcoerce(repl)
        total = VTerm.const(0)
        for m, w in self.monos:
            md = dict(m)
            e = md.pop(var, 0)
            part = VTerm._make({tuple(sorted(md.items())): list(w)})
            total = total + part * repl ** e
        return total

    def monomial_split(self):
        """For a single monomial c * prod v^e: (wpoly, ((v, e), ...)); else None."""
        if len(self.monos) != 1:
            return None
        m, w = self.monos[0]
        return w, m

    def __str__(self):
        if not self.monos:
            return "0"
        parts = []
        for m, w in self.monos:
            mono = "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)
            if not m:
                parts.append(_paren_w(w))
            elif w == w_const(1):
                parts.append(mono)
            elif w == w_const(-1):
                parts.append(f"-{mono}")
            else:
                parts.append(f"{_paren_w(w)}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    __repr__ = __str__


def _paren_w(w):
    s = w_str(w)
    return f"({s})" if (" " in s or len(w) > 1) else s


def _mono_mul(m1, m2):
    d = dict(m1)
    for v, e in m2:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


def vcoerce(x):
    if isinstance(x, VTerm):
        return x
    if isinstance(x, (int, Fraction)):
        return VTerm.const(x)
    raise TypeError(f"cannot coerce {x!r} to a valued term")


# ---------------------------------------------------------------------------
# Residue-sort terms.
# ---------------------------------------------------------------------------

def atom_var(name):
    return ("var", name)


def atom_ac(vterm):
    return ("ac", vterm)


def _atom_key(atom):
    return (atom[0], str(atom[1]))


@dataclass(frozen=True)
class RTerm:
    """Expanded polynomial over residue atoms with rational coefficients.

    Monomials are sorted tuples of (atom, exponent); exponents may be
    negative only on ``ac`` atoms (units of the residue field).
    """

    monos: tuple  # ((atom, exp), ...) -> Fraction, as sorted tuple of pairs

    @staticmethod
    def _make(d):
        monos = []
        for mono, c in d.items():
            c = Fraction(c)
            if not c:
                continue
            for atom, e in mono:
                if e < 0 and atom[0] != "ac":
                    raise NotInvertible(f"negative power of residue atom {atom}")
            monos.append((mono, c))
        return RTerm(tuple(sorted(monos, key=lambda mc: tuple(map(_atom_key_e, mc[0])))))

    @staticmethod
    def const(c):
        c = Fraction(c)
        return RTerm._make({(): c} if c else {})

    @staticmethod
    def var(name):
        return RTerm._make({((atom_var(name), 1),): Fraction(1)})

    @staticmethod
    def ac(vterm):
        """ac() of a valued term, factored multiplicatively when possible."""
        if vterm.is_zero():
            return RTerm.const(0)
        if vterm.is_constant():
            return RTerm.const(w_ac(vterm.constant_wpoly()))
        split = vterm.monomial_split()
        if split is not None:
            w, mono = split
            out = RTerm.const(w_ac(w))
            for v, e in mono:
                out = out * RTerm._make({((atom_ac(VTerm.var(v)), e),): Fraction(1)})
            return out
        return RTerm._make({((atom_ac(vterm), 1),): Fraction(1)})

    def __add__(self, other):
        other = rcoerce(other)
        d = {m: c for m, c in self.monos}
        for m, c in other.monos:
            d[m] = d.get(m, Fraction(0)) + c
        return RTerm._make(d)

    __radd__ = __add__

    def __neg__(self):
        return RTerm(tuple((m, -c) for m, c in self.monos))

    def __sub__(self, other):
        return self + (-rcoerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = rcoerce(other)
        d = {}
        for m1, c1 in self.monos:
            for m2, c2 in other.monos:
                m = _ratom_mul(m1, m2)
                d[m] = d.get(m, Fraction(0)) + c1 * c2
        return RTerm._make(d)

    __rmul__ = __mul__

    def __pow__(self, n):
        if n < 0:
            return self.invert() ** (-n)
        out = RTerm.const(1)
        for _ in range(n):
            out = out * self
        return out

    def invert(self):
        """Inverse of a unit monomial (nonzero constant times ac atoms)."""
        if len(self.monos) != 1:
            raise NotInvertible(f"{self} is not a unit monomial")
        mono, c = self.monos[0]
        if any(atom[0] != "ac" for atom, _ in mono):
            raise NotInvertible(f"{self} contains a possibly-zero atom")
        return RTerm._make({tuple((a, -e) for a, e in mono): 1 / c})

    def is_zero(self):
        return not self.monos

    def is_constant(self):
        return all(m == () for m, _ in self.monos)

    def constant_value(self):
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self.monos[0][1] if self.monos else Fraction(0)

    def res_vars(self):
        return sorted({a[1] for m, _ in self.monos for a, _ in m if a[0] == "var"})

    def ac_args(self):
        return [a[1] for m, _ in self.monos for a, _ in m if a[0] == "ac"]

    def degree_in_var(self, name):
        key = atom_var(name)
        return max((dict(m).get(key, 0) for m, _ in self.monos), default=0)

    def linear_split(self, name):
        """Write as coeff*name + rest with both free of ``name``.

        Raises :class:`NotInvertible` (degree >= 2) when not affine.
        """
        key = atom_var(name)
        coeff, rest = {}, {}
        for m, c in self.monos:
            md = dict(m)
            e = md.pop(key, 0)
            body = tuple(sorted(md.items(), key=_atom_key_e))
            if e == 0:
                rest[body] = rest.get(body, Fraction(0)) + c
            elif e == 1:
                coeff[body] = coeff.get(body, Fraction(0)) + c
            else:
                raise NotInvertible(f"{self} is not affine in {name}")
        return RTerm._make(coeff), RTerm._make(rest)

    def substitute_var(self, name, repl):
        repl = rcoerce(repl)
        key = atom_var(name)
        total = RTerm.const(0)
        for m, c in self.monos:
            md = dict(m)
            e = md.pop(key, 0)
            part = RTerm._make({tuple(sorted(md.items(), key=_atom_key_e)): c})
            total = total + part * repl ** e
        return total

    def substitute_ac(self, vterm, repl):
        """Replace the opaque atom ac(vterm) by a residue term."""
        repl = rcoerce(repl)
        key = atom_ac(vterm)
        total = RTerm.const(0)
        for m, c in self.monos:
            md = dict(m)
            e = 0
            for a in list(md):
                if a == key:
                    e = md.pop(a)
            part = RTerm._make({tuple(sorted(md.items(), key=_atom_key_e)): c})
            total = total + part * repl ** e
        return total

    def rename_vars(self, mapping):
        d = {}
        for m, c in self.monos:
            pairs = [((("var", mapping.get(a[1], a[1])) if a[0] == "var" else a), e)
                     for a, e in m]
            m2 = tuple(sorted(pairs, key=_atom_key_e))
            d[m2] = d.get(m2, Fraction(0)) + c
        return RTerm._make(d)

    def __str__(self):
        if not self.monos:
            return "0"
        parts = []
        for m, c in self.monos:
            mono = "*".join(_atom_str(a) if e == 1 else f"{_atom_str(a)}^{e}" for a, e in m)
            if not m:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    __repr__ = __str__


def _atom_key_e(ae):
    return (_atom_key(ae[0]), ae[1])


def _atom_str(a):
    return a[1] if a[0] == "var" else f"ac({a[1]})"


def _ratom_mul(m1, m2):
    d = dict(m1)
    for a, e in m2:
        d[a] = d.get(a, 0) + e
    d = {a: e for a, e in d.items() if e}
    return tuple(sorted(d.items(), key=_atom_key_e))


def rcoerce(x):
    if isinstance(x, RTerm):
        return x
    if isinstance(x, (int, Fraction)):
        return RTerm.const(x)
    raise TypeError(f"cannot coerce {x!r} to a residue term")
