"""Linear forms over integer-sort symbols.

Keys are either plain integer-variable names (strings) or ``OrdKey``
wrappers marking the valuation of a valued-field term, so a single
LinForm can express things like ``2*j + ord(x) - 1``.  Coefficients and
the constant are exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class OrdKey:
    """Formal symbol for the valuation of a (t-free) valued-field term."""

    term: object  # a VTerm; kept opaque here to avoid an import cycle

    def __str__(self):
        return f"ord({self.term})"

    def sort_key(self):
        return (1, str(self.term))


def _key_sort(k):
    return k.sort_key() if isinstance(k, OrdKey) else (0, k)


@dataclass(frozen=True)
class LinForm:
    coeffs: tuple  # sorted tuple of (key, Fraction), nonzero coefficients
    const: Fraction

    @staticmethod
    def make(coeffs=None, const=0):
        items = {}
        for k, c in (coeffs or {}).items():
            c = Fraction(c)
            if c:
                items[k] = c
        return LinForm(tuple(sorted(items.items(), key=lambda kv: _key_sort(kv[0]))), Fraction(const))

    @staticmethod
    def constant(c):
        return LinForm.make({}, c)

    @staticmethod
    def var(name, coeff=1):
        return LinForm.make({name: Fraction(coeff)})

    def as_dict(self):
        return dict(self.coeffs)

    def is_constant(self):
        return not self.coeffs

    def constant_value(self):
        if self.coeffs:
            raise ValueError(f"{self} is not constant")
        return self.const

    def coeff(self, key):
        return dict(self.coeffs).get(key, Fraction(0))

    def vars(self):
        return [k for k, _ in self.coeffs]

    def drop(self, key):
        return LinForm.make({k: c for k, c in self.coeffs if k != key}, self.const)

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            return LinForm(self.coeffs, self.const + other)
        d = dict(self.coeffs)
        for k, c in other.coeffs:
            d[k] = d.get(k, Fraction(0)) + c
        return LinForm.make(d, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return LinForm(tuple((k, -c) for k, c in self.coeffs), -self.const)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            return LinForm(self.coeffs, self.const - other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = Fraction(c)
        if not c:
            return LinForm.make({}, 0)
        return LinForm(tuple((k, v * c) for k, v in self.coeffs), self.const * c)

    def substitute(self, key, repl):
        """Replace ``key`` by the LinForm ``repl``."""
        c = self.coeff(key)
        if not c:
            return self
        return self.drop(key) + repl.scale(c)

    def rename(self, mapping):
        return LinForm.make(
            {mapping.get(k, k): c for k, c in self.coeffs}, self.const
        )

    def evaluate(self, env):
        """Exact value given integer/Fraction assignments for every key."""
        total = self.const
        for k, c in self.coeffs:
            total += c * env[k]
        return total

    def is_integral(self):
        return self.const.denominator == 1 and all(c.denominator == 1 for _, c in self.coeffs)

    def __str__(self):
        if not self.coeffs:
            return str(self.const)
        parts = []
        for k, c in self.coeffs:
            name = str(k)
            if c == 1:
                parts.append(name)
            elif c == -1:
                parts.append(f"-{name}")
            else:
                parts.append(f"{c}*{name}")
        s = " + ".join(parts).replace("+ -", "- ")
        if self.const:
            sign = "+" if self.const > 0 else "-"
            s += f" {sign} {abs(self.const)}"
        return s

    __repr__ = __str__
