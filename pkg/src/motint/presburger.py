"""Presburger conditions over integer tuples and exact geometric summation.

Atoms are kept in a canonical integer-tightened form (``lf <= 0``,
``lf == 0``, ``lf != 0``, ``lf ≡ 0 mod n``) so that structurally equal
atoms are exactly the semantically equal ones within this shape.  A
one-variable condition normalizes to finitely many truncated arithmetic
progressions, possibly guarded by conditions on the parameters, and sums
of ``j^s * L^(a*j+b)`` over such domains close up in the coefficient
ring whenever they converge.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd, lcm

from .linform import LinForm
from . import lring


class FractionalExponent(ValueError):
    """An L-exponent failed to land on integers over the summation domain."""


class UnsupportedSum(ValueError):
    """Sum outside the supported closed-form fragment."""


MAX_POLY_DEGREE = 4  # cap on the j^s polynomial factor


# ---------------------------------------------------------------------------
# Atoms.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cmp:
    lf: LinForm
    op: str  # 'le' | 'eq' | 'ne'

    def __str__(self):
        sym = {"le": "<=", "eq": "==", "ne": "!="}[self.op]
        return f"{self.lf} {sym} 0"

    __repr__ = __str__


@dataclass(frozen=True)
class ModEq:
    lf: LinForm
    n: int  # lf ≡ 0 (mod n), n >= 2

    def __str__(self):
        return f"{self.lf} == 0 mod {self.n}"

    __repr__ = __str__


def _integerize(lf):
    """Scale by the positive lcm of coefficient denominators."""
    denoms = [c.denominator for _, c in lf.coeffs] + [lf.const.denominator]
    m = reduce(lcm, denoms, 1)
    return lf.scale(m), m


def make_cmp(lf, op):
    """Canonical comparison atom ``lf op 0``; may collapse to a bool.

    Accepts '<=', '<', '>=', '>', '==', '!=' and tightens over the
    integers (gcd division with floor on the constant).
    """
    if op in (">=", ">"):
        lf, op = -lf, {">=": "<=", ">": "<"}[op]
    lf, _ = _integerize(lf)
    if op == "<":
        lf, op = lf + 1, "<="
    if lf.is_constant():
        c = lf.const
        return {"<=": c <= 0, "==": c == 0, "!=": c != 0}[op]
    g = reduce(gcd, (abs(int(c)) for _, c in lf.coeffs), 0)
    c = int(lf.const)
    if op == "<=":
        # g*m + c <= 0  <=>  m <= floor(-c/g)  <=>  m - floor(-c/g) <= 0
        body = LinForm(tuple((k, v / g) for k, v in lf.coeffs), Fraction(0))
        return Cmp(body + Fraction(-((-c) // g)), "le")
    if c % g == 0:
        lf = lf.scale(Fraction(1, g))
    elif op == "==":
        return False
    else:
        return True
    if lf.coeffs[0][1] < 0:
        lf = -lf
    return Cmp(lf, "eq" if op == "==" else "ne")


def make_mod(lf, r, n):
    """Canonical atom ``lf ≡ r (mod n)``; may collapse to a bool."""
    n = int(n)
    if n < 1:
        raise ValueError("modulus must be >= 1")
    lf = lf - Fraction(r)
    lf, m = _integerize(lf)
    n *= m
    if n == 1:
        return True
    coeffs = {k: int(c) % n for k, c in lf.coeffs}
    const = int(lf.const) % n
    coeffs = {k: c for k, c in coeffs.items() if c}
    if not coeffs:
        return const % n == 0
    g = reduce(gcd, list(coeffs.values()) + [n], 0)
    if g > 1:
        if const % g:
            return False
        coeffs = {k: c // g for k, c in coeffs.items()}
        const //= g
        n //= g
        if n == 1:
            return True
    return ModEq(LinForm.make(coeffs, const), n)


def atom_sort_key(a):
    if isinstance(a, Cmp):
        return (1, a.op, str(a.lf))
    if isinstance(a, ModEq):
        return (2, a.n, str(a.lf))
    return (9, str(a), "")


def eval_atom(a, env):
    if a is True or a is False:
        return a
    v = a.lf.evaluate(env)
    if isinstance(a, Cmp):
        return {"le": v <= 0, "eq": v == 0, "ne": v != 0}[a.op]
    return v % a.n == 0


def negate(a):
    """Negation as a list of disjunctive branches (each a list of atoms)."""
    if a is True:
        return []
    if a is False:
        return [[]]
    if isinstance(a, Cmp):
        if a.op == "le":
            return [[make_cmp(-a.lf, "<")]]
        if a.op == "eq":
            return [[make_cmp(a.lf, "<")], [make_cmp(-a.lf, "<")]]
        return [[make_cmp(a.lf, "==")]]
    return [[make_mod(a.lf, r, a.n)] for r in range(1, a.n)]


# ---------------------------------------------------------------------------
# Satisfiability on a decidable fragment.
# ---------------------------------------------------------------------------

def _direction(coeffs):
    """Canonical direction of a coefficient vector: (key, sign)."""
    if coeffs[0][1] < 0:
        return tuple((k, -c) for k, c in coeffs), -1
    return coeffs, 1


def _match_congruence(mod_atom, dirkey):
    """Read a mod atom as a congruence on the direction's value.

    Coefficients of canonical mod atoms are reduced mod n, so we search
    for the multiplier a with ``coeffs ≡ a * dirkey (mod n)``.  Returns
    (r, n') meaning v ≡ r (mod n'), the string 'unsat', or None.
    """
    n = mod_atom.n
    w = dict(mod_atom.lf.coeffs)
    d = dict(dirkey)
    if set(w) != set(d) or any(c.denominator != 1 for c in d.values()):
        return None
    for a in range(1, n):
        if all((a * int(d[k]) - int(w[k])) % n == 0 for k in w):
            c0 = (-int(mod_atom.lf.const)) % n
            g = gcd(a, n)
            if c0 % g:
                return "unsat"
            n2 = n // g
            if n2 == 1:
                return None
            r = ((c0 // g) * pow((a // g) % n2, -1, n2)) % n2
            return (r, n2)
    return None


def unsatisfiable(atoms):
    """True when the conjunction is *provably* empty (sound, incomplete).

    Atoms sharing one coefficient direction constrain a single integer
    quantity, checked one-dimensionally; relations between different
    directions are not analyzed.
    """
    cmps, mods = [], []
    for a in atoms:
        if a is False:
            return True
        if a is True:
            continue
        (cmps if isinstance(a, Cmp) else mods).append(a)

    dirs = {}
    for a in cmps:
        key, sign = _direction(a.lf.coeffs)
        rec = dirs.setdefault(key, {"lo": None, "hi": None, "eqs": set(), "nes": set()})
        c = int(a.lf.const)
        if a.op == "le":
            if sign > 0:
                rec["hi"] = -c if rec["hi"] is None else min(rec["hi"], -c)
            else:
                rec["lo"] = c if rec["lo"] is None else max(rec["lo"], c)
        elif a.op == "eq":
            rec["eqs"].add(-c * sign)
        else:
            rec["nes"].add(-c * sign)

    for key, rec in dirs.items():
        merged = (0, 1)
        for m in mods:
            got = _match_congruence(m, key)
            if got == "unsat":
                return True
            if got is None:
                continue
            r, n = got
            x = _crt(merged[0], merged[1], r, n)
            if x is None:
                return True
            merged = (x, lcm(merged[1], n))
        lo, hi, eqs, nes = rec["lo"], rec["hi"], rec["eqs"], rec["nes"]
        if len(eqs) > 1:
            return True
        if eqs:
            v = next(iter(eqs))
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                return True
            if v in nes or v % merged[1] != merged[0]:
                return True
            continue
        if lo is not None and hi is not None:
            if lo > hi:
                return True
            if hi - lo + 1 <= 512 and not any(
                v % merged[1] == merged[0] and v not in nes for v in range(lo, hi + 1)
            ):
                return True
    # congruences alone can clash even without bounds
    for key in {k for m in mods for k in [_direction(m.lf.coeffs)[0]]}:
        merged = (0, 1)
        for m in mods:
            got = _match_congruence(m, key)
            if got == "unsat":
                return True
            if got is None:
                continue
            x = _crt(merged[0], merged[1], got[0], got[1])
            if x is None:
                return True
            merged = (x, lcm(merged[1], got[1]))
    return _bounds_clash(cmps)


def _bounds_clash(cmps):
    """Propagate per-key bounds along two-key unit-coefficient atoms."""
    lo, hi = {}, {}
    links = []  # (x, y, c, strict_eq): relation x <= y + c, from x - y - c <= 0
    for a in cmps:
        ks = a.lf.coeffs
        c = a.lf.const
        if c.denominator != 1:
            continue
        c = int(c)
        if len(ks) == 1:
            (k, co), = ks
            if co not in (1, -1):
                continue
            if a.op == "le":
                if co == 1:
                    hi[k] = min(hi.get(k, -c), -c)
                else:
                    lo[k] = max(lo.get(k, c), c)
            elif a.op == "eq":
                v = -c * (1 if co == 1 else -1)
                lo[k] = max(lo.get(k, v), v)
                hi[k] = min(hi.get(k, v), v)
        elif len(ks) == 2:
            (k1, c1), (k2, c2) = ks
            if {c1, c2} != {Fraction(1), Fraction(-1)}:
                continue
            x, y = (k1, k2) if c1 == 1 else (k2, k1)
            # atom: x - y + c (op) 0
            if a.op in ("le", "eq"):
                links.append((x, y, -c))       # x <= y - c
            if a.op == "eq":
                links.append((y, x, c))        # y <= x + c
    for _ in range(8):
        changed = False
        for x, y, c in links:
            # x <= y + c
            if y in hi:
                cand = hi[y] + c
                if x not in hi or cand < hi[x]:
                    hi[x] = cand
                    changed = True
            if x in lo:
                cand = lo[x] - c
                if y not in lo or cand > lo[y]:
                    lo[y] = cand
                    changed = True
        if not changed:
            break
    return any(k in hi and lo[k] > hi[k] for k in lo)


def entails(atoms, atom):
    """True when ``atoms`` provably imply ``atom`` (sound, incomplete)."""
    if atom is True:
        return True
    if atom is False:
        return unsatisfiable(atoms)
    return all(unsatisfiable(list(atoms) + br) for br in negate(atom))


def _crt(r1, n1, r2, n2):
    g = gcd(n1, n2)
    if (r1 - r2) % g:
        return None
    l = lcm(n1, n2)
    step = n1
    x = r1 % n1
    while x % n2 != r2 % n2:
        x += step
    return x % l


# ---------------------------------------------------------------------------
# One-variable domain normalization.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainBranch:
    """Progression {j ≡ r (mod n), lower <= j <= upper} under guards.

    ``lower``/``upper`` are LinForms over the parameters (None for an
    unbounded side); under the guards both present bounds take values
    ≡ r (mod n).
    """

    guards: tuple
    residue: int
    modulus: int
    lower: object
    upper: object

    def __str__(self):
        lo = "-inf" if self.lower is None else str(self.lower)
        hi = "+inf" if self.upper is None else str(self.upper)
        g = f" if {list(self.guards)}" if self.guards else ""
        return f"{{≡{self.residue} mod {self.modulus}, {lo}..{hi}}}{g}"

    __repr__ = __str__


def _mod_cases(lf, n):
    """Split a parameter LinForm by its value mod n: [(guard_atoms, k)]."""
    if n == 1:
        return [((), 0)]
    if lf.is_constant() and lf.const.denominator == 1:
        return [((), int(lf.const) % n)]
    out = []
    for k in range(n):
        g = make_mod(lf, k, n)
        if g is True:
            return [((), k)]
        if g is False:
            continue
        out.append(((g,), k))
    return out


def _int_value(f, mode=None):
    """Guarded integer reading of a rational LinForm: [(guards, LinForm)].

    With mode None only the parameter cases where the value is an exact
    integer survive; 'ceil'/'floor' round instead.
    """
    if f is None:
        return [((), None)]
    scaled, m = _integerize(f)
    if m == 1:
        return [((), f)]
    out = []
    for g, k in _mod_cases(scaled, m):
        if mode is None:
            if k == 0:
                out.append((g, (scaled - k).scale(Fraction(1, m))))
        elif mode == "ceil":
            out.append((g, (scaled - k).scale(Fraction(1, m)) + Fraction(-((-k) // m))))
        else:
            out.append((g, (scaled - k).scale(Fraction(1, m)) + Fraction(k // m)))
    return out


def _align_bound(f, r, n, up):
    """Move an integer bound onto the class r (mod n): [(guards, LinForm)]."""
    if f is None or n == 1:
        return [((), f)]
    out = []
    for g, k in _mod_cases(f, n):
        shift = (r - k) % n if up else -((k - r) % n)
        out.append((g, f + shift))
    return out


def normalize_domain(atoms, var):
    """Normal form of a one-variable condition as guarded progressions.

    Returns :class:`DomainBranch` entries; for any parameter values,
    the branches whose guards hold partition the solution set in
    ``var``.  Atoms not mentioning ``var`` pass through as guards.
    """
    guards, var_atoms = [], []
    for a in atoms:
        if a is False:
            return []
        if a is True:
            continue
        (var_atoms if a.lf.coeff(var) else guards).append(a)

    # eliminate != atoms first, splitting into < and > halves
    for i, a in enumerate(var_atoms):
        if isinstance(a, Cmp) and a.op == "ne":
            rest = var_atoms[:i] + var_atoms[i + 1:]
            out = []
            for sgn in (1, -1):
                extra = make_cmp(a.lf.scale(sgn), "<")
                if extra is False:
                    continue
                branch = rest + ([] if extra is True else [extra])
                out.extend(normalize_domain(guards + branch, var))
            return out

    lowers, uppers, points, congs = [], [], [], []
    for a in var_atoms:
        c = a.lf.coeff(var)
        rest = a.lf.drop(var)
        if isinstance(a, ModEq):
            congs.append((int(c), rest, a.n))
        elif a.op == "eq":
            points.append((int(c), rest))
        elif c > 0:
            uppers.append((c, rest))    # var <= -rest/c
        else:
            lowers.append((-c, rest))   # var >= rest/(-c)

    branches = [(tuple(guards), 0, 1)]

    for c, rest, n in congs:
        new = []
        for g, r, n0 in branches:
            for extra, k in _mod_cases(rest, n):
                gg = gcd(c % n, n)
                if k % gg:
                    continue
                n1 = n // gg
                if n1 == 1:
                    new.append((g + extra, r, n0))
                    continue
                rr = ((-(k // gg)) * pow((c // gg) % n1, -1, n1)) % n1
                merged = _crt(r, n0, rr, n1)
                if merged is None:
                    continue
                new.append((g + extra, merged, lcm(n0, n1)))
        branches = new

    if points:
        c0, rest0 = points[0]
        val = rest0.scale(Fraction(-1, c0))
        results = []
        for gI, valI in _int_value(val):
            for g, r, n in branches:
                for gM, k in _mod_cases(valI, n):
                    if k != r % n:
                        continue
                    gg = list(g + gI + gM)
                    ok = True
                    for c2, rest2 in points[1:]:
                        atom = make_cmp(valI.scale(c2) + rest2, "==")
                        if atom is False:
                            ok = False
                            break
                        if atom is not True:
                            gg.append(atom)
                    for cl, rl in lowers:
                        atom = make_cmp(rl - valI.scale(cl), "<=")
                        if atom is False:
                            ok = False
                            break
                        if atom is not True:
                            gg.append(atom)
                    for cu, ru in uppers:
                        atom = make_cmp(valI.scale(cu) + ru, "<=")
                        if atom is False:
                            ok = False
                            break
                        if atom is not True:
                            gg.append(atom)
                    if ok:
                        results.append(DomainBranch(tuple(gg), 0, 1, valI, valI))
        return [b for b in results if not unsatisfiable(list(b.guards))]

    def resolve(cands, kind):
        """Choose the extremal bound: [(guard_atoms, rational LinForm|None)]."""
        forms = [rest.scale(Fraction(1, int(c)) * (1 if kind == "lower" else -1))
                 for c, rest in cands]
        if not forms:
            return [((), None)]
        if all(f.is_constant() for f in forms):
            pick = max(forms, key=lambda f: f.const) if kind == "lower" else min(forms, key=lambda f: f.const)
            return [((), pick)]
        out = []
        for i, f in enumerate(forms):
            g, ok = [], True
            for i2, f2 in enumerate(forms):
                if i2 == i:
                    continue
                diff = f2 - f if kind == "lower" else f - f2
                atom = make_cmp(diff, "<=") if i < i2 else make_cmp(diff, "<")
                if atom is False:
                    ok = False
                    break
                if atom is not True:
                    g.append(atom)
            if ok:
                out.append((tuple(g), f))
        return out

    out = []
    for g, r, n in branches:
        for glo, lo in resolve(lowers, "lower"):
            for ghi, hi in resolve(uppers, "upper"):
                for g2, lo1 in _int_value(lo, "ceil"):
                    for g3, hi1 in _int_value(hi, "floor"):
                        for g4, lo2 in _align_bound(lo1, r, n, up=True):
                            for g5, hi2 in _align_bound(hi1, r, n, up=False):
                                gfull = g + glo + ghi + g2 + g3 + g4 + g5
                                if lo2 is not None and hi2 is not None:
                                    emp = make_cmp(lo2 - hi2, "<=")
                                    if emp is False:
                                        continue
                                    if emp is not True:
                                        gfull = gfull + (emp,)
                                out.append(DomainBranch(gfull, r % n, n, lo2, hi2))
    return [b for b in out if not unsatisfiable(list(b.guards))]


# ---------------------------------------------------------------------------
# Exact summation.
# ---------------------------------------------------------------------------

_STIRLING2 = {
    (1, 1): 1,
    (2, 1): 1, (2, 2): 1,
    (3, 1): 1, (3, 2): 3, (3, 3): 1,
    (4, 1): 1, (4, 2): 7, (4, 3): 6, (4, 4): 1,
}


def _factorial(n):
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


@dataclass(frozen=True)
class SumBranch:
    guards: tuple
    coeff: lring.LRat
    lexp: LinForm  # leftover exponent L^lexp over the parameters


@dataclass(frozen=True)
class SumResult:
    kind: str  # 'convergent' | 'divergent'
    branches: tuple = ()
    offending: tuple = ()  # guards of a divergent branch

    def as_lrat(self):
        """Collapse to one ring element (requires no guards, constant exponent)."""
        if self.kind != "convergent":
            raise ValueError("sum is divergent")
        total = lring.ZERO
        for b in self.branches:
            if b.guards or not b.lexp.is_constant():
                raise ValueError("sum is parameter-dependent")
            e = b.lexp.const
            if e.denominator != 1:
                raise FractionalExponent(str(b.lexp))
            total = total + b.coeff * lring.from_l_power(int(e))
        return total


def coerce_frac(c):
    return lring.normalize({0: Fraction(c)})


def sum_series(var, atoms, exponent, s=0):
    """Exact sum over ``{var | atoms}`` of ``var^s * L^exponent``.

    ``exponent`` may mention ``var`` and parameters.  Branches of the
    result are guarded (coefficient, leftover exponent) pairs; the sum
    is Divergent exactly when some branch has an unbounded direction
    with nonnegative exponent slope.
    """
    if s < 0 or s > MAX_POLY_DEGREE:
        raise UnsupportedSum(f"polynomial degree {s} outside 0..{MAX_POLY_DEGREE}")
    a = exponent.coeff(var)
    branches = []
    for dom in normalize_domain(atoms, var):
        lo, hi, n = dom.lower, dom.upper, dom.modulus
        if (lo is None and hi is None) or (hi is None and a >= 0) or (lo is None and a <= 0):
            return SumResult("divergent", offending=dom.guards)
        if lo is not None and hi is not None:
            if lo.is_constant() and hi.is_constant():
                total = lring.ZERO
                rest = exponent.drop(var)
                for j in range(int(lo.const), int(hi.const) + 1, n):
                    e = a * j
                    if e.denominator != 1:
                        raise FractionalExponent(f"exponent slope {a} at {var}={j}")
                    total = total + lring.from_l_power(int(e)) * (Fraction(j) ** s if s else Fraction(1))
                branches.append(SumBranch(dom.guards, total, rest))
                continue
            if lo == hi:
                if s > 0:
                    raise UnsupportedSum("polynomial factor at a symbolic point")
                lexp = exponent.substitute(var, lo)
                if not lexp.is_integral():
                    raise FractionalExponent(f"exponent {lexp} at the pinned point")
                branches.append(SumBranch(dom.guards, lring.ONE, lexp))
                continue
            if a == 0:
                raise UnsupportedSum("parameter-dependent term count with zero exponent slope")
            if a < 0:
                pieces = [(_tail(var, exponent, s, lo, n, forward=True), 1),
                          (_tail(var, exponent, s, hi + n, n, forward=True), -1)]
            else:
                pieces = [(_tail(var, exponent, s, hi, n, forward=False), 1),
                          (_tail(var, exponent, s, lo - n, n, forward=False), -1)]
            for (coeff, lexp), sign in pieces:
                branches.append(SumBranch(dom.guards, coeff if sign > 0 else -coeff, lexp))
            continue
        anchor, forward = (lo, True) if hi is None else (hi, False)
        coeff, lexp = _tail(var, exponent, s, anchor, n, forward=forward)
        branches.append(SumBranch(dom.guards, coeff, lexp))
    return SumResult("convergent", tuple(branches))


def _tail(var, exponent, s, anchor, n, forward):
    """Closed form of the tail j = anchor, anchor±n, ... of j^s L^exponent."""
    a = exponent.coeff(var)
    step = a * n if forward else -a * n
    if step >= 0:
        raise UnsupportedSum("tail does not converge")
    u = -step
    if u.denominator != 1:
        raise FractionalExponent(f"step exponent {step} is not integral")
    u = int(u)
    lexp = exponent.substitute(var, anchor)
    if not lexp.is_integral():
        raise FractionalExponent(f"anchor exponent {lexp} is not integral")
    if s == 0:
        return lring.geometric(u), lexp
    if not anchor.is_constant():
        raise UnsupportedSum("polynomial factor with symbolic bound")
    j0 = int(anchor.const)
    sign = n if forward else -n
    total = lring.ZERO
    for t in range(s + 1):
        binom = _factorial(s) // (_factorial(t) * _factorial(s - t))
        coef = Fraction(binom) * Fraction(j0) ** (s - t) * Fraction(sign) ** t
        if coef:
            total = total + coerce_frac(coef) * _sum_k_pow(t, u)
    return total, lexp


def _sum_k_pow(t, u):
    """Sum over k >= 0 of k^t L^(-u k), exact in the coefficient ring."""
    if t == 0:
        return lring.geometric(u)
    total = lring.ZERO
    for m in range(1, t + 1):
        term = coerce_frac(_STIRLING2[(t, m)] * _factorial(m)) \
            * lring.from_l_power(-u * m) * lring.geometric(u) ** (m + 1)
        total = total + term
    return total


# ---------------------------------------------------------------------------
# Brute-force enumeration (oracle support).
# ---------------------------------------------------------------------------

def enumerate_box(atoms, box):
    """All integer solutions within per-variable bounds, lexicographic.

    ``box`` maps variable names to inclusive (lo, hi) pairs; variable
    order is sorted name order.
    """
    names = sorted(box)
    out = []
    for tup in itertools.product(*(range(box[v][0], box[v][1] + 1) for v in names)):
        env = dict(zip(names, tup))
        if all(eval_atom(a, env) for a in atoms):
            out.append(tup)
    return out
