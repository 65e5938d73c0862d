"""Constructible exponential expressions and their rewrite system.

A term is ``coeff * L^lexp * [conds] * (sum over res_sums of)
e(res_arg) * E(exp_arg)``; an expression is a finite sum of terms over a
declared variable context.  The rewrite system applies the
Grothendieck-ring style relations: shifting integral parts of the
E-argument into the residue exponential, killing or evaluating full
residue-line sums, dropping unsatisfiable terms, and merging supports
into a canonical piecewise form (so that rewrite-equal expressions are
structurally equal whenever the support algebra stays inside the
refinable fragment).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction

from . import lring, presburger
from .linform import LinForm, OrdKey
from .presburger import Cmp, ModEq, make_cmp, make_mod
from .terms import RTerm, VTerm, rcoerce, vcoerce, w_ac, w_ord


class SortError(TypeError):
    pass


class VariableCapture(ValueError):
    pass


class NonAffineSubstitution(ValueError):
    pass


BINDER_PREFIX = "_r"


# ---------------------------------------------------------------------------
# Condition atoms beyond the Presburger ones.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResEq:
    """Residue equation r == 0."""

    r: RTerm

    def __str__(self):
        return f"{self.r} == 0"

    __repr__ = __str__


@dataclass(frozen=True)
class ResNeq:
    r: RTerm

    def __str__(self):
        return f"{self.r} != 0"

    __repr__ = __str__


@dataclass(frozen=True)
class CosetIn:
    """Membership v ∈ lam * P_m (m-th powers)."""

    v: VTerm
    lam: VTerm
    m: int

    def __str__(self):
        return f"{self.v} in {self.lam} P {self.m}"

    __repr__ = __str__


def ord_linform(v):
    """Valuation of a valued term as a LinForm, when syntactically certain.

    Monomials are fully additive; other terms get an opaque OrdKey.
    Returns None for the zero term.
    """
    v = vcoerce(v)
    if v.is_zero():
        return None
    split = v.monomial_split()
    if split is not None:
        w, mono = split
        lf = LinForm.constant(w_ord(w))
        for name, e in mono:
            lf = lf + LinForm.make({OrdKey(VTerm.var(name)): e})
        return lf
    return LinForm.make({OrdKey(v): 1})


def ord_cmp(v, op, rhs):
    """Condition ``ord(v) op rhs`` as a canonical Presburger atom."""
    lf = ord_linform(v)
    if lf is None:
        raise SortError("ord of the zero term")
    rhs = rhs if isinstance(rhs, LinForm) else LinForm.constant(rhs)
    return make_cmp(lf - rhs, {"=": "==", "==": "=="}.get(op, op))


def _normalize_rterm_sign(r):
    """Scale a residue term to primitive form with positive leading sign."""
    if r.is_zero():
        return r
    coeffs = [c for _, c in r.monos]
    from math import gcd, lcm
    from functools import reduce
    m = reduce(lcm, (c.denominator for c in coeffs), 1)
    g = reduce(gcd, (abs(int(c * m)) for c in coeffs), 0)
    r = r * Fraction(m, g)
    if r.monos[0][1] < 0:
        r = -r
    return r


def _certainly_nonzero(r):
    """A residue term that is a nonzero constant or a unit monomial."""
    if r.is_constant():
        return not r.is_zero()
    if len(r.monos) == 1:
        mono, _ = r.monos[0]
        return all(atom[0] == "ac" for atom, _ in mono)
    return False


def res_eq(r):
    r = _normalize_rterm_sign(rcoerce(r))
    if r.is_zero():
        return True
    if _certainly_nonzero(r):
        return False
    return ResEq(r)


def res_neq(r):
    r = _normalize_rterm_sign(rcoerce(r))
    if r.is_zero():
        return False
    if _certainly_nonzero(r):
        return True
    return ResNeq(r)


def ac_eq(v, r):
    """ac(v) == r, canonicalized into a residue equation."""
    return res_eq(RTerm.ac(vcoerce(v)) - rcoerce(r))


def ac_neq(v, r):
    return res_neq(RTerm.ac(vcoerce(v)) - rcoerce(r))


def coset_in(v, lam, m):
    v, lam = vcoerce(v), vcoerce(lam)
    if int(m) < 1:
        raise SortError("coset exponent must be >= 1")
    if int(m) == 1:
        return True
    if lam.is_zero():
        raise SortError("coset with zero scaling")
    return CosetIn(v, lam, int(m))


def atom_key(a):
    if isinstance(a, (Cmp, ModEq)):
        return (0,) + presburger.atom_sort_key(a)
    if isinstance(a, ResEq):
        return (1, "eq", str(a.r))
    if isinstance(a, ResNeq):
        return (1, "ne", str(a.r))
    if isinstance(a, CosetIn):
        return (2, str(a.v), f"{a.lam}|{a.m}")
    raise TypeError(f"unknown condition atom {a!r}")


# ---------------------------------------------------------------------------
# Terms and expressions.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CTerm:
    coeff: lring.LRat
    lexp: LinForm
    conds: tuple
    res_sums: tuple
    exp_arg: VTerm
    res_arg: RTerm

    def signature(self):
        return (self.lexp, self.conds, self.res_sums, self.exp_arg, self.res_arg)


def make_term(coeff=lring.ONE, lexp=None, conds=(), res_sums=(), exp_arg=None, res_arg=None):
    return CTerm(
        coeff=coeff if isinstance(coeff, lring.LRat) else lring.coerce(coeff),
        lexp=lexp if lexp is not None else LinForm.constant(0),
        conds=tuple(conds),
        res_sums=tuple(res_sums),
        exp_arg=vcoerce(exp_arg) if exp_arg is not None else VTerm.const(0),
        res_arg=rcoerce(res_arg) if res_arg is not None else RTerm.const(0),
    )


@dataclass(frozen=True)
class CExp:
    terms: tuple
    context: tuple  # sorted ((name, sort), ...), sort in {'vf','res','int'}

    def __add__(self, other):
        other = as_cexp(other, self.context)
        return CExp(self.terms + other.terms, _merge_context(self.context, other.context))

    __radd__ = __add__

    def __neg__(self):
        return CExp(tuple(replace(t, coeff=-t.coeff) for t in self.terms), self.context)

    def __sub__(self, other):
        return self + (-as_cexp(other, self.context))

    def __mul__(self, other):
        other = as_cexp(other, self.context)
        return mul(self, other)

    __rmul__ = __mul__

    def scaled(self, c):
        c = c if isinstance(c, lring.LRat) else lring.coerce(c)
        return CExp(tuple(replace(t, coeff=t.coeff * c) for t in self.terms), self.context)

    def is_zero(self):
        return not self.terms

    def sort_of(self, name):
        return dict(self.context).get(name)

    def with_context(self, extra):
        return CExp(self.terms, _merge_context(self.context, tuple(sorted(extra.items()))))

    def free_res_vars(self):
        out = set()
        for t in self.terms:
            bound = set(t.res_sums)
            out |= set(t.res_arg.res_vars()) - bound
            for a in t.conds:
                if isinstance(a, (ResEq, ResNeq)):
                    out |= set(a.r.res_vars()) - bound
        return out

    def __str__(self):
        from .dsl import print_expr
        return print_expr(self)

    __repr__ = __str__


def _merge_context(a, b):
    d = dict(a)
    for name, sort in b:
        if d.get(name, sort) != sort:
            raise SortError(f"variable {name} declared as both {d[name]} and {sort}")
        d[name] = sort
    return tuple(sorted(d.items()))


def as_cexp(x, context=()):
    if isinstance(x, CExp):
        return x
    if isinstance(x, (int, Fraction, lring.LRat)):
        c = x if isinstance(x, lring.LRat) else lring.coerce(x)
        if c.is_zero():
            return CExp((), tuple(context))
        return CExp((make_term(coeff=c),), tuple(context))
    raise TypeError(f"cannot view {x!r} as an expression")


def const_expr(c, context=()):
    return as_cexp(c, context)


def indicator(conds, context=()):
    return normalize(CExp((make_term(conds=tuple(conds)),), tuple(context)))


def E(v, context=()):
    return CExp((make_term(exp_arg=v),), tuple(context))


def e_res(r, context=()):
    return CExp((make_term(res_arg=r),), tuple(context))


def l_power(lf, context=()):
    lf = lf if isinstance(lf, LinForm) else LinForm.constant(lf)
    return CExp((make_term(lexp=lf),), tuple(context))


def res_sum(e, names):
    """Bind residue variables of e under a residue sum."""
    names = tuple(names)
    terms = []
    for t in e.terms:
        if set(names) & set(t.res_sums):
            raise VariableCapture(f"{names} already bound in {t}")
        terms.append(replace(t, res_sums=t.res_sums + names))
    ctx = tuple((n, s) for n, s in e.context if n not in names)
    return CExp(tuple(terms), ctx)


# ---------------------------------------------------------------------------
# Product.
# ---------------------------------------------------------------------------

def _fresh_binders(taken, howmany):
    out = []
    i = 0
    while len(out) < howmany:
        cand = f"{BINDER_PREFIX}{i}"
        if cand not in taken:
            out.append(cand)
        i += 1
    return out


def _rename_term_binders(t, mapping):
    if not mapping:
        return t
    conds = tuple(_rename_atom(a, mapping) for a in t.conds)
    return replace(
        t,
        conds=conds,
        res_sums=tuple(mapping.get(n, n) for n in t.res_sums),
        res_arg=t.res_arg.rename_vars(mapping),
    )


def _rename_atom(a, mapping):
    if isinstance(a, ResEq):
        return ResEq(a.r.rename_vars(mapping))
    if isinstance(a, ResNeq):
        return ResNeq(a.r.rename_vars(mapping))
    return a


def mul(a, b):
    """Ring product: E-arguments add, residue exponentials add, conditions
    conjoin; clashing residue binders are renamed apart."""
    ctx = _merge_context(a.context, b.context)
    out = []
    for ta in a.terms:
        for tb in b.terms:
            clash = set(ta.res_sums) & set(tb.res_sums)
            if clash:
                taken = set(ta.res_sums) | set(tb.res_sums) | {n for n, _ in ctx}
                mapping = dict(zip(sorted(clash), _fresh_binders(taken, len(clash))))
                tb = _rename_term_binders(tb, mapping)
            out.append(CTerm(
                coeff=ta.coeff * tb.coeff,
                lexp=ta.lexp + tb.lexp,
                conds=ta.conds + tb.conds,
                res_sums=ta.res_sums + tb.res_sums,
                exp_arg=ta.exp_arg + tb.exp_arg,
                res_arg=ta.res_arg + tb.res_arg,
            ))
    return normalize(CExp(tuple(out), ctx))


# ---------------------------------------------------------------------------
# Normalization.
# ---------------------------------------------------------------------------

def _canon_binders(t):
    """Rename residue binders to canonical names by order of appearance."""
    if not t.res_sums:
        return t
    order = []
    for v in t.res_arg.res_vars():
        if v in t.res_sums and v not in order:
            order.append(v)
    for a in sorted(t.conds, key=atom_key):
        if isinstance(a, (ResEq, ResNeq)):
            for v in a.r.res_vars():
                if v in t.res_sums and v not in order:
                    order.append(v)
    for v in t.res_sums:
        if v not in order:
            order.append(v)
    mapping = {v: f"{BINDER_PREFIX}{i}" for i, v in enumerate(order)}
    if all(k == v for k, v in mapping.items()):
        return replace(t, res_sums=tuple(sorted(t.res_sums, key=lambda n: mapping[n])))
    # two-step rename avoids collisions with existing canonical names
    tmp = {v: f"~tmp{i}" for i, v in enumerate(order)}
    t = _rename_term_binders(t, tmp)
    t = _rename_term_binders(t, {tmp[v]: mapping[v] for v in order})
    return replace(t, res_sums=tuple(f"{BINDER_PREFIX}{i}" for i in range(len(order))))


def _clean_conds(t):
    """Drop duplicates/Trues; return None when a condition is False/unsat."""
    seen = []
    pres = []
    for a in t.conds:
        if a is True:
            continue
        if a is False:
            return None
        if a not in seen:
            seen.append(a)
            if isinstance(a, (Cmp, ModEq)):
                pres.append(a)
    for a in seen:
        if isinstance(a, ResEq) and ResNeq(a.r) in seen:
            return None
    if presburger.unsatisfiable(pres):
        return None
    return replace(t, conds=tuple(sorted(seen, key=atom_key)))


def _absorb_lexp_const(t):
    """Canonical split between the L-exponent and the coefficient: the
    exponent keeps no constant part (it moves into the coefficient)."""
    c = t.lexp.const
    if c == 0:
        return t
    if c.denominator != 1:
        k = c.numerator // c.denominator  # absorb the integer part
        if k == 0:
            return t
        c = Fraction(k)
    return replace(
        t,
        lexp=t.lexp - c,
        coeff=t.coeff * lring.from_l_power(int(c)),
    )


def normalize(e, refine=True):
    """Canonical form: per-term cleanup, merge, and support refinement."""
    cleaned = []
    for t in e.terms:
        if t.coeff.is_zero():
            continue
        t = _clean_conds(t)
        if t is None:
            continue
        t = _canon_binders(_absorb_lexp_const(t))
        cleaned.append(t)

    merged = {}
    for t in cleaned:
        key = t.signature()
        if key in merged:
            merged[key] = replace(merged[key], coeff=merged[key].coeff + t.coeff)
        else:
            merged[key] = t
    terms = [t for t in merged.values() if not t.coeff.is_zero()]

    if refine:
        terms = _refine_supports(terms)

    terms.sort(key=_term_sort_key)
    return CExp(tuple(terms), e.context)


def _term_sort_key(t):
    return (
        str(t.exp_arg),
        str(t.res_arg),
        t.res_sums,
        tuple(atom_key(a) for a in t.conds),
        str(t.lexp),
        str(t.coeff),
    )


# ---------------------------------------------------------------------------
# Support refinement: canonicalize overlapping Presburger supports.
# ---------------------------------------------------------------------------

_MAX_PIECES = 64


def _refine_supports(terms):
    """Merge terms whose supports overlap along refinable directions.

    Terms are grouped by everything except single-direction Presburger
    comparison atoms; within a group the integer supports are refined
    into identical disjoint pieces, coefficients added per piece, and
    pieces coalesced back into maximal intervals.
    """
    groups = {}
    for t in terms:
        simple, complex_ = [], []
        for a in t.conds:
            if isinstance(a, Cmp) and a.op in ("le", "eq") and a.lf.coeffs:
                simple.append(a)
            else:
                complex_.append(a)
        key = (tuple(sorted(complex_, key=atom_key)), t.res_sums, t.exp_arg, t.res_arg)
        groups.setdefault(key, []).append((t, simple))

    out = []
    for (complex_conds, res_sums, exp_arg, res_arg), items in groups.items():
        refined = _refine_group(items)
        if refined is None:
            out.extend(t for t, _ in items)
        else:
            for conds_extra, lexp, coeff in refined:
                out.append(CTerm(
                    coeff=coeff,
                    lexp=lexp,
                    conds=tuple(sorted(list(complex_conds) + list(conds_extra), key=atom_key)),
                    res_sums=res_sums,
                    exp_arg=exp_arg,
                    res_arg=res_arg,
                ))
    return out


def _direction_of(a):
    if a.lf.coeffs[0][1] < 0:
        return tuple((k, -c) for k, c in a.lf.coeffs), -1
    return a.lf.coeffs, 1


def _unimodular_ok(directions):
    """Whether the direction values jointly range over all of Z^k.

    Succeeds when the rows can be eliminated one by one through unit
    pivots (integer row reduction); that certifies the refinement grid
    really is a product of independent integer coordinates.
    """
    rows = [dict(d) for d in directions]
    remaining = list(range(len(rows)))
    while remaining:
        pick = None
        for i in remaining:
            for k, c in rows[i].items():
                if abs(c) == 1:
                    pick = (i, k, c)
                    break
            if pick:
                break
        if pick is None:
            return False
        i, k, c = pick
        for j in remaining:
            if j == i or k not in rows[j]:
                continue
            f = rows[j][k] / c
            new = {}
            for kk in set(rows[j]) | set(rows[i]):
                v = rows[j].get(kk, Fraction(0)) - f * rows[i].get(kk, Fraction(0))
                if v:
                    new[kk] = v
            rows[j] = new
        remaining.remove(i)
    return True


def _refine_group(items):
    """Refine a group of (term, simple_atoms) into disjoint pieces.

    Returns a list of (extra_atoms, lexp, coeff) or None when outside
    the refinable fragment.
    """
    directions = {}
    for _t, atoms in items:
        for a in atoms:
            d, _sign = _direction_of(a)
            directions.setdefault(d, set())
    dirs = sorted(directions, key=str)
    if not dirs:
        return None
    if len(dirs) > 4 or not _unimodular_ok(dirs):
        return None

    # per term and direction: an integer support interval
    supports = []
    for t, atoms in items:
        sup = {}
        for a in atoms:
            d, sign = _direction_of(a)
            lo, hi = sup.get(d, (None, None))
            c = int(a.lf.const)
            if a.op == "eq":
                v = -c  # eq atoms are sign-normalized
                lo = v if lo is None else max(lo, v)
                hi = v if hi is None else min(hi, v)
            elif sign > 0:
                hi = -c if hi is None else min(hi, -c)
            else:
                lo = c if lo is None else max(lo, c)
            sup[d] = (lo, hi)
        supports.append((t, sup))

    # thresholds per direction
    pieces_per_dir = {}
    for d in dirs:
        cuts = set()
        for _t, sup in supports:
            lo, hi = sup.get(d, (None, None))
            if lo is not None:
                cuts.add(lo)
            if hi is not None:
                cuts.add(hi)
        cuts = sorted(cuts)
        pieces = []
        if not cuts:
            pieces.append((None, None))
        else:
            pieces.append((None, cuts[0] - 1))
            for i, c in enumerate(cuts):
                pieces.append((c, c))
                nxt = cuts[i + 1] if i + 1 < len(cuts) else None
                if nxt is None:
                    pieces.append((c + 1, None))
                elif nxt > c + 1:
                    pieces.append((c + 1, nxt - 1))
        pieces = [p for p in pieces if p[0] is None or p[1] is None or p[0] <= p[1]]
        if len(pieces) > _MAX_PIECES:
            return None
        pieces_per_dir[d] = pieces

    total = 1
    for d in dirs:
        total *= len(pieces_per_dir[d])
    if total > _MAX_PIECES ** 2:
        return None

    def inside(piece, bounds):
        lo, hi = bounds
        plo, phi = piece
        if lo is not None and (plo is None or plo < lo):
            return False
        if hi is not None and (phi is None or phi > hi):
            return False
        return True

    # assemble piecewise values: cell -> {raw lexp: coeff}
    cells = {}
    for combo in itertools.product(*(pieces_per_dir[d] for d in dirs)):
        acc = {}
        for t, sup in supports:
            if all(inside(piece, sup.get(d, (None, None))) for piece, d in zip(combo, dirs)):
                le, c = _canon_entry(t.lexp, t.coeff)
                acc[le] = acc[le] + c if le in acc else c
        acc = {le: c for le, c in acc.items() if not c.is_zero()}
        if acc:
            cells[tuple(combo)] = acc

    # coalesce along each direction in turn, to a fixpoint
    while True:
        before = cells
        for idx in range(len(dirs)):
            cells = _coalesce(cells, idx, dirs)
        if cells == before:
            break

    out = []
    for combo, acc in sorted(cells.items(), key=str):
        atoms = []
        for (plo, phi), d in zip(combo, dirs):
            lf = LinForm(d, Fraction(0))
            if plo is not None and plo == phi:
                atoms.append(make_cmp(lf - plo, "=="))
                continue
            if plo is not None:
                atoms.append(make_cmp(plo - lf, "<="))
            if phi is not None:
                atoms.append(make_cmp(lf - phi, "<="))
        # pin exponents on point pieces for a canonical presentation
        acc2 = {}
        for le, c in acc.items():
            le2, c2 = _pin_lexp(le, c, dirs, combo)
            acc2[le2] = acc2[le2] + c2 if le2 in acc2 else c2
        for le, c in sorted(acc2.items(), key=str):
            if c.is_zero():
                continue
            out.append((tuple(a for a in atoms if a is not True), le, c))
    return out


def _canon_entry(le, c):
    k = le.const
    if k and k.denominator == 1:
        return le - k, c * lring.from_l_power(int(k))
    return le, c


def _solve_rows(rows):
    """Triangularize affine relations (row == 0), first-key pivots."""
    solved = []
    for row in rows:
        for piv, rep in solved:
            if row.coeff(piv):
                row = row.substitute(piv, rep)
        if row.is_constant():
            continue
        pivot, c0 = row.coeffs[0]
        solved.append((pivot, row.drop(pivot).scale(Fraction(-1, c0))))
    return solved


def _apply_solved(lexp, solved):
    for _ in range(len(solved) + 1):
        hit = False
        for piv, rep in solved:
            if lexp.coeff(piv):
                lexp = lexp.substitute(piv, rep)
                hit = True
        if not hit:
            break
    return lexp


def _point_rows(dirs, combo):
    rows = []
    for (plo, phi), d in zip(combo, dirs):
        if plo is not None and plo == phi:
            rows.append(LinForm(d, Fraction(-plo)))  # row == 0 on the piece
    return rows


def _pin_lexp(lexp, coeff, dirs, combo):
    """Canonical exponent on a piece: reduce modulo the affine relations
    of all pinned directions, then absorb the integral constant."""
    lexp = _apply_solved(lexp, _solve_rows(_point_rows(dirs, combo)))
    c = lexp.const
    if c and c.denominator == 1:
        lexp = lexp - c
        coeff = coeff * lring.from_l_power(int(c))
    return lexp, coeff


def _is_point(piece):
    return piece[0] is not None and piece[0] == piece[1]


def _acc_at(acc, d, v, extra_rows=()):
    """The value family of a description on the slab {direction = v},
    reduced modulo the other pinned relations of the bucket."""
    solved = _solve_rows([LinForm(d, Fraction(-v))] + list(extra_rows))
    out = {}
    for le, c in acc.items():
        le2, cc2 = _canon_entry(_apply_solved(le, solved), c)
        out[le2] = out.get(le2, lring.ZERO) + cc2
    return {k: c for k, c in out.items() if not c.is_zero()}


def _coalesce(cells, idx, dirs):
    """Merge adjacent pieces along dirs[idx] carrying one description."""
    d = dirs[idx]
    rest_dirs = dirs[:idx] + dirs[idx + 1:]
    buckets = {}
    for combo, acc in cells.items():
        rest = combo[:idx] + combo[idx + 1:]
        buckets.setdefault(rest, []).append((combo[idx], acc))
    out = {}
    for rest, entries in buckets.items():
        extra_rows = _point_rows(rest_dirs, rest)
        entries.sort(key=lambda pa: (pa[0][0] is not None, pa[0][0] if pa[0][0] is not None else 0))
        changed = True
        while changed:
            changed = False
            merged = []
            for piece, acc in entries:
                if merged:
                    prev_piece, prev_acc = merged[-1]
                    adjacent = prev_piece[1] is not None and piece[0] is not None \
                        and prev_piece[1] + 1 == piece[0]
                    if adjacent:
                        joined = _try_join(prev_piece, prev_acc, piece, acc, d, extra_rows)
                        if joined is not None:
                            merged[-1] = ((prev_piece[0], piece[1]), joined)
                            changed = True
                            continue
                merged.append((piece, acc))
            entries = merged
        for piece, acc in entries:
            out[rest[:idx] + (piece,) + rest[idx:]] = acc
    return out


def _try_join(p1, a1, p2, a2, d, extra_rows=()):
    """Description valid across both adjacent pieces, or None.

    A point piece contributes only its value at the point, so any
    description matching that value extends over it; two intervals
    require their symbolic descriptions to agree.
    """
    pt1, pt2 = _is_point(p1), _is_point(p2)
    if a1 == a2:
        return a1
    if not pt1 and not pt2:
        return None
    if pt1 and pt2:
        if _acc_at(a1, d, p2[0], extra_rows) == _acc_at(a2, d, p2[0], extra_rows):
            return a1
        if _acc_at(a2, d, p1[0], extra_rows) == _acc_at(a1, d, p1[0], extra_rows):
            return a2
        return None
    if pt1:
        return a2 if _acc_at(a2, d, p1[0], extra_rows) == _acc_at(a1, d, p1[0], extra_rows) else None
    return a1 if _acc_at(a1, d, p2[0], extra_rows) == _acc_at(a2, d, p2[0], extra_rows) else None


# ---------------------------------------------------------------------------
# Rewrite rules.
# ---------------------------------------------------------------------------

DEFAULT_RULE_ORDER = ("shift", "ressum", "unsat")


def rewrite(e, rule_order=DEFAULT_RULE_ORDER):
    """Apply the relation rules to a fixpoint, then canonicalize.

    ``rule_order`` only affects the application order, not the normal
    form; the confluence property test exercises permutations.
    """
    changed = True
    terms = list(e.terms)
    while changed:
        changed = False
        new_terms = []
        for t in terms:
            res = None
            for rule in rule_order:
                res = _RULES[rule](t)
                if res is not None:
                    changed = True
                    new_terms.extend(res)
                    break
            if res is None:
                new_terms.append(t)
        terms = new_terms
    return normalize(CExp(tuple(terms), e.context))


def _pres_atoms(t):
    return [a for a in t.conds if isinstance(a, (Cmp, ModEq))]


def _rule_shift(t):
    """Move E-argument summands with certain nonnegative valuation into
    the residue exponential (zero-valuation parts contribute their
    angular component, strictly positive parts vanish)."""
    if t.exp_arg.is_zero():
        return None
    pres = _pres_atoms(t)
    keep, shifted = [], []
    for mono, w in t.exp_arg.monos:
        piece = VTerm(((mono, w),))
        lf = ord_linform(piece)
        if lf is None:
            continue
        if lf.is_constant():
            v = lf.const
            if v >= 1:
                shifted.append(RTerm.const(0))
                continue
            if v == 0:
                shifted.append(RTerm.ac(piece))
                continue
            keep.append((mono, w))
            continue
        ge1 = make_cmp(1 - lf, "<=")
        eq0 = make_cmp(lf, "==")
        if ge1 is True or (ge1 is not False and presburger.entails(pres, ge1)):
            shifted.append(RTerm.const(0))
        elif eq0 is True or (eq0 is not False and presburger.entails(pres, eq0)):
            shifted.append(RTerm.ac(piece))
        else:
            keep.append((mono, w))
    if not shifted:
        return None
    extra = RTerm.const(0)
    for r in shifted:
        extra = extra + r
    return [replace(t, exp_arg=VTerm(tuple(keep)), res_arg=t.res_arg + extra)]


def _rule_ressum(t):
    """Evaluate residue-line sums that are syntactically certain:
    an unused bound variable contributes a factor L; a bound variable
    appearing only linearly in the residue exponential with a unit
    coefficient makes the term vanish."""
    for name in t.res_sums:
        in_conds = any(
            isinstance(a, (ResEq, ResNeq)) and name in a.r.res_vars() for a in t.conds
        )
        deg = t.res_arg.degree_in_var(name)
        if not in_conds and deg == 0:
            return [replace(
                t,
                coeff=t.coeff * lring.L,
                res_sums=tuple(n for n in t.res_sums if n != name),
            )]
        if not in_conds and deg == 1:
            c, _rest = t.res_arg.linear_split(name)
            if _certainly_nonzero(c):
                return []
    return None


def _rule_unsat(t):
    t2 = _clean_conds(t)
    if t2 is None:
        return []
    return None


_RULES = {"shift": _rule_shift, "ressum": _rule_ressum, "unsat": _rule_unsat}


# ---------------------------------------------------------------------------
# Substitution (pullback along an affine map of one valued variable).
# ---------------------------------------------------------------------------

def substitute(e, var, repl, new_var=None):
    """Pull back along ``var := repl`` with repl affine in one variable.

    Conditions rewrite through the multiplicativity of ord and ac on
    monomials; non-monomial arguments keep opaque ord/ac atoms.
    """
    repl = vcoerce(repl)
    if new_var is not None:
        if repl.degree_in(new_var) > 1:
            raise NonAffineSubstitution(f"{repl} is not affine in {new_var}")
    elif repl.variables() and all(repl.degree_in(v) > 1 for v in repl.variables()):
        raise NonAffineSubstitution(f"{repl} is not affine in any variable")
    terms = []
    for t in e.terms:
        conds = []
        for a in t.conds:
            conds.append(_subst_atom(a, var, repl))
        terms.append(replace(
            t,
            lexp=_subst_linform(t.lexp, var, repl),
            conds=tuple(conds),
            exp_arg=t.exp_arg.substitute(var, repl),
            res_arg=_subst_rterm(t.res_arg, var, repl),
        ))
    ctx = tuple((n, s) for n, s in e.context if n != var)
    extra = {v: "vf" for v in repl.variables()}
    return normalize(CExp(tuple(terms), _merge_context(ctx, tuple(sorted(extra.items())))))


def _subst_linform(lf, var, repl):
    out = LinForm.constant(lf.const)
    for k, c in lf.coeffs:
        if isinstance(k, OrdKey) and var in k.term.variables():
            new = ord_linform(k.term.substitute(var, repl))
            if new is None:
                raise NonAffineSubstitution(f"ord({k.term}) becomes ord(0)")
            out = out + new.scale(c)
        else:
            out = out + LinForm.make({k: c})
    return out


def _subst_rterm(r, var, repl):
    out = r
    for v in list(r.ac_args()):
        if var in v.variables():
            out = out.substitute_ac(v, RTerm.ac(v.substitute(var, repl)))
    return out


def _subst_atom(a, var, repl):
    if isinstance(a, (Cmp, ModEq)):
        lf = _subst_linform(a.lf, var, repl)
        if isinstance(a, Cmp):
            return make_cmp(lf, {"le": "<=", "eq": "==", "ne": "!="}[a.op])
        return make_mod(lf, 0, a.n)
    if isinstance(a, ResEq):
        return res_eq(_subst_rterm(a.r, var, repl))
    if isinstance(a, ResNeq):
        return res_neq(_subst_rterm(a.r, var, repl))
    if isinstance(a, CosetIn):
        return coset_in(a.v.substitute(var, repl), a.lam.substitute(var, repl), a.m)
    raise TypeError(f"unknown atom {a!r}")
