"""One-variable cell decomposition over explicit linear centers.

Every condition/target polynomial must factor as ``u * prod (t-c_i)^m``
with the centers ``c_i`` free of ``t``.  The valued line is partitioned
by closest center: on the piece where ``c_a`` is (weakly) closest and
``j = ord(t - c_a)``, the valuation of every other linear factor is
pinned by the ultrametric inequality, after a finite case analysis of
``j`` against the pairwise center distances (which may be symbolic; the
comparisons then ride along as guards).  Ties between equally close
centers go to the lowest center index, recorded by an explicit
angular-component disambiguation condition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from . import presburger
from .expr import CosetIn, ResEq, ResNeq, atom_key, ord_linform, res_neq
from .linform import LinForm, OrdKey
from .presburger import Cmp, ModEq, make_cmp, make_mod
from .terms import RTerm, VTerm, atom_ac


class UnsupportedShape(ValueError):
    """A term does not factor over linear centers in the cell variable."""


class DegenerateCenters(ValueError):
    pass


@dataclass(frozen=True)
class PreparedTerm:
    """Cell-local form of one target: its valuation as a linear form and
    its angular component as a residue term (mentioning the cell's
    ac-variable)."""

    target: VTerm
    ord_lf: LinForm
    ac: RTerm


@dataclass(frozen=True)
class Cell:
    kind: str           # 'one' | 'zero'
    center: VTerm
    jvar: str           # ord(t - center); unset for zero cells
    acvar: str          # residue variable for ac(t - center)
    conds: tuple        # atoms over jvar / parameters / acvar
    prepared: tuple     # PreparedTerm per requested target

    def describe(self):
        return {
            "kind": self.kind,
            "center": str(self.center),
            "jvar": self.jvar,
            "acvar": self.acvar,
            "conds": [str(a) for a in self.conds],
            "prepared": [
                {"target": str(p.target), "ord": str(p.ord_lf), "ac": str(p.ac)}
                for p in self.prepared
            ],
        }


MAX_CENTERS = 4


# ---------------------------------------------------------------------------
# Factoring over linear centers.
# ---------------------------------------------------------------------------

def _divide_linear(coeffs, center):
    """Synthetic division of {deg: VTerm} by (var - center); None if inexact."""
    if not coeffs:
        return None
    d = max(coeffs)
    q = {}
    carry = VTerm.const(0)
    for i in range(d, 0, -1):
        q[i - 1] = coeffs.get(i, VTerm.const(0)) + carry
        carry = q[i - 1] * center
    rem = coeffs.get(0, VTerm.const(0)) + carry
    if not rem.is_zero():
        return None
    return q


def _leading_unit_center(a, b):
    """Solve a*t + b = a*(t - center): center with -b/a exact, else None."""
    mono = a.monomial_split()
    if mono is None:
        return None
    w, vars_ = mono
    if not vars_ and len(w) == 1:
        (k, c), = w
        return (-b) * VTerm.const(Fraction(1, 1) / c, -k)
    # symbolic leading coefficient: try exact division of each monomial
    out = {}
    for m, wc in (-b).monos:
        md = dict(m)
        for v, e in vars_:
            if md.get(v, 0) < e:
                return None
            md[v] -= e
            if not md[v]:
                del md[v]
        if len(w) != 1:
            return None
        (k, c), = w
        out[tuple(sorted(md.items()))] = tuple((kk - k, cc / c) for kk, cc in wc)
    return VTerm(tuple(sorted(out.items())))


def factor_over_centers(f, var, candidates):
    """Write f = u * prod (t - c_i)^m_i with u free of var.

    Returns (u, ((center, mult), ...)) or None when f does not factor
    over linear centers augmented by the candidate list.
    """
    coeffs = f.coeffs_in(var)
    factors = {}
    while True:
        deg = max(coeffs) if coeffs else 0
        if deg == 0:
            u = coeffs.get(0, VTerm.const(0))
            return u, tuple(sorted(factors.items(), key=lambda cm: str(cm[0])))
        if coeffs.get(0, VTerm.const(0)).is_zero():
            zero = VTerm.const(0)
            factors[zero] = factors.get(zero, 0) + 1
            coeffs = {d - 1: c for d, c in coeffs.items() if d >= 1}
            continue
        if deg == 1:
            center = _leading_unit_center(coeffs[1], coeffs[0])
            if center is None:
                return None
            factors[center] = factors.get(center, 0) + 1
            coeffs = {0: coeffs[1]}
            continue
        progressed = False
        for c in candidates:
            q = _divide_linear(coeffs, c)
            if q is not None:
                factors[c] = factors.get(c, 0) + 1
                coeffs = q
                progressed = True
                break
        if not progressed:
            return None


def _collect_vterms(conds, targets, var):
    """All valued terms (mentioning var) whose ord/ac/coset data matters."""
    out = []

    def add(v):
        if var in v.variables() and v not in out:
            out.append(v)

    for v in targets:
        add(v)
    for a in conds:
        if isinstance(a, (Cmp, ModEq)):
            for k, _ in a.lf.coeffs:
                if isinstance(k, OrdKey):
                    add(k.term)
        elif isinstance(a, (ResEq, ResNeq)):
            for v in a.r.ac_args():
                add(v)
        elif isinstance(a, CosetIn):
            add(a.v)
    return out


def discover_centers(conds, targets, var):
    """Candidate centers from linear-factor extraction, fixpoint style."""
    vterms = _collect_vterms(conds, targets, var)
    candidates = [VTerm.const(0)]
    for _round in range(4):
        new = []
        for f in vterms:
            got = factor_over_centers(f, var, candidates)
            if got is None:
                continue
            for c, _m in got[1]:
                if c not in candidates and c not in new:
                    new.append(c)
        if not new:
            break
        candidates.extend(new)
    # keep only centers that are actually used by some factorization
    used = []
    for f in vterms:
        got = factor_over_centers(f, var, candidates)
        if got is None:
            raise UnsupportedShape(f"{f} does not factor over linear centers in {var}")
        for c, _m in got[1]:
            if c not in used:
                used.append(c)
    if not used:
        used = [VTerm.const(0)]
    if len(used) > MAX_CENTERS:
        raise UnsupportedShape(f"{len(used)} centers exceed the engine cap {MAX_CENTERS}")
    return sorted(used, key=str), vterms


# ---------------------------------------------------------------------------
# Decomposition.
# ---------------------------------------------------------------------------

class _Names:
    def __init__(self, taken):
        self.taken = set(taken)

    def fresh(self, prefix):
        i = 0
        while f"{prefix}{i}" in self.taken:
            i += 1
        name = f"{prefix}{i}"
        self.taken.add(name)
        return name


def _taken_names(conds, targets):
    out = set()
    for a in conds:
        if isinstance(a, (Cmp, ModEq)):
            for k, _ in a.lf.coeffs:
                out.add(str(k))
        elif isinstance(a, (ResEq, ResNeq)):
            out |= set(a.r.res_vars())
    for t in targets:
        out |= set(t.variables())
    return out


def decompose(conds, targets, var):
    """Partition the ``var``-line into cells adapted to conds and targets.

    Returns a list of :class:`Cell`.  One-cells carry the shell variable
    ``jvar`` with its Presburger constraints and the residue variable
    ``acvar`` (implicitly nonzero) for the angular component; on each
    cell every requested target and every condition involving ``var``
    is rewritten into prepared (ord, ac) data.
    """
    conds = [a for a in conds if a is not True]
    if any(a is False for a in conds):
        return []
    centers, vterms = discover_centers(conds, targets, var)
    facts = {}
    for f in vterms:
        facts[f] = factor_over_centers(f, var, centers)

    names = _Names(_taken_names(conds, targets) | {var})
    out = []
    k = len(centers)
    deltas = {}
    for a, b in itertools.permutations(range(k), 2):
        diff = centers[a] - centers[b]
        if diff.is_zero():
            raise DegenerateCenters(f"duplicate centers {centers[a]}")
        deltas[(a, b)] = ord_linform(diff)

    for a in range(k):
        jv = names.fresh("_j")
        av = names.fresh("_a")
        rel_tags = [("lt", "eq", "gt")] * (k - a - 1)
        for combo in itertools.product(*rel_tags):
            rel = {a + 1 + idx: tag for idx, tag in enumerate(combo)}
            cell = _build_one_cell(a, centers, rel, jv, av, deltas, facts, conds, var)
            if cell is not None:
                out.append(cell)

    for a in range(k):
        cell = _build_zero_cell(a, centers, conds, var, names)
        if cell is not None:
            out.append(cell)
    return out


def _center_index(c, centers):
    for i, ci in enumerate(centers):
        if ci == c:
            return i
    raise UnsupportedShape(f"unknown center {c}")


def _build_one_cell(a, centers, rel, jv, av, deltas, facts, conds, var):
    """Assemble the cell of center a under the distance case ``rel``.

    ``rel`` maps each later center index to how j = ord(t-c_a) compares
    with the distance delta(a,i): 'lt', 'eq' (tie, needs the ac
    disambiguation), or 'gt'.  Earlier centers always satisfy j > delta
    (ties go to the smaller index).
    """
    j = LinForm.var(jv)

    def ord_of(i):
        if i == a:
            return j
        if i < a:
            return deltas[(a, i)]
        return {"lt": j, "eq": j, "gt": deltas[(a, i)]}[rel[i]]

    def ac_of(i):
        if i == a:
            return RTerm.var(av)
        if i < a or rel[i] == "gt":
            return RTerm.ac(centers[a] - centers[i])
        if rel[i] == "lt":
            return RTerm.var(av)
        return RTerm.var(av) + RTerm.ac(centers[a] - centers[i])

    def prep_ord(f):
        u, factors = facts[f]
        if u.is_zero():
            return None
        lf = ord_linform(u)
        for c, m in factors:
            lf = lf + ord_of(_center_index(c, centers)).scale(m)
        return lf

    def prep_ac(f):
        u, factors = facts[f]
        if u.is_zero():
            return RTerm.const(0)
        r = RTerm.ac(u)
        for c, m in factors:
            r = r * ac_of(_center_index(c, centers)) ** m
        return r

    cell_conds = [res_neq(RTerm.var(av))]
    # distance-case atoms
    for i in range(a):
        cell_conds.append(make_cmp(deltas[(a, i)] + 1 - j, "<="))  # j >= d+1
    for i, tag in rel.items():
        d = deltas[(a, i)]
        if tag == "lt":
            cell_conds.append(make_cmp(j - d + 1, "<="))           # j <= d-1
        elif tag == "eq":
            cell_conds.append(make_cmp(j - d, "=="))
            cell_conds.append(res_neq(RTerm.var(av) + RTerm.ac(centers[a] - centers[i])))
        else:
            cell_conds.append(make_cmp(d + 1 - j, "<="))           # j >= d+1
    # rewrite the input conditions on this cell
    for atom in conds:
        cell_conds.extend(_rewrite_atom(atom, var, prep_ord, prep_ac, j))
    if any(x is False for x in cell_conds):
        return None
    cell_conds = [x for x in cell_conds if x is not True]
    pres = [x for x in cell_conds if isinstance(x, (Cmp, ModEq))]
    if presburger.unsatisfiable(pres):
        return None
    prepared = []
    for f in sorted(facts, key=str):
        lf = prep_ord(f)
        if lf is None:
            continue
        prepared.append(PreparedTerm(f, lf, prep_ac(f)))
    dedup = []
    for x in cell_conds:
        if x not in dedup:
            dedup.append(x)
    return Cell("one", centers[a], jv, av, tuple(sorted(dedup, key=atom_key)), tuple(prepared))


def _rewrite_atom(atom, var, prep_ord, prep_ac, j):
    """Rewrite one input condition into cell-local atoms (list)."""
    if isinstance(atom, (Cmp, ModEq)):
        lf = LinForm.constant(atom.lf.const)
        for key, c in atom.lf.coeffs:
            if isinstance(key, OrdKey) and var in key.term.variables():
                sub = prep_ord(key.term)
                if sub is None:
                    return [False]
                lf = lf + sub.scale(c)
            else:
                lf = lf + LinForm.make({key: c})
        if isinstance(atom, Cmp):
            return [make_cmp(lf, {"le": "<=", "eq": "==", "ne": "!="}[atom.op])]
        return [make_mod(lf, 0, atom.n)]
    if isinstance(atom, (ResEq, ResNeq)):
        r = atom.r
        for v in r.ac_args():
            if var in v.variables():
                r = r.substitute_ac(v, prep_ac(v))
        from .expr import res_eq
        return [res_eq(r) if isinstance(atom, ResEq) else res_neq(r)]
    if isinstance(atom, CosetIn):
        if var not in atom.v.variables():
            return [atom]
        lf = prep_ord(atom.v)
        lam_ord = ord_linform(atom.lam)
        if lf is None or lam_ord is None:
            return [False]
        return [atom, make_mod(lf - lam_ord, 0, atom.m)]
    return [atom]


class NotAffine(ValueError):
    pass


def prepare_affine(g, var, center):
    """Write g = u*(var - center) + w on the cell, u and w free of var.

    Returns (u, w) or None when g has genuine higher-degree parts in
    (var - center); callers may still salvage those through the residue
    shift when the cell pins their valuation.
    """
    shifted = g.substitute(var, VTerm.var(var) + center)
    coeffs = shifted.coeffs_in(var)
    if max(coeffs, default=0) <= 1:
        return coeffs.get(1, VTerm.const(0)), coeffs.get(0, VTerm.const(0))
    return None


def expand_at_center(g, var, center):
    """Coefficients of g as a polynomial in (var - center)."""
    shifted = g.substitute(var, VTerm.var(var) + center)
    return shifted.coeffs_in(var)


def _build_zero_cell(a, centers, conds, var, names):
    """The point t = center_a, when the conditions allow it."""
    new_conds = []
    for atom in conds:
        res = _atom_at_center(atom, var, centers[a])
        if res is False:
            return None
        if res is not True:
            new_conds.append(res)
    pres = [x for x in new_conds if isinstance(x, (Cmp, ModEq))]
    if presburger.unsatisfiable(pres):
        return None
    return Cell("zero", centers[a], "", names.fresh("_a"),
                tuple(sorted(new_conds, key=atom_key)), ())


def _atom_at_center(atom, var, center):
    """Evaluate a condition at the exact point var = center.

    Terms vanishing identically at the center have infinite valuation:
    upper bounds and equalities on their ord become false, lower bounds
    true, and their ac is zero.
    """
    from .expr import _subst_atom, res_eq

    if isinstance(atom, (Cmp, ModEq)):
        lf = LinForm.constant(atom.lf.const)
        for key, c in atom.lf.coeffs:
            if isinstance(key, OrdKey) and var in key.term.variables():
                v2 = key.term.substitute(var, center)
                if v2.is_zero():
                    # infinite valuation: sign of the coefficient decides
                    if isinstance(atom, ModEq):
                        return False
                    if atom.op == "le":
                        return c < 0
                    return atom.op == "ne"
                lf = lf + ord_linform(v2).scale(c)
            else:
                lf = lf + LinForm.make({key: c})
        if isinstance(atom, Cmp):
            return make_cmp(lf, {"le": "<=", "eq": "==", "ne": "!="}[atom.op])
        return make_mod(lf, 0, atom.n)
    if isinstance(atom, (ResEq, ResNeq)):
        r = atom.r
        for v in r.ac_args():
            if var in v.variables():
                r = r.substitute_ac(v, RTerm.ac(v.substitute(var, center)))
        return res_eq(r) if isinstance(atom, ResEq) else res_neq(r)
    if isinstance(atom, CosetIn):
        v2 = atom.v.substitute(var, center)
        if v2.is_zero():
            return False  # 0 is in no multiplicative coset
        return CosetIn(v2, atom.lam, atom.m)
    return atom
