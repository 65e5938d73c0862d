"""Brute-force evaluation over truncated local fields.

This is the engine's ground truth: Haar integrals computed by exact
coset enumeration at a finite digit depth, residue point counts, the
shell-and-coset character integral, and the two-field transfer
comparison harness.  Enumeration order is fixed (lexicographic digit
tuples, sorted variable names) so results are bit-reproducible.
"""

from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass
from fractions import Fraction

from . import expr as ex
from . import presburger
from .linform import LinForm, OrdKey
from .localfield import (
    CharacterSpec, LocalField, PadicElement, TWO_PI_I, coeff_at, coset_density,
    eval_atom, eval_linform, eval_rterm, eval_vterm, hensel_exponent,
    in_coset, interpret, interpret_exact, is_character_free, psi_eval,
)
from .presburger import Cmp, ModEq, make_cmp
from .terms import VTerm


class TooLarge(ValueError):
    pass


class MissingBox(ValueError):
    pass


MAX_ENUMERATION = 10 ** 7


@dataclass(frozen=True)
class IntegrationBox:
    """Enumeration window: per valued variable (vmin, depth), per
    integer variable inclusive bounds."""

    vf: tuple = ()    # ((name, (vmin, depth)), ...)
    ints: tuple = ()  # ((name, (lo, hi)), ...)

    @staticmethod
    def make(vf=None, ints=None):
        return IntegrationBox(
            tuple(sorted((vf or {}).items())),
            tuple(sorted((ints or {}).items())),
        )

    def vf_dict(self):
        return dict(self.vf)

    def int_dict(self):
        return dict(self.ints)


@dataclass(frozen=True)
class OracleResult:
    value: complex
    exact: object          # Fraction when the integrand is character-free
    refinement_delta: float
    truncated: bool

    def describe(self):
        return {
            "value": [self.value.real, self.value.imag],
            "exact": str(self.exact) if self.exact is not None else None,
            "delta": self.refinement_delta,
            "truncated": self.truncated,
        }


# ---------------------------------------------------------------------------
# Support bounds.
# ---------------------------------------------------------------------------

def derive_vmin(e, var, lo=-8, hi=8):
    """Largest c with ord(var) >= c provable from every term's conditions."""
    key = LinForm.make({OrdKey(VTerm.var(var)): 1})
    best = None
    for t in e.terms:
        pres = [a for a in t.conds if isinstance(a, (Cmp, ModEq))]
        got = None
        for c in range(hi, lo - 1, -1):
            atom = make_cmp(Fraction(c) - key, "<=")
            if presburger.entails(pres, atom):
                got = c
                break
        if got is None:
            return None
        best = got if best is None else min(best, got)
    return best


def derive_box(e, depth):
    """Syntactic support box; None when some variable has no lower bound."""
    vf = {}
    for name, sort in e.context:
        if sort != "vf":
            continue
        vmin = derive_vmin(e, name)
        if vmin is None:
            return None
        vf[name] = (vmin, depth)
    return IntegrationBox.make(vf=vf)


# ---------------------------------------------------------------------------
# Numeric integration.
# ---------------------------------------------------------------------------

def _representatives(K, vmin, depth):
    """Exact coset representatives sum a_i w^i, i in [vmin, vmin+depth)."""
    for digits in itertools.product(range(K.p), repeat=depth):
        yield PadicElement.from_digits(K, vmin, digits, exact=True)


def _check_box(e, box):
    """A given box is honest when every vf support bound is entailed."""
    for name, (vmin, _d) in box.vf:
        got = derive_vmin(e, name, lo=vmin, hi=vmin)
        if got is None:
            return True
    return False


def _free_res_vars(e):
    return sorted(e.free_res_vars())


def numeric_integrate(e, K, ch, box=None, depth=4, opaque=()):
    """Haar integral by exact enumeration at finite depth.

    The result is exact once the integrand is constant on cosets at the
    enumeration depth; the reported refinement delta (recompute with
    one extra digit) certifies this empirically.
    """
    if box is None:
        box = derive_box(e, depth)
        if box is None:
            raise MissingBox("support has no syntactic lower bound; pass a box")
        truncated = False
    else:
        # derive bounds for valued variables the box does not mention
        have = box.vf_dict()
        missing = {}
        for name, sort in e.context:
            if sort == "vf" and name not in have:
                vmin = derive_vmin(e, name)
                if vmin is None:
                    raise MissingBox(f"no bound for {name}; extend the box")
                missing[name] = (vmin, depth)
        if missing:
            have.update(missing)
            box = IntegrationBox.make(vf=have, ints=box.int_dict())
        truncated = _check_box(e, box)
    val0, ex0 = _integrate_at(e, K, ch, box, 0, opaque)
    val1, _ = _integrate_at(e, K, ch, box, 1, opaque)
    return OracleResult(val0, ex0, abs(val0 - val1), truncated)


def _integrate_at(e, K, ch, box, extra, opaque=()):
    vf = box.vf_dict()
    ints = box.int_dict()
    vf_names = sorted(vf)
    int_names = sorted(ints)
    res_names = _free_res_vars(e)
    p = K.p
    total_points = 1
    for name in vf_names:
        total_points *= p ** (vf[name][1] + extra)
    for name in int_names:
        lo, hi = ints[name]
        total_points *= hi - lo + 1
    total_points *= p ** len(res_names)
    if total_points > MAX_ENUMERATION:
        raise TooLarge(f"{total_points} enumeration points exceed the cap")

    exact_ok = is_character_free(e)
    weight = Fraction(1)
    for name in vf_names:
        vmin, d = vf[name]
        weight /= Fraction(p) ** (vmin + d + extra)
    acc_c = 0j
    acc_f = Fraction(0)
    for rep in itertools.product(*(
        _representatives(K, vf[name][0], vf[name][1] + extra) for name in vf_names
    )):
        point = dict(zip(vf_names, rep))
        for int_tuple in itertools.product(*(
            range(ints[name][0], ints[name][1] + 1) for name in int_names
        )):
            int_env = dict(zip(int_names, int_tuple))
            for res_tuple in itertools.product(range(p), repeat=len(res_names)):
                res_env = dict(zip(res_names, res_tuple))
                if exact_ok:
                    acc_f += interpret_exact(e, K, point, int_env, res_env, opaque)
                else:
                    acc_c += interpret(e, K, ch, point, int_env, res_env, opaque)
    if exact_ok:
        exact = acc_f * weight
        return complex(exact), exact
    return acc_c * complex(weight), None


# ---------------------------------------------------------------------------
# Residue point counting.
# ---------------------------------------------------------------------------

def count_points(constraints, p, var_names=None):
    """Exact number of residue tuples satisfying eq/neq polynomial
    constraints over the prime field."""
    names = set()
    for a in constraints:
        names |= set(a.r.res_vars())
    names = sorted(names if var_names is None else var_names)
    if len(names) > 4 or p ** len(names) > MAX_ENUMERATION:
        raise TooLarge(f"{p}^{len(names)} residue points exceed the cap")
    K = LocalField("qp", p)
    count = 0
    for tup in itertools.product(range(p), repeat=len(names)):
        env = dict(zip(names, tup))
        ok = True
        for a in constraints:
            v = eval_rterm(a.r, K, {}, env)
            want_zero = isinstance(a, ex.ResEq)
            if (v == 0) != want_zero:
                ok = False
                break
        if ok:
            count += 1
    return count


# ---------------------------------------------------------------------------
# Shell-and-coset character integral.
# ---------------------------------------------------------------------------

def gauss_g(j, m, lam, K, ch=None):
    """Integral of the character over {ord u = j, u in lam*P_m}.

    For j above the character level the character is trivially 1 there
    and the value is the exact coset volume.
    """
    ch = ch or CharacterSpec.canonical(K)
    j = int(j)
    lam_ord = lam.ord()
    if lam_ord is None:
        raise ZeroDivisionError("coset with zero scaling")
    if (j - lam_ord) % m != 0:
        return OracleResult(0j, Fraction(0), 0.0, False)
    if j >= 1:
        vol = coset_volume(j, m, lam, K)
        return OracleResult(complex(vol), vol, 0.0, False)
    s = 0 if m % K.p else _vp_int(m, K.p)
    depth = max(2 * s + 2, 1 - j + ch.depth)
    total = 0j
    p = K.p
    for first in range(1, p):
        for rest in itertools.product(range(p), repeat=depth - 1):
            u = PadicElement.from_digits(K, j, (first,) + rest, exact=True)
            if in_coset(u, lam, m):
                total += psi_eval(ch, u)
    value = total / p ** (j + depth)
    return OracleResult(value, None, 0.0, False)


def coset_volume(j, m, lam, K):
    """Exact volume of {ord u = j, u in lam*P_m}."""
    lam_ord = lam.ord()
    if (j - lam_ord) % m != 0:
        return Fraction(0)
    dens = coset_density(K, lam, m)
    p = K.p
    return dens * (1 - Fraction(1, p)) * Fraction(1, p) ** j


def _vp_int(n, p):
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


# ---------------------------------------------------------------------------
# Transfer comparison.
# ---------------------------------------------------------------------------

def _twist_specs(K, depth):
    if depth == 0:
        return [((), CharacterSpec.canonical(K))]
    out = []
    for digits in itertools.product(range(K.p), repeat=depth):
        out.append((digits, CharacterSpec.from_digits(K, digits)))
    return out


def _prepared_points(e, K, box, opaque=()):
    """Cache (complex factor, E-argument element) per contributing point.

    The factor folds the coefficient, measure weight, indicator value
    and residue exponential; only the valued-field character depends on
    the twist, so one pass serves the whole character family.
    """
    vf = box.vf_dict()
    ints = box.int_dict()
    vf_names = sorted(vf)
    int_names = sorted(ints)
    res_names = _free_res_vars(e)
    p = K.p
    weight = Fraction(1)
    for name in vf_names:
        vmin, d = vf[name]
        weight /= Fraction(p) ** (vmin + d)
    entries = []
    for rep in itertools.product(*(
        _representatives(K, vf[name][0], vf[name][1]) for name in vf_names
    )):
        point = dict(zip(vf_names, rep))
        for int_tuple in itertools.product(*(
            range(ints[name][0], ints[name][1] + 1) for name in int_names
        )):
            int_env = dict(zip(int_names, int_tuple))
            for res_tuple in itertools.product(range(p), repeat=len(res_names)):
                res_env = dict(zip(res_names, res_tuple))
                for t in e.terms:
                    for assign in _res_assignments(t.res_sums, p):
                        env = dict(res_env)
                        env.update(assign)
                        memo = {}
                        if not all(eval_atom(a, K, None, point, env, int_env, memo) for a in t.conds):
                            continue
                        le = eval_linform(t.lexp, K, point, int_env, memo)
                        if le == float("-inf"):
                            continue
                        fac = complex(coeff_at(t.coeff, p)) * float(p) ** float(le)
                        if not t.res_arg.is_zero():
                            fac *= cmath.exp(TWO_PI_I * eval_rterm(t.res_arg, K, point, env, memo) / p)
                        for q in opaque:
                            fac *= float(coset_density(K, eval_vterm(q.lam, K, point), q.m))
                        gval = None
                        if not t.exp_arg.is_zero():
                            gval = eval_vterm(t.exp_arg, K, point)
                        entries.append((fac * complex(weight), gval))
    return entries


def _res_assignments(names, p):
    if not names:
        return [{}]
    out = [{}]
    for n in names:
        out = [dict(d, **{n: v}) for d in out for v in range(p)]
    return out


def _twisted_value(entries, ch):
    total = 0j
    for fac, gval in entries:
        total += fac * (psi_eval(ch, gval) if gval is not None else 1.0)
    return total


@dataclass(frozen=True)
class TransferReport:
    p: int
    twist_stable: bool
    rows: tuple          # ((twist_digits, qp_value, fpt_value), ...)
    max_delta: float     # max |qp - fpt| over matched twists
    patterns_agree: bool  # all-character vanishing pattern, both directions

    def describe(self):
        return {
            "p": self.p,
            "twist_stable": self.twist_stable,
            "max_delta": self.max_delta,
            "patterns_agree": self.patterns_agree,
            "rows": [
                {"twist": list(tw), "qp": [a.real, a.imag], "fpt": [b.real, b.imag]}
                for tw, a, b in self.rows
            ],
        }


def transfer_compare(e, primes, depth_m=2, depth=4, box=None, opaque=(), tol=1e-9):
    """Evaluate over both field families for every twist at each prime.

    Reports matched-twist values, their maximal discrepancy, whether the
    integrand's support makes values twist-stable (support inside the
    valuation ring), and whether the two sides' all-character vanishing
    patterns agree.
    """
    reports = []
    for p in primes:
        qp = LocalField("qp", p)
        fpt = LocalField("fpt", p)
        the_box = box or derive_box(e, depth)
        if the_box is None:
            raise MissingBox("support has no syntactic lower bound; pass a box")
        vmins = [v for _n, (v, _d) in the_box.vf]
        stable = all(v >= 0 for v in vmins)
        entries_qp = _prepared_points(e, qp, the_box, opaque)
        entries_fpt = _prepared_points(e, fpt, the_box, opaque)
        rows = []
        for digits, ch_qp in _twist_specs(qp, depth_m):
            ch_fpt = CharacterSpec.from_digits(fpt, digits) if digits else CharacterSpec.canonical(fpt)
            rows.append((digits, _twisted_value(entries_qp, ch_qp), _twisted_value(entries_fpt, ch_fpt)))
        max_delta = max(abs(a - b) for _tw, a, b in rows)
        qp_vanishes = all(abs(a) < tol for _tw, a, _b in rows)
        fpt_vanishes = all(abs(b) < tol for _tw, _a, b in rows)
        reports.append(TransferReport(
            p=p,
            twist_stable=stable,
            rows=tuple(rows),
            max_delta=max_delta,
            patterns_agree=qp_vanishes == fpt_vanishes,
        ))
    return reports
