"""The integration operator: eliminate bound variables from expressions.

Valued-field variables integrate through cell decomposition plus the
shell kernel (the exact integral of E over one shell, with or without a
fixed angular component), residue variables through finite residue-line
sums, and integer variables through exact geometric summation.  Results
are expressions in the remaining parameters; divergence is detected per
branch and reported, never silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from . import cells as cells_mod
from . import expr as ex
from . import lring, presburger
from .expr import CExp, CosetIn, CTerm, ResEq, ResNeq, make_term
from .linform import LinForm, OrdKey
from .presburger import Cmp, ModEq, make_cmp
from .terms import NotInvertible, RTerm, VTerm


class UnsupportedIntegrand(ValueError):
    """Symbolic path unavailable; the numeric oracle still applies."""


class UndeterminedUnitOrder(ValueError):
    pass


class NonAffineResidueArgument(ValueError):
    pass


@dataclass(frozen=True)
class OpaqueFactor:
    """Density of a power coset inside a unit shell, left to be counted
    over the concrete residue field at specialization."""

    lam: VTerm
    m: int

    def describe(self):
        return {"kind": "coset_shell_density", "lam": str(self.lam), "m": self.m}


@dataclass(frozen=True)
class IntegrationResult:
    status: str            # 'integrable' | 'non_integrable' | 'partially_symbolic'
    value: CExp
    opaque: tuple = ()     # OpaqueFactor list, paired with value terms in order of use
    offending: tuple = ()  # guards of a divergent branch

    def ok(self):
        return self.status in ("integrable", "partially_symbolic")


# ---------------------------------------------------------------------------
# The shell kernel.
# ---------------------------------------------------------------------------

def model_integral(j, ac_val, u, w, context=()):
    """Integral of E(u*z + w) over the shell {ord z = j (, ac z = ac_val)}.

    ``j`` is a linear form; the result is a guarded expression in the
    variables of ``j``/``u``/``w``.  Branches follow the sign of
    gamma = j + ord(u): negative gives zero, zero gives the top-digit
    character sum, positive the plain shell volume.
    """
    j = j if isinstance(j, LinForm) else LinForm.constant(j)
    u = VTerm.const(0) if u is None else u
    terms = []
    vol_coeff = lring.ONE if ac_val is not None else (lring.L - 1)
    if u.is_zero():
        terms.append(make_term(coeff=vol_coeff, lexp=-j - 1, exp_arg=w))
        return ex.normalize(CExp(tuple(terms), tuple(context)))
    gu = ex.ord_linform(u)
    gamma = j + gu
    eq0 = make_cmp(gamma, "==")
    ge1 = make_cmp(1 - gamma, "<=")
    # gamma = 0 branch
    if eq0 is not False:
        conds = () if eq0 is True else (eq0,)
        if ac_val is not None:
            terms.append(make_term(
                coeff=lring.ONE, lexp=-j - 1, conds=conds, exp_arg=w,
                res_arg=RTerm.ac(u) * ac_val,
            ))
        else:
            terms.append(make_term(coeff=-lring.ONE, lexp=-j - 1, conds=conds, exp_arg=w))
    # gamma > 0 branch
    if ge1 is not False:
        conds = () if ge1 is True else (ge1,)
        terms.append(make_term(coeff=vol_coeff, lexp=-j - 1, conds=conds, exp_arg=w))
    return ex.normalize(CExp(tuple(terms), tuple(context)))


# ---------------------------------------------------------------------------
# Integer summation.
# ---------------------------------------------------------------------------

def sum_int(e, var):
    """Eliminate an integer variable by exact summation."""
    out = []
    offending = None
    for t in e.terms:
        dom = [a for a in t.conds if isinstance(a, (Cmp, ModEq)) and a.lf.coeff(var)]
        rest = tuple(a for a in t.conds if a not in dom)
        res = presburger.sum_series(var, list(dom) + [a for a in rest if isinstance(a, (Cmp, ModEq))], t.lexp)
        if res.kind == "divergent":
            offending = tuple(rest) + tuple(res.offending)
            continue
        for b in res.branches:
            out.append(replace(
                t,
                coeff=t.coeff * b.coeff,
                lexp=b.lexp,
                conds=rest + tuple(g for g in b.guards if g is not True),
            ))
    ctx = tuple((n, s) for n, s in e.context if n != var)
    value = ex.rewrite(CExp(tuple(out), ctx))
    if offending is not None:
        return IntegrationResult("non_integrable", value, offending=offending)
    return IntegrationResult("integrable", value)


# ---------------------------------------------------------------------------
# Residue summation.
# ---------------------------------------------------------------------------

def _linear_in_var(r, name):
    try:
        return r.linear_split(name)
    except NotInvertible as exc:
        raise NonAffineResidueArgument(str(exc)) from None


def _solve_pin(atom_r, name):
    """From A*name + B == 0 with A invertible, the value -B/A; else None."""
    try:
        a, b = atom_r.linear_split(name)
    except NotInvertible:
        return None
    if a.is_zero():
        return None
    try:
        return (-b) * a.invert()
    except NotInvertible:
        return None


def sum_res_term(t, name):
    """Sum one term over a residue variable ranging over the residue line."""
    pins, neqs, others = [], [], []
    for a in t.conds:
        if isinstance(a, (ResEq, ResNeq)) and name in a.r.res_vars():
            if isinstance(a, ResEq):
                pins.append(a)
            else:
                neqs.append(a)
        else:
            others.append(a)
    res_sums = tuple(n for n in t.res_sums if n != name)

    if pins:
        val = _solve_pin(pins[0].r, name)
        if val is None:
            raise NonAffineResidueArgument(f"cannot solve {pins[0]} for {name}")
        conds = list(others)
        for a in pins[1:] + neqs:
            r2 = a.r.substitute_var(name, val)
            conds.append(ex.res_eq(r2) if isinstance(a, ResEq) else ex.res_neq(r2))
        return [replace(
            t,
            conds=tuple(conds),
            res_sums=res_sums,
            res_arg=t.res_arg.substitute_var(name, val),
        )]

    neq_vals = []
    for a in neqs:
        try:
            c, b = a.r.linear_split(name)
        except NotInvertible:
            raise NonAffineResidueArgument(f"{a} is not affine in {name}") from None
        if c.is_zero():
            others.append(a)
            continue
        try:
            neq_vals.append((-b) * c.invert())
        except NotInvertible:
            raise NonAffineResidueArgument(f"coefficient {c} of {name} in {a} may vanish") from None
    uniq = []
    for v in neq_vals:
        if v not in uniq:
            uniq.append(v)
    if len(uniq) > 1:
        # distinctness of the excluded points must be syntactically certain
        for i in range(len(uniq)):
            for k in range(i + 1, len(uniq)):
                if not ex._certainly_nonzero(uniq[i] - uniq[k]):
                    raise NonAffineResidueArgument("excluded residue points may coincide")

    c, d = _linear_in_var(t.res_arg, name)
    out = []
    # full-line part: L * e(d) on the branch where the coefficient vanishes
    c_zero = ex.res_eq(c)
    if c_zero is not False:
        conds = tuple(others) + (() if c_zero is True else (c_zero,))
        out.append(replace(
            t,
            coeff=t.coeff * lring.L,
            conds=conds,
            res_sums=res_sums,
            res_arg=d,
        ))
    # minus the excluded points
    for v in uniq:
        out.append(replace(
            t,
            coeff=-t.coeff,
            conds=tuple(others),
            res_sums=res_sums,
            res_arg=t.res_arg.substitute_var(name, v),
        ))
    return out


def sum_res(e, name):
    """Eliminate a residue variable (free or bound) by summation."""
    out = []
    for t in e.terms:
        mentions = name in t.res_arg.res_vars() or any(
            isinstance(a, (ResEq, ResNeq)) and name in a.r.res_vars() for a in t.conds
        )
        if not mentions:
            if name in t.res_sums:
                out.append(replace(
                    t, coeff=t.coeff * lring.L,
                    res_sums=tuple(n for n in t.res_sums if n != name),
                ))
            else:
                out.append(replace(t, coeff=t.coeff * lring.L))
            continue
        out.extend(sum_res_term(t, name))
    ctx = tuple((n, s) for n, s in e.context if n != name)
    return IntegrationResult("integrable", ex.rewrite(CExp(tuple(out), ctx)))


# ---------------------------------------------------------------------------
# Valued-field integration.
# ---------------------------------------------------------------------------

def _term_mentions_var(t, var):
    if var in t.exp_arg.variables():
        return True
    for k, _ in t.lexp.coeffs:
        if isinstance(k, OrdKey) and var in k.term.variables():
            return True
    for v in t.res_arg.ac_args():
        if var in v.variables():
            return True
    for a in t.conds:
        if isinstance(a, (Cmp, ModEq)):
            if any(isinstance(k, OrdKey) and var in k.term.variables() for k, _ in a.lf.coeffs):
                return True
        elif isinstance(a, (ResEq, ResNeq)):
            if any(var in v.variables() for v in a.r.ac_args()):
                return True
        elif isinstance(a, CosetIn):
            if var in a.v.variables() or var in a.lam.variables():
                return True
    return False


def _targets_of_term(t, var):
    """Valued terms whose prepared ord/ac the integration needs."""
    targets = []
    for k, _ in t.lexp.coeffs:
        if isinstance(k, OrdKey) and var in k.term.variables() and k.term not in targets:
            targets.append(k.term)
    for v in t.res_arg.ac_args():
        if var in v.variables() and v not in targets:
            targets.append(v)
    return targets


def _subst_prepared_linform(lf, var, prep):
    out = LinForm.constant(lf.const)
    for k, c in lf.coeffs:
        if isinstance(k, OrdKey) and var in k.term.variables():
            out = out + prep[k.term][0].scale(c)
        else:
            out = out + LinForm.make({k: c})
    return out


def _subst_prepared_rterm(r, var, prep):
    for v in list(r.ac_args()):
        if var in v.variables():
            r = r.substitute_ac(v, prep[v][1])
    return r


def _split_high_parts(t, coeffs, cell, jvar):
    """Salvage E-argument parts of degree >= 2 through the residue shift.

    On the cell, a part h*(t-c)^k has valuation ord(h) + k*j; parts
    forced strictly positive vanish from the residue, parts forced to
    exactly zero contribute their angular component.  Returns the extra
    residue exponential or None when some part stays undetermined.
    """
    pres = [a for a in cell.conds if isinstance(a, (Cmp, ModEq))]
    extra = RTerm.const(0)
    for k in sorted(coeffs):
        if k <= 1:
            continue
        h = coeffs[k]
        if h.is_zero():
            continue
        lf = ex.ord_linform(h)
        if lf is None:
            continue
        total = lf + LinForm.var(jvar).scale(k)
        ge1 = make_cmp(1 - total, "<=")
        eq0 = make_cmp(total, "==")
        if ge1 is True or (ge1 is not False and presburger.entails(pres, ge1)):
            continue
        if eq0 is True or (eq0 is not False and presburger.entails(pres, eq0)):
            extra = extra + RTerm.ac(h) * RTerm.var(cell.acvar) ** k
            continue
        return None
    return extra


def integrate_vf_term(t, var, context):
    """Integrate one term over a valued-field variable."""
    if not _term_mentions_var(t, var):
        return IntegrationResult(
            "non_integrable", CExp((), context),
            offending=t.conds + (make_cmp(LinForm.constant(0), "=="),),
        )

    targets = _targets_of_term(t, var)
    try:
        cell_list = cells_mod.decompose(
            list(t.conds),
            targets + ([t.exp_arg] if var in t.exp_arg.variables() else []),
            var,
        )
    except cells_mod.UnsupportedShape:
        # the E-argument need not factor over centers: affine arguments
        # (e.g. transform kernels) are handled per cell instead
        cell_list = cells_mod.decompose(list(t.conds), targets, var)
    pieces = []
    opaque = []
    offending = None
    for cell in cell_list:
        if cell.kind == "zero":
            continue  # zero-dimensional fibers carry no top-dimensional mass
        prep = {p.target: (p.ord_lf, p.ac) for p in cell.prepared}
        j = LinForm.var(cell.jvar)

        lexp = _subst_prepared_linform(t.lexp, var, prep)
        res_arg = _subst_prepared_rterm(t.res_arg, var, prep)

        # coset handling: only the plain-volume path stays symbolic
        coset_here = [a for a in cell.conds if isinstance(a, CosetIn) and var in a.v.variables()]
        conds = [a for a in cell.conds if not (isinstance(a, CosetIn) and var in a.v.variables())]

        if var in t.exp_arg.variables():
            got = cells_mod.prepare_affine(t.exp_arg, var, cell.center)
            if got is None:
                coeffs = cells_mod.expand_at_center(t.exp_arg, var, cell.center)
                extra = _split_high_parts(t, coeffs, cell, cell.jvar)
                if extra is None:
                    raise UnsupportedIntegrand(
                        f"E-argument {t.exp_arg} is not affine on the cell at {cell.center}"
                    )
                res_arg = res_arg + extra
                u = coeffs.get(1, VTerm.const(0))
                w = coeffs.get(0, VTerm.const(0))
            else:
                u, w = got
        else:
            u, w = VTerm.const(0), t.exp_arg

        if coset_here and not u.is_zero():
            raise UnsupportedIntegrand(
                "character integral over a power-coset shell has no symbolic closed form"
            )

        acvar = cell.acvar
        ac_constrained = any(
            isinstance(a, (ResEq, ResNeq)) and acvar in a.r.res_vars()
            and a != ex.ResNeq(RTerm.var(acvar))
            for a in conds
        ) or acvar in res_arg.res_vars()

        if ac_constrained:
            kernel = model_integral(j, RTerm.var(acvar), u, w, context)
        else:
            conds = [a for a in conds
                     if not (isinstance(a, (ResEq, ResNeq)) and acvar in a.r.res_vars())]
            kernel = model_integral(j, None, u, w, context)

        if coset_here:
            for a in coset_here:
                opaque.append(OpaqueFactor(a.lam, a.m))

        base = CExp((make_term(
            coeff=t.coeff, lexp=lexp, conds=tuple(conds),
            res_sums=t.res_sums, res_arg=res_arg,
        ),), context)
        prod = ex.mul(base, kernel)
        if ac_constrained:
            prod = sum_res(prod.with_context({acvar: "res"}), acvar).value

        summed = sum_int(prod.with_context({cell.jvar: "int"}), cell.jvar)
        if summed.status == "non_integrable":
            offending = summed.offending
            continue
        pieces.append(summed.value)

    total = CExp((), context)
    for p in pieces:
        total = total + p
    value = ex.rewrite(total)
    if offending is not None:
        return IntegrationResult("non_integrable", value, offending=offending)
    if opaque:
        return IntegrationResult("partially_symbolic", value, opaque=tuple(opaque))
    return IntegrationResult("integrable", value)


def integrate_vf(e, var):
    ctx = tuple((n, s) for n, s in e.context if n != var)
    total = CExp((), ctx)
    opaque = []
    offending = None
    status = "integrable"
    for t in e.terms:
        res = integrate_vf_term(t, var, ctx)
        if res.status == "non_integrable":
            status = "non_integrable"
            offending = res.offending
            continue
        opaque.extend(res.opaque)
        total = total + res.value
    value = ex.rewrite(total)
    if status == "non_integrable":
        return IntegrationResult(status, value, offending=offending or ())
    if opaque:
        return IntegrationResult("partially_symbolic", value, opaque=tuple(opaque))
    return IntegrationResult("integrable", value)


# ---------------------------------------------------------------------------
# Mixed-sort elimination and changes of variables.
# ---------------------------------------------------------------------------

def integrate_all(e, order):
    """Eliminate the listed variables in order, by sort."""
    sorts = dict(e.context)
    result = IntegrationResult("integrable", e)
    opaque = []
    for var in order:
        sort = sorts.get(var)
        if sort is None:
            raise ex.SortError(f"cannot integrate undeclared variable {var!r}")
        if sort == "vf":
            step = integrate_vf(result.value, var)
        elif sort == "res":
            step = sum_res(result.value, var)
        else:
            step = sum_int(result.value, var)
        opaque.extend(step.opaque)
        if step.status == "non_integrable":
            return IntegrationResult("non_integrable", step.value, offending=step.offending)
        result = step
    if opaque:
        return IntegrationResult("partially_symbolic", result.value, opaque=tuple(opaque))
    return IntegrationResult("integrable", result.value)


def change_of_variables_affine(e, var, u, center, shift, new_var):
    """Substitute var := u*(new_var - center) + shift and rescale by the
    Jacobian factor L^(-ord u)."""
    u = VTerm.const(u) if isinstance(u, (int, Fraction)) else u
    gu = ex.ord_linform(u)
    if gu is None:
        raise UndeterminedUnitOrder("zero scaling in change of variables")
    repl = u * (VTerm.var(new_var) - center) + shift
    moved = ex.substitute(e, var, repl, new_var=new_var)
    return ex.rewrite(ex.mul(moved, ex.l_power(-gu, moved.context)))
