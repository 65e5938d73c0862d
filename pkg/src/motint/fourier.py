"""Fourier transforms, convolution and the compactly-supported class.

The valued-field transform pairs an expression in variables x with the
kernel E(sum x_i*y_i) and integrates the old variables out; the residue
transform does the same with the residue exponential over residue
variables.  Convolution is integration against shifted arguments.  Both
keep the variable names of the input, so transforms compose directly.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import expr as ex
from . import integrate as intg
from . import lring
from .expr import CExp, SortError
from .linform import LinForm
from .terms import RTerm, VTerm, rcoerce


class NotIntegrable(ValueError):
    pass


# ---------------------------------------------------------------------------
# Standard family builders.
# ---------------------------------------------------------------------------

def _alpha_linform(alpha):
    return alpha if isinstance(alpha, LinForm) else LinForm.constant(alpha)


def ball(names, alpha, extra_context=()):
    """Indicator of ord(x_i) >= alpha for every coordinate."""
    alpha = _alpha_linform(alpha)
    conds = [ex.ord_cmp(VTerm.var(n), ">=", alpha) for n in names]
    ctx = {n: "vf" for n in names}
    ctx.update(dict(extra_context))
    ctx.update({str(k): "int" for k, _ in alpha.coeffs if not hasattr(k, "term")})
    return ex.indicator(conds, tuple(sorted(ctx.items())))


def shell(names, alpha, extra_context=()):
    """Indicator of the norm shell: min over i of ord(x_i) equals alpha.

    In one variable this is the single condition ord(x) == alpha; in
    general it is the sphere ball(alpha) minus ball(alpha+1), which is
    what makes ball(alpha) the disjoint union of the shells beyond it.
    """
    alpha = _alpha_linform(alpha)
    if len(names) == 1:
        conds = [ex.ord_cmp(VTerm.var(names[0]), "==", alpha)]
        ctx = {names[0]: "vf"}
        ctx.update(dict(extra_context))
        ctx.update({str(k): "int" for k, _ in alpha.coeffs if not hasattr(k, "term")})
        return ex.indicator(conds, tuple(sorted(ctx.items())))
    return ex.normalize(ball(names, alpha, extra_context) - ball(names, alpha + 1, extra_context))


def shell_ac(names, alpha, acs, extra_context=()):
    """Shell with fixed angular components; the components must be
    nonzero, so symbolic ones carry explicit nonvanishing conditions."""
    alpha = _alpha_linform(alpha)
    conds = []
    ctx = {n: "vf" for n in names}
    ctx.update(dict(extra_context))
    for n, xi in zip(names, acs):
        xi = rcoerce(xi)
        if xi.is_zero():
            raise SortError("angular components of the shell family must be nonzero")
        conds.append(ex.ord_cmp(VTerm.var(n), "==", alpha))
        conds.append(ex.ac_eq(VTerm.var(n), xi))
        nz = ex.res_neq(xi)
        if nz is False:
            raise SortError("angular components of the shell family must be nonzero")
        if nz is not True:
            conds.append(nz)
        for v in xi.res_vars():
            ctx.setdefault(v, "res")
    ctx.update({str(k): "int" for k, _ in alpha.coeffs if not hasattr(k, "term")})
    return ex.indicator(conds, tuple(sorted(ctx.items())))


# ---------------------------------------------------------------------------
# Transforms.
# ---------------------------------------------------------------------------

def _fresh_names(base_names, taken):
    out = {}
    for n in base_names:
        i = 0
        while f"{n}_y{i}" in taken:
            i += 1
        out[n] = f"{n}_y{i}"
        taken.add(out[n])
    return out


def fourier_vf(e, names):
    """Valued-field transform over the listed variables (names kept)."""
    taken = {n for n, _s in e.context}
    ren = _fresh_names(names, taken)
    moved = e
    for n, yn in ren.items():
        moved = ex.substitute(moved, n, VTerm.var(yn), new_var=yn)
    kernel_arg = VTerm.const(0)
    for n, yn in ren.items():
        kernel_arg = kernel_arg + VTerm.var(n) * VTerm.var(yn)
    ctx = dict(moved.context)
    ctx.update({n: "vf" for n in names})
    prod = ex.mul(moved.with_context({n: "vf" for n in names}),
                  ex.E(kernel_arg, tuple(sorted(ctx.items()))))
    res = intg.integrate_all(prod, [ren[n] for n in names])
    if res.status == "non_integrable":
        raise NotIntegrable(f"transform diverges on guards {res.offending}")
    return res.value


def fourier_res(e, names):
    """Residue-field transform over the listed residue variables."""
    taken = {n for n, _s in e.context}
    ren = _fresh_names(names, taken)
    moved = e
    for t in moved.terms:
        if set(names) & set(t.res_sums):
            raise SortError("transform variables are bound in the expression")
    for n, yn in ren.items():
        moved = _rename_res(moved, n, yn)
    kernel = RTerm.const(0)
    for n, yn in ren.items():
        kernel = kernel + RTerm.var(n) * RTerm.var(yn)
    ctx = dict(moved.context)
    ctx.update({n: "res" for n in names})
    ctx.update({yn: "res" for yn in ren.values()})
    prod = ex.mul(moved.with_context(ctx), ex.e_res(kernel, tuple(sorted(ctx.items()))))
    out = prod
    for yn in [ren[n] for n in names]:
        out = intg.sum_res(out, yn).value
    return out


def _rename_res(e, old, new):
    from dataclasses import replace
    terms = []
    for t in e.terms:
        conds = tuple(ex._rename_atom(a, {old: new}) for a in t.conds)
        terms.append(replace(t, conds=conds, res_arg=t.res_arg.rename_vars({old: new})))
    ctx = tuple((new if n == old else n, s) for n, s in e.context)
    return CExp(terms, tuple(sorted(ctx)))


def involute(e, names):
    """Pullback along x -> -x in each listed variable."""
    out = e
    for n in names:
        out = ex.substitute(out, n, -VTerm.var(n), new_var=n)
    return out


def convolve(f, g, names):
    """Convolution over the listed valued variables (names kept)."""
    taken = {n for n, _s in f.context} | {n for n, _s in g.context}
    ren = _fresh_names(names, taken)
    f_shift = f
    g_shift = g
    for n, zn in ren.items():
        f_shift = ex.substitute(f_shift, n, VTerm.var(n) - VTerm.var(zn), new_var=zn)
        g_shift = ex.substitute(g_shift, n, VTerm.var(zn), new_var=zn)
    ctx = dict(f_shift.context)
    ctx.update(g_shift.context)
    ctx.update({n: "vf" for n in names})
    prod = ex.mul(f_shift.with_context(ctx), g_shift.with_context(ctx))
    res = intg.integrate_all(prod, [ren[n] for n in names])
    if res.status == "non_integrable":
        raise NotIntegrable(f"convolution diverges on guards {res.offending}")
    return res.value


def is_schwartz_bruhat(e, names, alpha0):
    """Compact support and local constancy at the witness threshold.

    Checks ``e * ball(-alpha0) == e`` and
    ``e (*) ball(alpha0) == L^(-alpha0 d) e`` as rewrite identities.
    """
    alpha0 = int(alpha0)
    d = len(names)
    supp = ex.rewrite(ex.mul(e, ball(names, -alpha0)))
    if supp != ex.rewrite(e):
        return False
    conv = ex.rewrite(convolve(e, ball(names, alpha0), names))
    target = ex.rewrite(e.scaled(lring.from_l_power(-alpha0 * d)))
    return conv == target
