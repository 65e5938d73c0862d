"""Text format for constructible exponential expressions.

Input files declare sorts first, then one expression::

    vf x; res xi; int j;
    L^(-j) * [ord(x) == j, j >= 1, ac(x) != xi] * E(x) * sum eta: (e(eta))

Grammar (products of factors, sums of terms):

    factor  := rational | lrat | 'L' ['^' exponent] | '[' cond,... ']'
             | 'E' '(' vterm ')' | 'e' '(' rterm ')'
             | 'sum' names ':' factor | '(' expr ')'
    lrat    := '(' expr ')' '/' den-product      (ring-constant literal)
    cond    := side cmp side | side '==' int 'mod' int | vterm 'in' vterm 'P' int
    side    := sum of products over: numbers, 'w', 'ord(vterm)', 'ac(vterm)',
               declared variables (sort decides the reading)

Linear forms may mention ord() of valued terms; this is how guards
produced by integration print back.
"""

from __future__ import annotations

import re
from fractions import Fraction

from . import expr as ex
from . import lring
from .linform import LinForm, OrdKey
from .presburger import Cmp, ModEq, make_cmp, make_mod
from .terms import RTerm, VTerm


class ParseError(ValueError):
    def __init__(self, msg, pos=None, text=None):
        if pos is not None and text is not None:
            line = text.count("\n", 0, pos) + 1
            col = pos - (text.rfind("\n", 0, pos) + 1) + 1
            msg = f"{msg} at line {line}, column {col}"
        super().__init__(msg)


class SortError(ex.SortError):
    pass


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|[-+*/^()\[\],;:<>])
""", re.VERBOSE)

_RESERVED = {"vf", "res", "int", "sum", "in", "mod", "P", "L", "E", "e", "w", "ord", "ac"}


def _tokenize(text):
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        pos = m.end()
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group(), m.start()))
    out.append(("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.sorts = {}
        self.binders = []  # stack of residue binder names

    # token plumbing ---------------------------------------------------------

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.next()
        if t[1] != value:
            raise ParseError(f"expected {value!r}, found {t[1]!r}", t[2], self.text)
        return t

    def error(self, msg):
        t = self.peek()
        raise ParseError(msg, t[2], self.text)

    # declarations -----------------------------------------------------------

    def parse_program(self):
        while self.peek()[1] in ("vf", "res", "int") and self.peek(1)[0] == "name":
            sort = self.next()[1]
            while True:
                name = self.next()
                if name[0] != "name":
                    raise ParseError("expected a variable name", name[2], self.text)
                if name[1] in _RESERVED:
                    raise ParseError(f"{name[1]!r} is reserved", name[2], self.text)
                self.sorts[name[1]] = sort
                if self.peek()[1] == ",":
                    self.next()
                    continue
                break
            self.expect(";")
        e = self.parse_expr()
        if self.peek()[0] != "eof":
            self.error("trailing input")
        return ex.normalize(e)

    # expression level -------------------------------------------------------

    def context(self):
        return tuple(sorted(self.sorts.items()))

    def parse_expr(self):
        total = self.parse_term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            t = self.parse_term()
            total = total + (t if op == "+" else -t)
        return total

    def parse_term(self):
        factors = [self.parse_signed_factor()]
        while self.peek()[1] == "*":
            self.next()
            factors.append(self.parse_signed_factor())
        out = factors[0]
        for f in factors[1:]:
            out = ex.mul(out, f)
        return out

    def parse_signed_factor(self):
        sign = 1
        while self.peek()[1] == "-":
            self.next()
            sign = -sign
        f = self.parse_factor()
        return f if sign > 0 else -f

    def parse_factor(self):
        kind, val, pos = self.peek()
        if kind == "num":
            return ex.const_expr(self.parse_number(), self.context())
        if val == "L":
            self.next()
            lf = LinForm.constant(1)
            if self.peek()[1] == "^":
                self.next()
                lf = self.parse_exponent()
            return ex.l_power(lf, self.context())
        if val == "[":
            return ex.indicator(self.parse_cond_list(), self.context())
        if val == "E":
            self.next()
            self.expect("(")
            v = self.as_vterm(self.parse_side())
            self.expect(")")
            return ex.E(v, self.context())
        if val == "e":
            self.next()
            self.expect("(")
            r = self.as_rterm(self.parse_side())
            self.expect(")")
            return ex.e_res(r, self.context())
        if val == "sum":
            self.next()
            names = []
            while True:
                t = self.next()
                if t[0] != "name":
                    raise ParseError("expected a residue binder name", t[2], self.text)
                names.append(t[1])
                if self.peek()[1] == ",":
                    self.next()
                    continue
                break
            self.expect(":")
            self.binders.append(set(names))
            body = self.parse_factor()
            self.binders.pop()
            return ex.res_sum(body, names)
        if val == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            if self.peek()[1] == "/":
                self.next()
                den_factors, den_const = self.parse_den()
                num = _constant_lrat(inner)
                return ex.const_expr(
                    lring.normalize(
                        {e_: Fraction(c) for e_, c in num.num},
                        _merge_den(num.den, den_factors),
                        num.const_den * den_const,
                    ),
                    self.context(),
                )
            return inner
        self.error(f"unexpected token {val!r}")

    def parse_number(self):
        t = self.next()
        if t[0] != "num":
            raise ParseError("expected a number", t[2], self.text)
        n = int(t[1])
        if self.peek()[1] == "/" and self.peek(1)[0] == "num":
            self.next()
            d = int(self.next()[1])
            return Fraction(n, d)
        return Fraction(n)

    def parse_int(self):
        sign = 1
        if self.peek()[1] == "-":
            self.next()
            sign = -1
        t = self.next()
        if t[0] != "num":
            raise ParseError("expected an integer", t[2], self.text)
        return sign * int(t[1])

    def parse_exponent(self):
        if self.peek()[1] == "(":
            self.next()
            lf = self.as_linform(self.parse_side())
            self.expect(")")
            return lf
        return LinForm.constant(self.parse_int())

    def parse_den(self):
        """Denominator product: ints and (1-L^-i)^m factors."""
        factors, const = {}, 1
        while True:
            t = self.peek()
            if t[0] == "num":
                const *= int(self.next()[1])
            elif t[1] == "(":
                self.next()
                self.expect("1")
                self.expect("-")
                self.expect("L")
                self.expect("^")
                i = -self.parse_int()
                if i <= 0:
                    self.error("denominator factors must be (1-L^-i) with i > 0")
                self.expect(")")
                m = 1
                if self.peek()[1] == "^":
                    self.next()
                    m = self.parse_int()
                factors[i] = factors.get(i, 0) + m
            else:
                self.error("expected a denominator factor")
            # a '*' continues the denominator only for another den factor
            if self.peek()[1] == "*" and (
                self.peek(1)[0] == "num"
                or (self.peek(1)[1] == "(" and self.peek(2)[1] == "1" and self.peek(3)[1] == "-")
            ):
                self.next()
                continue
            break
        return tuple(sorted(factors.items())), const

    # conditions ---------------------------------------------------------------

    def parse_cond_list(self):
        self.expect("[")
        conds = [self.parse_cond()]
        while self.peek()[1] == ",":
            self.next()
            conds.append(self.parse_cond())
        self.expect("]")
        return conds

    def parse_cond(self):
        left = self.parse_side()
        t = self.next()
        op = t[1]
        if op == "in":
            lam = self.as_vterm(self.parse_side())
            self.expect("P")
            m = self.parse_int()
            return ex.coset_in(self.as_vterm(left), lam, m)
        if op not in ("==", "!=", "<=", ">=", "<", ">"):
            raise ParseError(f"expected a comparison, found {op!r}", t[2], self.text)
        right = self.parse_side()
        if op == "==" and self.peek()[1] == "mod":
            self.next()
            n = self.parse_int()
            lf = self.as_linform(left) - self.as_linform(right)
            return make_mod(lf, 0, n)
        ls, rs = _side_sort(left), _side_sort(right)
        if "res" in (ls, rs):
            if op not in ("==", "!="):
                self.error("residue conditions support only == and !=")
            r = self.as_rterm(left) - self.as_rterm(right)
            return ex.res_eq(r) if op == "==" else ex.res_neq(r)
        if "vf" in (ls, rs):
            self.error("valued-field terms compare only through ord/ac/coset")
        lf = self.as_linform(left) - self.as_linform(right)
        return make_cmp(lf, op)

    # sides: sums of products over mixed atoms ---------------------------------

    def parse_side(self):
        total = self.parse_side_product()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            nxt = self.parse_side_product()
            if op == "-":
                nxt = _side_neg(nxt)
            total = _side_add(total, nxt, self)
        return total

    def parse_side_product(self):
        sign = 1
        while self.peek()[1] == "-":
            self.next()
            sign = -sign
        total = self.parse_side_power()
        while self.peek()[1] == "*":
            self.next()
            total = _side_mul(total, self.parse_side_power(), self)
        if sign < 0:
            total = _side_neg(total)
        return total

    def parse_side_power(self):
        base = self.parse_side_atom()
        if self.peek()[1] == "^":
            self.next()
            n = self.parse_int()
            return _side_pow(base, n, self)
        return base

    def parse_side_atom(self):
        kind, val, pos = self.peek()
        if kind == "num":
            return ("num", self.parse_number())
        if val == "(":
            self.next()
            inner = self.parse_side()
            self.expect(")")
            return inner
        if val == "w":
            self.next()
            k = 1
            if self.peek()[1] == "^":
                self.next()
                k = self.parse_int()
            return ("vf", VTerm.uniformizer(k))
        if val == "ord":
            self.next()
            self.expect("(")
            v = self.as_vterm(self.parse_side())
            self.expect(")")
            lf = ex.ord_linform(v)
            if lf is None:
                self.error("ord of the zero term")
            return ("lin", lf)
        if val == "ac":
            self.next()
            self.expect("(")
            v = self.as_vterm(self.parse_side())
            self.expect(")")
            return ("res", RTerm.ac(v))
        if kind == "name":
            self.next()
            for scope in reversed(self.binders):
                if val in scope:
                    return ("res", RTerm.var(val))
            sort = self.sorts.get(val)
            if sort is None:
                raise ParseError(f"undeclared variable {val!r}", pos, self.text)
            if sort == "vf":
                return ("vf", VTerm.var(val))
            if sort == "res":
                return ("res", RTerm.var(val))
            return ("lin", LinForm.var(val))
        self.error(f"unexpected token {val!r} in a term")

    # sort coercion -------------------------------------------------------------

    def as_vterm(self, side):
        tag, v = side
        if tag == "vf":
            return v
        if tag == "num":
            return VTerm.const(v)
        raise SortError(f"expected a valued-field term, got {tag}: {v}")

    def as_rterm(self, side):
        tag, v = side
        if tag == "res":
            return v
        if tag == "num":
            return RTerm.const(v)
        raise SortError(f"expected a residue term, got {tag}: {v}")

    def as_linform(self, side):
        tag, v = side
        if tag == "lin":
            return v
        if tag == "num":
            return LinForm.constant(v)
        raise SortError(f"expected an integer linear form, got {tag}: {v}")


def _side_sort(side):
    return side[0]


def _side_neg(side):
    tag, v = side
    return (tag, -v)


def _promote(a, b, p):
    ta, tb = a[0], b[0]
    if ta == tb:
        return a, b
    if ta == "num":
        return (tb, _embed(a[1], tb)), b
    if tb == "num":
        return a, (ta, _embed(b[1], ta))
    raise SortError(f"cannot combine {ta} and {tb} terms")


def _embed(c, tag):
    if tag == "vf":
        return VTerm.const(c)
    if tag == "res":
        return RTerm.const(c)
    if tag == "lin":
        return LinForm.constant(c)
    raise SortError(f"cannot embed a number into {tag}")


def _side_add(a, b, p):
    if a[0] == b[0] == "num":
        return ("num", a[1] + b[1])
    a, b = _promote(a, b, p)
    return (a[0], a[1] + b[1])


def _side_mul(a, b, p):
    ta, tb = a[0], b[0]
    if ta == "num" and tb == "num":
        return ("num", a[1] * b[1])
    if ta == "num":
        return (tb, b[1].scale(a[1]) if tb == "lin" else b[1] * a[1])
    if tb == "num":
        return _side_mul(b, a, p)
    if ta == tb and ta in ("vf", "res"):
        return (ta, a[1] * b[1])
    raise SortError(f"cannot multiply {ta} and {tb} terms")


def _side_pow(a, n, p):
    tag, v = a
    if tag == "num":
        return ("num", v ** n)
    if tag in ("vf", "res"):
        return (tag, v ** n)
    raise SortError("powers apply to valued or residue terms only")


def _merge_den(a, b):
    d = {}
    for i, m in list(a) + list(b):
        d[i] = d.get(i, 0) + m
    return tuple(sorted(d.items()))


def _constant_lrat(e):
    """Read a constant expression (plain terms only) as a ring element."""
    total = lring.ZERO
    for t in e.terms:
        if t.conds or t.res_sums or not t.exp_arg.is_zero() or not t.res_arg.is_zero():
            raise SortError("ring-constant literal contains non-constant parts")
        if not t.lexp.is_constant():
            raise SortError("ring-constant literal with symbolic exponent")
        total = total + t.coeff * lring.from_l_power(int(t.lexp.const))
    return total


def parse(text):
    """Parse a full program (declarations + expression) into a CExp."""
    return _Parser(text).parse_program()


def parse_fragment(text, context):
    """Parse an expression under an existing context mapping."""
    p = _Parser(text)
    p.sorts = dict(context)
    e = p.parse_expr()
    if p.peek()[0] != "eof":
        p.error("trailing input")
    return ex.normalize(e)


# ---------------------------------------------------------------------------
# Printing.
# ---------------------------------------------------------------------------

def _frac_str(c):
    return str(c)


def print_linform(lf, drop_plus=False):
    parts = []
    for k, c in lf.coeffs:
        name = str(k)
        if c == 1:
            parts.append(("+", name))
        elif c == -1:
            parts.append(("-", name))
        elif c > 0:
            parts.append(("+", f"{_frac_str(c)}*{name}"))
        else:
            parts.append(("-", f"{_frac_str(-c)}*{name}"))
    if lf.const or not parts:
        parts.append(("+", _frac_str(lf.const)) if lf.const >= 0 else ("-", _frac_str(-lf.const)))
    out = ""
    for i, (sign, body) in enumerate(parts):
        if i == 0:
            out = body if sign == "+" else f"-{body}"
        else:
            out += f" {sign} {body}"
    return out


def _print_cmp(a):
    body = LinForm(a.lf.coeffs, Fraction(0))
    rhs = -a.lf.const
    if a.op == "le" and body.coeffs[0][1] < 0:
        return f"{print_linform(-body)} >= {-rhs}"
    sym = {"le": "<=", "eq": "==", "ne": "!="}[a.op]
    return f"{print_linform(body)} {sym} {rhs}"


def _print_mod(a):
    body = LinForm(a.lf.coeffs, Fraction(0))
    rhs = int(-a.lf.const) % a.n
    return f"{print_linform(body)} == {rhs} mod {a.n}"


def print_atom(a):
    if isinstance(a, Cmp):
        return _print_cmp(a)
    if isinstance(a, ModEq):
        return _print_mod(a)
    if isinstance(a, ex.ResEq):
        return f"{a.r} == 0"
    if isinstance(a, ex.ResNeq):
        return f"{a.r} != 0"
    if isinstance(a, ex.CosetIn):
        return f"{_paren_vterm(a.v)} in {_paren_vterm(a.lam)} P {a.m}"
    raise TypeError(f"unknown atom {a!r}")


def _paren_vterm(v):
    s = str(v)
    return f"({s})" if (" " in s) else s


def print_lrat(c):
    if c.is_zero():
        return "0"
    num_parts = []
    for e_, co in sorted(c.num, reverse=True):
        if e_ == 0:
            num_parts.append(str(co))
        elif co == 1:
            num_parts.append(f"L^{e_}")
        elif co == -1:
            num_parts.append(f"-L^{e_}")
        else:
            num_parts.append(f"{co}*L^{e_}")
    num = " + ".join(num_parts).replace("+ -", "- ")
    if not c.den and c.const_den == 1:
        return num if len(num_parts) == 1 and "-" not in num[1:] else f"({num})"
    dparts = [] if c.const_den == 1 else [str(c.const_den)]
    for i, m in c.den:
        f = f"(1-L^-{i})"
        dparts.append(f if m == 1 else f + f"^{m}")
    return f"({num})/" + "*".join(dparts)


def print_term(t):
    factors = []
    coeff_s = print_lrat(t.coeff)
    if coeff_s != "1":
        factors.append(coeff_s)
    if not t.lexp.is_constant() or t.lexp.const:
        factors.append(f"L^({print_linform(t.lexp)})")
    binders = set(t.res_sums)
    outer, inner = [], []
    for a in t.conds:
        mentions = isinstance(a, (ex.ResEq, ex.ResNeq)) and (set(a.r.res_vars()) & binders)
        (inner if mentions else outer).append(a)
    if outer:
        factors.append("[" + ", ".join(print_atom(a) for a in outer) + "]")
    if not t.exp_arg.is_zero():
        factors.append(f"E({t.exp_arg})")
    if t.res_sums:
        body = []
        if inner:
            body.append("[" + ", ".join(print_atom(a) for a in inner) + "]")
        if not t.res_arg.is_zero():
            body.append(f"e({t.res_arg})")
        if not body:
            body.append("1")
        factors.append(f"sum {', '.join(t.res_sums)}: (" + " * ".join(body) + ")")
    elif not t.res_arg.is_zero():
        factors.append(f"e({t.res_arg})")
    if not factors:
        return "1"
    return " * ".join(factors)


def print_expr(e):
    if not e.terms:
        return "0"
    return " + ".join(print_term(t) for t in e.terms)


def print_program(e):
    decls = []
    by_sort = {"vf": [], "res": [], "int": []}
    for name, sort in e.context:
        by_sort[sort].append(name)
    for sort in ("vf", "res", "int"):
        if by_sort[sort]:
            decls.append(f"{sort} {', '.join(by_sort[sort])};")
    head = " ".join(decls)
    return (head + "\n" if head else "") + print_expr(e)
