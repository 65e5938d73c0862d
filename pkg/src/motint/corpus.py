"""Declarative corpus of integrands with expected values and oracle plans.

Each TOML case carries a DSL source, the variables to integrate, an
optional expected value (DSL), a provenance tag, and a numeric plan
(primes, depth, optional box).  Running a case integrates symbolically,
checks the expected value as a rewrite identity, then specializes at
each plan prime and compares against the brute-force oracle.
"""

from __future__ import annotations

import os
try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import dsl, expr as ex, integrate as intg, oracle
from .localfield import CharacterSpec, LocalField, interpret

DEFAULT_TOL = 1e-9
CORPUS_ROOT_ENV = "MOTINT_CORPUS_ROOT"


@dataclass(frozen=True)
class CorpusCase:
    name: str
    source: str
    bind: tuple
    expected: str = ""
    expected_status: str = "integrable"
    tag: str = ""
    primes: tuple = (3, 5, 7)
    depth: int = 3
    box_vf: tuple = ()     # ((name, (vmin, depth)), ...)
    box_int: tuple = ()
    tol: float = DEFAULT_TOL

    def box(self):
        if not self.box_vf and not self.box_int:
            return None
        return oracle.IntegrationBox(tuple(self.box_vf), tuple(self.box_int))


def load_case(data):
    plan = data.get("oracle", {})
    box_vf = tuple(sorted(
        (name, tuple(val)) for name, val in plan.get("vf", {}).items()
    ))
    box_int = tuple(sorted(
        (name, tuple(val)) for name, val in plan.get("ints", {}).items()
    ))
    return CorpusCase(
        name=data["name"],
        source=data["dsl"],
        bind=tuple(data.get("bind", [])),
        expected=data.get("expected", ""),
        expected_status=data.get("expected_status", "integrable"),
        tag=data.get("tag", ""),
        primes=tuple(plan.get("primes", (3, 5, 7))),
        depth=int(plan.get("depth", 3)),
        box_vf=box_vf,
        box_int=box_int,
        tol=float(data.get("tol", DEFAULT_TOL)),
    )


def default_root():
    env = os.environ.get(CORPUS_ROOT_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parent.parent.parent / "corpus"


def load_corpus(paths=None):
    if paths is None:
        paths = sorted(default_root().glob("*.toml"))
    cases = []
    for path in paths:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
        for entry in data.get("case", []):
            cases.append(load_case(entry))
    return cases


def run_case(case):
    """One corpus case: symbolic value, expected identity, oracle match."""
    out = {"name": case.name, "tag": case.tag, "ok": True, "notes": []}
    e = dsl.parse(case.source)
    try:
        res = intg.integrate_all(e, list(case.bind))
    except (intg.UnsupportedIntegrand, intg.NonAffineResidueArgument) as exc:
        res = None
        out["status"] = "unsupported"
        out["notes"].append(str(exc))
        if case.expected_status != "unsupported":
            out["ok"] = False
        return out
    out["status"] = res.status
    out["value"] = dsl.print_expr(res.value)
    if res.status != case.expected_status:
        out["ok"] = False
        out["notes"].append(f"status {res.status} != expected {case.expected_status}")
        return out
    if res.status == "non_integrable":
        return out
    if case.expected:
        ctx = dict(e.context)
        ctx.update(dict(res.value.context))
        want = ex.rewrite(dsl.parse_fragment(case.expected, ctx))
        got = ex.rewrite(res.value)
        if got.terms != want.terms:
            out["ok"] = False
            out["notes"].append(f"expected {dsl.print_expr(want)}, got {dsl.print_expr(got)}")
    checks = []
    for p in case.primes:
        K = LocalField("qp", p)
        ch = CharacterSpec.canonical(K)
        num = oracle.numeric_integrate(e, K, ch, box=case.box(), depth=case.depth)
        sym = interpret(res.value, K, ch, {}, opaque=res.opaque)
        delta = abs(sym - num.value)
        ok = delta <= case.tol and num.refinement_delta <= case.tol
        checks.append({
            "p": p,
            "symbolic": [sym.real, sym.imag],
            "numeric": [num.value.real, num.value.imag],
            "delta": delta,
            "refinement_delta": num.refinement_delta,
            "ok": ok,
        })
        if not ok:
            out["ok"] = False
            out["notes"].append(f"p={p}: |sym-num|={delta:.3e}")
    out["checks"] = checks
    return out


def run_corpus(cases=None, threads=1):
    cases = load_corpus() if cases is None else cases
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_case, cases))
    else:
        results = [run_case(c) for c in cases]
    return sorted(results, key=lambda r: r["name"])
