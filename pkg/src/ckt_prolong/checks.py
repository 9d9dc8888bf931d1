"""Acceptance checks shared by ``ckt-prolong verify-all`` and the test suite.

Each ``criterion_k`` returns a list of Findings; a criterion passes when
none of them is refuted.
"""

import functools
import json
import random
from fractions import Fraction

from . import flatpoly
from .coeff import N, ONE, RatFunc, rf
from .gradients import (Finding, bochner_report, build_gradient, verify_gradient_system,
                        weitzenbock_flat)
from .prolong import (close_system, elimination_steps, prolongation_dimension,
                      prolongation_dimension_symbolic)
from .report import Report, dumps, finding
from .symmetry import compare_printed, solve_symmetry
from .tensor import (ANTI2, CURVED, FLAT, RIC, RIEM, SC, SYM2, F, G, Factor, TensorExpr,
                     canonicalize, contract, declare, drop_curvature, expr_from_json,
                     expr_to_json, symmetrize, to_text, trace_free_part)
from .young import B, L, decompose

TITLES = {
    1: "cotangent product decompositions",
    2: "gradient constants",
    3: "gradient systems",
    4: "Bochner formulas",
    5: "rank-1 closure",
    6: "rank-2 closure",
    7: "prolongation dimension",
    8: "first-order Yamabe symmetries",
    9: "second-order Laplacian symmetries",
    10: "property suites",
}


@functools.lru_cache(maxsize=None)
def system(rank, mode=FLAT):
    return close_system(rank, mode)


def _fmt(x):
    return x.short() if isinstance(x, RatFunc) else str(x)


# ---------------------------------------------------------------------------
# 1-4: representation theory and gradients
# ---------------------------------------------------------------------------

DISPLAYED = {
    "B[1]": ["B[2]o", "L2", "L0"],
    "B[2]o": ["B[3]o", "B[2,1]o", "B[1]"],
    "B[2,1]o": ["B[2,2]o", "B[2,1,1]o", "B[3,1]o", "B[2]o", "L2"],
}


def criterion_1(**_):
    out = []
    for src, want in DISPLAYED.items():
        from .young import BundleLabel
        got = [b.ascii() for b in decompose(BundleLabel.parse(src))]
        ok = sorted(got) == sorted(want) and len(got) == len(want)
        out.append(finding("T*⊗%s decomposes into %d summands %s" % (src, len(want), " ⊕ ".join(want)),
                           ok, "cotangent product decomposition", {"engine": got, "expected": want}))
    return out


def gradient_constants():
    """(gradient, constant, engine value, expected value)."""
    exp = [
        (B(2, 1), B(2), "K", rf(1, 3)),
        (B(2, 1), B(2), "K1", -ONE / (3 * (N - 1))),
        (B(2, 1), B(2), "K2", rf(2) / (3 * (N - 1))),
        (B(3), B(2), "K1", rf(-2) / (3 * (N + 2))),
        (B(3), B(2), "K2", rf(-2) / (3 * (N + 2))),
        (L(1), B(2), "K1", N / ((N + 2) * (N - 1))),
        (L(1), B(2), "K2", rf(-2) / ((N + 2) * (N - 1))),
    ]
    rows = []
    for target, source, name, want in exp:
        op = build_gradient(source, target)
        rows.append((op.label, name, op.constants.get(name), want))
    return rows


def criterion_2(**_):
    out = []
    for label, name, got, want in gradient_constants():
        out.append(finding("%s constant %s = %s" % (label, name, want.short()), got == want,
                           "gradient constants", {"engine": _fmt(got), "expected": want.short()}))
    return out


def criterion_3(**_):
    out = []
    for src in (L(1), B(2)):
        out.extend(verify_gradient_system(src))
        out.append(weitzenbock_flat(src))
    return out


def criterion_4(**_):
    findings, parts = bochner_report(CURVED)
    labels = {f.ref for f in findings}
    out = list(findings)
    need = {"Bochner combination", "G2 adjoint relation", "Laplacian decomposition constant"}
    out.append(finding("Bochner report covers the combination, the G2 relation and the constant",
                       need <= labels, "Bochner formulas"))
    for f in findings:
        if f.status == "paper-discrepancy" and f.ref == "Bochner right-hand side":
            out.append(finding("Bochner discrepancy carries both expressions",
                               "paper" in f.payload and "engine" in f.payload, "Bochner formulas"))
    derived = [f for f in findings if f.ref == "Laplacian decomposition constant"
               and f.status == "derived"]
    out.append(finding("Laplacian decomposition constant is solved under some reading",
                       bool(derived), "Laplacian decomposition constant",
                       {"values": [f.payload for f in derived]}))
    return out


# ---------------------------------------------------------------------------
# 5-7: closure and dimensions
# ---------------------------------------------------------------------------

def _closed_rules(js):
    allowed = set(js.jet_symbols)
    bad = []
    for j in js.jets:
        rhs = js.rules.rules[j.sym][2]
        for fs in rhs.terms:
            for f in fs:
                if (f.sym in allowed and f.derivs) or not (
                        f.sym in allowed or f.sym.is_metric or f.sym.is_curvature):
                    bad.append("%s in ∇%s" % (f.sym.name, j.name))
    return bad


def _oracle_rules(js, nval):
    res = flatpoly.verify_rules(js, nval, flatpoly.kernel(js.rank, nval))
    bad = [name for name, ok, _ in res if not ok]
    return finding("rank-%d rules vanish on every polynomial kernel element at n=%d"
                   % (js.rank, nval), not bad and len(res) == len(js.jets),
                   "oracle equivalence", {"rules": len(res), "failing": bad})


def criterion_5(**_):
    out = []
    for mode in (FLAT, CURVED):
        js = system(1, mode)
        out.append(finding("rank-1 %s system closes with 4 jets" % mode,
                           js.closed and len(js.jets) == 4, "rank-1 closure",
                           {"jets": [j.name for j in js.jets]}))
        bad = _closed_rules(js)
        out.append(finding("every rank-1 %s rule is free of unreduced symbols" % mode, not bad,
                           "rank-1 closure", {"unreduced": bad}))
    for nval in (3, 4):
        out.append(_oracle_rules(system(1), nval))
    return out


def criterion_6(**_):
    js = system(2)
    out = [finding("rank-2 flat system closes with 10 jets", js.closed and len(js.jets) == 10,
                   "rank-2 closure", {"jets": [j.name for j in js.jets]})]
    bad = _closed_rules(js)
    out.append(finding("every rank-2 rule is free of unreduced symbols", not bad,
                       "rank-2 closure", {"unreduced": bad}))
    steps = elimination_steps(js)
    out.extend(steps)
    out.append(finding("all %d elimination steps verify" % len(steps),
                       all(f.status == "verified" for f in steps), "elimination step"))
    for nval in (4, 6):
        out.append(_oracle_rules(js, nval))
    return out


def criterion_7(**_):
    out = []
    sym = prolongation_dimension_symbolic(system(1))
    want = (N + 1) * (N + 2) / 2
    out.append(finding("rank-1 prolongation dimension is (n+1)(n+2)/2", sym == want,
                       "prolongation dimension", {"engine": sym.short()}))
    for rank, nval in ((1, 3), (1, 4), (2, 4), (2, 6)):
        d = prolongation_dimension(system(rank), nval)
        k = flatpoly.kernel(rank, nval).dimension
        out.append(finding("rank-%d prolongation dimension at n=%d equals the kernel dimension %d"
                           % (rank, nval, k), d == k, "prolongation dimension",
                           {"jets": d, "kernel": k}))
    return out


# ---------------------------------------------------------------------------
# 8-9: symmetries
# ---------------------------------------------------------------------------

YAMABE_ORDER1 = {"A": (N - 2) / (2 * N), "B": (N + 2) / (2 * N)}


def criterion_8(seed=flatpoly.SEED, **_):
    rep = solve_symmetry("yamabe", 1)
    vals = rep.values()
    out = [f for f in rep.findings]
    out.append(finding("Yamabe order-1 solve is unique with A = (n-2)/(2n), B = (n+2)/(2n)",
                       rep.solution.status == "unique" and vals == YAMABE_ORDER1,
                       "first-order symmetries", {k: _fmt(v) for k, v in vals.items()}))
    out.append(finding("Yamabe order-1 residual vanishes symbolically", rep.check.is_zero(),
                       "first-order symmetries", {"residual": to_text(rep.check)}))
    for nval in (4, 6):
        fit = flatpoly.fit_symmetry_coefficients("yamabe", 1, nval, seed=seed)
        want = {k: v(nval) for k, v in YAMABE_ORDER1.items()}
        out.append(finding("order-1 oracle fit at n=%d gives A = %s, B = %s"
                           % (nval, want["A"], want["B"]),
                           fit.status == "unique" and fit.values == want, "first-order symmetries",
                           fit.to_json()))
    return out


class _Sol:
    def __init__(self, values):
        self.status = "unique"
        self.values = values


def _verdict(cmp):
    return (cmp["set_equal"], cmp["as_labeled"], cmp["swapped"])


def criterion_9(seed=flatpoly.SEED, **_):
    rep = solve_symmetry("laplacian", 2, js=system(2))
    vals = rep.values()
    out = [f for f in rep.findings]
    out.append(finding("Laplacian order-2 solve is unique over Q(n)",
                       rep.solution.status == "unique" and len(vals) == 4,
                       "second-order symmetries", {k: _fmt(v) for k, v in vals.items()}))
    sym_cmp = rep.comparison
    verdicts = {"symbolic": _verdict(sym_cmp)}
    for nval in (6, 7, 8):
        fit = flatpoly.fit_symmetry_coefficients("laplacian", 2, nval, seed=seed)
        want = {k: v(nval) for k, v in vals.items()}
        out.append(finding("order-2 oracle fit at n=%d equals the engine tuple evaluated" % nval,
                           fit.status == "unique" and fit.values == want,
                           "second-order symmetries",
                           {"oracle": fit.to_json(), "engine": {k: str(v) for k, v in want.items()}}))
        if fit.status == "unique":
            cmp = compare_printed("laplacian", 2, _Sol({k: rf(v) for k, v in fit.values.items()}), nval)
            verdicts[str(nval)] = _verdict(cmp)
    consistent = len(set(verdicts.values())) == 1 and len(verdicts) == 4
    out.append(finding("comparison with the printed values is consistent across runs: %s"
                       % sym_cmp["verdict"], consistent and sym_cmp["set_equal"],
                       "second-order symmetries",
                       {k: dict(zip(("set_equal", "as_labeled", "swapped"), v))
                        for k, v in verdicts.items()}))
    return out


# ---------------------------------------------------------------------------
# 10: property suites
# ---------------------------------------------------------------------------

FUZZ_SYMBOLS = [
    declare("fzS", 2, display="S", latex="S", sym=SYM2, tracefree=[(0, 1)], order=60),
    declare("fzW", 2, display="W", latex="W", sym=ANTI2, order=61),
    declare("fzV", 1, display="V", latex="V", order=62),
    declare("fzT", 3, display="T", latex="T", sym=[((1, 0, 2), 1)], order=63),
]
_POOL = FUZZ_SYMBOLS + [RIEM, RIC, SC, F, G]
_FLAT_POOL = FUZZ_SYMBOLS + [F, G]


def _coef(rng):
    c = rf(Fraction(rng.randint(-5, 5) or 1, rng.randint(1, 4)))
    if rng.random() < 0.3:
        c = c * (N + rng.randint(-2, 2))
    return c


def random_term(rng, nfree, free, pool=_POOL, max_derivs=2, raw=False):
    """Random product with ``nfree`` free labels and paired dummies."""
    syms = [rng.choice(pool) for _ in range(rng.randint(1, 3))]
    # at most one Riemann factor per term (the engine's relational domain)
    syms = [RIC if s == RIEM and RIEM in syms[:i] else s for i, s in enumerate(syms)]
    # the engine rewrites curvature with at most one derivative
    nd = [0 if s.is_metric else rng.randint(0, 1 if s.is_curvature else max_derivs)
          for s in syms]
    vec = FUZZ_SYMBOLS[2]
    total = sum(s.nslots for s in syms) + sum(nd)
    while total < nfree or (total - nfree) % 2:
        syms.append(vec)
        nd.append(0)
        total += 1
    pos = list(range(total))
    rng.shuffle(pos)
    labels = [None] * total
    for i, p in enumerate(pos[:nfree]):
        labels[p] = free[i]
    rest = pos[nfree:]
    for k in range(0, len(rest), 2):
        labels[rest[k]] = labels[rest[k + 1]] = "d%d" % (k // 2)
    fs, i = [], 0
    for s, k in zip(syms, nd):
        lab = labels[i:i + k + s.nslots]
        i += k + s.nslots
        # one raw derivative list per term keeps commutators to one Riemann factor
        unsym = raw and k > 1 and all(f.nsym == len(f.derivs) for f in fs)
        fs.append(Factor(s, tuple(lab[:k]), tuple(lab[k:]), 0 if unsym else k))
    return tuple(fs)


def random_expression(rng, pool=_POOL, raw=False, max_derivs=2):
    nfree = rng.choice((0, 1, 2, 2, 3))
    free = ("a", "b", "c")[:nfree]
    terms = {}
    for _ in range(rng.randint(1, 4)):
        fs = random_term(rng, nfree, free, pool, max_derivs, raw)
        terms[fs] = terms.get(fs, rf(0)) + _coef(rng)
    return TensorExpr(terms, free)


def scramble(expr, rng):
    """An equal expression: dummies renamed, factors reordered, symmetrized
    derivative blocks permuted and slot symmetries applied."""
    out = {}
    for fs, c in expr.terms.items():
        dummies = sorted({x for f in fs for x in f.labels} - set(expr.free))
        new = ["q%d" % rng.randint(0, 10 ** 6) + "_%d" % i for i in range(len(dummies))]
        rng.shuffle(new)
        m = dict(zip(dummies, new))
        sign = 1
        nfs = []
        for f in fs:
            f = f.relabel(m)
            d = list(f.derivs)
            if f.nsym == len(d):
                rng.shuffle(d)
            perm, s = rng.choice(f.sym.group)
            slots = tuple(f.slots[p] for p in perm) if perm else f.slots
            sign *= s
            nfs.append(Factor(f.sym, tuple(d), slots, f.nsym))
        rng.shuffle(nfs)
        key = tuple(nfs)
        out[key] = out.get(key, rf(0)) + c * sign
    return TensorExpr(out, expr.free)


def canonical_key(expr, mode=FLAT):
    j = expr_to_json(canonicalize(expr, mode))
    return json.dumps(j, sort_keys=True, ensure_ascii=False)


def canonical_fuzz(cases=1000, seed=flatpoly.SEED):
    rng = random.Random(seed)
    bad = []
    for i in range(cases):
        mode = FLAT if i % 2 else CURVED
        e = random_expression(rng, _POOL if mode == CURVED else _FLAT_POOL)
        if canonical_key(e, mode) != canonical_key(scramble(e, rng), mode):
            bad.append(to_text(e))
    return bad


def projection_law(cases=40, seed=flatpoly.SEED):
    """P(P x) = P x, P x is symmetric and trace-free, and P fixes trace-free
    symmetric input."""
    rng = random.Random(seed + 1)
    pool = FUZZ_SYMBOLS + [RIC, F]
    bad = []
    done = 0
    while done < cases:
        e = random_expression(rng, pool)
        labs = list(e.free)
        if len(labs) < 2:
            continue
        done += 1
        p = trace_free_part(e, labs)
        ok = canonicalize(trace_free_part(p, labs) - p).is_zero()
        ok = ok and canonicalize(symmetrize(p, labs) - p).is_zero()
        for i in range(len(labs)):
            for j in range(i + 1, len(labs)):
                ok = ok and canonicalize(contract(p, labs[i], labs[j])).is_zero()
        if not ok:
            bad.append(to_text(e))
    return bad


def flat_curved_consistency(cases=200, seed=flatpoly.SEED):
    """Curved canonicalization of raw derivative lists, with curvature set
    to zero afterwards, equals the flat canonical form."""
    rng = random.Random(seed + 2)
    pool = FUZZ_SYMBOLS + [F]
    bad = []
    for _ in range(cases):
        e = random_expression(rng, pool, raw=True, max_derivs=3)
        curved = drop_curvature(canonicalize(e, CURVED))
        if canonical_key(curved) != canonical_key(e):
            bad.append(to_text(e))
    return bad


def json_roundtrip(cases=100, seed=flatpoly.SEED):
    rng = random.Random(seed + 3)
    bad = []
    for _ in range(cases):
        e = canonicalize(random_expression(rng))
        rep = Report(["fuzz"], FLAT, [Finding("x", "derived", "", {"e": expr_to_json(e)})],
                     {"expr": expr_to_json(e), "text": to_text(e)})
        s = dumps(rep.to_json())
        back = expr_from_json(json.loads(s)["data"]["expr"])
        if dumps(json.loads(s)) != s or not canonicalize(back - e).is_zero():
            bad.append(to_text(e))
    return bad


def criterion_10(seed=flatpoly.SEED, cases=1000, **_):
    out = []
    for name, fn, kw in (("canonical-form uniqueness fuzz", canonical_fuzz, {"cases": cases}),
                         ("trace-free projection law", projection_law, {}),
                         ("flat/curved consistency with curvature set to zero",
                          flat_curved_consistency, {}),
                         ("JSON round-trip byte identity", json_roundtrip, {})):
        bad = fn(seed=seed, **kw)
        out.append(finding("%s: %d mismatches" % (name, len(bad)), not bad, "property suite",
                           {"mismatches": bad[:5]}))
    return out


CRITERIA = {k: globals()["criterion_%d" % k] for k in TITLES}


def run(k, seed=flatpoly.SEED):
    findings = CRITERIA[k](seed=seed)
    return not any(f.status == "refuted" for f in findings), findings


def run_all(seed=flatpoly.SEED, only=None):
    """[(k, title, passed, findings)] for every criterion."""
    out = []
    for k in sorted(TITLES):
        if only and k not in only:
            continue
        ok, fs = run(k, seed)
        out.append((k, TITLES[k], ok, fs))
    return out
