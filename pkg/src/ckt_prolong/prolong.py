"""
Prolongation of the conformal Killing equations of rank 1 and 2.

Every jet is a symbol with a defining expression in derivatives of σ.  The
rule for ∇J is derived, not transcribed: expand ∇(definition of J), write
the top-order part as a combination of jet shapes (jets times metrics) and
derivatives of the Killing operator output E, then reduce the remainder
(curvature times lower derivatives of σ) recursively.  E vanishes on
solutions, so its coefficients drop out of the rule.
"""

import itertools

from .coeff import RatFunc, ONE, ZERO, N, rf, Echelon, solve_linear
from .tensor import (FLAT, CURVED, Factor, StructureError, TensorExpr, RuleTable, canonicalize,
                     declare, fresh, metric, nabla, nablas, product, tensor, to_text, to_latex,
                     expr_to_json, _expand_factor, _raw_product, _label_counts, term_free,
                     SYM2, ANTI2, RIC, SC, RIEM, G)
from .young import BundleLabel, L, B, decompose, fiber_dimension, TreeNode, gradient_label
from .gradients import (build_gradient, source_symbol, standard_realization, target_realization,
                        Realization, Finding, LETTERS)


class ClosureError(RuntimeError):
    """An irreducible component could not be written in the jets."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------

class Jet:
    """Jet variable: symbol, bundle, level (number of derivatives of σ) and
    defining expression with free labels ``slots`` (in slot order)."""

    def __init__(self, sym, bundle, level, definition, slots, how="", real=None, parent=None):
        self.sym = sym
        self.real = real
        self.parent = parent          # name of the jet this one is a gradient of
        self.bundle = bundle
        self.level = level
        self.definition = definition
        self.slots = tuple(slots)
        self.how = how

    @property
    def name(self):
        return self.sym.name

    def to_json(self):
        return {"name": self.sym.name, "display": self.sym.display,
                "bundle": self.bundle.ascii(), "level": self.level, "definition": self.how}


def _expand_defs(expr, defs, mode):
    """Replace every occurrence (derived or not) of a defined symbol by its
    definition; ``defs`` maps symbol -> (expression, slot labels)."""
    out = {}
    for fs, c in expr.terms.items():
        acc = TensorExpr({(): c})
        for f in fs:
            if f.sym in defs:
                body, slots = defs[f.sym]
                piece = TensorExpr.zero()
                for derivs, w in _expand_factor(f):
                    base = body.freshen().rename(dict(zip(slots, f.slots)))
                    base = nablas(base, derivs)
                    piece = base.scale(w) if piece.is_zero() else piece + base.scale(w)
            else:
                piece = TensorExpr({(f,): ONE})
            acc = _raw_product(acc.freshen(), piece.freshen())
            if acc.is_zero():
                break
        for k, v in acc.terms.items():
            nv = out.get(k, ZERO) + v
            if nv.is_zero():
                out.pop(k, None)
            else:
                out[k] = nv
    return canonicalize(TensorExpr(out, expr.free), mode)


def placements(sym, nderivs, free):
    """Shapes g...g ∇^k S with the labels ``free`` free: metrics join pairs of
    free labels, remaining free labels fill positions of ∇^k S and leftover
    positions are contracted in pairs.  Yields raw single-term expressions."""
    free = tuple(sorted(free))
    p = nderivs + sym.nslots
    for j in range(len(free) // 2 + 1):
        rest_n = len(free) - 2 * j
        if rest_n > p or (p - rest_n) % 2:
            continue
        for pairs in _pairings_subset(free, j):
            used = {x for pr in pairs for x in pr}
            rest = [x for x in free if x not in used]
            for pos in itertools.permutations(range(p), rest_n):
                labs = [None] * p
                for x, q in zip(rest, pos):
                    labs[q] = x
                open_pos = [q for q in range(p) if labs[q] is None]
                for pr in _perfect_pairings(open_pos):
                    ll = list(labs)
                    for a, b in pr:
                        d = fresh()
                        ll[a] = d
                        ll[b] = d
                    t = tensor(sym, *ll[nderivs:], derivs=tuple(ll[:nderivs]))
                    for a, b in pairs:
                        t = _raw_product(t, metric(a, b))
                    yield t


def _pairings_subset(labels, j):
    """All sets of j disjoint pairs drawn from labels."""
    if j == 0:
        yield ()
        return
    labels = list(labels)
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            rest = [x for x in labels[i + 1:] if x != b]
            for more in _pairings_subset(rest, j - 1):
                yield ((a, b),) + more


def _perfect_pairings(items):
    items = list(items)
    if not items:
        yield ()
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1:]
        for more in _perfect_pairings(rest):
            yield ((a, items[i]),) + more


def _sigma_order(fs, sigma):
    for f in fs:
        if f.sym == sigma:
            return len(f.derivs)
    return -1


# ---------------------------------------------------------------------------
# the reduction engine
# ---------------------------------------------------------------------------

class Reducer:
    """Rewrites expressions linear in derivatives of σ into jets.

    ``equation`` is (symbol E, definition, slots): the Killing operator
    output, which vanishes on solutions.
    """

    def __init__(self, sigma, jets, equation, mode):
        self.sigma = sigma
        self.jets = list(jets)
        self.mode = mode
        self.esym, edef, eslots = equation
        self.defs = {j.sym: (j.definition, j.slots) for j in self.jets if j.sym != sigma}
        self.defs[self.esym] = (edef, eslots)
        self._cache = {}
        self._shape_cache = {}
        self.stats = {"solves": 0}

    def jets_at(self, level):
        return [j for j in self.jets if j.level == level and j.sym != self.sigma]

    # -- shape bases -------------------------------------------------------
    def _shapes(self, order, nfree):
        """Candidate shapes (symbolic, expanded) on placeholder free labels."""
        key = (order, nfree)
        if key in self._shape_cache:
            return self._shape_cache[key]
        free = tuple("~F%d" % i for i in range(nfree))
        cands = []
        for j in self.jets_at(order):
            cands.extend(("jet", t) for t in placements(j.sym, 0, free))
        if order >= 1:
            cands.extend(("eq", t) for t in placements(self.esym, order - 1, free))
        seen = Echelon(order=repr)
        shapes = []
        for kind, t in cands:
            sym_form = canonicalize(t, FLAT)
            if sym_form.is_zero():
                continue
            if not seen.add(dict(sym_form.terms)):
                continue
            full = _expand_defs(t, self.defs, self.mode)
            if full.is_zero():
                continue
            top = self._top(full, order)
            shapes.append((kind, canonicalize(t, self.mode), full, top))
        self._shape_cache[key] = (free, shapes)
        return free, shapes

    def _top(self, expr, order):
        return {fs: c for fs, c in expr.terms.items()
                if _sigma_order(fs, self.sigma) == order
                and not any(f.sym.is_curvature for f in fs)}

    # -- reduction of a single factor ----------------------------------------
    def reduce_factor(self, f):
        """Jet expression equal (on solutions) to the σ factor f alone."""
        if not f.derivs:
            return TensorExpr({(f,): ONE})
        cnt = {}
        for l in f.labels:
            cnt[l] = cnt.get(l, 0) + 1
        free = [l for l in f.labels if cnt[l] == 1]
        ph = {l: "~F%d" % i for i, l in enumerate(free)}
        dm = {}
        for l in f.labels:
            if cnt[l] == 2 and l not in dm:
                dm[l] = "~D%d" % len(dm)
        key = f.relabel({**ph, **dm})
        hit = self._cache.get(key)
        if hit is None:
            hit = self._reduce_single(key, len(free))
            self._cache[key] = hit
        back = {v: k for k, v in ph.items()}
        return hit.freshen().rename(back)

    def _reduce_single(self, f, nfree):
        order = len(f.derivs)
        X = canonicalize(TensorExpr({(f,): ONE}), self.mode)
        return self._solve(X, order, nfree)

    def _solve(self, X, order, nfree):
        self.stats["solves"] += 1
        free, shapes = self._shapes(order, nfree)
        top = self._top(X, order)
        ech = Echelon(order=repr)
        for i, (_, _, _, st) in enumerate(shapes):
            ech.add(dict(st), tag=i)
        rest, comb = ech.reduce(dict(top), {"__target__": ONE})
        if rest:
            raise ClosureError("order-%d derivative of σ not expressible in jets" % order,
                               TensorExpr(rest))
        result = TensorExpr.zero(X.free)
        remainder = X
        for tag, v in comb.items():
            if tag == "__target__":
                continue
            x = -v
            kind, sym_form, full, _ = shapes[tag]
            remainder = remainder - full.scale(x)
            if kind == "jet":
                result = result + sym_form.scale(x)
        remainder = canonicalize(remainder, self.mode)
        if not remainder.is_zero():
            if self.mode == FLAT:
                raise ClosureError("flat remainder after top-order solve", remainder)
            result = result + self.reduce(remainder)
        result = canonicalize(result, self.mode)
        return result if not result.is_zero() else TensorExpr.zero(X.free)

    # -- reduction of expressions -------------------------------------------
    def reduce(self, expr):
        """Rewrite σ-derivatives and derived jets of expr in terms of jets."""
        expr = canonicalize(_expand_defs(expr, self._derived_defs(expr), self.mode), self.mode)
        out = TensorExpr.zero(expr.free)
        for fs, c in expr.terms.items():
            idx = [i for i, f in enumerate(fs) if f.sym == self.sigma and f.derivs]
            if not idx:
                out = out + TensorExpr({fs: c})
                continue
            if len(idx) > 1:
                raise StructureError("expression is not linear in σ")
            i = idx[0]
            red = self.reduce_factor(fs[i])
            others = TensorExpr({fs[:i] + fs[i + 1:]: c})
            out = out + TensorExpr(_raw_product(others, red.freshen()).terms)
        out = canonicalize(out, self.mode)
        return out if not out.is_zero() else TensorExpr.zero(expr.free)

    def _derived_defs(self, expr):
        """Definitions for jets that occur with derivatives (to be expanded)."""
        syms = set()
        for fs in expr.terms:
            for f in fs:
                if f.sym in self.defs and (f.derivs or f.sym == self.esym):
                    syms.add(f.sym)
        return {s: self.defs[s] for s in syms}

    def expand(self, expr):
        """Write every jet (and E) in terms of σ."""
        return _expand_defs(expr, self.defs, self.mode)


# ---------------------------------------------------------------------------
# jet definitions
# ---------------------------------------------------------------------------

def _jet_symbol(name, bundle, display, latex, real=None):
    real = real or standard_realization(bundle)
    if bundle.rank == 0:
        sym = declare(name, 0, display=display, latex=latex, order=40, bundle=bundle)
    else:
        sym = real.make_symbol(name, display=display, latex=latex)
    return sym, real


def _apply(op, jet, mode):
    """G applied to a jet's definition; result labelled by op.out."""
    return op.apply(jet.definition, jet.slots, mode=mode)


def _exterior(jet, mode):
    """dJ for a 1-form jet, labelled (a, b)."""
    (s,) = jet.slots
    return canonicalize(nabla(jet.definition.rename({s: "b"}), "a")
                        - nabla(jet.definition.rename({s: "a"}), "b"), mode)


def _codifferential(jet, mode):
    """δJ = -∇^a J_a for a 1-form jet."""
    (s,) = jet.slots
    x = fresh()
    return canonicalize(nabla(jet.definition.rename({s: x}), x).scale(-1), mode)


def rank1_jets(mode=CURVED):
    """σ_a, φ_ab = ∇_aσ_b - ∇_bσ_a, ψ = ∇^cσ_c and θ_a = ∇_aψ."""
    sreal = standard_realization(L(1))
    sigma = source_symbol(sreal)
    G1 = build_gradient(L(1), B(2))
    esym = standard_realization(B(2)).make_symbol("E1", display="E", latex="E", kind="formal")
    edef = G1.apply(tensor(sigma, "a"), ("a",), mode=mode)
    jets = [Jet(sigma, L(1), 0, tensor(sigma, "a"), ("a",), "σ_a", sreal)]
    phi, preal = _jet_symbol("phi", L(2), "φ", "\\varphi")
    jets.append(Jet(phi, L(2), 1, _exterior(jets[0], mode), ("a", "b"),
                    "φ_ab = ∇_aσ_b - ∇_bσ_a", preal, "sigma"))
    psi, qreal = _jet_symbol("psi", L(0), "ψ", "\\psi")
    x = fresh()
    jets.append(Jet(psi, L(0), 1, canonicalize(nabla(tensor(sigma, x), x), mode), (),
                    "ψ = ∇^cσ_c", qreal, "sigma"))
    theta, treal = _jet_symbol("theta", L(1), "θ", "\\theta")
    jets.append(Jet(theta, L(1), 2, canonicalize(nabla(jets[2].definition, "a"), mode),
                    ("a",), "θ_a = ∇_aψ", treal, "psi"))
    return sigma, jets, (esym, edef, G1.out)


def rank2_jets(mode=FLAT):
    """The ten jets of a trace-free conformal Killing 2-tensor."""
    sreal = standard_realization(B(2))
    sigma = source_symbol(sreal)
    G3 = build_gradient(B(2), B(3))
    esym = standard_realization(B(3)).make_symbol("E2", display="E", latex="E", kind="formal")
    edef = G3.apply(tensor(sigma, "a", "b"), ("a", "b"), mode=mode)
    jets = [Jet(sigma, B(2), 0, tensor(sigma, "a", "b"), ("a", "b"), "σ_ab", sreal)]
    by = {"sigma": jets[0]}

    def add(name, bundle, display, latex, level, definition, slots, how, parent, real=None):
        sym, real = _jet_symbol(name, bundle, display, latex, real)
        j = Jet(sym, bundle, level, definition, slots, how, real, parent)
        jets.append(j)
        by[name] = j
        return j

    G21 = build_gradient(B(2), B(2, 1))
    add("mu", B(2, 1), "μ", "\\mu", 1, _apply(G21, by["sigma"], mode), G21.out,
        "μ = G_[2,1][2] σ", "sigma", target_realization(G21))
    Gv = build_gradient(L(1), B(2))
    add("nu", L(1), "ν", "\\nu", 1, Gv.adjoint(tensor(sigma, *Gv.out), Gv.out, mode=mode),
        (Gv.out[1],), "ν = G*_[2][1] σ = -∇^bσ_ba", "sigma")
    Gr = build_gradient(B(2, 1), B(2, 2), by["mu"].real)
    add("rho", B(2, 2), "ρ", "\\rho", 2, _apply(Gr, by["mu"], mode), Gr.out,
        "ρ = G_[2,2][2,1] μ", "mu", target_realization(Gr))
    add("theta", B(2), "θ", "\\theta", 2, _apply(Gv, by["nu"], mode), Gv.out,
        "θ = G_[2][1] ν", "nu")
    add("omega", L(2), "ω", "\\omega", 2, _exterior(by["nu"], mode), ("a", "b"),
        "ω = dν", "nu")
    add("phi", L(0), "φ", "\\varphi", 2, _codifferential(by["nu"], mode), (),
        "φ = δν = -∇^aν_a", "nu")
    Gb = build_gradient(L(2), B(2, 1), by["omega"].real)
    add("beta", B(2, 1), "β", "\\beta", 3, _apply(Gb, by["omega"], mode), Gb.out,
        "β = G_[2,1][1,1] ω", "omega", target_realization(Gb))
    add("lambda", L(1), "λ", "\\lambda", 3, canonicalize(nabla(by["phi"].definition, "a"), mode),
        ("a",), "λ = dφ", "phi")
    add("tau", B(2), "τ", "\\tau", 4, _apply(Gv, by["lambda"], mode), Gv.out,
        "τ = G_[2][1] λ", "lambda")
    return sigma, jets, (esym, edef, G3.out)


# ---------------------------------------------------------------------------
# closed systems
# ---------------------------------------------------------------------------

KILLED = {1: B(2), 2: B(3)}

# How each component of ∇J is disposed of; the engine decides the class, the
# text records which composition argument the reduction instantiates.
TACTICS = {
    ("sigma", B(2)): "conformal Killing equation for vectors",
    ("sigma", B(3)): "conformal Killing equation [∇_(aσ_bc)]_0 = 0",
    ("phi", B(2, 1)): "trace of derivatives of the Killing equation",
    ("phi", L(3)): "dφ = ddσ = 0",
    ("phi", L(1)): "δφ is a combination of Δσ and ∇ψ",
    ("theta", B(2)): "second derivatives of ψ are curvature terms",
    ("theta", L(2)): "dθ = ddψ = 0",
    ("theta", L(0)): "divergence of θ is a curvature term",
    ("mu", B(3, 1)): "commuting square G_[3,1][2,1] G_[2,1][2] ~ G_[3,1][3] G_[3][2] = 0",
    ("mu", B(2, 1, 1)): "type I: G_[2,1,1][2,1] G_[2,1][2] is a pure trace",
    ("mu", B(2)): "Bochner relation: G*_[2,1][2] G_[2,1][2] σ ~ G_[2][1] G*_[2][1] σ = θ",
    ("mu", L(2)): "commuting square S* G_[2,1][2] ~ d G*_[2][1], giving ω",
    ("rho", B(3, 2)): "commuting square through G_[3,1][2,1] μ ~ 0",
    ("rho", B(2, 2, 1)): "commuting square through G_[2,1,1][2,1] μ ~ 0",
    ("rho", B(2, 1)): "G*_[2,2][2,1] ρ ~ Δμ ~ G_[2,1][2] Δσ ~ G_[2,1][2] θ ~ β",
    ("theta", B(3)): "sliding Laplacian: G_[3][2] G_[2][1] G*_[2][1] σ ~ G_[3][2] Δσ ~ 0",
    ("theta", B(2, 1)): "commuting square G_[2,1][2] G_[2][1] ~ S d, giving β",
    ("theta", L(1)): "divergence of θ ~ λ",
    ("omega", L(3)): "dω = ddν = 0",
    ("omega", L(1)): "δω = δdν ~ dδν = λ (third-order span)",
    ("beta", B(3, 1)): "commuting square reversing G_[3,2][2,2] ρ ~ 0",
    ("beta", B(2, 2)): "no invariant map Sym^2 ⊗ Λ^2 -> B[2,2]_0",
    ("beta", B(2, 1, 1)): "commuting square reversing G_[2,2,1][2,2] ρ ~ 0",
    ("beta", B(2)): "G*_[2,1][2] S ω ~ G_[2][1] δω ~ G_[2][1] λ = τ",
    ("beta", L(2)): "S* β ~ d G*_[2][1] θ ~ dλ = 0",
    ("lambda", L(2)): "dλ = ddφ = 0",
    ("lambda", L(0)): "δλ ~ δδω = 0",
    ("tau", B(3)): "G_[3][2] τ ~ G_[3,1][3] G_[3,1][2,1] β ~ 0",
    ("tau", B(2, 1)): "G_[2,1][2] G_[2][1] λ ~ S dλ = 0",
    ("tau", L(1)): "G*_[2][1] τ ~ δ S* β ~ 0",
}


class Component:
    """One irreducible part G_[target][J] J of the derivative of a jet."""

    def __init__(self, jet, target, label, classification, reduced, justification, new_jet=None):
        self.jet = jet
        self.target = target
        self.label = label
        self.classification = classification
        self.reduced = reduced
        self.justification = justification
        self.new_jet = new_jet

    def to_json(self):
        return {"jet": self.jet, "target": self.target.ascii(), "gradient": self.label,
                "classification": self.classification, "justification": self.justification,
                "new_jet": self.new_jet, "reduced": to_text(self.reduced)}


class JetSystem:
    """Ordered jets with a rule ∇J -> expression in jets for each jet."""

    def __init__(self, rank, mode, sigma, jets, equation):
        self.rank = rank
        self.mode = mode
        self.sigma = sigma
        self.jets = jets
        self.equation = equation
        self.reducer = Reducer(sigma, jets, equation, mode)
        self.rules = RuleTable(mode)
        self.components = []
        self.closed = False

    def jet(self, name):
        for j in self.jets:
            if j.name == name:
                return j
        raise KeyError(name)

    @property
    def jet_symbols(self):
        return [j.sym for j in self.jets]

    def reduce(self, expr):
        return self.reducer.reduce(expr)

    def expand(self, expr):
        """Write jets in terms of σ (inverse of reduce on solutions)."""
        return self.reducer.expand(expr)

    def rule(self, name):
        j = self.jet(name)
        return self.rules.rules[j.sym]

    def to_json(self):
        rules = []
        for j in self.jets:
            d, sl, rhs = self.rules.rules[j.sym]
            rules.append({"jet": j.name, "lhs": "∇_%s %s" % (d, _jet_text(j, sl)),
                          "rhs": expr_to_json(rhs), "text": to_text(rhs),
                          "note": self.rules.notes[j.sym]})
        return {"rank": self.rank, "mode": self.mode, "closed": self.closed,
                "jets": [j.to_json() for j in self.jets], "rules": rules,
                "components": [c.to_json() for c in self.components]}

    def to_text(self):
        lines = ["rank-%d conformal Killing system (%s): %d jets, %s"
                 % (self.rank, self.mode, len(self.jets), "closed" if self.closed else "open")]
        for j in self.jets:
            lines.append("  %s ∈ %s  (level %d)  %s" % (j.sym.display, j.bundle.display(),
                                                      j.level, j.how))
        lines.append("rules:")
        for j in self.jets:
            d, sl, rhs = self.rules.rules[j.sym]
            lines.append("  ∇_%s %s = %s" % (d, _jet_text(j, sl), to_text(rhs)))
        return "\n".join(lines)

    def to_latex(self):
        lines = []
        for j in self.jets:
            d, sl, rhs = self.rules.rules[j.sym]
            lhs = "\\nabla_{%s}%s%s" % (d, j.sym.latex_name, ("_{%s}" % "".join(sl)) if sl else "")
            lines.append("%s &= %s" % (lhs, to_latex(rhs)))
        return "\\begin{align*}\n" + " \\\\\n".join(lines) + "\n\\end{align*}"


def _jet_text(j, slots):
    return "%s_{%s}" % (j.sym.display, " ".join(slots)) if slots else j.sym.display


def close_system(rank, mode=FLAT):
    """Derive the rule table of the rank-1 or rank-2 conformal Killing system."""
    if rank not in (1, 2):
        raise ValueError("rank must be 1 or 2")
    if mode not in (FLAT, CURVED):
        raise ValueError("mode must be flat or curved")
    if rank == 2 and mode == CURVED:
        raise ValueError("curved closure is only available for rank 1")
    sigma, jets, eq = rank1_jets(mode) if rank == 1 else rank2_jets(mode)
    js = JetSystem(rank, mode, sigma, jets, eq)
    allowed = set(js.jet_symbols)
    for j in jets:
        x = "x"
        rhs = js.reduce(nabla(j.definition, x))
        for fs in rhs.terms:
            for f in fs:
                if f.sym in allowed and f.derivs:
                    raise ClosureError("derivative of %s left in the rule for ∇%s"
                                       % (f.sym.name, j.name), rhs)
                if not (f.sym in allowed or f.sym.is_metric or f.sym.is_curvature):
                    raise ClosureError("symbol %s outside the jets in the rule for ∇%s"
                                       % (f.sym.name, j.name), rhs)
        comps = _components(js, j)
        js.components.extend(comps)
        note = "; ".join("%s: %s" % (c.target.ascii(), c.classification
                                     + (" " + c.new_jet if c.new_jet else ""))
                         for c in comps)
        js.rules.add(j.sym, x, j.slots, rhs, note)
    js.closed = True
    return js


def _components(js, j):
    out = []
    for t in decompose(j.bundle):
        op = build_gradient(j.bundle, t, j.real)
        red = js.reduce(op.apply(j.definition, j.slots, mode=js.mode))
        syms = {f.sym.name for fs in red.terms for f in fs if not f.sym.is_metric}
        new = [k for k in js.jets if k.parent == j.name and k.bundle == t]
        curved = any(f.sym.is_curvature for fs in red.terms for f in fs)
        if red.is_zero():
            cls = "killed-by-CKE" if (j.sym == js.sigma and t == KILLED[js.rank]) \
                else "type-I-zero"
            newname = None
        elif new and syms == {new[0].name}:
            cls, newname = "new-jet", new[0].name
        elif curved:
            cls, newname = "reduced", None
        else:
            cls, newname = "type-II-identified", None
        just = TACTICS.get((j.name, t), "")
        if cls == "type-II-identified":
            just = (just + "; " if just else "") + "identified with " + ", ".join(sorted(syms))
        out.append(Component(j.name, t, op.label, cls, red, just, newname))
    return out


def reduce_derivative(expr, js):
    """Rule-table normal form of an expression in derivatives of σ and jets."""
    return js.reduce(expr)


# ---------------------------------------------------------------------------
# derivative tree
# ---------------------------------------------------------------------------

def classified_tree(js):
    """Tree of irreducible derivative components, expanded along new jets."""
    comps = {}
    for c in js.components:
        comps.setdefault(c.jet, []).append(c)
    root_jet = js.jets[0]
    root = TreeNode(root_jet.bundle, 0)
    root.classify("new-jet", "seed", jet=root_jet.sym.display)

    def expand(node, jet):
        for c in comps.get(jet.name, []):
            child = TreeNode(c.target, node.depth + 1, c.label, node)
            if c.classification == "new-jet":
                nj = js.jet(c.new_jet)
                child.classify("new-jet", c.justification or nj.how, jet=nj.sym.display)
                node.children.append(child)
                expand(child, nj)
                continue
            target = None
            if c.classification in ("type-II-identified", "reduced"):
                target = to_text(c.reduced)
            child.classify(c.classification, c.justification, target=target)
            if c.classification == "killed-by-CKE":
                node.killed.append(child)
            else:
                node.children.append(child)

    expand(root, root_jet)
    return root


# ---------------------------------------------------------------------------
# elimination steps of the rank-2 argument, as exact flat identities
# ---------------------------------------------------------------------------

def _component(js, name, target):
    j = js.jet(name)
    return build_gradient(j.bundle, target, j.real).apply(j.definition, j.slots, mode=js.mode)


def _adjoint_of_definition(js, name, op):
    """G* J for a jet J defined as the added-box output of ``op``."""
    j = js.jet(name)
    return op.adjoint(j.definition, j.slots, mode=js.mode)


def elimination_steps(js):
    """Each composition argument of the rank-2 closure as a flat identity
    modulo the Killing equation.  Returns a list of Findings."""
    if js.rank != 2 or js.mode != FLAT:
        raise ValueError("elimination steps are checked on the flat rank-2 system")
    G21 = build_gradient(B(2), B(2, 1))
    Gr = build_gradient(B(2, 1), B(2, 2), js.jet("mu").real)
    x = fresh()
    om = js.jet("omega")
    delta_omega = canonicalize(nabla(om.definition.rename({om.slots[0]: x}), x).scale(-1))
    steps = [
        ("G_[3,1][2,1] μ", "commuting square with G_[3,1][3] G_[3][2] σ = 0",
         _component(js, "mu", B(3, 1)), None),
        ("G_[2,1,1][2,1] μ", "type I composition",
         _component(js, "mu", B(2, 1, 1)), None),
        ("G*_[2,1][2] μ", "Bochner relation on B[2]_0",
         _adjoint_of_definition(js, "mu", G21), "theta"),
        ("S* μ", "Λ² part of ∇μ through d G*_[2][1]",
         _component(js, "mu", L(2)), "omega"),
        ("δω", "δdν ~ dδν (third-order span)", delta_omega, "lambda"),
        ("G_[3][2] θ", "sliding Laplacian", _component(js, "theta", B(3)), None),
        ("G_[2,1][2] θ", "commuting square G_[2,1][2] G_[2][1] ~ S d",
         _component(js, "theta", B(2, 1)), "beta"),
        ("G_[3,2][2,2] ρ", "commuting square through G_[3,1][2,1] μ",
         _component(js, "rho", B(3, 2)), None),
        ("G_[2,2,1][2,2] ρ", "commuting square through G_[2,1,1][2,1] μ",
         _component(js, "rho", B(2, 2, 1)), None),
        ("G*_[2,2][2,1] ρ", "Bochner formulas on B[2,1]_0 and sliding Laplacian",
         _adjoint_of_definition(js, "rho", Gr), "beta"),
        ("G_[3,1][2,1] β", "commuting square reversing the B[3,2] square",
         _component(js, "beta", B(3, 1)), None),
        ("G*_[2,1][2] β", "commuting square S, δ with G_[2][1]",
         _component(js, "beta", B(2)), "tau"),
        ("S* β", "d G*_[2][1] θ ~ dλ = ddφ = 0", _component(js, "beta", L(2)), None),
        ("G_[3][2] τ", "∇τ chain: B[3]_0 part", _component(js, "tau", B(3)), None),
        ("G_[2,1][2] τ", "∇τ chain: B[2,1]_0 part", _component(js, "tau", B(2, 1)), None),
        ("G*_[2][1] τ", "∇τ chain: divergence part", _component(js, "tau", L(1)), None),
    ]
    findings = []
    for name, how, lhs, expect in steps:
        red = js.reduce(lhs)
        syms = {f.sym.name for fs in red.terms for f in fs if not f.sym.is_metric}
        if expect is None:
            ok = red.is_zero()
            claim = "%s ~ 0" % name
        else:
            ok = (not red.is_zero()) and syms == {expect}
            claim = "%s ~ %s" % (name, js.jet(expect).sym.display)
        findings.append(Finding(claim + " (" + how + ")", "verified" if ok else "refuted",
                                "elimination step", {"reduced": to_text(red)}))
    return findings


# ---------------------------------------------------------------------------
# dimensions
# ---------------------------------------------------------------------------

def prolongation_dimension(js, nval):
    """Sum of the fiber dimensions of the jets at dimension nval."""
    return sum(fiber_dimension(j.bundle, nval) for j in js.jets)


def dimension_polynomial(bundle):
    """Fiber dimension of a bundle as a polynomial in n, interpolated from
    brute-force ranks in the stable range and checked at one extra point."""
    d = bundle.diagram
    deg = d.size
    cols = d.conjugate()
    start = max(3, (cols[0] + (cols[1] if len(cols) > 1 else 0)) if cols else 3)
    xs = list(range(start, start + deg + 1))
    ys = [fiber_dimension(bundle, x) for x in xs]
    poly = ZERO
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        term = rf(yi)
        for j, xj in enumerate(xs):
            if j != i:
                term = term * (N - xj) / rf(xi - xj)
        poly = poly + term
    extra = start + deg + 1
    if poly(extra) != fiber_dimension(bundle, extra):
        raise ArithmeticError("dimension of %s is not polynomial in the sampled range"
                              % bundle.ascii())
    return poly


def prolongation_dimension_symbolic(js):
    total = ZERO
    for j in js.jets:
        total = total + dimension_polynomial(j.bundle)
    return total
