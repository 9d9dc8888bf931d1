"""
Abstract-index tensor expressions over Q(n).

All indices are stored lowered; the metric is Riemannian so variance only
matters for display.  A term is a RatFunc coefficient times a product of
factors.  Each factor is a symbol carrying a list of covariant derivative
indices and a list of slot indices.  A label that occurs twice in a term is
a contracted (dummy) index; a label occurring once is free.

Derivative lists are kept in a normal form in which every derivative list is
the symmetrized derivative ∇_(a1...ak).  In flat mode that is automatic.  In
curved mode, reordering derivatives emits curvature terms built from the
convention

    [∇_a, ∇_b] T_{...c...} = sum over slots of R_{c d a b} T_{...d...}

with Ric_{bd} = R_{abad} and Sc = Ric_{aa}.
"""

import itertools
import json
from collections import namedtuple
from fractions import Fraction
from math import factorial

import flint

from .coeff import RatFunc, N, ONE, ZERO, rf, Echelon

FLAT = "flat"
CURVED = "curved"
MODES = (FLAT, CURVED)


class StructureError(ValueError):
    """Malformed contraction pattern or symbol use."""


# ---------------------------------------------------------------------------
# fresh index names
# ---------------------------------------------------------------------------

_counter = itertools.count(1)


def fresh(prefix="~"):
    return "%s%d" % (prefix, next(_counter))


def fresh_labels(k):
    return [fresh() for _ in range(k)]


# ---------------------------------------------------------------------------
# permutations and relation modules
# ---------------------------------------------------------------------------

def compose(p, q):
    """(p o q)(j) = p[q[j]]."""
    return tuple(p[j] for j in q)


def inverse_perm(p):
    inv = [0] * len(p)
    for i, j in enumerate(p):
        inv[j] = i
    return tuple(inv)


def perm_sign(p):
    p = list(p)
    s = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def close_group(r, gens):
    """All (perm, sign) pairs generated by signed slot permutations."""
    ident = tuple(range(r))
    elems = {ident: 1}
    frontier = [ident]
    while frontier:
        nxt = []
        for p in frontier:
            for g, sg in gens:
                q = compose(p, g)
                s = elems[p] * sg
                if q in elems:
                    if elems[q] != s:
                        raise StructureError("symmetry generators force the symbol to vanish")
                    continue
                elems[q] = s
                nxt.append(q)
        frontier = nxt
    return sorted(elems.items())


class RelSpec:
    """Linear relations among slot arrangements of a symbol.

    ``relations`` is a list of dicts perm -> Fraction; each means
    sum_s c_s T[l o s] = 0 for every labeling l.  ``tracefree`` lists slot
    position pairs whose contraction vanishes.  Quotients are computed per
    label multiset and cached.
    """

    def __init__(self, r, relations, tracefree=(), name="", closed=False):
        self.r = r
        # closed: the relation set is already invariant under relabeling
        self.closed = closed
        self.relations = [dict(rel) for rel in relations]
        self.tracefree = tuple(tracefree)
        self.name = name
        self._cache = {}

    @classmethod
    def from_group(cls, r, gens, extra=(), tracefree=(), name=""):
        rels = []
        ident = tuple(range(r))
        for g, sg in gens:
            rels.append({ident: Fraction(1), g: Fraction(-sg)} if g != ident else {})
        rels = [x for x in rels if x]
        rels.extend(extra)
        return cls(r, rels, tracefree, name)

    def quotient(self, pattern):
        """Basis and coordinates for arrangements of the id multiset ``pattern``."""
        pattern = tuple(sorted(pattern))
        q = self._cache.get(pattern)
        if q is None:
            q = _Quotient(self, pattern)
            self._cache[pattern] = q
        return q


class _Quotient:
    def __init__(self, spec, pattern):
        r = spec.r
        arrs = sorted(set(itertools.permutations(pattern)), reverse=True)
        index = {a: i for i, a in enumerate(arrs)}
        rows = set()
        perms = [tuple(range(r))] if spec.closed else list(itertools.permutations(range(r)))
        for rel in spec.relations:
            for p in perms:
                row = {}
                for s, c in rel.items():
                    a = tuple(pattern[p[s[j]]] for j in range(r))
                    row[index[a]] = row.get(index[a], 0) + c
                row = tuple(sorted((k, v) for k, v in row.items() if v != 0))
                if row:
                    rows.add(row)
        for a in arrs:
            for (i, j) in spec.tracefree:
                if a[i] == a[j]:
                    rows.add(((index[a], Fraction(1)),))
                    break
        rows = sorted(rows)
        ncol = len(arrs)
        pivots = {}
        if rows:
            mat = flint.fmpq_mat(len(rows), ncol)
            for i, row in enumerate(rows):
                for k, v in row:
                    mat[i, k] = flint.fmpq(v.numerator, v.denominator)
            red, rank = mat.rref()
            for i in range(rank):
                lead = None
                for k in range(ncol):
                    if red[i, k] != 0:
                        lead = k
                        break
                pivots[lead] = {k: Fraction(int(red[i, k].p), int(red[i, k].q))
                                for k in range(lead + 1, ncol) if red[i, k] != 0}
        free = [k for k in range(ncol) if k not in pivots]
        self.basis = [arrs[k] for k in free]
        bpos = {k: i for i, k in enumerate(free)}
        self.coords = {}
        for k, a in enumerate(arrs):
            if k in pivots:
                self.coords[a] = {bpos[j]: -v for j, v in pivots[k].items()}
            else:
                self.coords[a] = {bpos[k]: Fraction(1)}


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

class Symbol:
    """A tensor symbol: name, slot count, slot symmetries and trace-free pairs.

    ``sym`` holds generators (perm, sign) acting on slot positions.
    ``relational`` maps a derivative count to a RelSpec on the combined
    (derivative + slot) positions; such factors are canonicalized through the
    quotient module of arrangements instead of the symmetry group alone.
    """

    def __init__(self, name, nslots, display=None, latex=None, sym=(), tracefree=(),
                 kind="field", order=50, relational=None, bundle=None):
        self.name = name
        self.nslots = nslots
        self.display = display or name
        self.latex_name = latex or name
        self.sym = tuple(sym)
        self.group = close_group(nslots, self.sym) if nslots else [((), 1)]
        self.tracefree = tuple(tuple(sorted(p)) for p in tracefree)
        self.kind = kind
        self.order = order
        self.relational = dict(relational or {})
        self.bundle = bundle
        self.key = (name, nslots)

    def __repr__(self):
        return "Symbol(%s/%d)" % (self.name, self.nslots)

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        return isinstance(other, Symbol) and self.key == other.key

    def __lt__(self, other):
        return (self.order, self.key) < (other.order, other.key)

    @property
    def is_curvature(self):
        return self.kind == "curvature"

    @property
    def is_metric(self):
        return self.kind == "metric"

    @property
    def is_unknown(self):
        return self.kind == "unknown"


REGISTRY = {}


def declare(name, nslots, **kw):
    """Register a symbol (or return the existing one with the same name/rank)."""
    key = (name, nslots)
    if key in REGISTRY:
        return REGISTRY[key]
    s = Symbol(name, nslots, **kw)
    REGISTRY[key] = s
    return s


def lookup(name, nslots):
    try:
        return REGISTRY[(name, nslots)]
    except KeyError:
        raise StructureError("unknown symbol %s with %d slots" % (name, nslots))


SYM2 = [((1, 0), 1)]
ANTI2 = [((1, 0), -1)]

G = declare("g", 2, display="g", latex="g", sym=SYM2, kind="metric", order=90)


def _riemann_specs():
    gens = [((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((2, 3, 0, 1), 1)]
    bianchi = {(0, 1, 2, 3): Fraction(1), (0, 2, 3, 1): Fraction(1), (0, 3, 1, 2): Fraction(1)}
    r0 = RelSpec.from_group(4, gens, extra=[bianchi], name="Riem")
    gens1 = [((0, 2, 1, 3, 4), -1), ((0, 1, 2, 4, 3), -1), ((0, 3, 4, 1, 2), 1)]
    b1 = {(0, 1, 2, 3, 4): Fraction(1), (0, 1, 3, 4, 2): Fraction(1), (0, 1, 4, 2, 3): Fraction(1)}
    b2 = {(0, 1, 2, 3, 4): Fraction(1), (3, 1, 2, 4, 0): Fraction(1), (4, 1, 2, 0, 3): Fraction(1)}
    r1 = RelSpec.from_group(5, gens1, extra=[b1, b2], name="dRiem")
    return {0: r0, 1: r1}


RIEM = declare("Riem", 4, display="R", latex="R",
               sym=[((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((2, 3, 0, 1), 1)],
               kind="curvature", order=20, relational=_riemann_specs())
RIC = declare("Ric", 2, display="Ric", latex="\\mathrm{Ric}", sym=SYM2, kind="curvature", order=21)
SC = declare("Sc", 0, display="Sc", latex="\\mathrm{Sc}", kind="curvature", order=22)
F = declare("f", 0, display="f", latex="f", kind="function", order=80)


def unknown_symbol(name):
    return declare(name, 0, display=name, latex=_latex_unknown(name), kind="unknown", order=0)


def _latex_unknown(name):
    head = name.rstrip("0123456789")
    tail = name[len(head):]
    return "%s_{%s}" % (head, tail) if tail else name


# ---------------------------------------------------------------------------
# factors and expressions
# ---------------------------------------------------------------------------

class Factor(namedtuple("Factor", "sym derivs slots nsym")):
    """Symbol with derivative list ``derivs`` (outermost first) and slots.

    The trailing ``nsym`` derivatives form a symmetrized block; the others
    are raw derivatives applied in order.  A factor is in normal form when
    ``nsym == len(derivs)``.
    """

    __slots__ = ()

    @property
    def labels(self):
        return self.derivs + self.slots

    @property
    def normal(self):
        k = len(self.derivs)
        return self.nsym == k or k - self.nsym <= 1 and self.nsym == 0

    def relabel(self, m):
        return Factor(self.sym, tuple(m.get(x, x) for x in self.derivs),
                      tuple(m.get(x, x) for x in self.slots), self.nsym)

    def key(self):
        return (self.sym.order, self.sym.name, self.sym.nslots, len(self.derivs))


def _as_coef(c):
    if isinstance(c, RatFunc):
        return c
    return rf(c)


def _label_counts(factors):
    cnt = {}
    for f in factors:
        for l in f.labels:
            cnt[l] = cnt.get(l, 0) + 1
    return cnt


def term_free(factors):
    cnt = _label_counts(factors)
    bad = [l for l, c in cnt.items() if c > 2]
    if bad:
        raise StructureError("index %s appears more than twice in a term" % bad[0])
    return tuple(sorted(l for l, c in cnt.items() if c == 1))


class TensorExpr:
    """Sum of terms; ``terms`` maps a factor tuple to its RatFunc coefficient."""

    __slots__ = ("terms", "free")

    def __init__(self, terms=None, free=None):
        self.terms = {}
        if terms:
            for fs, c in (terms.items() if isinstance(terms, dict) else terms):
                c = _as_coef(c)
                if c.is_zero():
                    continue
                fs = tuple(fs)
                old = self.terms.get(fs)
                nc = c if old is None else old + c
                if nc.is_zero():
                    self.terms.pop(fs, None)
                else:
                    self.terms[fs] = nc
        if free is None:
            frees = {term_free(fs) for fs in self.terms}
            if len(frees) > 1:
                raise StructureError("terms carry different free indices: %s" % sorted(frees))
            free = frees.pop() if frees else ()
        else:
            free = tuple(sorted(free))
            for fs in self.terms:
                if term_free(fs) != free:
                    raise StructureError("term free indices %s differ from %s"
                                         % (term_free(fs), free))
        self.free = free

    # -- basic protocol ----------------------------------------------------
    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def is_zero(self):
        return not self.terms

    def copy(self):
        return TensorExpr(dict(self.terms), self.free)

    @classmethod
    def zero(cls, free=()):
        return cls({}, free)

    def __add__(self, other):
        if isinstance(other, (int, Fraction, RatFunc)):
            if _as_coef(other).is_zero():
                return self
            other = scalar(other)
        if self.is_zero():
            return self if other.is_zero() and not other.free else other
        if other.is_zero():
            return self
        if set(self.free) != set(other.free):
            raise StructureError("cannot add expressions with free indices %s and %s"
                                 % (self.free, other.free))
        out = dict(self.terms)
        for fs, c in other.terms.items():
            nc = out.get(fs, ZERO) + c
            if nc.is_zero():
                out.pop(fs, None)
            else:
                out[fs] = nc
        e = TensorExpr.__new__(TensorExpr)
        e.terms, e.free = out, self.free
        return e

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-ONE)

    def __sub__(self, other):
        return self + (-other if isinstance(other, TensorExpr) else -_as_coef(other))

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = _as_coef(c)
        if c.is_zero():
            return TensorExpr.zero(self.free)
        e = TensorExpr.__new__(TensorExpr)
        e.terms = {fs: v * c for fs, v in self.terms.items()}
        e.free = self.free
        return e

    def __mul__(self, other):
        if isinstance(other, TensorExpr):
            return product(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, TensorExpr):
            return product(other, self)
        return self.scale(other)

    def __truediv__(self, c):
        return self.scale(ONE / _as_coef(c))

    def __eq__(self, other):
        if not isinstance(other, TensorExpr):
            return NotImplemented
        return self.free == other.free and self.terms == other.terms

    def __hash__(self):
        return hash((self.free, frozenset(self.terms.items())))

    def rename(self, mapping):
        """Rename free indices (dummies are freshened if they would collide)."""
        mapping = {k: v for k, v in mapping.items() if k != v}
        if not mapping:
            return self
        targets = set(mapping.values())
        out = {}
        for fs, c in self.terms.items():
            m = dict(mapping)
            free = set(term_free(fs))
            for l in _label_counts(fs):
                if l not in free and (l in targets or l in mapping):
                    m[l] = fresh()
            nfs = tuple(f.relabel(m) for f in fs)
            out[nfs] = out.get(nfs, ZERO) + c
        new = [mapping.get(x, x) for x in self.free]
        return TensorExpr(out, tuple(x for x in new if new.count(x) == 1))

    def freshen(self, avoid=None):
        """Give every dummy a fresh name."""
        out = {}
        for fs, c in self.terms.items():
            free = set(term_free(fs))
            m = {l: fresh() for l in _label_counts(fs) if l not in free}
            nfs = tuple(f.relabel(m) for f in fs)
            out[nfs] = out.get(nfs, ZERO) + c
        return TensorExpr(out, self.free)

    def symbols(self):
        out = set()
        for fs in self.terms:
            for f in fs:
                out.add(f.sym)
        return out

    def max_derivs(self, sym=None):
        best = 0
        for fs in self.terms:
            for f in fs:
                if sym is None or f.sym == sym:
                    best = max(best, len(f.derivs))
        return best

    def __repr__(self):
        return "TensorExpr(%s)" % to_text(self)

    def __str__(self):
        return to_text(self)


def product(a, b):
    """Tensor product; labels free in both operands become contracted."""
    if a.is_zero() or b.is_zero():
        shared = set(a.free) & set(b.free)
        return TensorExpr.zero(tuple(sorted(set(a.free) ^ set(b.free))))
    b = b.freshen()
    a = a.freshen()
    out = {}
    for fa, ca in a.terms.items():
        for fb, cb in b.terms.items():
            fs = fa + fb
            out[fs] = out.get(fs, ZERO) + ca * cb
    return TensorExpr(out)


def scalar(c):
    return TensorExpr({(): _as_coef(c)}, ())


def tensor(sym, *slots, derivs=(), coef=1):
    """Single-term expression sym with given slots and raw derivative list."""
    if isinstance(sym, str):
        sym = lookup(sym, len(slots))
    if len(slots) != sym.nslots:
        raise StructureError("%s takes %d slots" % (sym.name, sym.nslots))
    f = Factor(sym, tuple(derivs), tuple(slots), 0 if len(derivs) > 1 else len(derivs))
    return TensorExpr({(f,): _as_coef(coef)})


def metric(a, b):
    return tensor(G, a, b)


def unknown(name):
    return tensor(unknown_symbol(name))


def nabla(expr, idx):
    """Raw covariant derivative ∇_idx applied by the Leibniz rule."""
    out = {}
    for fs, c in expr.terms.items():
        for i, f in enumerate(fs):
            if f.sym.is_metric or f.sym.is_unknown:
                continue
            nf = Factor(f.sym, (idx,) + f.derivs, f.slots, f.nsym)
            nfs = fs[:i] + (nf,) + fs[i + 1:]
            out[nfs] = out.get(nfs, ZERO) + c
    return TensorExpr(out)


def nablas(expr, idxs):
    """∇_{i1} ... ∇_{ik} expr (outermost first)."""
    for i in reversed(list(idxs)):
        expr = nabla(expr, i)
    return expr


# ---------------------------------------------------------------------------
# curvature commutators and derivative normal order
# ---------------------------------------------------------------------------

def commutator_on(a, b, fs, slot_labels):
    """[∇_a, ∇_b] applied to the product ``fs`` viewed as a tensor whose slots
    are ``slot_labels`` (labels appearing once in fs)."""
    out = {}
    for lab in slot_labels:
        d = fresh()
        nfs = []
        done = False
        for f in fs:
            if not done and lab in f.labels:
                m = {lab: d}
                # relabel only the single occurrence
                nf = _relabel_once(f, lab, d)
                nfs.append(nf)
                done = True
            else:
                nfs.append(f)
        r = Factor(RIEM, (), (lab, d, a, b), 0)
        key = tuple(nfs) + (r,)
        out[key] = out.get(key, ZERO) + ONE
    return out


def _relabel_once(f, old, new):
    d = list(f.derivs)
    s = list(f.slots)
    for i, x in enumerate(d):
        if x == old:
            d[i] = new
            return Factor(f.sym, tuple(d), f.slots, f.nsym)
    for i, x in enumerate(s):
        if x == old:
            s[i] = new
            return Factor(f.sym, f.derivs, tuple(s), f.nsym)
    raise StructureError("label %s not in factor" % old)


_NO_CACHE = {}


def _normal_order_raw(sym, derivs, slots):
    """Normal form of the raw derivative ∇_{derivs} sym_{slots} (curved).

    Returns a dict factors -> coefficient.  Labels may repeat.
    """
    key = (sym.key, derivs, slots)
    hit = _NO_CACHE.get(key)
    if hit is not None:
        return hit
    k = len(derivs)
    base = Factor(sym, derivs, slots, k)
    if k <= 1 or sym.nslots == 0 and k == 2:
        res = {(base,): ONE}
        _NO_CACHE[key] = res
        return res
    acc = {(base,): ONE}
    weight = RatFunc(1, factorial(k))
    for perm in itertools.permutations(range(k)):
        cur = list(range(k))
        target = list(perm)
        diff = {}
        for j in range(k):
            pos = cur.index(target[j])
            while pos > j:
                i = pos - 1
                # ∇_M T - ∇_{M'} T at swap (i, i+1)
                m = [derivs[x] for x in cur]
                _accumulate(diff, _swap_term(sym, m, slots, i), ONE)
                cur[i], cur[i + 1] = cur[i + 1], cur[i]
                pos -= 1
        _accumulate(acc, diff, weight)
    _NO_CACHE[key] = acc
    return acc


def _accumulate(acc, d, w):
    for fs, c in d.items():
        nc = acc.get(fs, ZERO) + c * w
        if nc.is_zero():
            acc.pop(fs, None)
        else:
            acc[fs] = nc


def _swap_term(sym, m, slots, i):
    """∇_{m[:i]} [∇_{m[i]}, ∇_{m[i+1]}] ∇_{m[i+2:]} T, fully normal ordered."""
    inner = Factor(sym, tuple(m[i + 2:]), slots, 0)
    slot_labels = list(m[i + 2:]) + list(slots)
    # slot labels of the inner tensor: derivative indices come first
    comm = {}
    for pos, lab in enumerate(slot_labels):
        d = fresh()
        if pos < len(m) - i - 2:
            dl = list(inner.derivs)
            dl[pos] = d
            nf = Factor(sym, tuple(dl), slots, 0)
        else:
            sl = list(slots)
            sl[pos - (len(m) - i - 2)] = d
            nf = Factor(sym, inner.derivs, tuple(sl), 0)
        r = Factor(RIEM, (), (lab, d, m[i], m[i + 1]), 0)
        key = (nf, r)
        comm[key] = comm.get(key, ZERO) + ONE
    expr = comm
    for idx in reversed(m[:i]):
        expr = _leibniz(expr, idx)
    # normal order everything that came out
    out = {}
    for fs, c in expr.items():
        for nfs, nc in _normal_order_factors(fs).items():
            out[nfs] = out.get(nfs, ZERO) + c * nc
    return {k: v for k, v in out.items() if not v.is_zero()}


def _leibniz(terms, idx):
    out = {}
    for fs, c in terms.items():
        for i, f in enumerate(fs):
            if f.sym.is_metric or f.sym.is_unknown:
                continue
            nf = Factor(f.sym, (idx,) + f.derivs, f.slots, f.nsym)
            nfs = fs[:i] + (nf,) + fs[i + 1:]
            out[nfs] = out.get(nfs, ZERO) + c
    return out


def _expand_factor(f):
    """Write a factor with a raw prefix over a symmetrized block as an average
    of fully raw derivative orders.  Returns list of (derivs tuple, weight)."""
    k = len(f.derivs)
    if f.nsym <= 1 or f.nsym == k and k <= 1:
        return [(f.derivs, ONE)]
    pre = f.derivs[:k - f.nsym]
    block = f.derivs[k - f.nsym:]
    perms = list(itertools.permutations(block))
    w = RatFunc(1, len(perms))
    return [(pre + p, w) for p in perms]


def _normal_order_factors(fs):
    """Normal order every factor in a product (curved mode)."""
    acc = {(): ONE}
    for f in fs:
        if f.normal or f.sym.is_metric or f.sym.is_unknown:
            opts = {(Factor(f.sym, f.derivs, f.slots, len(f.derivs)),): ONE}
        elif f.nsym == len(f.derivs):
            opts = {(f,): ONE}
        else:
            opts = {}
            for derivs, w in _expand_factor(f):
                res = _normal_order_raw(f.sym, derivs, f.slots)
                # freshen internal dummies of the cached result
                for rfs, c in res.items():
                    rfs = _freshen_internal(rfs, set(f.labels))
                    opts[rfs] = opts.get(rfs, ZERO) + c * w
        nacc = {}
        for a, ca in acc.items():
            for b, cb in opts.items():
                key = a + b
                nacc[key] = nacc.get(key, ZERO) + ca * cb
        acc = nacc
    return {k: v for k, v in acc.items() if not v.is_zero()}


def _freshen_internal(fs, keep):
    cnt = _label_counts(fs)
    m = {}
    for l in cnt:
        if l not in keep:
            m[l] = fresh()
    if not m:
        return fs
    return tuple(f.relabel(m) for f in fs)


def commute_derivatives(expr, mode=FLAT):
    """Bring every derivative list into symmetrized normal form.

    Flat mode just reinterprets the lists; curved mode adds the curvature
    corrections from the commutator convention above.
    """
    out = {}
    for fs, c in expr.terms.items():
        if mode == FLAT:
            nfs = tuple(Factor(f.sym, f.derivs, f.slots, len(f.derivs)) for f in fs)
            out[nfs] = out.get(nfs, ZERO) + c
        else:
            if all(f.normal for f in fs):
                nfs = tuple(Factor(f.sym, f.derivs, f.slots, len(f.derivs)) for f in fs)
                out[nfs] = out.get(nfs, ZERO) + c
                continue
            for nfs, nc in _normal_order_factors(fs).items():
                out[nfs] = out.get(nfs, ZERO) + c * nc
    return TensorExpr(out, expr.free)


# ---------------------------------------------------------------------------
# term simplification: metric absorption, traces, curvature contractions
# ---------------------------------------------------------------------------

# Self-contraction of Riemann slots (i, j) -> sign, Ricci slot positions
_RIEM_TRACE = {(0, 2): (1, (1, 3)), (1, 3): (1, (0, 2)), (0, 3): (-1, (1, 2)),
               (1, 2): (-1, (0, 3))}


def _simplify_term(coef, fs, mode):
    """Return list of (coef, factors) equal to the given term with metrics
    absorbed and trace / curvature contraction rules applied."""
    work = [(coef, list(fs))]
    done = []
    while work:
        c, fl = work.pop()
        res = _simplify_step(c, fl, mode)
        if res is None:
            continue
        if isinstance(res, list):
            work.extend(res)
        else:
            done.append(res)
    return done


def _simplify_step(c, fl, mode):
    # derivatives of metric / constants vanish
    for f in fl:
        if f.derivs and (f.sym.is_metric or f.sym.is_unknown):
            return None
        if mode == FLAT and f.sym.is_curvature:
            return None
    unk = [f for f in fl if f.sym.is_unknown]
    if len(unk) > 1:
        raise StructureError("product of unknown scalars %s is not linear"
                             % [u.sym.name for u in unk])
    # metric absorption
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(fl):
            if not f.sym.is_metric:
                continue
            a, b = f.slots
            if a == b:
                c = c * N
                del fl[i]
                changed = True
                break
            for other_lab, keep in ((a, b), (b, a)):
                hit = None
                for j, h in enumerate(fl):
                    if j != i and other_lab in h.labels:
                        hit = j
                        break
                if hit is not None:
                    h = fl[hit]
                    fl[hit] = _relabel_once(h, other_lab, keep)
                    del fl[i]
                    changed = True
                    break
            if changed:
                break
    # self contractions
    for i, f in enumerate(fl):
        labs = f.labels
        if len(set(labs)) == len(labs):
            continue
        nd = len(f.derivs)
        pairs = []
        seen = {}
        for p, l in enumerate(labs):
            if l in seen:
                pairs.append((seen[l], p))
            else:
                seen[l] = p
        for (p, q) in pairs:
            if p >= nd and q >= nd and (p - nd, q - nd) in f.sym.tracefree:
                return None
        if f.sym is RIEM:
            return _riemann_contraction(c, fl, i, pairs, nd)
        if f.sym is RIC:
            return _ricci_contraction(c, fl, i, pairs, nd)
    return (c, tuple(fl))


def _riemann_contraction(c, fl, i, pairs, nd):
    f = fl[i]
    for (p, q) in pairs:
        if p >= nd:
            sp, sq = p - nd, q - nd
            if (sp, sq) in ((0, 1), (2, 3)):
                return None
            sign, (u, v) = _RIEM_TRACE[(sp, sq)]
            nf = Factor(RIC, f.derivs, (f.slots[u], f.slots[v]), f.nsym)
            nl = fl[:i] + [nf] + fl[i + 1:]
            return [(c * sign, nl)]
    # a derivative index contracted with a slot: contracted second Bianchi
    for (p, q) in pairs:
        if p < nd <= q:
            if nd != 1:
                raise NotImplementedError("contracted Bianchi identity with several derivatives")
            s = f.slots
            x = f.derivs[0]
            pos = q - nd
            # bring the contracted slot to position 0 using the symmetries
            if pos == 0:
                sign, (b, cc, d) = 1, (s[1], s[2], s[3])
            elif pos == 1:
                sign, (b, cc, d) = -1, (s[0], s[2], s[3])
            elif pos == 2:
                sign, (b, cc, d) = 1, (s[3], s[0], s[1])
            else:
                sign, (b, cc, d) = -1, (s[2], s[0], s[1])
            # ∇_x R_{x b c d} = ∇_c Ric_{b d} - ∇_d Ric_{b c}
            t1 = fl[:i] + [Factor(RIC, (cc,), (b, d), 1)] + fl[i + 1:]
            t2 = fl[:i] + [Factor(RIC, (d,), (b, cc), 1)] + fl[i + 1:]
            return [(c * sign, t1), (c * (-sign), t2)]
    raise StructureError("unhandled Riemann contraction")


def _ricci_contraction(c, fl, i, pairs, nd):
    f = fl[i]
    for (p, q) in pairs:
        if p >= nd:
            nf = Factor(SC, f.derivs, (), f.nsym)
            return [(c, fl[:i] + [nf] + fl[i + 1:])]
    for (p, q) in pairs:
        if p < nd <= q:
            if nd != 1:
                raise NotImplementedError("contracted Bianchi identity with several derivatives")
            other = f.slots[1 - (q - nd)]
            nf = Factor(SC, (other,), (), 1)
            return [(c * RatFunc(1, 2), fl[:i] + [nf] + fl[i + 1:])]
    return (c, tuple(fl))


# ---------------------------------------------------------------------------
# brute-force canonical ordering
# ---------------------------------------------------------------------------

_GROUP_CACHE = {}


def _factor_group(sym, nd):
    key = (sym.key, nd)
    g = _GROUP_CACHE.get(key)
    if g is not None:
        return g
    rel = sym.relational.get(nd)
    r = nd + sym.nslots
    if rel is not None:
        g = ("rel", [(p, 1) for p in itertools.permutations(range(r))])
    else:
        out = []
        for dp in itertools.permutations(range(nd)):
            for sp, sg in sym.group:
                out.append((tuple(dp) + tuple(nd + x for x in sp), sg))
        g = ("grp", out)
    _GROUP_CACHE[key] = g
    return g


def _canonical_order(fs, free):
    """Return (achievers, order) for a simplified term.

    Each achiever is (sign, choices) where choices lists (factor index, perm)
    in canonical factor order.  All achievers produce the same string.
    """
    n = len(fs)
    keys = [f.key() for f in fs]
    labels = [f.labels for f in fs]
    groups = [_factor_group(f.sym, len(f.derivs)) for f in fs]
    states = [(1, (), {}, ())]  # sign, used, dummy map, choices
    for _ in range(n):
        best = None
        nxt = []
        for sign, used, dmap, choices in states:
            kmin = min(keys[i] for i in range(n) if i not in used)
            for i in range(n):
                if i in used or keys[i] != kmin:
                    continue
                for perm, sg in groups[i][1]:
                    dm = dmap
                    copied = False
                    code = []
                    for p in perm:
                        l = labels[i][p]
                        if l in free:
                            code.append((0, l))
                        else:
                            v = dm.get(l)
                            if v is None:
                                if not copied:
                                    dm = dict(dm)
                                    copied = True
                                v = len(dm)
                                dm[l] = v
                            code.append((1, v))
                    code = tuple(code)
                    if best is None or code < best:
                        best = code
                        nxt = [(sign * sg, used + (i,), dm, choices + ((i, perm),))]
                    elif code == best:
                        nxt.append((sign * sg, used + (i,), dm, choices + ((i, perm),)))
        states = nxt
    return states


_TERM_CACHE = {}


def canonical_term(coef_unused, fs, mode=FLAT):
    """Canonical representation of a single (normal-ordered) term with unit
    coefficient: list of (RatFunc, factor tuple)."""
    key = (fs, mode)
    hit = _TERM_CACHE.get(key)
    if hit is not None:
        return hit
    out = {}
    for c, sfs in _simplify_term(ONE, fs, mode):
        for cc, cfs in _canon_simplified(sfs):
            out[cfs] = out.get(cfs, ZERO) + c * cc
    res = [(v, k) for k, v in out.items() if not v.is_zero()]
    if len(_TERM_CACHE) > 400000:
        _TERM_CACHE.clear()
    _TERM_CACHE[key] = res
    return res


def _canon_simplified(fs):
    free = set(term_free(fs))
    rel = [i for i, f in enumerate(fs) if _factor_group(f.sym, len(f.derivs))[0] == "rel"]
    if len(rel) > 1:
        raise NotImplementedError("more than one relational factor in a term")
    states = _canonical_order(fs, free)
    sign0, used, dmap, choices = states[0]
    rename = {l: "d%d" % (v + 1) for l, v in dmap.items()}

    def build(choices, override=None):
        out = []
        for i, perm in choices:
            f = fs[i]
            labs = [rename.get(f.labels[p], f.labels[p]) for p in perm]
            if override is not None and i == override[0]:
                labs = override[1]
            nd = len(f.derivs)
            out.append(Factor(f.sym, tuple(labs[:nd]), tuple(labs[nd:]), nd))
        return tuple(out)

    if not rel:
        signs = {s for s, *_ in states}
        if len(signs) > 1:
            return []
        return [(RatFunc(sign0), build(choices))]
    ri = rel[0]
    f = fs[ri]
    spec = f.sym.relational[len(f.derivs)]
    # canonical listing x of the relational factor (same for all achievers)
    perm0 = dict(choices)[ri]
    xl = [rename.get(f.labels[p], f.labels[p]) for p in perm0]
    ids = {}
    for l in xl:
        if l not in ids:
            ids[l] = len(ids)
    label_of = {v: k for k, v in ids.items()}
    pattern = tuple(sorted(ids[l] for l in xl))
    quo = spec.quotient(pattern)
    vec = {}
    for sign, used, dm, ch in states:
        a = tuple(ids[_rn(dm, l, free)] for l in f.labels)
        for b, v in quo.coords[a].items():
            vec[b] = vec.get(b, Fraction(0)) + sign * v
    m = len(states)
    out = []
    for b, v in sorted(vec.items()):
        if v == 0:
            continue
        arr = quo.basis[b]
        labs = [label_of[x] for x in arr]
        out.append((RatFunc(v / m), build(choices, (ri, labs))))
    return out


def _rn(dm, l, free):
    if l in free:
        return l
    return "d%d" % (dm[l] + 1)


def canonicalize(expr, mode=FLAT):
    """Unique canonical representative (normal order, simplification, ordering)."""
    if mode not in MODES:
        raise ValueError("mode must be flat or curved")
    e = commute_derivatives(expr, mode)
    out = {}
    for fs, c in e.terms.items():
        term_free(fs)
        for cc, cfs in canonical_term(None, fs, mode):
            nc = out.get(cfs, ZERO) + c * cc
            if nc.is_zero():
                out.pop(cfs, None)
            else:
                out[cfs] = nc
    res = TensorExpr.__new__(TensorExpr)
    res.terms = dict(sorted(out.items(), key=lambda kv: _sort_key(kv[0])))
    res.free = expr.free
    return res


def _sort_key(fs):
    return tuple((f.key(), f.derivs, f.slots) for f in fs)


def equal(a, b, mode=FLAT):
    return canonicalize(a - b, mode).is_zero()


def drop_curvature(expr):
    """Set every curvature symbol to zero."""
    return TensorExpr({fs: c for fs, c in expr.terms.items()
                       if not any(f.sym.is_curvature for f in fs)}, expr.free)


# ---------------------------------------------------------------------------
# index manipulations
# ---------------------------------------------------------------------------

def symmetrize(expr, labels, anti=False):
    """Average over permutations of the listed free labels."""
    labels = list(labels)
    perms = list(itertools.permutations(labels))
    acc = TensorExpr.zero(expr.free)
    for p in perms:
        s = perm_sign([labels.index(x) for x in p]) if anti else 1
        acc = acc + expr.rename(dict(zip(labels, p))).scale(s)
    return acc.scale(RatFunc(1, len(perms)))


def antisymmetrize(expr, labels):
    return symmetrize(expr, labels, anti=True)


def contract(expr, a, b):
    """Contract two free labels of an expression."""
    d = fresh()
    return expr.rename({a: d, b: d}) if a != b else expr


def trace(expr, a, b, mode=FLAT):
    return canonicalize(contract(expr, a, b), mode)


_TF_CACHE = {}


def _symmetric_tf_coeffs(k):
    """Coefficients a_j with [S]_0 = sum_j a_j Sym(g^j (x) tr^j S) for a
    symmetric k-tensor S, solved by the engine on a formal symbol."""
    if k in _TF_CACHE:
        return _TF_CACHE[k]
    from .coeff import solve_linear
    S = declare("_S%d" % k, k, sym=[(tuple([1, 0] + list(range(2, k))), 1)] +
                ([(tuple(list(range(1, k)) + [0]), 1)] if k > 2 else []), kind="formal", order=60)
    labs = ["i%d" % j for j in range(k)]
    pieces = []
    for j in range(k // 2 + 1):
        pieces.append(_sym_trace_piece(S, labs, j))
    unknowns = ["a%d" % j for j in range(1, k // 2 + 1)]
    ansatz = pieces[0]
    for j in range(1, k // 2 + 1):
        ansatz = ansatz + pieces[j] * unknown(unknowns[j - 1])
    if k < 2:
        _TF_CACHE[k] = [ONE]
        return _TF_CACHE[k]
    tr = trace(ansatz, labs[0], labs[1])
    eqs = _linear_equations(tr)
    sol = solve_linear(eqs, unknowns)
    coeffs = [ONE] + [sol.values[u] for u in unknowns]
    _TF_CACHE[k] = coeffs
    return coeffs


def _sym_trace_piece(S, labs, j):
    """Sym over labs of g_{l0 l1} ... g_{l(2j-2) l(2j-1)} tr^j S_{rest}."""
    k = len(labs)
    dummies = fresh_labels(j)
    slot_labels = []
    for d in dummies:
        slot_labels += [d, d]
    slot_labels += labs[2 * j:]
    t = tensor(S, *slot_labels)
    for q in range(j):
        t = product(t, metric(labs[2 * q], labs[2 * q + 1]))
    return symmetrize(t, labs)


def _linear_equations(expr, mode=FLAT):
    """Group a canonical expression by shape and unknown; return equation dicts."""
    eqs = {}
    for fs, c in canonicalize(expr, mode).terms.items():
        unk = None
        rest = []
        for f in fs:
            if f.sym.is_unknown:
                unk = f.sym.name
            else:
                rest.append(f)
        eqs.setdefault(tuple(rest), {})
        eqs[tuple(rest)][unk] = eqs[tuple(rest)].get(unk, ZERO) + c
    return list(eqs.values())


def linear_equations(expr, mode=FLAT):
    """Coefficient equations (one per canonical shape) of an expression that is
    linear in unknown scalars; each dict maps unknown (None = constant) to
    its coefficient."""
    return _linear_equations(expr, mode)


def trace_free_part(expr, labels, mode=FLAT):
    """Symmetrize over ``labels`` and remove all traces among them."""
    labels = list(labels)
    k = len(labels)
    s = symmetrize(expr, labels)
    if k < 2:
        return canonicalize(s, mode)
    coeffs = _symmetric_tf_coeffs(k)
    acc = s
    for j in range(1, k // 2 + 1):
        # Sym(g^j tr^j s)
        t = s
        for q in range(j):
            t = contract(t, labels[2 * q], labels[2 * q + 1])
        others = labels[2 * j:]
        for q in range(j):
            t = product(t, metric(labels[2 * q], labels[2 * q + 1]))
        acc = acc + symmetrize(t, labels).scale(coeffs[j])
    return canonicalize(acc, mode)


def substitute_symbol(expr, sym, replacement, slot_labels):
    """Replace every underived occurrence of ``sym`` by ``replacement``, an
    expression whose free labels are ``slot_labels`` (in slot order)."""
    out = TensorExpr.zero(expr.free)
    for fs, c in expr.terms.items():
        term = TensorExpr({(): c})
        for f in fs:
            if f.sym == sym:
                if f.derivs:
                    raise StructureError("substitute_symbol on a derived occurrence")
                piece = replacement.freshen().rename(dict(zip(slot_labels, f.slots)))
            else:
                piece = TensorExpr({(f,): ONE})
            term = _raw_product(term, piece)
        out = out + term
    return out


def _raw_product(a, b):
    out = {}
    for fa, ca in a.terms.items():
        for fb, cb in b.terms.items():
            out[fa + fb] = out.get(fa + fb, ZERO) + ca * cb
    return TensorExpr(out)


# ---------------------------------------------------------------------------
# rewrite rules
# ---------------------------------------------------------------------------

class RuleTable:
    """Rules ∇_e J_{slots} -> expression, one per symbol J.

    Every right-hand side must be free of derivatives of symbols in the
    table, so each application strictly lowers derivative order.
    """

    def __init__(self, mode=FLAT):
        self.mode = mode
        self.rules = {}
        self.notes = {}

    def add(self, sym, deriv_label, slot_labels, rhs, note=""):
        want = tuple(sorted((deriv_label,) + tuple(slot_labels)))
        if tuple(sorted(rhs.free)) != want:
            raise StructureError("rule for %s has free indices %s, expected %s"
                                 % (sym.name, rhs.free, want))
        self.rules[sym] = (deriv_label, tuple(slot_labels), rhs)
        self.notes[sym] = note
        self._check()

    def _check(self):
        for sym, (_, _, rhs) in self.rules.items():
            for fs in rhs.terms:
                for f in fs:
                    if f.sym in self.rules and f.derivs:
                        raise StructureError("rule for %s does not lower derivative order "
                                             "(right side contains a derivative of %s)"
                                             % (sym.name, f.sym.name))

    def __contains__(self, sym):
        return sym in self.rules

    def apply_one(self, f, idx):
        """∇_idx applied to the underived factor f (rule right-hand side)."""
        d, sl, rhs = self.rules[f.sym]
        m = {d: idx}
        m.update(dict(zip(sl, f.slots)))
        return rhs.freshen().rename(m)


def differentiate(expr, idx, mode=FLAT, rules=None):
    """∇_idx expr, substituting rules for jets and canonicalizing."""
    out = TensorExpr.zero(tuple(sorted(set(expr.free) | {idx})))
    for fs, c in expr.terms.items():
        for i, f in enumerate(fs):
            if f.sym.is_metric or f.sym.is_unknown:
                continue
            rest_before = fs[:i]
            rest_after = fs[i + 1:]
            if rules is not None and f.sym in rules and not f.derivs:
                piece = rules.apply_one(f, idx)
                if piece.is_zero():
                    continue
                for pfs, pc in piece.terms.items():
                    key = rest_before + pfs + rest_after
                    out = out + TensorExpr({key: c * pc})
            else:
                if rules is not None and f.sym in rules and f.derivs:
                    raise StructureError("derived jet %s left unreduced" % f.sym.name)
                nf = Factor(f.sym, (idx,) + f.derivs, f.slots, f.nsym)
                key = rest_before + (nf,) + rest_after
                out = out + TensorExpr({key: c})
    return canonicalize(out, mode)


def substitute_rules(expr, rules, mode=None):
    """Rewrite every derived jet factor with the rule table until no rule
    left-hand side remains."""
    mode = mode or rules.mode
    expr = canonicalize(expr, mode) if mode == FLAT else expr
    acc = TensorExpr.zero(expr.free)
    for fs, c in expr.terms.items():
        term = TensorExpr({(): c})
        for f in fs:
            if f.sym in rules and f.derivs:
                options = _expand_factor(f) if mode == CURVED else [(f.derivs, ONE)]
                piece = TensorExpr.zero()
                for derivs, w in options:
                    base = tensor(f.sym, *f.slots)
                    for idx in reversed(derivs):
                        base = differentiate(base, idx, mode, rules)
                    piece = piece + base.scale(w) if not piece.is_zero() else base.scale(w)
            else:
                piece = TensorExpr({(f,): ONE})
            term = _raw_product(term.freshen(), piece.freshen()) if piece.terms else TensorExpr.zero()
            if term.is_zero():
                break
        if not term.is_zero():
            acc = acc + TensorExpr(term.terms)
    return canonicalize(acc, mode)


# ---------------------------------------------------------------------------
# coefficient collection
# ---------------------------------------------------------------------------

class OrphanTermError(ValueError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__("terms not matched by the basis: %s" % to_text(residual))


def collect_coefficients(expr, basis, mode=FLAT):
    """Coefficients of expr on a list of basis expressions.

    Returns a list (one entry per basis element) of dicts unknown -> RatFunc
    (None = plain coefficient).  Raises OrphanTermError when expr is not in
    the span.  Basis elements may be multi-term (relational canonical forms).
    """
    e = canonicalize(expr, mode)
    by_unknown = {}
    for fs, c in e.terms.items():
        unk = None
        rest = []
        for f in fs:
            if f.sym.is_unknown:
                unk = f.sym.name
            else:
                rest.append(f)
        by_unknown.setdefault(unk, {})[tuple(rest)] = c
    cb = [canonicalize(b, mode) for b in basis]
    ech = Echelon(order=lambda col: repr(col))
    for i, b in enumerate(cb):
        ech.add(dict(b.terms), tag=i)
    out = [dict() for _ in basis]
    orphan = {}
    for unk, vec in by_unknown.items():
        rest, comb = ech.reduce(dict(vec), {"__target__": ONE})
        if rest:
            for k, v in rest.items():
                fs = k + ((Factor(unknown_symbol(unk), (), (), 0),) if unk else ())
                orphan[fs] = v
            continue
        # comb holds target - sum_i x_i b_i, so x_i = -comb[i]
        for tag, v in comb.items():
            if tag == "__target__":
                continue
            out[tag][unk] = out[tag].get(unk, ZERO) - v
    if orphan:
        raise OrphanTermError(TensorExpr(orphan))
    return out


# ---------------------------------------------------------------------------
# display and serialization
# ---------------------------------------------------------------------------

def _factor_text(f):
    s = "".join("∇_%s " % d for d in f.derivs)
    name = f.sym.display
    if f.slots:
        return s + "%s_{%s}" % (name, " ".join(f.slots))
    return s + name


def to_text(expr):
    if expr.is_zero():
        return "0"
    parts = []
    for fs, c in expr.terms.items():
        body = " ".join(_factor_text(f) for f in fs)
        coef = c.short()
        if not body:
            parts.append(coef)
        elif c == ONE:
            parts.append(body)
        elif c == -ONE:
            parts.append("-" + body)
        else:
            parts.append("(%s) %s" % (coef, body))
    return " + ".join(parts).replace("+ -", "- ")


def _label_latex(l):
    head = l.lstrip("~").rstrip("0123456789")
    tail = l[len(l.rstrip("0123456789")):]
    head = head or "t"
    return "%s_{%s}" % (head, tail) if tail else head


def _factor_latex(f, seen):
    def up(l):
        if l in seen:
            return True
        seen.add(l)
        return False

    s = "".join("\\nabla%s{%s}" % ("^" if up(d) else "_", _label_latex(d)) for d in f.derivs)
    name = f.sym.latex_name
    if not f.slots:
        return s + name
    # consecutive same-variance indices share one script group
    groups = []
    for l in f.slots:
        kind = "^" if up(l) else "_"
        if groups and groups[-1][0] == kind:
            groups[-1][1].append(_label_latex(l))
        else:
            groups.append((kind, [_label_latex(l)]))
    return s + "{%s}" % name + "{}".join("%s{%s}" % (k, " ".join(ls)) for k, ls in groups)


def to_latex(expr):
    if expr.is_zero():
        return "0"
    out = []
    for fs, c in expr.terms.items():
        # contracted labels are raised on their second occurrence
        seen = set()
        body = " ".join(_factor_latex(f, seen) for f in fs)
        if not body:
            lat = c.latex()
            coef, body = ("" if lat.startswith("-") else "+") + lat, ""
        elif c == ONE:
            coef = "+"
        elif c == -ONE:
            coef = "-"
        else:
            lat = c.latex()
            coef = lat if lat.startswith("-") else "+" + lat
        out.append(coef + body)
    s = " ".join(out)
    return s[1:] if s.startswith("+") else s


def factor_json(f):
    return {"symbol": f.sym.name, "rank": f.sym.nslots, "derivs": list(f.derivs),
            "slots": list(f.slots)}


def expr_to_json(expr):
    return {"free": list(expr.free),
            "terms": [{"coeff": str(c), "factors": [factor_json(f) for f in fs]}
                      for fs, c in expr.terms.items()]}


def expr_from_json(obj):
    terms = {}
    for t in obj["terms"]:
        fs = []
        for fj in t["factors"]:
            sym = REGISTRY.get((fj["symbol"], fj["rank"]))
            if sym is None:
                sym = unknown_symbol(fj["symbol"]) if fj["rank"] == 0 else None
            if sym is None:
                raise StructureError("unknown symbol %s" % fj["symbol"])
            d = tuple(fj["derivs"])
            fs.append(Factor(sym, d, tuple(fj["slots"]), len(d)))
        terms[tuple(fs)] = RatFunc.parse(t["coeff"])
    return TensorExpr(terms, tuple(obj["free"]))
