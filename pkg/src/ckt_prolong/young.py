"""
Young diagrams, O(n) bundle labels, the cotangent product decomposition,
fiber dimensions and derivative trees.

Also holds the small amount of symmetric-group algebra the rest of the
package needs: characters, central (isotypic) idempotents, Young
symmetrizers and the linear relations satisfied by the image of an element
of Q[S_r] acting on tensor slots.
"""

import itertools
import re
from fractions import Fraction
from math import factorial

import flint


# ---------------------------------------------------------------------------
# diagrams and labels
# ---------------------------------------------------------------------------

class YoungDiagram(tuple):
    """Weakly decreasing tuple of positive row lengths."""

    def __new__(cls, rows=()):
        rows = tuple(int(r) for r in rows)
        if any(r <= 0 for r in rows) or any(a < b for a, b in zip(rows, rows[1:])):
            raise ValueError("rows must be positive and weakly decreasing: %s" % (rows,))
        return super().__new__(cls, rows)

    @property
    def size(self):
        return sum(self)

    @property
    def is_column(self):
        return all(r == 1 for r in self)

    def conjugate(self):
        if not self:
            return YoungDiagram()
        return YoungDiagram([sum(1 for r in self if r > i) for i in range(self[0])])

    def add_box(self, row):
        rows = list(self) + [0]
        rows[row] += 1
        rows = [r for r in rows if r]
        try:
            return YoungDiagram(rows)
        except ValueError:
            return None

    def remove_box(self, row):
        rows = list(self)
        if row + 1 < len(rows) and rows[row] == rows[row + 1]:
            return None
        rows[row] -= 1
        rows = [r for r in rows if r]
        try:
            return YoungDiagram(rows)
        except ValueError:
            return None

    def contents(self):
        return [j - i for i, r in enumerate(self) for j in range(r)]


_SUB = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")
_SUP = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


class BundleLabel:
    """O(n)-irreducible tensor bundle: a Young diagram, trace-free implied.

    Single-column diagrams are the form bundles Λᵏ; B[1,1] and Λ² are the
    same label.
    """

    GRAMMAR = "bundle labels look like B[2,1]o, B[3]o, B[1,1], B[1], L2 or L0"

    def __init__(self, diagram):
        self.diagram = YoungDiagram(diagram)

    @property
    def rank(self):
        return self.diagram.size

    @property
    def is_form(self):
        return self.diagram.is_column

    @property
    def trace_free(self):
        return True

    def __eq__(self, other):
        return isinstance(other, BundleLabel) and self.diagram == other.diagram

    def __hash__(self):
        return hash(("B",) + tuple(self.diagram))

    def __lt__(self, other):
        return (self.rank, tuple(self.diagram)) < (other.rank, tuple(other.diagram))

    def __repr__(self):
        return "BundleLabel(%s)" % self.ascii()

    def __str__(self):
        return self.display()

    def ascii(self):
        d = self.diagram
        if not d:
            return "L0"
        if d.is_column and len(d) > 1:
            return "L%d" % len(d)
        if d == (1,):
            return "B[1]"
        return "B[%s]o" % ",".join(map(str, d))

    def display(self):
        d = self.diagram
        if d.is_column:
            return "Λ" + str(len(d)).translate(_SUP)
        return "B[%s]₀" % ",".join(map(str, d))

    def latex(self):
        d = self.diagram
        if d.is_column:
            return "\\Lambda^{%d}" % len(d)
        return "B[%s]_{\\circ}" % ",".join(map(str, d))

    @classmethod
    def parse(cls, text):
        t = text.strip()
        m = re.fullmatch(r"[LΛ](\d+)", t)
        if m:
            k = int(m.group(1))
            return cls([1] * k)
        m = re.fullmatch(r"B\[(\d+(?:,\d+)*)\](o|₀|_0)?", t.replace(" ", ""))
        if not m:
            raise ValueError("cannot parse bundle label %r; %s" % (text, cls.GRAMMAR))
        try:
            return cls([int(x) for x in m.group(1).split(",")])
        except ValueError as exc:
            raise ValueError("%s; %s" % (exc, cls.GRAMMAR))


def L(k):
    return BundleLabel([1] * k)


def B(*rows):
    return BundleLabel(rows)


# ---------------------------------------------------------------------------
# cotangent product decomposition
# ---------------------------------------------------------------------------

def decompose(b):
    """Summands of T* ⊗ b: added-box diagrams in row order, then removed-box
    diagrams from the last row upward."""
    d = b.diagram
    out = []
    for row in range(len(d) + 1):
        nd = d.add_box(row)
        if nd is not None:
            out.append(BundleLabel(nd))
    for row in reversed(range(len(d))):
        nd = d.remove_box(row)
        if nd is not None:
            out.append(BundleLabel(nd))
    return out


def is_added(source, target):
    return target.rank == source.rank + 1


def added_row(source, target):
    """Row index of the box added (or removed) between two diagrams."""
    a, b = list(source.diagram), list(target.diagram)
    m = max(len(a), len(b))
    a += [0] * (m - len(a))
    b += [0] * (m - len(b))
    diff = [i for i in range(m) if a[i] != b[i]]
    if len(diff) != 1:
        raise ValueError("%s and %s differ by more than one box" % (source, target))
    return diff[0]


def cotangent_dimension(b, nval):
    return nval * fiber_dimension(b, nval)


# ---------------------------------------------------------------------------
# symmetric group algebra
# ---------------------------------------------------------------------------

def compose(p, q):
    return tuple(p[j] for j in q)


def perm_sign(p):
    p = list(p)
    s = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def cycle_type(p):
    seen = set()
    out = []
    for i in range(len(p)):
        if i in seen:
            continue
        j, ln = i, 0
        while j not in seen:
            seen.add(j)
            j = p[j]
            ln += 1
        out.append(ln)
    return tuple(sorted(out, reverse=True))


def character(shape, ctype):
    """Irreducible S_k character via the Murnaghan-Nakayama rule (beta sets)."""
    shape = tuple(shape)
    ctype = tuple(ctype)
    return _mn(_beta(shape), ctype)


def _beta(shape):
    ln = len(shape)
    return frozenset(shape[i] + (ln - 1 - i) for i in range(ln))


_MN_CACHE = {}


def _mn(beta, ctype):
    key = (beta, ctype)
    if key in _MN_CACHE:
        return _MN_CACHE[key]
    if not ctype:
        val = 1
    else:
        h, rest = ctype[0], ctype[1:]
        val = 0
        for x in beta:
            y = x - h
            if y < 0 or y in beta:
                continue
            between = sum(1 for z in beta if y < z < x)
            nb = (beta - {x}) | {y}
            val += (-1) ** between * _mn(frozenset(nb), rest)
    _MN_CACHE[key] = val
    return val


def ga_mul(a, b):
    out = {}
    for p, x in a.items():
        for q, y in b.items():
            r = compose(p, q)
            out[r] = out.get(r, 0) + x * y
    return {k: v for k, v in out.items() if v != 0}


def central_idempotent(shape, r=None):
    """(dim/k!) sum chi(g) g on S_k, projecting onto the shape-isotypic part."""
    k = sum(shape)
    dim = character(shape, (1,) * k) if k else 1
    out = {}
    for p in itertools.permutations(range(k)):
        chi = character(shape, cycle_type(p))
        if chi:
            out[p] = Fraction(dim * chi, factorial(k))
    return out


def embed(elem, r, offset):
    """Embed an element of Q[S_k] acting on positions offset..offset+k-1 of S_r."""
    out = {}
    for p, c in elem.items():
        full = list(range(r))
        for i, j in enumerate(p):
            full[offset + i] = offset + j
        out[tuple(full)] = c
    return out


def row_group(rows):
    """Permutations of positions preserving every row (rows: lists of positions)."""
    r = sum(len(x) for x in rows)
    out = []
    for choice in itertools.product(*[itertools.permutations(x) for x in rows]):
        p = list(range(r))
        for row, img in zip(rows, choice):
            for a, b in zip(row, img):
                p[a] = b
        out.append(tuple(p))
    return out


def young_symmetrizer(rows):
    """R·C for the tableau whose rows list slot positions."""
    r = sum(len(x) for x in rows)
    ncol = max((len(x) for x in rows), default=0)
    cols = [[row[j] for row in rows if len(row) > j] for j in range(ncol)]
    R = row_group(rows)
    C = row_group(cols)
    rsum = {p: Fraction(1) for p in R}
    csum = {p: Fraction(perm_sign(p)) for p in C}
    return ga_mul(rsum, csum)


def image_relations(elem, r):
    """Basis of relations sum_s c_s T[l o s] = 0 holding on the image of elem.

    These are the vectors c with sum_s c_s (s o elem) = 0; the set is closed
    under relabeling, so no further instantiation is needed.
    """
    perms = list(itertools.permutations(range(r)))
    index = {p: i for i, p in enumerate(perms)}
    m = len(perms)
    rows = []
    den = 1
    for p in perms:
        v = {}
        for q, c in elem.items():
            v[index[compose(p, q)]] = c
        rows.append(v)
        for c in v.values():
            den = den * c.denominator // _gcd(den, c.denominator)
    mat = flint.fmpz_mat(m, m)
    for i, v in enumerate(rows):
        for j, c in v.items():
            mat[j, i] = int(c * den)
    ns, nullity = mat.nullspace()
    rels = []
    for k in range(nullity):
        rel = {}
        for i in range(m):
            x = int(ns[i, k])
            if x:
                rel[perms[i]] = Fraction(x)
        rels.append(rel)
    return rels


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


# ---------------------------------------------------------------------------
# fiber dimensions by projector rank
# ---------------------------------------------------------------------------

_PRIME = 2 ** 61 - 1


def semistandard_tableaux(shape, nval):
    """Semistandard fillings of shape with entries 0..nval-1, as row lists."""
    cells = [(i, j) for i, r in enumerate(shape) for j in range(r)]
    out = []
    fill = {}

    def rec(k):
        if k == len(cells):
            out.append([[fill[(i, j)] for j in range(r)] for i, r in enumerate(shape)])
            return
        i, j = cells[k]
        lo = 0
        if j > 0:
            lo = max(lo, fill[(i, j - 1)])
        if i > 0:
            lo = max(lo, fill[(i - 1, j)] + 1)
        for v in range(lo, nval):
            fill[(i, j)] = v
            rec(k + 1)
        fill.pop((i, j), None)

    rec(0)
    return out


def fiber_dimension(b, nval):
    """Dimension of trace-free tensors of shape b in dimension nval.

    Brute force: the image of the Young symmetrizer is spanned by Y e_t for
    semistandard fillings t; the trace-free part is the kernel of all pair
    contractions on that span.  Ranks are exact modulo a large prime.
    """
    d = b.diagram
    k = d.size
    if k == 0:
        return 1
    if k == 1:
        return nval
    rows, pos = [], 0
    for r in d:
        rows.append(list(range(pos, pos + r)))
        pos += r
    Y = [(p, int(c)) for p, c in young_symmetrizer(rows).items()]
    vecs = []
    for tab in semistandard_tableaux(tuple(d), nval):
        t = [v for row in tab for v in row]
        vec = {}
        for p, c in Y:
            u = [0] * k
            for a in range(k):
                u[p[a]] = t[a]
            u = tuple(u)
            vec[u] = vec.get(u, 0) + c
        vec = {x: v for x, v in vec.items() if v}
        if vec:
            vecs.append(vec)
    if not vecs:
        return 0
    span = _rank(vecs)
    pairs = list(itertools.combinations(range(k), 2))
    cvecs = []
    for vec in vecs:
        cv = {}
        for pi, (a, bb) in enumerate(pairs):
            for u, v in vec.items():
                if u[a] == u[bb]:
                    key = (pi,) + tuple(x for j, x in enumerate(u) if j not in (a, bb))
                    cv[key] = cv.get(key, 0) + v
        cvecs.append({x: v for x, v in cv.items() if v})
    # the kernel of C on the span has dimension dim(span) - dim(C(span))
    return span - _rank(cvecs)


def _rank(vecs):
    cols = {}
    for v in vecs:
        for x in v:
            if x not in cols:
                cols[x] = len(cols)
    if not cols:
        return 0
    m = flint.nmod_mat(len(vecs), len(cols), _PRIME)
    for i, v in enumerate(vecs):
        for x, c in v.items():
            m[i, cols[x]] = c % _PRIME
    return m.rank()


def dimension_check(b, nval):
    """(n·dim b, sum of summand dimensions)."""
    return nval * fiber_dimension(b, nval), sum(fiber_dimension(x, nval) for x in decompose(b))


# ---------------------------------------------------------------------------
# derivative trees
# ---------------------------------------------------------------------------

CLASSES = ("new-jet", "killed-by-CKE", "type-I-zero", "type-II-identified", "reduced",
           "unclassified")


class TreeNode:
    def __init__(self, bundle, depth, edge=None, parent=None):
        self.bundle = bundle
        self.depth = depth
        self.edge = edge              # gradient label G_[target][source]
        self.parent = parent
        self.children = []
        self.killed = []              # summands removed by the CKT equation
        self.classification = "unclassified"
        self.justification = ""
        self.jet = None
        self.target = None            # for type-II identifications

    def path(self):
        out = []
        node = self
        while node is not None and node.edge is not None:
            out.append(node.bundle)
            node = node.parent
        return list(reversed(out))

    def path_text(self):
        return " -> ".join(b.ascii() for b in self.path())

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def level(self, d):
        return [x for x in self.walk() if x.depth == d]

    def classify(self, kind, justification="", target=None, jet=None):
        if kind not in CLASSES:
            raise ValueError("unknown classification %s" % kind)
        self.classification = kind
        self.justification = justification
        self.target = target
        self.jet = jet

    def to_json(self):
        out = {"bundle": self.bundle.ascii(), "depth": self.depth,
               "edge": self.edge, "classification": self.classification,
               "justification": self.justification}
        if self.jet:
            out["jet"] = self.jet
        if self.target:
            out["target"] = self.target
        if self.killed:
            out["killed"] = [k.to_json() for k in self.killed]
        out["children"] = [c.to_json() for c in self.children]
        return out

    def to_text(self, indent=0):
        tag = self.classification
        if self.jet:
            tag += " " + self.jet
        if self.target:
            tag += " -> " + self.target
        lines = ["%s%s [%s]%s" % ("  " * indent, self.bundle.ascii(), tag,
                                  ("  (" + self.justification + ")") if self.justification else "")]
        for k in self.killed:
            lines.append("%s%s [killed-by-CKE]" % ("  " * (indent + 1), k.bundle.ascii()))
        for c in self.children:
            lines.append(c.to_text(indent + 1))
        return "\n".join(lines)


def gradient_label(target, source):
    return "G_[%s][%s]" % (",".join(map(str, target.diagram)) or "0",
                           ",".join(map(str, source.diagram)) or "0")


def build_derivative_tree(seed, killed, depth):
    """Expand T*⊗(node) down to ``depth`` levels below the seed.

    The killed summand is dropped at the first level (it is the equation
    itself) and recorded on the root.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    root = TreeNode(seed, 0)
    root.classify("new-jet", "seed")

    def expand(node):
        if node.depth >= depth:
            return
        for b in decompose(node.bundle):
            child = TreeNode(b, node.depth + 1, gradient_label(b, node.bundle), node)
            if node is root and b == killed:
                child.classify("killed-by-CKE", "the CKT equation")
                node.killed.append(child)
                continue
            node.children.append(child)
            expand(child)

    expand(root)
    return root
