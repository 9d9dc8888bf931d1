"""
Flat-space polynomial oracle.

Polynomial tensor fields on R^n with rational coefficients.  The conformal
Killing operator is assembled as an integer matrix on monomial coefficients
(it maps homogeneous degree d to d - 1, so the kernel splits by degree) and
its kernel is extracted exactly.  Jet rules of the symbolic engine and
symmetry identities are then checked by direct differentiation.
"""

import itertools
import random
from fractions import Fraction
from functools import lru_cache

import flint
import numpy as np

from .coeff import RatFunc, rf, solve_linear

SEED = 20240611
PRIME = 2305843009213693951      # 2^61 - 1, for rank certificates


class OracleError(ValueError):
    """Violated oracle precondition (e.g. σ is not a conformal Killing tensor)."""


@lru_cache(maxsize=None)
def ring(nval):
    return flint.fmpq_mpoly_ctx.get(("x", nval), "lex")


def _q(c):
    if isinstance(c, Fraction):
        return flint.fmpq(c.numerator, c.denominator)
    return flint.fmpq(c)


def _frac(c):
    c = flint.fmpq(c)
    return Fraction(int(c.p), int(c.q))


@lru_cache(maxsize=None)
def monomials(nval, d):
    """Exponent tuples of total degree d, in a fixed order."""
    out = []
    for combo in itertools.combinations_with_replacement(range(nval), d):
        e = [0] * nval
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return out


# ---------------------------------------------------------------------------
# polynomial tensors
# ---------------------------------------------------------------------------

class PolyTensor:
    """Covariant tensor field on flat R^n with polynomial components.

    ``comps`` maps every index tuple of length ``rank`` to a polynomial;
    symmetric tensors store all permutations explicitly.
    """

    def __init__(self, nval, rank, comps, kind="tensor"):
        self.nval = nval
        self.rank = rank
        self.kind = kind
        R = ring(nval)
        self.comps = {idx: comps.get(idx, R.from_dict({}))
                      for idx in itertools.product(range(nval), repeat=rank)}

    def __getitem__(self, idx):
        return self.comps[tuple(idx)]

    def __add__(self, other):
        return PolyTensor(self.nval, self.rank,
                          {k: v + other.comps[k] for k, v in self.comps.items()}, self.kind)

    def __sub__(self, other):
        return PolyTensor(self.nval, self.rank,
                          {k: v - other.comps[k] for k, v in self.comps.items()}, self.kind)

    def scale(self, c):
        c = _q(c)
        return PolyTensor(self.nval, self.rank, {k: v * c for k, v in self.comps.items()},
                          self.kind)

    def is_zero(self):
        return all(v == 0 for v in self.comps.values())

    def degree(self):
        return max((v.total_degree() for v in self.comps.values() if v != 0), default=-1)

    def diff(self):
        """∂_i T_{...} as a tensor with the derivative index first."""
        out = {}
        for i in range(self.nval):
            for idx, v in self.comps.items():
                out[(i,) + idx] = v.derivative(i)
        return PolyTensor(self.nval, self.rank + 1, out)

    def trace(self):
        return sum((self.comps[(i, i)] for i in range(self.nval)), ring(self.nval).from_dict({}))

    def is_symmetric_tracefree(self):
        if self.rank != 2:
            return True
        sym = all(self.comps[(i, j)] == self.comps[(j, i)]
                  for i in range(self.nval) for j in range(self.nval))
        return sym and self.trace() == 0

    def taylor(self, k, point=None):
        """Array (indices: k derivatives then slots) of k-th derivatives at a point."""
        n = self.nval
        pt = [_q(0)] * n if point is None else [_q(c) for c in point]
        shape = (n,) * (k + self.rank)
        arr = np.empty(shape, dtype=object)
        cache = {}
        for didx in itertools.product(range(n), repeat=k):
            key = tuple(sorted(didx))
            for sidx, v in self.comps.items():
                ck = (key, sidx)
                if ck not in cache:
                    p = v
                    for i in key:
                        p = p.derivative(i)
                    cache[ck] = _frac(p(*pt)) if p != 0 else Fraction(0)
                arr[didx + sidx] = cache[ck]
        return arr

    def to_json(self):
        return {"n": self.nval, "rank": self.rank,
                "components": {",".join(map(str, k)): str(v) for k, v in sorted(self.comps.items())
                               if v != 0}}


def scalar_poly(nval, terms):
    """Polynomial from {exponent tuple: rational}."""
    return ring(nval).from_dict({k: _q(v) for k, v in terms.items()})


def coords(nval):
    return ring(nval).gens()


# ---------------------------------------------------------------------------
# conformal Killing operator
# ---------------------------------------------------------------------------

def killing_operator(sigma):
    """Trace-free symmetrized gradient: n-scaled for vectors, (n+2)-scaled
    for trace-free symmetric 2-tensors (zero iff σ is a conformal Killing
    tensor)."""
    n = sigma.nval
    d = sigma.diff()
    R = ring(n)
    if sigma.rank == 1:
        div = sum((d[(c, c)] for c in range(n)), R.from_dict({}))
        out = {}
        for a, b in itertools.product(range(n), repeat=2):
            v = (d[(a, b)] + d[(b, a)]) * n
            if a == b:
                v = v - div * 2
            out[(a, b)] = v
        return PolyTensor(n, 2, out)
    if sigma.rank == 2:
        S = {}
        for a, b, c in itertools.product(range(n), repeat=3):
            S[(a, b, c)] = d[(a, b, c)] + d[(b, c, a)] + d[(c, a, b)]
        t = {c: sum((S[(a, a, c)] for a in range(n)), R.from_dict({})) for c in range(n)}
        out = {}
        for a, b, c in itertools.product(range(n), repeat=3):
            v = S[(a, b, c)] * (n + 2)
            if a == b:
                v = v - t[c]
            if b == c:
                v = v - t[a]
            if c == a:
                v = v - t[b]
            out[(a, b, c)] = v
        return PolyTensor(n, 3, out)
    raise ValueError("rank must be 1 or 2")


def is_ckt(sigma):
    return sigma.is_symmetric_tracefree() and killing_operator(sigma).is_zero()


def _unknown_tensors(rank, nval):
    """Constant tensors spanning the fibre: e_a (vectors) or a basis of
    trace-free symmetric 2-tensors."""
    if rank == 1:
        return [{(a,): 1} for a in range(nval)]
    out = []
    for i in range(nval):
        for j in range(i + 1, nval):
            out.append({(i, j): 1, (j, i): 1})
    for i in range(nval - 1):
        out.append({(i, i): 1, (nval - 1, nval - 1): -1})
    return out


def _row_keys(rank, nval, d):
    comps = list(itertools.combinations_with_replacement(range(nval), rank + 1))
    return {(c, m): k for k, (c, m) in enumerate(itertools.product(comps, monomials(nval, d - 1)))}


def _apply_constraints(rank, nval, T, e):
    """Killing operator of T * x^e as {(sorted component, exponent): integer}."""
    out = {}

    def grad(idx_slots, i):
        # ∂_i (T_{slots} x^e) -> (coefficient, exponent)
        c = T.get(idx_slots, 0)
        if not c or not e[i]:
            return None
        ee = list(e)
        ee[i] -= 1
        return c * e[i], tuple(ee)

    n = nval
    if rank == 1:
        for a, b in itertools.combinations_with_replacement(range(n), 2):
            acc = {}
            for (x, y) in ((a, b), (b, a)):
                g = grad((y,), x)
                if g:
                    acc[g[1]] = acc.get(g[1], 0) + n * g[0]
            if a == b:
                for c in range(n):
                    g = grad((c,), c)
                    if g:
                        acc[g[1]] = acc.get(g[1], 0) - 2 * g[0]
            for m, v in acc.items():
                if v:
                    out[((a, b), m)] = v
        return out

    def S(a, b, c):
        acc = {}
        for (x, y, z) in ((a, b, c), (b, c, a), (c, a, b)):
            g = grad((y, z), x)
            if g:
                acc[g[1]] = acc.get(g[1], 0) + g[0]
        return acc

    def add(acc, other, w):
        for m, v in other.items():
            acc[m] = acc.get(m, 0) + w * v

    tr = {}
    for c in range(n):
        t = {}
        for a in range(n):
            add(t, S(a, a, c), 1)
        tr[c] = t
    for a, b, c in itertools.combinations_with_replacement(range(n), 3):
        acc = {}
        add(acc, S(a, b, c), n + 2)
        if a == b:
            add(acc, tr[c], -1)
        if b == c:
            add(acc, tr[a], -1)
        if c == a:
            add(acc, tr[b], -1)
        for m, v in acc.items():
            if v:
                out[((a, b, c), m)] = v
    return out


def constraint_matrix(rank, nval, d):
    """Integer matrix of the Killing operator on degree-d fields, with the
    column labels (fibre basis index, exponent)."""
    cols = [(t, e) for t in range(len(_unknown_tensors(rank, nval))) for e in monomials(nval, d)]
    if d == 0:
        return None, cols
    rows = _row_keys(rank, nval, d)
    Ts = _unknown_tensors(rank, nval)
    entries = []
    for j, (t, e) in enumerate(cols):
        for key, v in _apply_constraints(rank, nval, Ts[t], e).items():
            entries.append((rows[key], j, v))
    return (len(rows), len(cols), entries), cols


def _fmpz(shape, entries, transpose=False):
    nr, nc, _ = shape
    if transpose:
        nr, nc = nc, nr
    M = flint.fmpz_mat(nr, nc)
    for i, j, v in entries:
        if transpose:
            i, j = j, i
        M[i, j] = v
    return M


def _nmod(shape, entries, p=PRIME):
    nr, nc, _ = shape
    M = flint.nmod_mat(nr, nc, p)
    for i, j, v in entries:
        M[i, j] = v % p
    return M


def kernel_nullity_mod_p(rank, nval, d, p=PRIME):
    """Upper bound for the rational kernel dimension in degree d."""
    mat, cols = constraint_matrix(rank, nval, d)
    if mat is None:
        return len(cols)
    M = _nmod((mat[0], mat[1], None), mat[2], p)
    return len(cols) - M.rank()


def _field(rank, nval, vec, cols):
    Ts = _unknown_tensors(rank, nval)
    R = ring(nval)
    comps = {}
    for (t, e), c in zip(cols, vec):
        if not c:
            continue
        for idx, w in Ts[t].items():
            comps.setdefault(idx, {})
            comps[idx][e] = comps[idx].get(e, 0) + c * w
    return PolyTensor(nval, rank, {k: R.from_dict({e: _q(v) for e, v in m.items()})
                                   for k, m in comps.items()},
                      "vector" if rank == 1 else "trace-free symmetric")


def kernel_basis_degree(rank, nval, d):
    """Exact rational kernel of the Killing operator on degree-d fields."""
    mat, cols = constraint_matrix(rank, nval, d)
    if mat is None:
        return [_field(rank, nval, [1 if k == j else 0 for k in range(len(cols))], cols)
                for j in range(len(cols))]
    M = _fmpz((mat[0], mat[1], None), mat[2])
    X, nullity = M.nullspace()
    out = []
    for j in range(nullity):
        vec = [int(X[i, j]) for i in range(len(cols))]
        out.append(_field(rank, nval, vec, cols))
    return out


def jet_degree(rank):
    return 2 if rank == 1 else 4


def ckt_polynomial_basis(rank, nval, deg_cap=None):
    """Basis of polynomial conformal Killing tensors of degree <= deg_cap."""
    if nval < 3:
        raise ValueError("dimension n must be at least 3")
    if rank not in (1, 2):
        raise ValueError("rank must be 1 or 2")
    if deg_cap is None:
        deg_cap = jet_degree(rank)
    out = []
    for d in range(deg_cap + 1):
        out.extend(kernel_basis_degree(rank, nval, d))
    return out


def kernel_dimension(rank, nval, deg_cap=None):
    """Kernel dimension per degree from the modular rank (an upper bound
    that is exact once an explicit basis of that size is exhibited)."""
    if deg_cap is None:
        deg_cap = jet_degree(rank)
    return [kernel_nullity_mod_p(rank, nval, d) for d in range(deg_cap + 1)]


# ---------------------------------------------------------------------------
# kernels as matrices, per degree
# ---------------------------------------------------------------------------

class Kernel:
    """Exact kernel of the Killing operator, stored per homogeneous degree
    as integer matrices X_d (columns = basis fields on monomial columns)."""

    def __init__(self, rank, nval, deg_cap=None):
        if nval < 3:
            raise ValueError("dimension n must be at least 3")
        self.rank = rank
        self.nval = nval
        self.deg_cap = jet_degree(rank) if deg_cap is None else deg_cap
        self.blocks = {}
        for d in range(self.deg_cap + 1):
            mat, cols = constraint_matrix(rank, nval, d)
            if mat is None:
                X = flint.fmpz_mat(len(cols), len(cols))
                for i in range(len(cols)):
                    X[i, i] = 1
                nullity = len(cols)
            else:
                X, nullity = _fmpz((mat[0], mat[1], None), mat[2]).nullspace()
            if nullity:
                Xs = flint.fmpz_mat(len(cols), nullity)
                for i in range(len(cols)):
                    for j in range(nullity):
                        Xs[i, j] = X[i, j]
                self.blocks[d] = (cols, Xs)

    @property
    def dimension(self):
        return sum(X.ncols() for _, X in self.blocks.values())

    def dimensions(self):
        return [self.blocks[d][1].ncols() if d in self.blocks else 0
                for d in range(self.deg_cap + 1)]

    def basis(self):
        out = []
        for d, (cols, X) in sorted(self.blocks.items()):
            for j in range(X.ncols()):
                out.append(_field(self.rank, self.nval, [int(X[i, j]) for i in range(X.nrows())],
                                  cols))
        return out


@lru_cache(maxsize=None)
def kernel(rank, nval, deg_cap=None):
    return Kernel(rank, nval, deg_cap)


# ---------------------------------------------------------------------------
# engine expressions as Taylor functionals
# ---------------------------------------------------------------------------

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXY"


def _taylor_columns(rank, nval, k, cols):
    """Array (column, ∂-indices..., slots...) with the k-th derivatives at the
    origin of each column field T_t x^e (nonzero only for deg e = k)."""
    Ts = _unknown_tensors(rank, nval)
    arr = np.zeros((len(cols),) + (nval,) * (k + rank), dtype=np.int64)
    for j, (t, e) in enumerate(cols):
        if sum(e) != k:
            continue
        fact = 1
        for v in e:
            for i in range(2, v + 1):
                fact *= i
        dl = [i for i, v in enumerate(e) for _ in range(v)]
        for perm in set(itertools.permutations(dl)):
            for idx, w in Ts[t].items():
                arr[(j,) + perm + idx] = fact * w
    return arr


def functional(expr, sigma_sym, rank, nval, free, k, cols):
    """Integer matrix (output components x columns) and denominator of the
    order-k part of an expression linear in derivatives of σ, at the origin."""
    from .tensor import canonicalize, FLAT
    terms = []
    for fs, c in canonicalize(expr, FLAT).terms.items():
        sig = [f for f in fs if f.sym == sigma_sym]
        if len(sig) != 1:
            raise ValueError("expression is not linear in σ")
        if len(sig[0].derivs) != k:
            continue
        for f in fs:
            if f.sym != sigma_sym and not f.sym.is_metric:
                raise ValueError("unexpected symbol %s" % f.sym.name)
        terms.append((fs, c(nval)))
    shape = (len(cols),) + (nval,) * len(free)
    if not terms:
        return np.zeros(shape, dtype=np.int64), 1
    den = 1
    for _, c in terms:
        den = den * c.denominator // np.gcd(den, c.denominator)
    base = _taylor_columns(rank, nval, k, cols)
    eye = np.eye(nval, dtype=np.int64)
    out = np.zeros(shape, dtype=np.int64)
    bound = 0
    for fs, c in terms:
        letters = {}

        def let(l):
            if l not in letters:
                letters[l] = _LETTERS[len(letters)]
            return letters[l]
        subs, ops = [], []
        for f in fs:
            if f.sym == sigma_sym:
                subs.append("Z" + "".join(let(l) for l in f.derivs + f.slots))
                ops.append(base)
            else:
                subs.append("".join(let(l) for l in f.slots))
                ops.append(eye)
        spec = ",".join(subs) + "->Z" + "".join(let(l) for l in free)
        w = int(c * den)
        ndum = len(letters) - len(free)
        bound += abs(w) * 24 * nval ** ndum
        out = out + w * np.einsum(spec, *ops, optimize="greedy")
    if bound >= 2 ** 62:
        raise OverflowError("functional entries may exceed 64 bits")
    return out, den


def vanishes_on_kernel(expr, sigma_sym, K, free):
    """True iff expr (linear in σ, flat) vanishes on every kernel element;
    checked exactly at the origin, which suffices since the kernel is
    translation invariant.  Returns (ok, {degree: nonzero count})."""
    bad = {}
    for d, (cols, X) in K.blocks.items():
        A, _ = functional(expr, sigma_sym, K.rank, K.nval, free, d, cols)
        A = A.reshape(len(cols), -1).T
        if not A.any():
            continue
        M = flint.fmpz_mat(A.tolist())
        P = M * X
        nz = sum(1 for v in P.entries() if v != 0)
        if nz:
            bad[d] = nz
    return not bad, bad


def verify_rules(js, nval, K=None):
    """Evaluate each rule ∇J = rhs of a flat jet system on the kernel."""
    from .tensor import nabla, tensor
    rank = js.rank
    K = K or kernel(rank, nval)
    out = []
    for j in js.jets:
        d, slots, rhs = js.rules.rules[j.sym]
        lhs = js.expand(nabla(tensor(j.sym, *slots), d))
        diff = lhs - js.expand(rhs)
        free = tuple(sorted((d,) + tuple(slots)))
        ok, bad = vanishes_on_kernel(diff, js.sigma, K, free)
        out.append((j.name, ok, bad))
    return out


def verify_identity(expr, js, nval, K=None):
    """expr - (its jet reduction) vanishes on the kernel."""
    K = K or kernel(js.rank, nval)
    red = js.reduce(expr)
    diff = js.expand(expr) - js.expand(red)
    return vanishes_on_kernel(diff, js.sigma, K, tuple(sorted(expr.free)))


def jet_map_rank(js, nval, K=None):
    """Rank of the map kernel -> (values of all jets at the origin); equals
    the kernel dimension iff the jets determine a solution."""
    K = K or kernel(js.rank, nval)
    rows = []
    total = 0
    for d, (cols, X) in K.blocks.items():
        total += X.ncols()
    # stack per-degree blocks into one block-diagonal evaluation
    blocks = []
    for d, (cols, X) in sorted(K.blocks.items()):
        mats = []
        for j in js.jets:
            A, _ = functional(js.expand(_jet_tensor(j)), js.sigma, js.rank, nval,
                              tuple(j.slots), d, cols)
            mats.append(A.reshape(len(cols), -1).T)
        A = np.vstack(mats)
        blocks.append((flint.fmpz_mat(A.tolist()) * X))
    rank = 0
    for B in blocks:
        rank += B.rank()
    return rank, total


def _jet_tensor(j):
    from .tensor import tensor
    return tensor(j.sym, *j.slots)


# ---------------------------------------------------------------------------
# explicit conformal Killing vectors and tensors
# ---------------------------------------------------------------------------

def _vector(nval, comps):
    return PolyTensor(nval, 1, {(a,): p for a, p in comps.items()}, "vector")


def translation(nval, i):
    R = ring(nval)
    return _vector(nval, {i: R.from_dict({(0,) * nval: 1})})


def rotation(nval, i, j):
    """x_i ∂_j - x_j ∂_i."""
    x = coords(nval)
    return _vector(nval, {j: x[i], i: -x[j]})


def dilation(nval):
    x = coords(nval)
    return _vector(nval, {a: x[a] for a in range(nval)})


def special_conformal(nval, i):
    """2 x_i x - |x|^2 e_i."""
    x = coords(nval)
    r2 = sum((v * v for v in x), ring(nval).from_dict({}))
    comps = {a: 2 * x[i] * x[a] for a in range(nval)}
    comps[i] = comps[i] - r2
    return _vector(nval, comps)


def ckv_basis(nval):
    out = [translation(nval, i) for i in range(nval)]
    out += [rotation(nval, i, j) for i in range(nval) for j in range(i + 1, nval)]
    out.append(dilation(nval))
    out += [special_conformal(nval, i) for i in range(nval)]
    return out


def sym_product(v, w):
    """Trace-free symmetrized product of two vector fields."""
    n = v.nval
    dot = sum((v[(a,)] * w[(a,)] for a in range(n)), ring(n).from_dict({}))
    comps = {}
    for a, b in itertools.product(range(n), repeat=2):
        p = (v[(a,)] * w[(b,)] + v[(b,)] * w[(a,)]) * flint.fmpq(1, 2)
        if a == b:
            p = p - dot * flint.fmpq(1, n)
        comps[(a, b)] = p
    return PolyTensor(n, 2, comps, "trace-free symmetric")


# ---------------------------------------------------------------------------
# symmetry identities
# ---------------------------------------------------------------------------

def laplacian(p, nval):
    """Δp = -Σ ∂_i² p."""
    out = ring(nval).from_dict({})
    for i in range(nval):
        out = out - p.derivative(i).derivative(i)
    return out


def _pieces(sigma, p):
    """(principal part, first-order coefficient part, zeroth-order part) of
    the ansatz applied to p."""
    n = sigma.nval
    zero = ring(n).from_dict({})
    if sigma.rank == 1:
        prin = sum((sigma[(a,)] * p.derivative(a) for a in range(n)), zero)
        div = sum((sigma[(a,)].derivative(a) for a in range(n)), zero)
        return prin, div * p, None
    prin = sum((sigma[(a, b)] * p.derivative(a).derivative(b)
                for a in range(n) for b in range(n)), zero)
    mid = sum((sigma[(a, b)].derivative(a) * p.derivative(b)
               for a in range(n) for b in range(n)), zero)
    dd = sum((sigma[(a, b)].derivative(a).derivative(b)
              for a in range(n) for b in range(n)), zero)
    return prin, mid, dd * p


UNKNOWNS = {1: (("A",), ("B",)), 2: (("A1", "B1"), ("A2", "B2"))}


def _check_op(op):
    if op not in ("laplacian", "yamabe"):
        raise ValueError("unknown operator %r" % op)


def residual_pieces(op, sigma, f):
    """Residual L D f - D̂ L f as {unknown or None: polynomial} (affine in
    the unknowns).  In flat space the Yamabe operator is the Laplacian."""
    _check_op(op)
    if not is_ckt(sigma):
        raise OracleError("σ is not a conformal Killing tensor")
    n = sigma.nval
    order = sigma.rank
    (d_unk, h_unk) = UNKNOWNS[order]
    Lf = laplacian(f, n)
    pd = _pieces(sigma, f)
    ph = _pieces(sigma, Lf)
    out = {None: laplacian(pd[0], n) - ph[0]}
    out[d_unk[0]] = laplacian(pd[1], n)
    out[h_unk[0]] = -ph[1]
    if order == 2:
        out[d_unk[1]] = laplacian(pd[2], n)
        out[h_unk[1]] = -ph[2]
    return out


def verify_symmetry_identity(op, coeffs, sigma, f):
    """Exact polynomial L(Df) - D̂(Lf) for concrete coefficient values."""
    pieces = residual_pieces(op, sigma, f)
    out = pieces[None]
    for u, p in pieces.items():
        if u is not None:
            out = out + p * _q(Fraction(coeffs[u]))
    return out


def random_polynomial(nval, deg, rng):
    R = ring(nval)
    terms = {}
    for d in range(deg + 1):
        for e in monomials(nval, d):
            c = Fraction(rng.randint(-9, 9), rng.randint(1, 5))
            if c:
                terms[e] = _q(c)
    return R.from_dict(terms)


def f_samples(nval, order, seed=SEED):
    """Five seeded random polynomials of degree order + 3, then every
    monomial of degree <= order + 3."""
    rng = random.Random(seed)
    deg = order + 3
    out = [random_polynomial(nval, deg, rng) for _ in range(5)]
    R = ring(nval)
    for d in range(deg + 1):
        for e in monomials(nval, d):
            out.append(R.from_dict({e: 1}))
    return out


def sigma_samples(nval, order, seed=SEED):
    """Deterministic stream of conformal Killing tensors of rank ``order``:
    random integer combinations of basis CKVs (order 1) or of trace-free
    products of pairs of CKVs (order 2)."""
    rng = random.Random(seed + 1)
    V = ckv_basis(nval)
    while True:
        if order == 1:
            s = V[0].scale(0)
            for v in rng.sample(V, 4):
                s = s + v.scale(rng.randint(-3, 3) or 1)
            yield s
        else:
            s = None
            for _ in range(3):
                v, w = rng.choice(V), rng.choice(V)
                t = sym_product(v, w).scale(rng.randint(-3, 3) or 1)
                s = t if s is None else s + t
            yield s


class Fit:
    def __init__(self, status, values, samples, rank, unknowns, checks):
        self.status = status
        self.values = values
        self.samples = samples
        self.rank = rank
        self.unknowns = unknowns
        self.checks = checks

    def to_json(self):
        return {"status": self.status, "values": {k: str(v) for k, v in sorted(self.values.items())},
                "samples": self.samples, "rank": self.rank, "unknowns": list(self.unknowns),
                "checks": self.checks}


def _equations(pieces):
    monos = set()
    for p in pieces.values():
        monos.update(p.to_dict().keys())
    eqs = []
    for m in sorted(monos):
        eq = {}
        for u, p in pieces.items():
            c = p.to_dict().get(m)
            if c is not None and c != 0:
                eq[u] = rf(_frac(c))
        eqs.append(eq)
    return eqs


def _rank(eqs, unknowns):
    if not eqs:
        return 0
    M = flint.fmpq_mat([[_q(e.get(u, rf(0)).constant_value()) for u in unknowns] for e in eqs])
    return M.rank()


def fit_symmetry_coefficients(op, order, nval, samples=None, max_samples=40, extra=3, seed=SEED):
    """Fit the ansatz unknowns from the vanishing of all residual
    coefficients; samples are added until the rank equals the number of
    unknowns, then ``extra`` further samples confirm the solution."""
    _check_op(op)
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    unknowns = UNKNOWNS[order][0] + UNKNOWNS[order][1]
    if samples is None:
        fs = f_samples(nval, order, seed)
        sig = sigma_samples(nval, order, seed)
        samples = ((next(sig), fs[i % len(fs)]) for i in range(max_samples))
    eqs = []
    used = 0
    rank = 0
    checks = []
    confirm = None
    for s, f in samples:
        used += 1
        new = _equations(residual_pieces(op, s, f))
        if confirm is not None:
            res = verify_symmetry_identity(op, confirm, s, f)
            checks.append("zero" if res == 0 else "nonzero")
            eqs.extend(new)
            if len(checks) >= extra:
                break
            continue
        eqs.extend(new)
        rank = _rank(eqs, unknowns)
        if rank == len(unknowns):
            sol = solve_linear(eqs, list(unknowns))
            if sol.status == "inconsistent":
                return Fit("inconsistent", {}, used, rank, unknowns, checks)
            confirm = {u: sol.values[u].constant_value() for u in unknowns}
    if confirm is None:
        return Fit("underdetermined", {}, used, rank, unknowns, checks)
    sol = solve_linear(eqs, list(unknowns))
    if sol.status != "unique":
        return Fit(sol.status, {}, used, rank, unknowns, checks)
    vals = {u: sol.values[u].constant_value() for u in unknowns}
    return Fit("unique", vals, used, rank, unknowns, checks)
