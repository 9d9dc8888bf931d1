"""
Exact arithmetic in Q(n), the field of rational functions in the dimension
symbol n, plus linear solving over that field.

Polynomials are python-flint ``fmpz_poly`` objects, so integer coefficients
are arbitrary precision and gcds are cheap.
"""

import re
from fractions import Fraction

import flint

_ZERO = flint.fmpz_poly([])
_ONE = flint.fmpz_poly([1])


def _as_poly(x):
    if isinstance(x, flint.fmpz_poly):
        return x
    if isinstance(x, int):
        return flint.fmpz_poly([x])
    if isinstance(x, (list, tuple)):
        return flint.fmpz_poly(list(x))
    raise TypeError("cannot convert %r to an integer polynomial" % (x,))


def _poly_str(p, var="n"):
    coeffs = [int(c) for c in p.coeffs()]
    if not coeffs:
        return "0"
    out = []
    for k in range(len(coeffs) - 1, -1, -1):
        c = coeffs[k]
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        a = abs(c)
        if k == 0:
            body = str(a)
        else:
            mono = var if k == 1 else "%s^%d" % (var, k)
            body = mono if a == 1 else "%d*%s" % (a, mono)
        out.append((sign, body))
    s = ("-" if out[0][0] == "-" else "") + out[0][1]
    for sign, body in out[1:]:
        s += sign + body
    return s


def _poly_nterms(p):
    return sum(1 for c in p.coeffs() if c != 0)


class RatFunc:
    """An element p(n)/q(n) of Q(n) kept in lowest terms.

    The denominator always has a positive leading coefficient and
    gcd(p, q) = 1 (including the integer content), so two values are equal
    exactly when their numerator and denominator coefficient lists agree.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num=0, den=1):
        if isinstance(num, RatFunc) and den == 1:
            self.num, self.den, self._hash = num.num, num.den, num._hash
            return
        if isinstance(num, Fraction):
            if not isinstance(den, int):
                raise TypeError("Fraction numerator needs an integer denominator")
            num, den = num.numerator, num.denominator * den
        p = _as_poly(num)
        q = _as_poly(den)
        if q.degree() < 0:
            raise ZeroDivisionError("division by zero in Q(n)")
        self.num, self.den = _normalize(p, q)
        self._hash = None

    @classmethod
    def _raw(cls, p, q):
        obj = cls.__new__(cls)
        obj.num, obj.den, obj._hash = p, q, None
        return obj

    @classmethod
    def n(cls):
        """The dimension symbol itself."""
        return cls._raw(flint.fmpz_poly([0, 1]), _ONE)

    # -- predicates -------------------------------------------------------
    def is_zero(self):
        return self.num.degree() < 0

    def is_constant(self):
        return self.num.degree() <= 0 and self.den.degree() == 0

    def is_one(self):
        return self.num == self.den

    def __bool__(self):
        return not self.is_zero()

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, RatFunc):
            return other
        if isinstance(other, (int, Fraction)):
            return RatFunc(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.den == other.den:
            return RatFunc._from_unreduced(self.num + other.num, self.den)
        return RatFunc._from_unreduced(self.num * other.den + other.num * self.den,
                                       self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RatFunc._raw(-self.num, self.den)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_zero() or other.is_zero():
            return RatFunc._raw(_ZERO, _ONE)
        return RatFunc._from_unreduced(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def inverse(self):
        if self.is_zero():
            raise ZeroDivisionError("division by zero in Q(n)")
        return RatFunc(self.den, self.num)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return RatFunc(other) * self.inverse()

    def __pow__(self, k):
        if k < 0:
            return self.inverse() ** (-k)
        return RatFunc._raw(self.num ** k, self.den ** k)

    @classmethod
    def _from_unreduced(cls, p, q):
        p, q = _normalize(p, q)
        return cls._raw(p, q)

    # -- comparison / hashing --------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = RatFunc(other)
        if not isinstance(other, RatFunc):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((tuple(int(c) for c in self.num.coeffs()),
                               tuple(int(c) for c in self.den.coeffs())))
        return self._hash

    # -- evaluation -------------------------------------------------------
    def __call__(self, nval):
        """Evaluate at an integer (or Fraction) value of n, exactly."""
        nval = Fraction(nval)
        num = sum((Fraction(int(c)) * nval ** k for k, c in enumerate(self.num.coeffs())), Fraction(0))
        den = sum((Fraction(int(c)) * nval ** k for k, c in enumerate(self.den.coeffs())), Fraction(0))
        if den == 0:
            raise ZeroDivisionError("denominator vanishes at n=%s" % nval)
        return num / den

    def constant_value(self):
        if not self.is_constant():
            raise ValueError("%s depends on n" % self)
        num = int(self.num.coeffs()[0]) if self.num.degree() == 0 else 0
        return Fraction(num, int(self.den.coeffs()[0]))

    # -- display ----------------------------------------------------------
    def __str__(self):
        p = _poly_str(self.num)
        if _poly_nterms(self.num) > 1:
            p = "(" + p + ")"
        q = _poly_str(self.den)
        if self.den.degree() > 0:
            q = "(" + q + ")"
        return p + "/" + q

    def __repr__(self):
        return "RatFunc(%s)" % self

    def short(self):
        """Compact human form: integers print without the /1."""
        if self.den == _ONE:
            return _poly_str(self.num)
        return str(self)

    def latex(self):
        neg = int(self.num.coeffs()[-1]) < 0 if self.num.degree() >= 0 else False
        num = -self.num if neg and _poly_nterms(self.num) == 1 else self.num
        p = _poly_str(num).replace("*", "")
        if self.den == _ONE:
            return _poly_str(self.num).replace("*", "")
        q = _poly_str(self.den).replace("*", "")
        body = "\\frac{%s}{%s}" % (p, q)
        return "-" + body if num is not self.num else body

    @classmethod
    def parse(cls, text):
        """Inverse of ``str``: accepts 'p(n)/q(n)' with integer coefficients."""
        text = text.replace(" ", "")
        depth = 0
        split = None
        for i, ch in enumerate(text):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif ch == "/" and depth == 0:
                split = i
        if split is None:
            return cls(_parse_poly(text), 1)
        return cls(_parse_poly(text[:split]), _parse_poly(text[split + 1:]))


_TERM = re.compile(r"([+-]?)(\d*)(\*?)(n(?:\^(\d+))?)?")


def _parse_poly(s):
    s = s.strip()
    if s.startswith("(") and s.endswith(")"):
        s = s[1:-1]
    coeffs = {}
    pos = 0
    if not s:
        raise ValueError("empty polynomial")
    while pos < len(s):
        m = _TERM.match(s, pos)
        if m is None or m.end() == pos:
            raise ValueError("cannot parse polynomial %r" % s)
        sign, digits, _, mono, power = m.groups()
        if not digits and not mono:
            raise ValueError("cannot parse polynomial %r" % s)
        c = int(digits) if digits else 1
        if sign == "-":
            c = -c
        k = 0 if not mono else (int(power) if power else 1)
        coeffs[k] = coeffs.get(k, 0) + c
        pos = m.end()
    deg = max(coeffs)
    return flint.fmpz_poly([coeffs.get(k, 0) for k in range(deg + 1)])


def _normalize(p, q):
    if p.degree() < 0:
        return _ZERO, _ONE
    if q.degree() == 0 and p.degree() == 0:
        a, b = int(p.coeffs()[0]), int(q.coeffs()[0])
        f = Fraction(a, b)
        return flint.fmpz_poly([f.numerator]), flint.fmpz_poly([f.denominator])
    g = p.gcd(q)
    if g != _ONE:
        p = p // g
        q = q // g
    if int(q.coeffs()[-1]) < 0:
        p, q = -p, -q
    return p, q


def normalize(p, q):
    """Canonical RatFunc p/q for integer polynomials p, q (coefficient lists ok)."""
    return RatFunc(_as_poly(p), _as_poly(q))


def rf(x, y=1):
    """Convenience constructor: rf(2, 3), rf(Fraction(1, 3)), rf(RatFunc)."""
    if isinstance(x, RatFunc):
        return x / y if y != 1 else x
    if isinstance(x, Fraction):
        return RatFunc(x) / y
    return RatFunc(x, y)


N = RatFunc.n()
ZERO = RatFunc(0)
ONE = RatFunc(1)


def poly_n(*coeffs):
    """Polynomial in n from ascending integer coefficients."""
    return RatFunc(flint.fmpz_poly(list(coeffs)))


# ---------------------------------------------------------------------------
# Linear solving
# ---------------------------------------------------------------------------

class Solution:
    """Outcome of ``solve_linear``.

    status is 'unique', 'inconsistent' or 'underdetermined'.  For the
    underdetermined case ``values`` holds the particular solution with every
    free unknown set to zero, and ``free`` lists those unknowns.
    """

    def __init__(self, status, values=None, free=(), conflict=None):
        self.status = status
        self.values = dict(values or {})
        self.free = list(free)
        self.conflict = conflict

    def __repr__(self):
        if self.status == "inconsistent":
            return "Solution(inconsistent)"
        vals = ", ".join("%s=%s" % (k, v) for k, v in sorted(self.values.items()))
        if self.free:
            return "Solution(underdetermined, free=%s; %s)" % (self.free, vals)
        return "Solution(unique; %s)" % vals

    def __getitem__(self, key):
        return self.values[key]


def _eq_row(eq):
    """Return (row dict with RatFunc entries, unknown names).  Key None is the constant."""
    row = {}
    for k, v in eq.items():
        v = rf(v) if not isinstance(v, RatFunc) else v
        if not v.is_zero():
            row[k] = v
    return row


def _clear_denominators(row):
    """Scale a RatFunc row to integer polynomials with content 1."""
    lcm = _ONE
    for v in row.values():
        g = lcm.gcd(v.den)
        lcm = lcm * (v.den // g)
    out = {k: v.num * (lcm // v.den) for k, v in row.items()}
    return _primitive(out)


def _primitive(prow):
    g = None
    for v in prow.values():
        g = v if g is None else g.gcd(v)
        if g == _ONE:
            break
    if g is not None and g != _ONE and g.degree() >= 0:
        prow = {k: v // g for k, v in prow.items()}
    # fix sign by leading entry
    return prow


def solve_linear(equations, unknowns=None):
    """Solve sum_u c_u * u + c_const = 0 over Q(n).

    ``equations`` is a list of dicts mapping unknown name -> coefficient, with
    the key None for the constant term.  Elimination is fraction-free on
    integer-polynomial rows; back substitution is done in Q(n).
    """
    rows = [_eq_row(e) for e in equations]
    if unknowns is None:
        seen = []
        for r in rows:
            for k in r:
                if k is not None and k not in seen:
                    seen.append(k)
        unknowns = sorted(seen, key=str)
    else:
        unknowns = list(unknowns)
    prows = [_clear_denominators(r) for r in rows if r]
    pivots = []  # (column, row)
    for col in unknowns:
        piv = None
        best = None
        for i, r in enumerate(prows):
            if col in r:
                size = sum(v.degree() + 1 for v in r.values()) + len(r)
                if best is None or size < best:
                    piv, best = i, size
        if piv is None:
            continue
        prow = prows.pop(piv)
        p = prow[col]
        new = []
        for r in prows:
            a = r.get(col)
            if a is None:
                new.append(r)
                continue
            g = p.gcd(a)
            mp, ma = p // g, a // g
            out = {}
            for k in set(r) | set(prow):
                v = r.get(k, _ZERO) * mp - prow.get(k, _ZERO) * ma
                if v.degree() >= 0:
                    out[k] = v
            out.pop(col, None)
            if out:
                new.append(_primitive(out))
        prows = new
        pivots.append((col, prow))
    for r in prows:
        if any(k is not None for k in r):
            raise AssertionError("elimination left an unknown behind")
        if r.get(None, _ZERO).degree() >= 0:
            return Solution("inconsistent", conflict={k: RatFunc(v) for k, v in r.items()})
    pivot_cols = [c for c, _ in pivots]
    free = [u for u in unknowns if u not in pivot_cols]
    values = {u: ZERO for u in free}
    for col, prow in reversed(pivots):
        acc = RatFunc(-prow[None]) if None in prow else ZERO
        for k, v in prow.items():
            if k is None or k == col:
                continue
            acc = acc - RatFunc(v) * values[k]
        values[col] = acc / RatFunc(prow[col])
    status = "unique" if not free else "underdetermined"
    return Solution(status, {u: values[u] for u in unknowns}, free)


def substitute(eq, values):
    """Residual of an equation dict after substituting unknown values."""
    acc = rf(eq.get(None, 0)) if not isinstance(eq.get(None, 0), RatFunc) else eq.get(None, ZERO)
    for k, v in eq.items():
        if k is None:
            continue
        acc = acc + (v if isinstance(v, RatFunc) else rf(v)) * values[k]
    return acc


class Echelon:
    """Incremental sparse row echelon form over Q(n).

    Rows are dicts col -> RatFunc.  Pivot rows are kept monic and fully
    reduced against each other, so ``reduce`` gives a unique normal form
    modulo the span of the inserted rows.  ``order`` ranks the columns; the
    pivot of a row is its entry of smallest rank.
    """

    def __init__(self, order=None):
        self.rows = {}          # pivot col -> row
        self.order = order       # callable col -> sortable key
        self.tags = {}          # pivot col -> combination of input tags

    def _key(self, col):
        return self.order(col) if self.order else col

    def reduce(self, vec, track=None):
        vec = {k: v for k, v in vec.items() if not v.is_zero()}
        comb = dict(track) if track is not None else None
        changed = True
        while changed:
            changed = False
            for col in sorted([c for c in vec if c in self.rows], key=self._key):
                if col not in vec:
                    continue
                a = vec[col]
                prow = self.rows[col]
                for k, v in prow.items():
                    nv = vec.get(k, ZERO) - a * v
                    if nv.is_zero():
                        vec.pop(k, None)
                    else:
                        vec[k] = nv
                if comb is not None:
                    for t, c in self.tags[col].items():
                        nc = comb.get(t, ZERO) - a * c
                        if nc.is_zero():
                            comb.pop(t, None)
                        else:
                            comb[t] = nc
                changed = True
        return (vec, comb) if track is not None else vec

    def add(self, vec, tag=None):
        """Insert a row; returns True if it enlarged the span."""
        track = {tag: ONE} if tag is not None else {}
        vec, comb = self.reduce(vec, track)
        if not vec:
            return False
        col = min(vec, key=self._key)
        inv = vec[col].inverse()
        vec = {k: v * inv for k, v in vec.items()}
        comb = {k: v * inv for k, v in comb.items()}
        # back-reduce existing rows
        for pc, prow in self.rows.items():
            if col in prow:
                a = prow[col]
                for k, v in vec.items():
                    nv = prow.get(k, ZERO) - a * v
                    if nv.is_zero():
                        prow.pop(k, None)
                    else:
                        prow[k] = nv
                tg = self.tags[pc]
                for t, c in comb.items():
                    nc = tg.get(t, ZERO) - a * c
                    if nc.is_zero():
                        tg.pop(t, None)
                    else:
                        tg[t] = nc
        self.rows[col] = vec
        self.tags[col] = comb
        return True

    def rank(self):
        return len(self.rows)
