"""Exact arithmetic in cyclotomic fields Q(zeta_L).

Elements are stored in the group-ring basis {zeta_L^e : 0 <= e < L}
(sparse dicts exponent -> Fraction).  Addition and multiplication stay in
that basis, which keeps Weil-matrix entries sparse; equality and zero
tests reduce modulo the L-th cyclotomic polynomial, which is the honest
field-level comparison.

Square roots of positive integers are represented exactly through
quadratic Gauss sums, so quantities like sqrt(|G|) * e(sign/8) never
touch floating point.

CycMatrix provides an exact matrix product tuned for the Weil-relation
suite: entries are packed into single big integers (Kronecker
substitution with signed digits) so an n x n product costs n^3 bigint
multiplies instead of n^3 sparse convolutions.
"""

import cmath
from fractions import Fraction
from functools import lru_cache
from math import gcd, lcm


@lru_cache(maxsize=None)
def cyclotomic_polynomial(n):
    """Coefficients (low to high) of the n-th cyclotomic polynomial."""
    # x^n - 1 = prod_{d | n} Phi_d; divide out the proper divisors.
    poly = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d == 0:
            phi_d = cyclotomic_polynomial(d)
            poly = _poly_divide_exact(poly, phi_d)
    return tuple(poly)


def _poly_divide_exact(num, den):
    num = list(num)
    q = [0] * (len(num) - len(den) + 1)
    for i in range(len(q) - 1, -1, -1):
        c = num[i + len(den) - 1]
        # den is monic for cyclotomic polynomials
        q[i] = c
        if c:
            for j, dj in enumerate(den):
                num[i + j] -= c * dj
    assert all(x == 0 for x in num[: len(den) - 1])
    return q


@lru_cache(maxsize=None)
def _reduction_table(L):
    """x^j mod Phi_L for phi(L) <= j < 2L-1, as integer tuples."""
    phi = cyclotomic_polynomial(L)
    deg = len(phi) - 1
    # x^deg = -(phi_0 + phi_1 x + ... + phi_{deg-1} x^{deg-1})
    rel = tuple(-c for c in phi[:deg])
    table = {}
    cur = list(rel)
    table[deg] = tuple(cur)
    for j in range(deg + 1, 2 * L - 1):
        top = cur[-1]
        cur = [0] + cur[:-1]
        if top:
            for i in range(deg):
                cur[i] += top * rel[i]
        table[j] = tuple(cur)
    return deg, table


def _canonical(L, coeffs):
    """Reduce a sparse exponent dict mod Phi_L; returns tuple of Fractions."""
    deg, table = _reduction_table(L)
    out = [Fraction(0)] * deg
    for e, c in coeffs.items():
        if not c:
            continue
        e %= L
        if e < deg:
            out[e] += c
        else:
            row = table[e]
            for i in range(deg):
                if row[i]:
                    out[i] += c * row[i]
    return tuple(out)


class CycNum:
    """An element of Q(zeta_L), L the conductor."""

    __slots__ = ("L", "c", "_canon")

    def __init__(self, L, coeffs):
        self.L = L
        self.c = {e % L: Fraction(v) for e, v in coeffs.items() if v}
        self._canon = None

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(L=1):
        return CycNum(L, {})

    @staticmethod
    def one(L=1):
        return CycNum(L, {0: 1})

    @staticmethod
    def from_rational(x, L=1):
        return CycNum(L, {0: Fraction(x)})

    @staticmethod
    def root_of_unity(a, L=None):
        """e(a) for a rational a; conductor is den(a) unless given."""
        a = Fraction(a)
        den = a.denominator
        if L is None:
            L = den
        assert L % den == 0
        return CycNum(L, {(a.numerator * (L // den)) % L: 1})

    # -- conductor handling -------------------------------------------

    def to_conductor(self, L2):
        if L2 == self.L:
            return self
        assert L2 % self.L == 0
        s = L2 // self.L
        return CycNum(L2, {e * s: v for e, v in self.c.items()})

    @staticmethod
    def _common(a, b):
        L = lcm(a.L, b.L)
        return a.to_conductor(L), b.to_conductor(L), L

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CycNum.from_rational(other)
        a, b, L = CycNum._common(self, other)
        out = dict(a.c)
        for e, v in b.c.items():
            w = out.get(e, 0) + v
            if w:
                out[e] = w
            else:
                out.pop(e, None)
        return CycNum(L, out)

    __radd__ = __add__

    def __neg__(self):
        return CycNum(self.L, {e: -v for e, v in self.c.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CycNum.from_rational(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return CycNum.zero(self.L)
            return CycNum(self.L, {e: v * other for e, v in self.c.items()})
        a, b, L = CycNum._common(self, other)
        if len(a.c) > len(b.c):
            a, b = b, a
        out = {}
        for e1, v1 in a.c.items():
            for e2, v2 in b.c.items():
                e = e1 + e2
                if e >= L:
                    e -= L
                w = out.get(e, 0) + v1 * v2
                if w:
                    out[e] = w
                else:
                    out.pop(e, None)
        return CycNum(L, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        return self * other.inverse()

    def inverse(self):
        """Multiplicative inverse via 1/z = conj-product trick.

        Uses N(z) = prod of Galois conjugates restricted to the subgroup
        generated by complex conjugation first (cheap when z * conj(z) is
        rational, which covers roots of unity and Gauss sums), falling
        back to linear algebra over the canonical basis.
        """
        zc = self.conj()
        n = self * zc
        r = n.try_fraction()
        if r is not None:
            if r == 0:
                raise ZeroDivisionError("inverse of zero cyclotomic")
            return zc * (Fraction(1) / r)
        # generic: solve z * x = 1 in the canonical basis
        L = self.L
        deg, _ = _reduction_table(L)
        cols = []
        for i in range(deg):
            prod = self * CycNum(L, {i: 1})
            cols.append(prod.canonical())
        from .exactmat import solve_fraction
        a = [[cols[j][i] for j in range(deg)] for i in range(deg)]
        rhs = [Fraction(1)] + [Fraction(0)] * (deg - 1)
        x = solve_fraction(a, rhs)
        if x is None:
            raise ZeroDivisionError("inverse of zero cyclotomic")
        return CycNum(L, {i: v for i, v in enumerate(x)})

    def conj(self):
        return CycNum(self.L, {(-e) % self.L: v for e, v in self.c.items()})

    def __pow__(self, n):
        if n < 0:
            return self.inverse() ** (-n)
        out = CycNum.one(self.L)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- comparisons ----------------------------------------------------

    def canonical(self):
        if self._canon is None:
            self._canon = _canonical(self.L, self.c)
        return self._canon

    def is_zero(self):
        if not self.c:
            return True
        return all(v == 0 for v in self.canonical())

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CycNum.from_rational(other)
        if not isinstance(other, CycNum):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        f = self.try_fraction()
        if f is not None:
            return hash(f)
        return hash((self.L, self.canonical()))

    def try_fraction(self):
        """The element as a Fraction if it is rational, else None."""
        if not self.c:
            return Fraction(0)
        if all(e == 0 for e in self.c):
            return self.c.get(0, Fraction(0))
        can = self.canonical()
        if all(v == 0 for v in can[1:]):
            return can[0]
        # rationals can hide in non-trivial combinations only when the
        # canonical basis is primitive-power; canonical() already settles it
        return None

    def to_complex(self):
        return sum(float(v) * cmath.exp(2j * cmath.pi * e / self.L)
                   for e, v in self.c.items()) if self.c else 0j

    def __repr__(self):
        if not self.c:
            return "Cyc(0)"
        parts = [f"{v}*z{self.L}^{e}" for e, v in sorted(self.c.items())]
        return "Cyc(" + " + ".join(parts) + ")"


def e_frac(a):
    """e(a) = exp(2 pi i a) for rational a, exact."""
    return CycNum.root_of_unity(Fraction(a))


@lru_cache(maxsize=None)
def sqrt_int(n):
    """Exact sqrt(n) for a positive integer n, as a CycNum.

    Built from quadratic Gauss sums: for odd prime p the sum
    g_p = sum_x e(x^2/p) equals sqrt(p) (p = 1 mod 4) or i sqrt(p)
    (p = 3 mod 4); sqrt(2) = zeta_8 + zeta_8^-1.
    """
    assert n > 0
    sq = 1
    rest = n
    d = 2
    sqfree = 1
    while d * d <= rest:
        while rest % (d * d) == 0:
            sq *= d
            rest //= d * d
        if rest % d == 0:
            sqfree *= d
            rest //= d
        d += 1
    if rest > 1:
        sqfree *= rest
    out = CycNum.from_rational(sq)
    m = sqfree
    if m % 2 == 0:
        r2 = CycNum(8, {1: 1, 7: 1})
        out = out * r2
        m //= 2
    p = 3
    while m > 1:
        if m % p == 0:
            g = {}
            for x in range(p):
                e = (x * x) % p
                g[e] = g.get(e, 0) + 1
            gp = CycNum(p, g)
            if p % 4 == 3:
                # g_p = i sqrt(p): divide by i
                gp = gp * CycNum(4, {3: 1})
            out = out * gp
            m //= p
        p += 2
    return out


def cyc_sum(items, L=1):
    out = CycNum.zero(L)
    for x in items:
        out = out + x
    return out


# ---------------------------------------------------------------------
# Packed exact matrices over Q(zeta_L)


class CycMatrix:
    """Square matrix over Q(zeta_L), entries in the group-ring basis.

    Internal storage: an overall positive denominator and integer
    coefficient dicts per entry.  The product packs entries as big
    integers in base 2^B (signed digits) so the triple loop runs on
    Python ints.
    """

    __slots__ = ("L", "n", "den", "rows")

    def __init__(self, L, n, den, rows):
        self.L = L
        self.n = n
        self.den = den
        self.rows = rows

    @staticmethod
    def from_entries(L, entries):
        """entries: n x n nested lists of CycNum (or rationals)."""
        n = len(entries)
        den = 1
        vals = []
        for row in entries:
            vrow = []
            for x in row:
                if isinstance(x, (int, Fraction)):
                    x = CycNum.from_rational(x, 1)
                x = x.to_conductor(L) if x.L != L else x
                vrow.append(x)
                for v in x.c.values():
                    den = lcm(den, v.denominator)
            vals.append(vrow)
        rows = []
        for vrow in vals:
            irow = []
            for x in vrow:
                irow.append({e: int(v * den) for e, v in x.c.items()})
            rows.append(irow)
        return CycMatrix(L, n, den, rows)

    @staticmethod
    def identity(L, n):
        rows = [[({0: 1} if i == j else {}) for j in range(n)] for i in range(n)]
        return CycMatrix(L, n, 1, rows)

    def entry(self, i, j):
        return CycNum(self.L, {e: Fraction(v, self.den)
                               for e, v in self.rows[i][j].items()})

    def entries(self):
        return [[self.entry(i, j) for j in range(self.n)] for i in range(self.n)]

    def scale(self, x):
        """Multiply by a CycNum or rational scalar."""
        if isinstance(x, (int, Fraction)):
            x = Fraction(x)
            den = self.den * x.denominator
            num = x.numerator
            rows = [[{e: v * num for e, v in ent.items()} for ent in row]
                    for row in self.rows]
            return CycMatrix(self.L, self.n, den, rows)._normalized()
        L = lcm(self.L, x.L)
        a = self._to_conductor(L)
        xd = 1
        for v in x.c.values():
            xd = lcm(xd, v.denominator)
        xc = {e * (L // x.L): int(v * xd) for e, v in x.c.items()}
        rows = []
        for row in a.rows:
            out = []
            for ent in row:
                prod = {}
                for e1, v1 in ent.items():
                    for e2, v2 in xc.items():
                        e = (e1 + e2) % L
                        prod[e] = prod.get(e, 0) + v1 * v2
                out.append({e: v for e, v in prod.items() if v})
            rows.append(out)
        return CycMatrix(L, a.n, a.den * xd, rows)._normalized()

    def _to_conductor(self, L2):
        if L2 == self.L:
            return self
        s = L2 // self.L
        rows = [[{e * s: v for e, v in ent.items()} for ent in row]
                for row in self.rows]
        return CycMatrix(L2, self.n, self.den, rows)

    def _normalized(self):
        g = 0
        for row in self.rows:
            for ent in row:
                for v in ent.values():
                    g = gcd(g, v)
        g = gcd(g, self.den)
        if g > 1:
            rows = [[{e: v // g for e, v in ent.items()} for ent in row]
                    for row in self.rows]
            return CycMatrix(self.L, self.n, self.den // g, rows)
        return self

    def _max_abs(self):
        m = 0
        for row in self.rows:
            for ent in row:
                for v in ent.values():
                    a = abs(v)
                    if a > m:
                        m = a
        return m

    def __matmul__(self, other):
        assert isinstance(other, CycMatrix)
        L = lcm(self.L, other.L)
        a = self._to_conductor(L)
        b = other._to_conductor(L)
        n = a.n
        ma, mb = a._max_abs(), b._max_abs()
        if ma == 0 or mb == 0:
            return CycMatrix(L, n, 1, [[{} for _ in range(n)] for _ in range(n)])
        bound = n * L * ma * mb
        B = bound.bit_length() + 2
        mask = (1 << B) - 1
        half = 1 << (B - 1)
        pa = [[_pack(ent, B) for ent in row] for row in a.rows]
        pbt = [[_pack(b.rows[k][j], B) for k in range(n)] for j in range(n)]
        rows = []
        for i in range(n):
            pai = pa[i]
            out = []
            for j in range(n):
                pbj = pbt[j]
                acc = 0
                for k in range(n):
                    x = pai[k]
                    y = pbj[k]
                    if x and y:
                        acc += x * y
                out.append(_unpack_fold(acc, B, mask, half, L))
            rows.append(out)
        return CycMatrix(L, n, a.den * b.den, rows)._normalized()

    def dagger(self):
        """Conjugate transpose."""
        L = self.L
        rows = [[{(-e) % L: v for e, v in self.rows[j][i].items()}
                 for j in range(self.n)] for i in range(self.n)]
        return CycMatrix(L, self.n, self.den, rows)

    def apply(self, vec):
        """Matrix times a list of CycNum."""
        ents = self.entries()
        out = []
        for i in range(self.n):
            acc = CycNum.zero(self.L)
            for j in range(self.n):
                if vec[j].c and ents[i][j].c:
                    acc = acc + ents[i][j] * vec[j]
            out.append(acc)
        return out

    def __eq__(self, other):
        if not isinstance(other, CycMatrix):
            return NotImplemented
        if self.n != other.n:
            return False
        L = lcm(self.L, other.L)
        a = self._to_conductor(L)
        b = other._to_conductor(L)
        deg, table = _reduction_table(L)
        for i in range(self.n):
            for j in range(self.n):
                ea = a.rows[i][j]
                eb = b.rows[i][j]
                # difference with cross denominators, integer coefficients
                diff = {e: v * b.den for e, v in ea.items()}
                for e, v in eb.items():
                    diff[e] = diff.get(e, 0) - v * a.den
                if not any(diff.values()):
                    continue
                out = [0] * deg
                for e, c in diff.items():
                    if not c:
                        continue
                    if e < deg:
                        out[e] += c
                    else:
                        row = table[e]
                        for t in range(deg):
                            if row[t]:
                                out[t] += c * row[t]
                if any(out):
                    return False
        return True

    def is_identity(self):
        return self == CycMatrix.identity(self.L, self.n)

    def is_unitary(self):
        return (self @ self.dagger()).is_identity()

    def trace(self):
        acc = CycNum.zero(self.L)
        for i in range(self.n):
            acc = acc + self.entry(i, i)
        return acc

    def to_cycnum_rows(self):
        return self.entries()


def _pack(ent, B):
    acc = 0
    for e, v in ent.items():
        acc += v << (B * e)
    return acc


def _unpack_fold(acc, B, mask, half, L):
    out = {}
    e = 0
    while acc:
        d = acc & mask
        if d >= half:
            d -= 1 << B
        acc = (acc - d) >> B
        if d:
            t = e if e < L else e - L
            w = out.get(t, 0) + d
            if w:
                out[t] = w
            else:
                del out[t]
        e += 1
    return out
