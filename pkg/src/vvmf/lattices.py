"""Even lattices: construction, invariants, discriminant groups.

A lattice is its integer Gram matrix in a fixed basis.  The discriminant
group M^vee / M is computed through a deterministic Smith normal form so
that generator lifts are reproducible across runs.
"""

import re
from fractions import Fraction
from math import lcm, prod

from .discforms import DiscriminantForm
from .exactmat import (det_bareiss, inertia, inverse_fraction, mat_mul,
                       smith_normal_form)


class EvenLattice:
    """An even lattice given by its Gram matrix.

    gram is symmetric with even diagonal and nonzero determinant; the
    signature is the exact inertia of the Gram matrix.
    """

    def __init__(self, gram, name=None):
        gram = tuple(tuple(int(x) for x in row) for row in gram)
        n = len(gram)
        for i, row in enumerate(gram):
            if len(row) != n:
                raise ValueError("gram matrix is not square")
            if row[i] % 2:
                raise ValueError(f"odd diagonal entry at {i}: not an even lattice")
            for j in range(n):
                if gram[i][j] != gram[j][i]:
                    raise ValueError("gram matrix is not symmetric")
        self.gram = gram
        self.rank = n
        self.det = det_bareiss([list(r) for r in gram]) if n else 1
        if self.det == 0:
            raise ValueError("degenerate lattice (det = 0)")
        self.name = name
        self._sig = None
        self._disc = None

    @property
    def signature(self):
        if self._sig is None:
            self._sig = inertia(self.gram) if self.rank else (0, 0)
        return self._sig

    def sign_mod8(self):
        p, m = self.signature
        return (p - m) % 8

    def is_positive_definite(self):
        return self.signature == (self.rank, 0)

    def is_negative_definite(self):
        return self.signature == (0, self.rank)

    def inner(self, x, y):
        return sum(x[i] * self.gram[i][j] * y[j]
                   for i in range(self.rank) for j in range(self.rank))

    def direct_sum(self, other):
        n, m = self.rank, other.rank
        g = [[0] * (n + m) for _ in range(n + m)]
        for i in range(n):
            for j in range(n):
                g[i][j] = self.gram[i][j]
        for i in range(m):
            for j in range(m):
                g[n + i][n + j] = other.gram[i][j]
        return EvenLattice(g)

    def rescale(self, n):
        if n == 0:
            raise ValueError("rescale by zero")
        return EvenLattice([[n * x for x in row] for row in self.gram])

    def discriminant_group(self):
        return self.disc_data().form

    def disc_data(self):
        """Discriminant form together with dual-vector bookkeeping.

        The returned object maps integer coordinates of dual vectors
        (elements of gram^{-1} Z^r, written as x in Z^r with dual vector
        gram^{-1} x) to discriminant-group coordinates.
        """
        if self._disc is None:
            self._disc = DiscData(self)
        return self._disc


class DiscData:
    def __init__(self, lattice):
        self.lattice = lattice
        n = lattice.rank
        if n == 0:
            self.form = DiscriminantForm.trivial()
            self.keep = []
            self.u = []
            return
        gram = [list(r) for r in lattice.gram]
        d, u, v = smith_normal_form(gram)
        self.u = u
        self.d_diag = [d[i][i] for i in range(n)]
        self.keep = [i for i in range(n) if self.d_diag[i] > 1]
        ginv = inverse_fraction(gram)
        uinv = inverse_fraction(u)
        # generator i of the group lifts to the dual vector gram^{-1} u^{-1} e_i
        self.gen_duals = []
        for i in self.keep:
            col = [uinv[r][i] for r in range(n)]
            dual = [sum(ginv[r][s] * col[s] for s in range(n)) for r in range(n)]
            self.gen_duals.append(dual)
        divisors = [self.d_diag[i] for i in self.keep]
        q_gen = [self._q_dual(vec) for vec in self.gen_duals]
        bil = [[self._pair_dual(a, b) for b in self.gen_duals]
               for a in self.gen_duals]
        self.form = DiscriminantForm(divisors, q_gen, bil)
        assert self.form.order == abs(lattice.det)

    def _q_dual(self, vec):
        g = self.lattice.gram
        n = self.lattice.rank
        tot = Fraction(0)
        for i in range(n):
            for j in range(n):
                tot += vec[i] * g[i][j] * vec[j]
        tot /= 2
        return tot - (tot.numerator // tot.denominator)

    def _pair_dual(self, a, b):
        g = self.lattice.gram
        n = self.lattice.rank
        tot = Fraction(0)
        for i in range(n):
            for j in range(n):
                tot += a[i] * g[i][j] * b[j]
        return tot - (tot.numerator // tot.denominator)

    def coset_of(self, x):
        """Group coordinates of the dual vector gram^{-1} x, x in Z^r."""
        n = self.lattice.rank
        y = [sum(self.u[i][j] * x[j] for j in range(n)) for i in range(n)]
        return tuple(y[i] % self.d_diag[i] for i in self.keep)

    def dual_gram(self):
        """Gram matrix of the dual basis (rational)."""
        return inverse_fraction([list(r) for r in self.lattice.gram])


# --------------------------------------------------------------------------
# standard lattices


def hyperbolic_plane(n=1):
    if n == 0:
        raise ValueError("U(N) requires N nonzero")
    return EvenLattice([[0, n], [n, 0]])


def a1(scale=1):
    if scale == 0:
        raise ValueError("A1 scale must be nonzero")
    return EvenLattice([[2 * scale]])


def span_even(m):
    if m % 2 or m == 0:
        raise ValueError("<m> requires a nonzero even m")
    return EvenLattice([[m]])


_E8_GRAM = [
    [2, -1, 0, 0, 0, 0, 0, 0],
    [-1, 2, -1, 0, 0, 0, 0, 0],
    [0, -1, 2, -1, 0, 0, 0, 0],
    [0, 0, -1, 2, -1, 0, 0, 0],
    [0, 0, 0, -1, 2, -1, 0, -1],
    [0, 0, 0, 0, -1, 2, -1, 0],
    [0, 0, 0, 0, 0, -1, 2, 0],
    [0, 0, 0, 0, -1, 0, 0, 2],
]


def e8(scale=1):
    if scale == 0:
        raise ValueError("E8 scale must be nonzero")
    return EvenLattice([[scale * x for x in row] for row in _E8_GRAM])


def direct_sum(lattices):
    if not lattices:
        raise ValueError("empty direct sum")
    out = lattices[0]
    for lat in lattices[1:]:
        out = out.direct_sum(lat)
    return out


def lambda_lattice(g):
    """<2-2g> + E8(-1)^2 + U^2, the rank-21 lattice of genus-g K3 periods."""
    if g < 2:
        raise ValueError("g >= 2 required")
    return direct_sum([span_even(2 - 2 * g), e8(-1), e8(-1),
                       hyperbolic_plane(), hyperbolic_plane()])


def two_elementary_example(m):
    """U + U(2) + A1(-1)^m."""
    return direct_sum([hyperbolic_plane(), hyperbolic_plane(2)]
                      + [a1(-1)] * m)


_BLOCK_RE = re.compile(
    r"^(?:(?P<u>U)(?:\((?P<un>-?\d+)\))?"
    r"|(?P<a1>A1)(?:\((?P<a1n>-?\d+)\))?"
    r"|(?P<e8>E8)(?:\((?P<e8n>-?\d+)\))?"
    r"|<(?P<m>-?\d+)>)"
    r"(?:\^(?P<pow>\d+))?$")


def parse_block(token):
    m = _BLOCK_RE.match(token.strip())
    if not m:
        raise ValueError(f"unknown block token {token!r}")
    if m.group("u"):
        base = hyperbolic_plane(int(m.group("un") or 1))
    elif m.group("a1"):
        base = a1(int(m.group("a1n") or 1))
    elif m.group("e8"):
        base = e8(int(m.group("e8n") or 1))
    else:
        base = span_even(int(m.group("m")))
    power = int(m.group("pow") or 1)
    return direct_sum([base] * power)


def standard_lattice(spec):
    """Build a lattice from a block expression like 'U^2 + E8(-1) + <-2>'."""
    parts = [p for p in spec.split("+") if p.strip()]
    return direct_sum([parse_block(p) for p in parts])


# --------------------------------------------------------------------------
# lattice description files


def serialize_lattice(lattice, name=None):
    """Canonical text form; serialization is byte-stable per input."""
    lines = []
    lines.append(f"name = {name or lattice.name or 'lattice'}")
    rows = " ; ".join(" ".join(str(x) for x in row) for row in lattice.gram)
    lines.append(f"gram = {rows}")
    return "\n".join(lines) + "\n"


def parse_lattice_file(text):
    name = None
    gram = None
    blocks = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed lattice file line: {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key == "name":
            name = val
        elif key == "gram":
            rows = [r for r in val.split(";")]
            gram = [[int(x) for x in r.split()] for r in rows]
        elif key == "blocks":
            blocks = val
        else:
            raise ValueError(f"unknown lattice file key {key!r}")
    if gram is None and blocks is None:
        raise ValueError("lattice file needs a 'gram' or 'blocks' field")
    if gram is not None:
        lat = EvenLattice(gram, name=name)
    else:
        lat = standard_lattice(blocks)
        lat.name = name
    return lat


# --------------------------------------------------------------------------
# splitting predicates (sufficient criteria; False means "undecided")


def split_predicates(lattice, p):
    """Sufficient numerical splitting criteria at the prime p.

    A False flag means the criterion does not decide, never that the
    property fails.
    """
    form = lattice.discriminant_group()
    r = lattice.rank
    sig = lattice.signature
    n = sig[1] if sig[0] == 2 else None
    rank_p = form.p_rank(p)
    local_hyp = rank_p < r - 2
    det_primes = form.primes()
    two_global = n is not None and form.ell <= n - 2
    p_elem = form.is_p_elementary(p) if form.order > 1 else True
    p_elem_splits = False
    if n is not None and p_elem:
        if p == 2:
            p_elem_splits = form.ell <= n
        else:
            p_elem_splits = form.ell < n or (form.ell == n and n % 8 == 2)
    k3_type = bool(two_global)
    if k3_type:
        for q in det_primes:
            if not form.p_rank(q) < r - 4:
                k3_type = False
                break
    return {
        "local_hyperbolic_sufficient": local_hyp,
        "two_global_U_sufficient": bool(two_global),
        "p_elementary": p_elem,
        "p_elementary_splits_U": bool(p_elem_splits),
        "k3_type_sufficient": bool(k3_type),
    }
