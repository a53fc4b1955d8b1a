"""Harmonic polynomials and Gegenbauer coefficients.

Two representations are used.  Generic harmonic polynomials live in
orthonormal coordinates as monomial tables with rational coefficients
(the Laplacian check is exact).  Degree-2 harmonics attached to a
lattice are kept as symmetric rational matrices A in lattice
coordinates, where harmonicity is the exact trace condition
tr(A gram^{-1}) = 0 and evaluation at dual vectors stays rational.
"""

from fractions import Fraction
from itertools import combinations_with_replacement
from math import comb

from .exactmat import inverse_fraction, rank_fraction, solve_fraction


def _monomials(r, h):
    """Exponent tuples of total degree h in r variables, lex sorted."""
    if h == 0:
        return [(0,) * r]
    out = []
    for combo in combinations_with_replacement(range(r), h):
        e = [0] * r
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return sorted(set(out))


class HarmonicPolynomial:
    """A polynomial in orthonormal coordinates, annihilated by the Laplacian."""

    def __init__(self, nvars, coeffs, check=True):
        self.nvars = nvars
        self.coeffs = {tuple(e): Fraction(c) for e, c in coeffs.items() if c}
        degs = {sum(e) for e in self.coeffs}
        if len(degs) > 1:
            raise ValueError("polynomial is not homogeneous")
        self.degree = degs.pop() if degs else 0
        if check and not self.laplacian_is_zero():
            raise ValueError("polynomial is not harmonic")

    def laplacian(self):
        out = {}
        for e, c in self.coeffs.items():
            for i in range(self.nvars):
                if e[i] >= 2:
                    e2 = list(e)
                    e2[i] -= 2
                    key = tuple(e2)
                    out[key] = out.get(key, Fraction(0)) + c * e[i] * (e[i] - 1)
        return {k: v for k, v in out.items() if v}

    def laplacian_is_zero(self):
        return not self.laplacian()

    def evaluate(self, point):
        tot = 0.0 if any(isinstance(x, float) for x in point) else Fraction(0)
        for e, c in self.coeffs.items():
            term = c
            for i, p in enumerate(e):
                for _ in range(p):
                    term = term * point[i]
            tot = tot + term
        return tot

    def apolar(self, other):
        """Bombieri/apolar inner product: sum over monomials of a! p_a q_a."""
        tot = Fraction(0)
        for e, c in self.coeffs.items():
            d = other.coeffs.get(e)
            if d is not None:
                w = Fraction(1)
                for k in e:
                    for t in range(2, k + 1):
                        w *= t
                tot += w * c * d
        return tot

    @staticmethod
    def constant(nvars):
        return HarmonicPolynomial(nvars, {(0,) * nvars: Fraction(1)})

    def __repr__(self):
        return f"Harmonic(r={self.nvars}, h={self.degree}, {len(self.coeffs)} terms)"


def harmonic_dimension(r, h):
    if h == 0:
        return 1
    if h == 1:
        return r
    return comb(r + h - 1, r - 1) - comb(r + h - 3, r - 1)


def harmonic_basis(r, h):
    """Orthogonalized basis of degree-h harmonics in r variables.

    Exact rational Gram-Schmidt for the apolar inner product; the basis
    vectors are orthogonal with rational norms (normalize by sqrt(norm)
    where a true orthonormal family is required; the pairwise identity
    <p_i/sqrt(n_i), p_j/sqrt(n_j)> = delta_ij is then exact by
    construction).
    """
    mons = _monomials(r, h)
    idx = {m: i for i, m in enumerate(mons)}
    rows = []
    lap_mons = _monomials(r, h - 2) if h >= 2 else []
    lap_idx = {m: i for i, m in enumerate(lap_mons)}
    # kernel of the Laplacian as a linear map on monomial coefficients
    cols = []
    for m in mons:
        p = HarmonicPolynomial(r, {m: 1}, check=False)
        lap = p.laplacian()
        col = [Fraction(0)] * len(lap_mons)
        for e, c in lap.items():
            col[lap_idx[e]] = c
        cols.append(col)
    # find a basis of the kernel by exact elimination
    kernel = _kernel_basis(cols, len(lap_mons))
    polys = []
    for vec in kernel:
        coeffs = {mons[i]: vec[i] for i in range(len(mons)) if vec[i]}
        polys.append(HarmonicPolynomial(r, coeffs))
    assert len(polys) == harmonic_dimension(r, h)
    # Gram-Schmidt (orthogonal, rational norms kept)
    ortho = []
    for p in polys:
        coeffs = dict(p.coeffs)
        for q, nq in ortho:
            c = p.apolar(q) / nq
            if c:
                for e, v in q.coeffs.items():
                    coeffs[e] = coeffs.get(e, Fraction(0)) - c * v
        pnew = HarmonicPolynomial(r, coeffs)
        n = pnew.apolar(pnew)
        if n == 0:
            continue
        ortho.append((pnew, n))
    assert len(ortho) == len(polys)
    return ortho


def _kernel_basis(cols, nrows):
    """Basis of the kernel of the matrix with the given columns."""
    ncols = len(cols)
    m = [[cols[j][i] for j in range(ncols)] for i in range(nrows)]
    # row reduce, track pivots
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(nrows):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -m[i][fc]
        basis.append(vec)
    return basis


def gegenbauer(r, h):
    """Coefficient dict {(i, j): c} of G_r^h(x, y) = sum c x^i y^j.

    Generating function (1 - 2xT + yT^2)^(1 - r/2) = sum_h G_r^h T^h,
    via the first-order recurrence it satisfies.
    """
    if r < 3:
        raise ValueError("r >= 3 required")
    s = Fraction(r, 2) - 1
    polys = [{(0, 0): Fraction(1)}]
    if h == 0:
        return polys[0]
    polys.append({(1, 0): 2 * s})
    for t in range(1, h):
        # (t+1) G^{t+1} = 2x(t+s) G^t - y (t - 1 + 2s) G^{t-1}
        new = {}
        for (i, j), c in polys[t].items():
            key = (i + 1, j)
            new[key] = new.get(key, Fraction(0)) + 2 * (t + s) * c
        for (i, j), c in polys[t - 1].items():
            key = (i, j + 1)
            new[key] = new.get(key, Fraction(0)) - (t - 1 + 2 * s) * c
        polys.append({k: v / (t + 1) for k, v in new.items() if v})
    return polys[h]


def gegenbauer_eval(r, h, x, y):
    tot = 0
    for (i, j), c in gegenbauer(r, h).items():
        tot = tot + c * x ** i * y ** j
    return tot


class QuadraticHarmonic:
    """A degree-2 harmonic on a lattice, as a symmetric rational matrix.

    F(v) = v^T A v in lattice coordinates; harmonic iff tr(A gram^{-1})
    vanishes (the Laplacian in orthonormal coordinates).
    """

    def __init__(self, lattice, a_mat, check=True):
        self.lattice = lattice
        self.a = tuple(tuple(Fraction(x) for x in row) for row in a_mat)
        r = lattice.rank
        for i in range(r):
            for j in range(r):
                if self.a[i][j] != self.a[j][i]:
                    raise ValueError("matrix must be symmetric")
        if check:
            ginv = inverse_fraction([list(row) for row in lattice.gram])
            tr = sum(self.a[i][j] * ginv[j][i]
                     for i in range(r) for j in range(r))
            if tr != 0:
                raise ValueError("not harmonic: tr(A gram^{-1}) nonzero")
        self.degree = 2
        self.u = None

    @staticmethod
    def from_vector(lattice, u):
        """F_u(v) = <u,v>^2 - <u,u><v,v>/r, as a matrix."""
        g = lattice.gram
        r = lattice.rank
        gu = [sum(g[i][j] * u[j] for j in range(r)) for i in range(r)]
        uu = sum(u[i] * gu[i] for i in range(r))
        a = [[Fraction(gu[i] * gu[j]) - Fraction(uu, r) * g[i][j]
              for j in range(r)] for i in range(r)]
        out = QuadraticHarmonic(lattice, a)
        out.u = tuple(int(x) for x in u)
        return out

    def evaluate(self, v):
        r = self.lattice.rank
        tot = Fraction(0)
        for i in range(r):
            vi = v[i]
            if vi:
                row = self.a[i]
                for j in range(r):
                    if v[j]:
                        tot += vi * row[j] * v[j]
        return tot

    def moment_pair(self, mom):
        """<A, Mom> = sum_ij A_ij Mom_ij for a symmetric moment matrix."""
        r = self.lattice.rank
        tot = Fraction(0)
        for i in range(r):
            for j in range(r):
                if self.a[i][j]:
                    tot += self.a[i][j] * mom[i][j]
        return tot


def quadratic_harmonic_space(lattice, orthogonal=False):
    """Exact basis of {A symmetric : tr(A gram^{-1}) = 0}.

    Built from the F_u family (u over basis vectors and pairwise sums),
    which spans the space; completed by elimination to a basis.  With
    orthogonal=True the basis is Gram-Schmidt orthogonalized for the
    invariant trace form tr(A gram^{-1} B gram^{-1}), with norms attached
    as the second tuple component.
    """
    r = lattice.rank
    gens = []
    for i in range(r):
        u = [0] * r
        u[i] = 1
        gens.append(QuadraticHarmonic.from_vector(lattice, u))
    for i in range(r):
        for j in range(i + 1, r):
            u = [0] * r
            u[i] = 1
            u[j] = 1
            gens.append(QuadraticHarmonic.from_vector(lattice, u))
    # reduce to a basis by incremental row reduction of the vectorizations
    reduced = []  # rows in echelon form, with pivot indices
    basis = []
    dim = harmonic_dimension(r, 2)
    for qh in gens:
        vec = [Fraction(qh.a[i][j]) for i in range(r) for j in range(i, r)]
        for pivot, row in reduced:
            if vec[pivot]:
                f = vec[pivot]
                vec = [x - f * y for x, y in zip(vec, row)]
        piv = next((i for i, x in enumerate(vec) if x), None)
        if piv is not None:
            inv = vec[piv]
            reduced.append((piv, [x / inv for x in vec]))
            basis.append(qh)
            if len(basis) == dim:
                break
    assert len(basis) == dim, (len(basis), dim)
    if not orthogonal:
        return basis
    ginv = inverse_fraction([list(row) for row in lattice.gram])

    def tf(a_mat, b_mat):
        ag = [[sum(a_mat[i][t] * ginv[t][j] for t in range(r))
               for j in range(r)] for i in range(r)]
        bg = [[sum(b_mat[i][t] * ginv[t][j] for t in range(r))
               for j in range(r)] for i in range(r)]
        return sum(ag[i][j] * bg[j][i] for i in range(r) for j in range(r))

    ortho = []
    for qh in basis:
        a = [list(row) for row in qh.a]
        for (prev, nprev) in ortho:
            c = tf(a, prev.a) / nprev
            if c:
                for i in range(r):
                    for j in range(r):
                        a[i][j] -= c * prev.a[i][j]
        cand = QuadraticHarmonic(lattice, a)
        n = tf(cand.a, cand.a)
        assert n > 0
        ortho.append((cand, n))
    return ortho
