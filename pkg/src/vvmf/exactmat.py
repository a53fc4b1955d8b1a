"""Exact linear algebra over Z and Q used throughout the package.

Matrices are plain lists of lists.  Everything here is deterministic:
Smith normal form uses smallest-absolute-value pivoting with row-major
tie breaks so that generator lifts derived from the transforms are
reproducible across runs.
"""

from fractions import Fraction


def identity(n):
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def mat_mul(a, b):
    n, m, k = len(a), len(b[0]), len(b)
    out = [[0] * m for _ in range(n)]
    for i in range(n):
        ai = a[i]
        for t in range(k):
            x = ai[t]
            if x:
                bt = b[t]
                oi = out[i]
                for j in range(m):
                    oi[j] += x * bt[j]
    return out


def mat_vec(a, v):
    return [sum(a[i][j] * v[j] for j in range(len(v))) for i in range(len(a))]


def transpose(a):
    return [list(col) for col in zip(*a)]


def mat_eq(a, b):
    return len(a) == len(b) and all(list(x) == list(y) for x, y in zip(a, b))


def copy_mat(a):
    return [list(row) for row in a]


def mat_fraction(a):
    return [[Fraction(x) for x in row] for row in a]


def det_bareiss(a):
    """Exact determinant of an integer matrix (Bareiss elimination)."""
    n = len(a)
    if n == 0:
        return 1
    m = copy_mat(a)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def inverse_fraction(a):
    """Inverse of a nonsingular matrix, returned over Fraction."""
    n = len(a)
    m = [[Fraction(x) for x in row] + [Fraction(i == j) for j in range(n)]
         for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise ValueError("matrix is singular")
        m[col], m[piv] = m[piv], m[col]
        pv = m[col][col]
        m[col] = [x / pv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [row[n:] for row in m]


def rank_fraction(a):
    """Exact rank of a matrix with Fraction/int entries."""
    if not a:
        return 0
    m = [[Fraction(x) for x in row] for row in a]
    rows, cols = len(m), len(m[0])
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        r += 1
        if r == rows:
            break
    return r


def solve_fraction(a, b):
    """Solve a x = b exactly; returns None if inconsistent.

    ``a`` is rows x cols, ``b`` a list of length rows.  When the system is
    underdetermined an arbitrary (deterministic) solution is returned.
    """
    rows = len(a)
    cols = len(a[0]) if rows else 0
    m = [[Fraction(x) for x in a[i]] + [Fraction(b[i])] for i in range(rows)]
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    for i in range(r, rows):
        if m[i][cols] != 0:
            return None
    x = [Fraction(0)] * cols
    for i, c in enumerate(pivots):
        x[c] = m[i][cols]
    return x


def _smallest_pivot(m, start):
    """Smallest-|entry| nonzero pivot in the trailing block, row-major ties."""
    best = None
    n, k = len(m), len(m[0])
    for i in range(start, n):
        for j in range(start, k):
            v = abs(m[i][j])
            if v and (best is None or v < best[0]):
                best = (v, i, j)
    return best


def smith_normal_form(a):
    """Smith normal form with transforms: returns (d, u, v), u a v = d.

    d is diagonal with d_i | d_{i+1} and d_i >= 0.  Deterministic pivot
    selection (smallest absolute nonzero entry, row-major tie-break).
    """
    n = len(a)
    k = len(a[0]) if n else 0
    m = copy_mat(a)
    u = identity(n)
    v = identity(k)
    t = 0
    while True:
        piv = _smallest_pivot(m, t)
        if piv is None:
            break
        _, pi, pj = piv
        if pi != t:
            m[t], m[pi] = m[pi], m[t]
            u[t], u[pi] = u[pi], u[t]
        if pj != t:
            for row in m:
                row[t], row[pj] = row[pj], row[t]
            for row in v:
                row[t], row[pj] = row[pj], row[t]
        # clear row and column t
        dirty = True
        while dirty:
            dirty = False
            for i in range(t + 1, n):
                if m[i][t]:
                    q = m[i][t] // m[t][t]
                    for j in range(k):
                        m[i][j] -= q * m[t][j]
                    for j in range(n):
                        u[i][j] -= q * u[t][j]
                    if m[i][t]:
                        m[t], m[i] = m[i], m[t]
                        u[t], u[i] = u[i], u[t]
                        dirty = True
            for j in range(t + 1, k):
                if m[t][j]:
                    q = m[t][j] // m[t][t]
                    for i in range(n):
                        m[i][j] -= q * m[i][t]
                    for i in range(k):
                        v[i][j] -= q * v[i][t]
                    if m[t][j]:
                        for row in m:
                            row[t], row[j] = row[j], row[t]
                        for row in v:
                            row[t], row[j] = row[j], row[t]
                        dirty = True
        # divisibility: make m[t][t] divide everything below-right
        fixed = False
        while not fixed:
            fixed = True
            for i in range(t + 1, n):
                for j in range(t + 1, k):
                    if m[i][j] % m[t][t]:
                        for jj in range(k):
                            m[t][jj] += m[i][jj]
                        for jj in range(n):
                            u[t][jj] += u[i][jj]
                        fixed = False
                        break
                if not fixed:
                    break
            if not fixed:
                # re-clear after the row addition
                piv2 = _smallest_pivot(m, t)
                _, pi, pj = piv2
                if pi != t:
                    m[t], m[pi] = m[pi], m[t]
                    u[t], u[pi] = u[pi], u[t]
                if pj != t:
                    for row in m:
                        row[t], row[pj] = row[pj], row[t]
                    for row in v:
                        row[t], row[pj] = row[pj], row[t]
                dirty = True
                while dirty:
                    dirty = False
                    for i in range(t + 1, n):
                        if m[i][t]:
                            q = m[i][t] // m[t][t]
                            for j in range(k):
                                m[i][j] -= q * m[t][j]
                            for j in range(n):
                                u[i][j] -= q * u[t][j]
                            if m[i][t]:
                                m[t], m[i] = m[i], m[t]
                                u[t], u[i] = u[i], u[t]
                                dirty = True
                    for j in range(t + 1, k):
                        if m[t][j]:
                            q = m[t][j] // m[t][t]
                            for i in range(n):
                                m[i][j] -= q * m[i][t]
                            for i in range(k):
                                v[i][j] -= q * v[i][t]
                            if m[t][j]:
                                for row in m:
                                    row[t], row[j] = row[j], row[t]
                                for row in v:
                                    row[t], row[j] = row[j], row[t]
                                dirty = True
        if m[t][t] < 0:
            for j in range(k):
                m[t][j] = -m[t][j]
            for j in range(n):
                u[t][j] = -u[t][j]
        t += 1
        if t == min(n, k):
            break
    return m, u, v


def inertia(gram):
    """Signature (n_plus, n_minus) of a nondegenerate symmetric matrix.

    Exact symmetric pivoting over Q.  Zero diagonals are repaired by the
    congruence v_i <- v_i + v_j which creates the even entry 2 a_ij.
    """
    n = len(gram)
    m = [[Fraction(x) for x in row] for row in gram]
    plus = minus = 0
    for step in range(n):
        # find a nonzero diagonal pivot at or after step
        piv = next((i for i in range(step, n) if m[i][i] != 0), None)
        if piv is None:
            found = None
            for i in range(step, n):
                for j in range(i + 1, n):
                    if m[i][j] != 0:
                        found = (i, j)
                        break
                if found:
                    break
            if found is None:
                raise ValueError("degenerate form has no inertia")
            i, j = found
            for t in range(n):
                m[i][t] += m[j][t]
            for t in range(n):
                m[t][i] += m[t][j]
            piv = i
        if piv != step:
            m[step], m[piv] = m[piv], m[step]
            for row in m:
                row[step], row[piv] = row[piv], row[step]
        d = m[step][step]
        if d > 0:
            plus += 1
        else:
            minus += 1
        for i in range(step + 1, n):
            if m[i][step]:
                f = m[i][step] / d
                for j in range(n):
                    m[i][j] -= f * m[step][j]
        for j in range(step + 1, n):
            m[step][j] = Fraction(0)
    return plus, minus
