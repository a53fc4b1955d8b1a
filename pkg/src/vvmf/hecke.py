"""Hecke operators on vector-valued q-expansions.

The double coset of determinant alpha^2 is enumerated through the
triangular representatives ((p^{2n-a}, b; 0, p^a), sqrt(p^a)) at prime
powers, composed multiplicatively over coprime parts.  The action on an
expansion is computed coefficientwise and exactly: each representative
contributes a reindexing m -> m A / D, a root-of-unity phase from the
b-entry, an exact half-integral power of alpha/D, and the support
transform of the extended Weil action.
"""

from fractions import Fraction
from math import gcd, isqrt, lcm

from .cyclo import CycNum, sqrt_int
from .discforms import CoeffVector
from .qseries import FourierExpansion, _sc_add, _sc_mul, _sc_zero
from .weil import MetaplecticElement, WeilContext


def _factorize(n):
    out = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


class HeckeCosetSystem:
    def __init__(self, alpha, reps):
        self.alpha = alpha
        self.reps = reps

    def __len__(self):
        return len(self.reps)

    def check_distinct(self):
        """Representatives are pairwise in distinct left Mp2(Z)-cosets."""
        for i, r1 in enumerate(self.reps):
            a1, b1 = r1.mat[0]
            c1, d1 = r1.mat[1]
            for r2 in self.reps[i + 1:]:
                a2, b2 = r2.mat[0]
                c2, d2 = r2.mat[1]
                det2 = a2 * d2 - b2 * c2
                # r1 * r2^{-1} integral with det 1 would mean same coset
                m = ((a1 * d2 - b1 * c2, -a1 * b2 + b1 * a2),
                     (c1 * d2 - d1 * c2, -c1 * b2 + d1 * a2))
                if all(x % det2 == 0 for row in m for x in row):
                    return False
        return True


def coset_reps_prime_power(p, n):
    reps = []
    for a in range(2 * n + 1):
        mod = p ** min(a, 2 * n - a)
        for b in range(p ** a):
            if gcd(b, mod) == 1:
                reps.append(MetaplecticElement(
                    ((p ** (2 * n - a), b), (0, p ** a)), 1))
    return reps


def coset_reps(alpha):
    """Left-coset representatives of the determinant-alpha^2 double coset."""
    if alpha < 1:
        raise ValueError("alpha >= 1 required")
    reps = [MetaplecticElement(((1, 0), (0, 1)), 1)]
    for p, n in sorted(_factorize(alpha).items()):
        new = []
        prime_reps = coset_reps_prime_power(p, n)
        for r in reps:
            for s in prime_reps:
                new.append(r * s)
        reps = new
    return HeckeCosetSystem(alpha, reps)


def _half_power(x, two_k):
    """x^{two_k / 2} for a positive rational x, exact."""
    x = Fraction(x)
    y = x ** two_k
    num, den = y.numerator, y.denominator
    # sqrt(num/den) = sqrt(num * den) / den
    return sqrt_int(num * den) * Fraction(1, den)


def hecke_transform(alpha_sq, fe, prec_out):
    """T_{alpha^2} applied to a truncated expansion, exactly.

    Requires fe.prec >= alpha^2 * prec_out so that every output
    coefficient is fully determined; raises otherwise.
    """
    alpha = isqrt(alpha_sq)
    if alpha * alpha != alpha_sq:
        raise ValueError("alpha^2 must be a perfect square")
    prec_out = Fraction(prec_out)
    if fe.prec < alpha_sq * prec_out:
        raise ValueError(
            f"insufficient input precision: need {alpha_sq * prec_out}, "
            f"have {fe.prec}")
    if alpha == 1:
        return fe.truncated(prec_out)
    eff = fe.eff_form()
    ctx = WeilContext(eff)
    k = fe.weight
    two_k = int(2 * k)
    system = coset_reps(alpha)
    out = {}
    basis_cache = {}
    for rep in system.reps:
        (a, b), (zero, d) = rep.mat
        assert zero == 0
        # alpha^{k-2} * (alpha/d)^k, both as exact half-integral powers
        scal = _half_power(alpha, two_k - 4) * _half_power(Fraction(alpha, d),
                                                           two_k)
        # vector transforms of each basis element under this rep
        key = rep.mat
        if key not in basis_cache:
            table = {}
            for g in eff.elements():
                table[g] = ctx.act_extended(rep, CoeffVector(eff, {g: 1}))
            basis_cache[key] = table
        table = basis_cache[key]
        for (g, m), c in fe.coeffs.items():
            m_out = m * a / d
            if m_out > prec_out:
                continue
            phase = CycNum.root_of_unity(_frac_mod1(m * b / d))
            factor = _sc_mul(_sc_mul(c, phase), scal)
            for lam, w in table[g].data.items():
                val = _sc_mul(factor, w)
                kk = (lam, m_out)
                out[kk] = _sc_add(out.get(kk, Fraction(0)), val)
    out = {kk: v for kk, v in out.items() if not _sc_zero(v)}
    return FourierExpansion(fe.form, fe.dual, fe.weight, prec_out, out)


def _frac_mod1(x):
    x = Fraction(x)
    return x - (x.numerator // x.denominator)


def scalar_transform(q_val, p, n, component, k):
    """The scalar comparison operator on one component q-expansion.

    component: dict {m: coeff} with m = q_val mod 1.  Returns the dict of
    T^{q_val}_{p^{2n}} applied to it; the b-sum is evaluated exactly as a
    cyclotomic geometric sum, which selects exponents with m/p^{2n} =
    q_val mod 1 when denominators are p-power.
    """
    q_val = Fraction(q_val)
    p2n = p ** (2 * n)
    exps = sorted(Fraction(m) for m in component)
    for m in exps[1:]:
        if _frac_mod1(m - exps[0]) != 0:
            raise ValueError("component exponents lie in different classes "
                             "mod 1")
    out = {}
    for m, c in component.items():
        m = Fraction(m)
        # sum_b e(-b q) e(m b / p^{2n}) exactly
        xexp = _frac_mod1(Fraction(m, p2n) - q_val)
        acc = CycNum.zero(1)
        for b in range(p2n):
            acc = acc + CycNum.root_of_unity(_frac_mod1(b * xexp))
        accr = acc.try_fraction()
        if accr is not None:
            acc = accr
        if _sc_zero(acc):
            continue
        # p^{(k-2)n} * p^{-nk} = p^{-2n}
        factor = Fraction(1, p ** (2 * n))
        m_out = m / p2n
        val = _sc_mul(_sc_mul(c, acc), factor)
        out[m_out] = _sc_add(out.get(m_out, Fraction(0)), val)
    return {m: v for m, v in out.items() if not _sc_zero(v)}


def component(fe, g):
    """One component of an expansion as a scalar dict {m: coeff}."""
    g = fe.form.reduce(g)
    return {m: c for (h, m), c in fe.coeffs.items() if h == g}


def star_condition(gamma, p, form):
    """The (*_p) condition of the scalar-comparison lemma."""
    gamma = form.reduce(gamma)
    if gamma in set(form.mult_image(p)):
        return False
    if p == 2:
        for mu in form.mult_kernel(2):
            if _frac_mod1(2 * form.q(mu) + form.pairing(mu, gamma)) != 0:
                return True
        return False
    return True


def _mix_components(form, gamma, mu, subset, all_primes):
    """Element whose p-part is mu's for p in subset, gamma's otherwise."""
    coords = []
    for i, d in enumerate(form.divisors):
        # CRT over the prime powers dividing d
        residue = 0
        modulus = 1
        dd = d
        fac = _factorize(d)
        for p, a in fac.items():
            pa = p ** a
            target = mu[i] if p in subset else gamma[i]
            # solve x = target mod pa, combine by CRT
            r = target % pa
            g, inv, _ = _egcd(modulus, pa)
            assert g == 1
            residue = (residue + (r - residue) * inv % pa * modulus) % \
                (modulus * pa)
            modulus *= pa
        coords.append(residue % d)
    return tuple(coords)


def _egcd(a, b):
    if b == 0:
        return a, 1, 0
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y


def vanishing_vector(gamma, mu, primes, form):
    """The alternating sum v_{gamma,S}^mu over subsets of S.

    Preconditions (checked): (prod S) gamma = (prod S) mu, q(gamma) =
    q(mu), and (*_p) holds for gamma and mu at every p in S.
    """
    gamma = form.reduce(gamma)
    mu = form.reduce(mu)
    prod = 1
    for p in primes:
        prod *= p
    if form.smul(prod, gamma) != form.smul(prod, mu):
        raise ValueError("(prod S) gamma != (prod S) mu")
    if form.q(gamma) != form.q(mu):
        raise ValueError("q(gamma) != q(mu)")
    for p in primes:
        if not star_condition(gamma, p, form):
            raise ValueError(f"gamma fails (*_p) at p = {p}")
        if not star_condition(mu, p, form):
            raise ValueError(f"mu fails (*_p) at p = {p}")
    primes = sorted(primes)
    data = {}
    for mask in range(1 << len(primes)):
        subset = {primes[i] for i in range(len(primes)) if mask >> i & 1}
        elem = _mix_components(form, gamma, mu, subset, primes)
        sign = -1 if bin(mask).count("1") % 2 else 1
        data[elem] = data.get(elem, 0) + sign
    return CoeffVector(form, {g: Fraction(v) for g, v in data.items() if v})


# --------------------------------------------------------------------------
# eigenbasis and partial L-series


def operator_matrix(basis, alpha_sq, prec_work):
    """Matrix of T_{alpha^2} in the given basis, exact.

    Coefficients are compared on the slots up to prec_work; raises if the
    image does not lie in the span (basis not T-stable).
    """
    from .exactmat import solve_fraction
    slots = sorted({k for f in basis for k in f.coeffs
                    if k[1] <= prec_work})
    amat = [[Fraction(f.coeffs.get(s, Fraction(0))) for f in basis]
            for s in slots]
    cols = []
    for f in basis:
        img = hecke_transform(alpha_sq, f, prec_work)
        rhs = []
        for s in slots:
            v = img.coeffs.get(s, Fraction(0))
            if isinstance(v, CycNum):
                vf = v.try_fraction()
                if vf is None:
                    raise ValueError("non-rational Hecke image coefficient "
                                     "against a rational basis")
                v = vf
            rhs.append(v)
        sol = solve_fraction(amat, rhs)
        if sol is None:
            raise ValueError("basis is not T-stable at the working precision")
        # verify (solve_fraction checks consistency already)
        cols.append(sol)
    n = len(basis)
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def _char_poly(m):
    """Characteristic polynomial coefficients (monic), Faddeev-LeVerrier."""
    n = len(m)
    from .exactmat import mat_mul, identity
    c = [Fraction(0)] * (n + 1)
    c[n] = Fraction(1)
    a = [[Fraction(x) for x in row] for row in m]
    mk = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    for k in range(1, n + 1):
        mk = mat_mul(a, mk)
        tr = sum(mk[i][i] for i in range(n))
        ck = -tr / k
        c[n - k] = ck
        for i in range(n):
            mk[i][i] += ck
    return c


def _rational_roots(coeffs):
    """All rational roots (with multiplicity via division) of the poly."""
    from fractions import Fraction as F
    c = list(coeffs)
    den = 1
    for x in c:
        den = lcm(den, F(x).denominator)
    ic = [int(F(x) * den) for x in c]
    while ic and ic[-1] == 0:
        ic.pop()
    roots = []
    # strip zero roots
    while ic and ic[0] == 0:
        roots.append(F(0))
        ic.pop(0)
    if not ic or len(ic) == 1:
        return roots

    def divisors(n):
        n = abs(n)
        out = set()
        d = 1
        while d * d <= n:
            if n % d == 0:
                out.add(d)
                out.add(n // d)
            d += 1
        return out

    changed = True
    while changed and len(ic) > 1:
        changed = False
        for pnum in sorted(divisors(ic[0])):
            done = False
            for pden in sorted(divisors(ic[-1])):
                for sgn in (1, -1):
                    r = F(sgn * pnum, pden)
                    val = F(0)
                    for co in reversed(ic):
                        val = val * r + co
                    if val == 0:
                        roots.append(r)
                        # synthetic division: ic(x) = (x - r) q(x)
                        q = [F(0)] * (len(ic) - 1)
                        q[-1] = F(ic[-1])
                        for i in range(len(ic) - 2, 0, -1):
                            q[i - 1] = F(ic[i]) + r * q[i]
                        ic = q
                        den2 = 1
                        for x in ic:
                            den2 = lcm(den2, F(x).denominator)
                        ic = [int(F(x) * den2) for x in ic]
                        changed = True
                        done = True
                        break
                if done:
                    break
            if done:
                break
    return roots


def _kernel(m, lam):
    """Basis of ker(M - lam I) as coordinate vectors."""
    n = len(m)
    a = [[Fraction(m[i][j]) - (lam if i == j else 0) for j in range(n)]
         for i in range(n)]
    # row reduce
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, n) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        pv = a[r][c]
        a[r] = [x / pv for x in a[r]]
        for i in range(n):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    basis = []
    free = [c for c in range(n) if c not in pivots]
    for fc in free:
        vec = [Fraction(0)] * n
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -a[i][fc]
        basis.append(vec)
    return basis


def eigenbasis(cusp_basis, alphas, prec_work=None):
    """Simultaneous eigenforms for the T_{alpha^2}, alpha in alphas.

    Returns a list of (eigenform expansion, {alpha^2: eigenvalue}).
    Exact splitting over Q; a characteristic polynomial without enough
    rational roots raises (desk-scale instances keep eigenvalues
    rational).
    """
    if prec_work is None:
        amax = max(alphas) ** 2
        prec_work = min(f.prec for f in cusp_basis) / amax
    mats = {a: operator_matrix(cusp_basis, a * a, prec_work) for a in alphas}
    n = len(cusp_basis)
    # exact commutativity check
    from .exactmat import mat_mul, mat_eq
    items = sorted(mats.items())
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            ab = mat_mul(items[i][1], items[j][1])
            ba = mat_mul(items[j][1], items[i][1])
            if not mat_eq(ab, ba):
                raise ValueError(
                    f"T_{items[i][0]**2} and T_{items[j][0]**2} do not "
                    "commute at the working precision")
    spaces = [[_unit(n, i) for i in range(n)]]
    for a, m in items:
        new_spaces = []
        for space in spaces:
            if len(space) == 1:
                new_spaces.append(space)
                continue
            sub = _restrict(m, space)
            cp = _char_poly(sub)
            roots = _rational_roots(cp)
            if len(roots) < len(space):
                raise ValueError(
                    "characteristic polynomial has irrational roots; "
                    "exact splitting is limited to rational spectra")
            for lam in sorted(set(roots)):
                kern = _kernel(sub, lam)
                if kern:
                    new_spaces.append(
                        [_combine(space, v) for v in kern])
        spaces = new_spaces
    out = []
    for space in spaces:
        for vec in space:
            form = None
            for c, f in zip(vec, cusp_basis):
                if c:
                    term = f.scaled(c)
                    form = term if form is None else form + term
            evs = {}
            for a, m in items:
                img = _apply_mat(m, vec)
                lam = _ratio(img, vec)
                evs[a * a] = lam
            out.append((form.truncated(prec_work), evs))
    return out


def _unit(n, i):
    v = [Fraction(0)] * n
    v[i] = Fraction(1)
    return v


def _restrict(m, space):
    """Matrix of m on the span of `space` (coordinates in that basis)."""
    from .exactmat import solve_fraction
    n = len(m)
    cols = []
    amat = [[space[j][i] for j in range(len(space))] for i in range(n)]
    for v in space:
        img = _apply_mat(m, v)
        sol = solve_fraction(amat, img)
        if sol is None:
            raise ValueError("space is not invariant")
        cols.append(sol)
    k = len(space)
    return [[cols[j][i] for j in range(k)] for i in range(k)]


def _apply_mat(m, v):
    n = len(m)
    return [sum(m[i][j] * v[j] for j in range(n)) for i in range(n)]


def _combine(space, coeffs):
    n = len(space[0])
    out = [Fraction(0)] * n
    for c, vec in zip(coeffs, space):
        for i in range(n):
            out[i] += c * vec[i]
    return out


def _ratio(img, vec):
    for a, b in zip(img, vec):
        if b != 0:
            lam = a / b
            break
    else:
        raise ValueError("zero vector")
    for a, b in zip(img, vec):
        if a != lam * b:
            raise ValueError("not an eigenvector")
    return lam


def l_series_partial(eigenvalues, s, cutoff, level=1, weight=None):
    """Truncated L-sum over alpha coprime to the level.

    eigenvalues: dict alpha -> lambda(alpha^2) covering the needed prime
    powers; composite values are filled in multiplicatively.  Returns a
    report with the partial sum and, when a weight is supplied, the tail
    bound from |lambda(p^{2n})| <= p^{nk}.
    """
    vals = dict(eigenvalues)

    def get(a):
        if a in vals:
            return vals[a]
        fac = _factorize(a)
        out = Fraction(1)
        for p, e in fac.items():
            pe = p ** e
            if pe not in vals:
                raise KeyError(f"missing eigenvalue for alpha = {pe}")
            out *= vals[pe]
        vals[a] = out
        return out

    total = Fraction(0) if Fraction(s).denominator == 1 else 0.0
    exact = Fraction(s).denominator == 1
    s = Fraction(s)
    for a in range(1, cutoff + 1):
        if gcd(a, level) != 1:
            continue
        lam = get(a)
        if exact:
            total += Fraction(lam) / a ** int(s)
        else:
            total += float(lam) / float(a) ** float(s)
    report = {"partial_sum": total, "cutoff": cutoff}
    if weight is not None:
        k = float(weight)
        sf = float(s)
        if sf - k <= 1:
            report["tail_bound"] = None
        else:
            x = float(cutoff)
            report["tail_bound"] = x ** (k - sf + 1) / (sf - k - 1)
    return report
