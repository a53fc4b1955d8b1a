"""Finite quadratic forms (discriminant forms) and their subquotients.

Group elements are plain tuples of residues, one per elementary divisor,
reduced to [0, d_i).  The form object owns all arithmetic on elements.

Desk-scale philosophy: groups are small enough (|G| <= 10^4) that
subgroups are materialized eagerly and searches are exhaustive but
deterministically ordered.
"""

from fractions import Fraction
from math import gcd, lcm, prod

from .cyclo import CycNum, e_frac, sqrt_int
from .exactmat import smith_normal_form, identity, mat_mul

DEFAULT_GROUP_BOUND = 10 ** 4


def _mod1(x):
    x = Fraction(x)
    return x - (x.numerator // x.denominator)


class DiscriminantForm:
    """A finite abelian group with a nondegenerate Q/Z quadratic form.

    divisors: elementary divisors d_1 | d_2 | ... | d_k, each > 1.
    q_gen[i] = q(g_i) mod 1 for the i-th generator.
    bil[i][j] = (g_i, g_j) mod 1, the associated bilinear form, with
    bil[i][i] = 2 q(g_i) mod 1.
    """

    def __init__(self, divisors, q_gen, bil, check=True):
        self.divisors = tuple(int(d) for d in divisors)
        self.q_gen = tuple(_mod1(x) for x in q_gen)
        self.bil = tuple(tuple(_mod1(x) for x in row) for row in bil)
        self.k = len(self.divisors)
        self.order = prod(self.divisors) if self.divisors else 1
        self._elements = None
        self._sig = None
        self._gauss = None
        if check:
            self._validate()

    def _validate(self):
        assert all(d > 1 for d in self.divisors)
        for i in range(self.k):
            for j in range(self.k):
                assert self.bil[i][j] == self.bil[j][i]
            assert _mod1(2 * self.q_gen[i]) == self.bil[i][i]
            # d_i kills the i-th generator against everything
            for j in range(self.k):
                assert _mod1(self.divisors[i] * self.bil[i][j]) == 0
        if self.order > 1 and self.order <= DEFAULT_GROUP_BOUND:
            rad = [g for g in self.elements()
                   if all(self.pairing(g, h) == 0 for h in self.gens())]
            if len(rad) != 1:
                raise ValueError("bilinear form is degenerate")

    # -- structure -------------------------------------------------------

    @staticmethod
    def trivial():
        return DiscriminantForm((), (), ())

    def zero(self):
        return (0,) * self.k

    def gens(self):
        out = []
        for i in range(self.k):
            g = [0] * self.k
            g[i] = 1
            out.append(tuple(g))
        return out

    def elements(self):
        if self._elements is None:
            elems = [()]
            for d in self.divisors:
                elems = [e + (r,) for e in elems for r in range(d)]
            self._elements = [tuple(e) for e in elems]
        return self._elements

    def reduce(self, coords):
        return tuple(int(c) % d for c, d in zip(coords, self.divisors))

    def add(self, a, b):
        return tuple((x + y) % d for x, y, d in zip(a, b, self.divisors))

    def neg(self, a):
        return tuple((-x) % d for x, d in zip(a, self.divisors))

    def smul(self, n, a):
        return tuple((n * x) % d for x, d in zip(a, self.divisors))

    def element_order(self, a):
        o = 1
        for x, d in zip(a, self.divisors):
            o = lcm(o, d // gcd(x, d))
        return o

    # -- the form ---------------------------------------------------------

    def q(self, a):
        tot = Fraction(0)
        for i in range(self.k):
            tot += a[i] * a[i] * self.q_gen[i]
            for j in range(i + 1, self.k):
                tot += a[i] * a[j] * self.bil[i][j]
        return _mod1(tot)

    def pairing(self, a, b):
        tot = Fraction(0)
        for i in range(self.k):
            if a[i]:
                for j in range(self.k):
                    if b[j]:
                        tot += a[i] * b[j] * self.bil[i][j]
        return _mod1(tot)

    @property
    def level(self):
        n = 1
        for x in self.q_gen:
            n = lcm(n, x.denominator)
        for row in self.bil:
            for x in row:
                n = lcm(n, x.denominator)
        return n

    @property
    def ell(self):
        return self.k

    def p_rank(self, p):
        return sum(1 for d in self.divisors if d % p == 0)

    def primes(self):
        ps = set()
        for d in self.divisors:
            n, f = d, 2
            while f * f <= n:
                if n % f == 0:
                    ps.add(f)
                    while n % f == 0:
                        n //= f
                f += 1
            if n > 1:
                ps.add(n)
        return sorted(ps)

    def is_p_elementary(self, p):
        return all(d == p for d in self.divisors)

    def is_two_torsion(self):
        return all(d == 2 for d in self.divisors)

    # -- Gauss sum and signature ------------------------------------------

    def gauss_sum(self):
        """sum over G of e(q(gamma)), exact in Q(zeta_lcm(8, level))."""
        if self._gauss is None:
            L = lcm(8, self.level)
            counts = {}
            for g in self.elements():
                qa = self.q(g)
                e = (qa.numerator * (L // qa.denominator)) % L
                counts[e] = counts.get(e, 0) + 1
            self._gauss = CycNum(L, counts)
        return self._gauss

    @property
    def signature_mod8(self):
        """The s in sum e(q) = sqrt(|G|) e(s/8), determined exactly."""
        if self._sig is None:
            s = self.gauss_sum()
            root = sqrt_int(self.order)
            for cand in range(8):
                if (s - root * e_frac(Fraction(cand, 8))).is_zero():
                    self._sig = cand
                    break
            else:
                raise ValueError("Gauss sum is not sqrt(|G|) times an 8th "
                                 "root of unity; form is degenerate")
        return self._sig

    def milgram_holds(self, expected_sig):
        return self.signature_mod8 == expected_sig % 8

    # -- derived forms ------------------------------------------------------

    def negated(self):
        return DiscriminantForm(
            self.divisors,
            tuple(_mod1(-x) for x in self.q_gen),
            tuple(tuple(_mod1(-x) for x in row) for row in self.bil),
            check=False)

    def direct_sum(self, other):
        k1, k2 = self.k, other.k
        divisors = self.divisors + other.divisors
        q_gen = self.q_gen + other.q_gen
        bil = []
        for i in range(k1 + k2):
            row = []
            for j in range(k1 + k2):
                if i < k1 and j < k1:
                    row.append(self.bil[i][j])
                elif i >= k1 and j >= k1:
                    row.append(other.bil[i - k1][j - k1])
                else:
                    row.append(Fraction(0))
            bil.append(tuple(row))
        return DiscriminantForm(divisors, q_gen, bil, check=False)

    def embed_left(self, a, total):
        """Coords of a in a direct sum where self is the left factor."""
        return a + (0,) * (total - self.k)

    # -- coparity / characteristic element (2-torsion only) ------------------

    def characteristic_element(self):
        if not self.is_two_torsion():
            raise ValueError("characteristic element requires 2-torsion group")
        for alpha in self.elements():
            if all(_mod1(2 * self.q(g) - self.pairing(g, alpha)) == 0
                   for g in self.gens()):
                return alpha
        raise ValueError("no characteristic element found (degenerate form)")

    def coparity(self):
        if not self.is_two_torsion():
            raise ValueError("coparity requires 2-torsion group")
        return 0 if all(_mod1(2 * self.q(g)) == 0 for g in self.elements()) else 1

    # -- multiplication-by-n subgroups ---------------------------------------

    def mult_image(self, n):
        return sorted({self.smul(n, g) for g in self.elements()})

    def mult_kernel(self, n):
        return sorted(g for g in self.elements()
                      if self.smul(n, g) == self.zero())

    def star_group(self, n):
        """G^{n*}: gamma with n q(mu) + (mu, gamma) = 0 for all mu in G_n."""
        kern = self.mult_kernel(n)
        out = []
        for g in self.elements():
            if all(_mod1(n * self.q(mu) + self.pairing(mu, g)) == 0
                   for mu in kern):
                out.append(g)
        return sorted(out)

    def __eq__(self, other):
        if not isinstance(other, DiscriminantForm):
            return NotImplemented
        return (self.divisors == other.divisors and self.q_gen == other.q_gen
                and self.bil == other.bil)

    def __hash__(self):
        return hash((self.divisors, self.q_gen, self.bil))

    def __repr__(self):
        if not self.divisors:
            return "DiscForm(trivial)"
        qs = ",".join(str(x) for x in self.q_gen)
        return f"DiscForm({'x'.join('Z/%d' % d for d in self.divisors)}; q=({qs}))"


class FormInvariants:
    """Bundled invariants of a discriminant form (see form_invariants)."""

    def __init__(self, form):
        self.form = form
        self.level = form.level
        self.ell = form.ell
        self.p_ranks = {p: form.p_rank(p) for p in form.primes()}
        self.signature_mod8 = form.signature_mod8

    def coparity(self):
        return self.form.coparity()

    def characteristic_element(self):
        return self.form.characteristic_element()

    def power_image(self, n):
        return self.form.mult_image(n)

    def power_kernel(self, n):
        return self.form.mult_kernel(n)

    def star_group(self, n):
        return self.form.star_group(n)


def form_invariants(form):
    return FormInvariants(form)


# ------------------------------------------------------------------------
# Subgroups, complements, quotients


class IsotropicSubgroup:
    def __init__(self, ambient, generators):
        self.ambient = ambient
        self.generators = [ambient.reduce(g) for g in generators]
        self.elements = _closure(ambient, self.generators)
        for h in self.elements:
            if ambient.q(h) != 0:
                raise ValueError(f"subgroup element {h} has q = {ambient.q(h)}, "
                                 "not isotropic")

    def __len__(self):
        return len(self.elements)

    def contains(self, g):
        return self.ambient.reduce(g) in self._elemset()

    def _elemset(self):
        return set(self.elements)


def _closure(form, gens):
    seen = {form.zero()}
    frontier = [form.zero()]
    while frontier:
        new = []
        for x in frontier:
            for g in gens:
                y = form.add(x, g)
                if y not in seen:
                    seen.add(y)
                    new.append(y)
        frontier = new
    return sorted(seen)


def is_characteristic_free(h: IsotropicSubgroup):
    """True iff h contains no nonzero characteristic element (2-torsion)."""
    g = h.ambient
    alpha = g.characteristic_element()
    if alpha == g.zero():
        return True
    return not h.contains(alpha)


class SubquotientData:
    """Output of complement_and_quotient."""

    def __init__(self, subgroup, perp, quotient, project, section):
        self.subgroup = subgroup
        self.perp = perp
        self.quotient = quotient
        self.project = project
        self.section = section


def complement_and_quotient(h: IsotropicSubgroup):
    """Orthogonal complement H^perp and the quotient form H^perp / H.

    Returns a SubquotientData with the quotient as a DiscriminantForm
    in Smith normal form, a projection H^perp -> quotient and a section.
    """
    g = h.ambient
    perp = [x for x in g.elements()
            if all(g.pairing(x, t) == 0 for t in h.generators)]
    perp_set = set(perp)
    if g.k == 0:
        triv = DiscriminantForm.trivial()
        return SubquotientData(h, perp, triv, lambda x: (), lambda y: ())

    # integer-lattice presentation: G = Z^k / D Z^k
    k = g.k
    n_lvl = g.level

    # lattice of H^perp inside Z^k: rows of pairing conditions scaled by level
    rows = []
    for t in h.generators:
        row = []
        for i in range(k):
            gi = g.gens()[i]
            val = g.pairing(gi, t)
            row.append(int(val * n_lvl))
        rows.append(row)
    if rows:
        d_mat, u_, v_ = smith_normal_form(rows)
        r = len(rows)
        scale = []
        for i in range(k):
            di = d_mat[i][i] if i < r and i < len(d_mat[0]) else 0
            gcd_i = gcd(di, n_lvl)
            scale.append(n_lvl // gcd_i if gcd_i else 1)
        # kernel lattice basis: columns of V * diag(scale)
        w_cols = [[v_[row_][i] * scale[i] for row_ in range(k)]
                  for i in range(k)]
        w = [[w_cols[j][i] for j in range(k)] for i in range(k)]  # k x k, cols = basis
    else:
        w = identity(k)
    # make sure D Z^k is inside the column span already (it is, but the SNF
    # basis may not include it explicitly; append and re-reduce)
    big = [[w[i][j] for j in range(k)] + [g.divisors[i] if i == t else 0
                                          for t in range(k)]
           for i in range(k)]
    d2, u2, v2 = smith_normal_form(big)
    # new basis for the perp lattice: W' = U2^{-1} * D2 restricted, but easier:
    # the column Hermite span of `big`; use SNF transforms to extract a basis.
    # columns of U2^{-1} * d2 give a basis of the span.
    u2_inv = _int_inverse(u2)
    wbasis = []
    for t in range(k):
        col = [sum(u2_inv[i][s] * d2[s][t] for s in range(k)) for i in range(k)]
        wbasis.append(col)
    w = [[wbasis[j][i] for j in range(k)] for i in range(k)]

    # lattice of H + D Z^k
    hcols = [list(t) for t in h.generators]
    for i in range(k):
        col = [0] * k
        col[i] = g.divisors[i]
        hcols.append(col)
    # express H-lattice in W coordinates: C = W^{-1} * Hcols
    from .exactmat import inverse_fraction
    w_inv = inverse_fraction(w)
    c = []
    for i in range(k):
        row = []
        for col in hcols:
            val = sum(w_inv[i][j] * col[j] for j in range(k))
            assert val.denominator == 1, "H lattice not inside perp lattice"
            row.append(int(val))
        c.append(row)
    e_mat, u3, v3 = smith_normal_form(c)
    u3_inv = _int_inverse(u3)

    # quotient group: Z^k / (U3-coords) with orders e_i
    orders = [e_mat[i][i] if i < min(len(e_mat), len(e_mat[0])) else 0
              for i in range(k)]
    # all orders nonzero because H + DZ^k has full rank
    keep = [i for i in range(k) if orders[i] > 1]
    divisors = [orders[i] for i in keep]

    def project(gamma):
        gamma = g.reduce(gamma)
        if gamma not in perp_set:
            raise ValueError("element is not in H^perp")
        y = [sum(w_inv[i][j] * gamma[j] for j in range(k)) for i in range(k)]
        assert all(v.denominator == 1 for v in y)
        z = [sum(u3[i][j] * int(y[j]) for j in range(k)) for i in range(k)]
        return tuple(z[i] % orders[i] for i in keep)

    # section: generator t of the quotient lifts to W * U3^{-1} e_t
    lifts = []
    for i in keep:
        col = [sum(w[r][s] * u3_inv[s][i] for s in range(k)) for r in range(k)]
        lifts.append(g.reduce(col))

    def section(coords):
        out = g.zero()
        for c_val, lift in zip(coords, lifts):
            out = g.add(out, g.smul(c_val, lift))
        return out

    q_gen = [g.q(lift) for lift in lifts]
    bil = [[g.pairing(a, b) for b in lifts] for a in lifts]
    quotient = DiscriminantForm(divisors, q_gen, bil, check=False)

    # well-definedness of the quotient form (q constant on cosets)
    for lift in lifts:
        for mu in h.elements:
            assert g.q(g.add(lift, mu)) == g.q(lift)

    return SubquotientData(h, perp, quotient, project, section)


def _int_inverse(u):
    """Inverse of a unimodular integer matrix, as integer matrix."""
    from .exactmat import inverse_fraction
    inv = inverse_fraction(u)
    out = []
    for row in inv:
        irow = []
        for x in row:
            assert x.denominator == 1
            irow.append(int(x))
        out.append(irow)
    return out


# ------------------------------------------------------------------------
# Coefficient vectors and lift / descent


class CoeffVector:
    """A finitely supported map G -> scalars (Fraction or CycNum)."""

    def __init__(self, form, data=None):
        self.form = form
        self.data = {}
        if data:
            for g, v in data.items():
                g = form.reduce(g)
                if not _sc_is_zero(v):
                    self.data[g] = v

    def __getitem__(self, g):
        return self.data.get(self.form.reduce(g), Fraction(0))

    def hermitian(self, other):
        """<self, other> = sum self_g * conj(other_g)."""
        tot = Fraction(0)
        for g, v in self.data.items():
            w = other.data.get(g)
            if w is not None:
                tot = _sc_add(tot, _sc_mul(v, _sc_conj(w)))
        return tot

    def scaled(self, c):
        return CoeffVector(self.form,
                           {g: _sc_mul(v, c) for g, v in self.data.items()})

    def __add__(self, other):
        out = dict(self.data)
        for g, v in other.data.items():
            out[g] = _sc_add(out.get(g, Fraction(0)), v)
        return CoeffVector(self.form, out)

    def __eq__(self, other):
        if not isinstance(other, CoeffVector):
            return NotImplemented
        keys = set(self.data) | set(other.data)
        return all(_sc_is_zero(_sc_add(self[g], _sc_mul(other[g], -1)))
                   for g in keys)

    def __repr__(self):
        return f"CoeffVector({self.data})"


def _sc_is_zero(v):
    if isinstance(v, CycNum):
        return v.is_zero()
    return v == 0


def _sc_add(a, b):
    if isinstance(a, CycNum) or isinstance(b, CycNum):
        if not isinstance(a, CycNum):
            a = CycNum.from_rational(a)
        return a + b
    return a + b


def _sc_mul(a, b):
    if isinstance(a, CycNum) or isinstance(b, CycNum):
        if not isinstance(a, CycNum):
            a = CycNum.from_rational(a)
        return a * b
    return a * b


def _sc_conj(a):
    if isinstance(a, CycNum):
        return a.conj()
    return a


def lift_up(sub: SubquotientData, vec: CoeffVector) -> CoeffVector:
    """Isotropic lift: e_{gamma+H} -> sum_{mu in H} e_{gamma+mu}."""
    if vec.form is not sub.quotient and vec.form != sub.quotient:
        raise ValueError("coefficient vector lives on the wrong quotient form")
    g = sub.subgroup.ambient
    out = {}
    for gbar, v in vec.data.items():
        base = sub.section(gbar)
        for mu in sub.subgroup.elements:
            t = g.add(base, mu)
            out[t] = _sc_add(out.get(t, Fraction(0)), v)
    return CoeffVector(g, out)


def descend_down(sub: SubquotientData, vec: CoeffVector) -> CoeffVector:
    """Isotropic descent: e_gamma -> e_{gamma+H} on H^perp, else 0."""
    g = sub.subgroup.ambient
    if vec.form is not g and vec.form != g:
        raise ValueError("coefficient vector lives on the wrong ambient form")
    perp = set(sub.perp)
    out = {}
    for gamma, v in vec.data.items():
        if gamma in perp:
            t = sub.project(gamma)
            out[t] = _sc_add(out.get(t, Fraction(0)), v)
    return CoeffVector(sub.quotient, out)


# ------------------------------------------------------------------------
# Automorphisms and isomorphisms


class FormIsomorphism:
    """A q-preserving group isomorphism, stored by generator images."""

    def __init__(self, src, dst, gen_images):
        self.src = src
        self.dst = dst
        self.gen_images = tuple(gen_images)
        self._table = None

    def apply(self, g):
        out = self.dst.zero()
        for c, img in zip(g, self.gen_images):
            out = self.dst.add(out, self.dst.smul(c, img))
        return out

    def table(self):
        if self._table is None:
            self._table = {g: self.apply(g) for g in self.src.elements()}
        return self._table

    def compose(self, other):
        """self after other (other: A->B, self: B->C)."""
        return FormIsomorphism(other.src, self.dst,
                               [self.apply(img) for img in other.gen_images])

    def __eq__(self, other):
        return (self.src == other.src and self.dst == other.dst
                and self.gen_images == other.gen_images)

    def __hash__(self):
        return hash(self.gen_images)

    def __repr__(self):
        return f"FormIso({self.gen_images})"


def isomorphisms(src, dst, bound=DEFAULT_GROUP_BOUND):
    """All q-preserving isomorphisms src -> dst, deterministically ordered.

    Brute force with q-value pruning on generator images.
    """
    if src.order > bound or dst.order > bound:
        raise ValueError(f"group order exceeds search bound {bound}")
    if src.order != dst.order or sorted(src.divisors) != sorted(dst.divisors):
        return []
    gens = src.gens()
    k = len(gens)
    elems = dst.elements()
    # candidates per generator: matching q and annihilated by d_i
    cand = []
    for i, gi in enumerate(gens):
        di = src.divisors[i]
        qi = src.q(gi)
        cand.append([x for x in elems
                     if dst.smul(di, x) == dst.zero() and dst.q(x) == qi])
    out = []

    def backtrack(idx, chosen):
        if idx == k:
            iso = FormIsomorphism(src, dst, chosen)
            image = {iso.apply(g) for g in src.elements()}
            if len(image) == src.order:
                out.append(iso)
            return
        gi = gens[idx]
        for x in cand[idx]:
            ok = True
            for j in range(idx):
                if dst.pairing(x, chosen[j]) != src.pairing(gi, gens[j]):
                    ok = False
                    break
            if ok:
                backtrack(idx + 1, chosen + [x])

    backtrack(0, [])
    out.sort(key=lambda iso: iso.gen_images)
    return out


def orthogonal_group(form, bound=DEFAULT_GROUP_BOUND):
    """All automorphisms of the form, closed under composition."""
    return isomorphisms(form, form, bound=bound)


def isotropic_subgroups(form, bound=DEFAULT_GROUP_BOUND):
    """All isotropic subgroups, each as a sorted element tuple."""
    if form.order > bound:
        raise ValueError(f"group order exceeds search bound {bound}")
    iso_elems = [g for g in form.elements() if form.q(g) == 0]
    seen = set()
    out = []
    frontier = [frozenset({form.zero()})]
    seen.add(frozenset({form.zero()}))
    while frontier:
        new = []
        for sub in frontier:
            for x in iso_elems:
                if x in sub:
                    continue
                gens = list(sub) + [x]
                closure = frozenset(_closure(form, gens))
                if closure in seen:
                    continue
                if all(form.q(h) == 0 for h in closure):
                    seen.add(closure)
                    new.append(closure)
        frontier = new
    out = sorted(seen, key=lambda s: (len(s), sorted(s)))
    return [tuple(sorted(s)) for s in out]
