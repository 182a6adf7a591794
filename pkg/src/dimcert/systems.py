"""Families of contracting inverse branches with certified geometry.

Each family packages the inverse branches S_1 < ... < S_n of a piecewise
expanding map R on a closed interval.  The dimension machinery only ever
touches the branches (values, first three derivatives, and log of the
absolute slope), so everything here is organised around two calls:

  * ``Branch.evaluate(y)``      certified enclosure of S_j(y),
  * ``Branch.jet(c, r, p)``     Taylor jets of S_j and of log|S_j'| on a
                                subinterval, both lanes certified.

Four families are provided.

``sierpinski:d=<n>``   branches invert R(x) = x(A - x) with A = n + 3; the
                       two inverse branches have the closed forms
                       (A -+ sqrt(A^2 - 4x))/2 and are handled exactly.

``sg3``                branches invert the quartic-over-linear map
                       R(x) = 3x(5 - x)(4 - x)(3 - x)/(14 - 3x) on [0, 6].
                       Four monotone branches, isolated in disjoint dyadic
                       brackets; since R(x) = y clears denominators to a
                       genuine quartic, four brackets each holding a root
                       account for every preimage, so the bracket list is
                       complete by a degree count.

``vicsek``             branches invert R(z) = z(6z + 3)(6z + 5) on [-1, 0];
                       three monotone branches split by the critical points
                       (-8 +- sqrt(19))/18.

``cantor:r=<q>,k=<n>`` affine model: k equally spaced maps of exact rational
                       ratio q on [0, 1].  Exists purely as a ground-truth
                       family (dimension log k / log(1/q)).

Construction is not trusted input: every constructor certifies, with ball
arithmetic, that (a) the derivative of R is sign-definite on each isolation
bracket, (b) R spans the full codomain across each bracket, (c) branch
images land inside the domain and in strictly increasing disjoint order,
and (d) |R'| > 1 on every branch image, i.e. the branches contract.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import gmpy2
from gmpy2 import mpfr

from . import balls, jets, rootfind
from .balls import Ball, DEFAULT_PRECISION
from .errors import DomainViolation, OverlapError, UnknownFamily
from .jets import TaylorJet


# ---------------------------------------------------------------------------
# integer polynomial helpers (ascending coefficient tuples)

def _pderiv(c):
    return tuple(i * c[i] for i in range(1, len(c)))


def _pmul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return tuple(out)


def _padd(a, b):
    n = max(len(a), len(b))
    a = a + (0,) * (n - len(a))
    b = b + (0,) * (n - len(b))
    return tuple(x + y for x, y in zip(a, b))


def _pscale(a, k):
    return tuple(k * x for x in a)


def _horner_jet(coeffs, jet: TaylorJet, prec: int) -> TaylorJet:
    acc = TaylorJet.constant(Ball.exact(coeffs[-1], prec), jet)
    for c in reversed(coeffs[:-1]):
        acc = acc * jet + Ball.exact(c, prec)
    return acc


class RationalMap:
    """Rational function N/D with exact integer coefficients.

    Carries the numerators of the first three derivatives, obtained by the
    quotient rule without ever expanding the growing denominator powers:
    if R^(k) = P_k / D^(k+1) then P_(k+1) = P_k' D - (k+1) P_k D'.
    """

    __slots__ = ("num", "den", "deriv_nums")

    def __init__(self, num, den=(1,)):
        self.num = tuple(num)
        self.den = tuple(den)
        dd = _pderiv(self.den) or (0,)
        ps = []
        p = self.num
        for k in range(3):
            p = _padd(_pmul(_pderiv(p) or (0,), self.den),
                      _pscale(_pmul(p, dd), -(k + 1)))
            ps.append(p)
        self.deriv_nums = tuple(ps)

    def value_ball(self, x: Ball) -> Ball:
        n = rootfind.horner_ball(self.num, x)
        if self.den == (1,):
            return n
        return balls.div(n, rootfind.horner_ball(self.den, x))

    def derivative_ball(self, x: Ball, order: int = 1) -> Ball:
        p = rootfind.horner_ball(self.deriv_nums[order - 1], x)
        if self.den == (1,):
            return p
        d = rootfind.horner_ball(self.den, x)
        q = d
        for _ in range(order):
            q = balls.mul(q, d)
        return balls.div(p, q)

    def value_float(self, x: float) -> float:
        n = rootfind.horner_float(self.num, x)
        if self.den == (1,):
            return n
        return n / rootfind.horner_float(self.den, x)

    def derivative_jet(self, sjet: TaylorJet, prec: int) -> TaylorJet:
        """Jet of R' composed with the given jet."""
        p = _horner_jet(self.deriv_nums[0], sjet, prec)
        if self.den == (1,):
            return p
        d = _horner_jet(self.den, sjet, prec)
        return p / (d * d)


# ---------------------------------------------------------------------------
# branches

class _RationalBranch:
    """Monotone inverse branch of a RationalMap, isolated in a bracket.

    ``cover`` brackets the root for every admissible y; ``newton`` is a
    slightly wider interval on which R' was certified sign-definite, so the
    interval Newton contraction may straddle roots sitting exactly on a
    cover endpoint.
    """

    __slots__ = ("rmap", "cover", "newton", "monotonic", "image",
                 "precision", "index")

    def __init__(self, rmap: RationalMap, cover, newton, monotonic: int,
                 prec: int):
        self.rmap = rmap
        self.cover = cover
        self.newton = newton
        self.monotonic = monotonic
        self.precision = prec
        self.image = None
        self.index = None

    def evaluate(self, y: Ball) -> Ball:
        return rootfind.isolate_monotone_root(
            self.rmap.value_ball, self.rmap.derivative_ball,
            self.newton[0], self.newton[1],
            self.cover[0], self.cover[1],
            y, self.precision, f_float=self.rmap.value_float,
        )

    def value_and_slope_log(self, y: Ball):
        s = self.evaluate(y)
        r1 = self.rmap.derivative_ball(s, 1)
        return s, -balls.log(balls.absolute(r1))

    def jet(self, center: Ball, radius, order: int):
        if order > 3:
            raise ValueError(
                "implicit-inverse jets carry derivative slots up to order 3")
        prec = self.precision
        x = TaylorJet.variable(center, radius, order, prec)
        s_lo = self.evaluate(Ball.exact(x.domain.lo, prec))
        s_hi = self.evaluate(Ball.exact(x.domain.hi, prec))
        s_c = self.evaluate(center)
        s_rng = s_lo.union(s_hi)

        def slopes(v: Ball, top: int):
            # S' = 1/R'(S); the higher slots fall out of differentiating
            # the identity R(S(x)) = x.
            r1 = self.rmap.derivative_ball(v, 1)
            s1 = balls.div(Ball.exact(1, prec), r1)
            out = [v, s1]
            if top >= 2:
                r2 = self.rmap.derivative_ball(v, 2)
                s1_3 = balls.mul(balls.mul(s1, s1), s1)
                out.append(-balls.mul(r2, s1_3))
            if top >= 3:
                r3 = self.rmap.derivative_ball(v, 3)
                s1_4 = balls.mul(s1_3, s1)
                s1_5 = balls.mul(s1_4, s1)
                t1 = balls.mul(r3, s1_4)
                t2 = balls.mul(balls.mul(r2, r2), s1_5)
                out.append(balls.sub(balls.mul(Ball.exact(3, prec), t2), t1))
            return out

        point = slopes(s_c, order - 1)[:order]
        rng = slopes(s_rng, order)[: order + 1]
        sjet = TaylorJet(center, x.domain, order, point, rng)
        ujet = self.rmap.derivative_jet(sjet, prec)
        ljet = -jets.log(jets.absolute(ujet))
        return sjet, ljet


class _SqrtBranch:
    """Closed-form inverse branch (A + sign*sqrt(A^2 - 4x))/2."""

    __slots__ = ("a", "sign", "monotonic", "image", "precision", "index")

    def __init__(self, a: int, sign: int, prec: int):
        self.a = a
        self.sign = sign
        self.monotonic = -sign
        self.precision = prec
        self.image = None
        self.index = None

    def _radicand(self, y: Ball) -> Ball:
        prec = self.precision
        return balls.sub(Ball.exact(self.a * self.a, prec),
                         balls.mul(Ball.exact(4, prec), y))

    def evaluate(self, y: Ball) -> Ball:
        prec = self.precision
        w = balls.sqrt(self._radicand(y))
        if self.sign < 0:
            w = -w
        s = balls.add(Ball.exact(self.a, prec), w)
        return balls.mul(s, Ball.exact(Fraction(1, 2), prec))

    def value_and_slope_log(self, y: Ball):
        # |S'| = (A^2 - 4y)^(-1/2) for either sign.
        half = Ball.exact(Fraction(-1, 2), self.precision)
        return self.evaluate(y), balls.mul(balls.log(self._radicand(y)), half)

    def jet(self, center: Ball, radius, order: int):
        prec = self.precision
        x = TaylorJet.variable(center, radius, order, prec)
        u = x.scale(Ball.exact(-4, prec)) + Ball.exact(self.a * self.a, prec)
        w = jets.sqrt(u)
        half = Ball.exact(Fraction(self.sign, 2), prec)
        sjet = w.scale(half) + Ball.exact(Fraction(self.a, 2), prec)
        # |S'| = (A^2 - 4x)^(-1/2), so log|S'| = -log(u)/2.
        ljet = jets.log(u).scale(Ball.exact(Fraction(-1, 2), prec))
        return sjet, ljet


class _AffineBranch:
    """Exact affine branch ratio*x + offset with rational coefficients."""

    __slots__ = ("ratio", "offset", "monotonic", "image", "precision",
                 "index")

    def __init__(self, ratio: Fraction, offset: Fraction, prec: int):
        self.ratio = ratio
        self.offset = offset
        self.monotonic = 1
        self.precision = prec
        self.image = None
        self.index = None

    def evaluate(self, y: Ball) -> Ball:
        prec = self.precision
        return balls.add(balls.mul(y, Ball.exact(self.ratio, prec)),
                         Ball.exact(self.offset, prec))

    def value_and_slope_log(self, y: Ball):
        return self.evaluate(y), balls.log(Ball.exact(self.ratio,
                                                      self.precision))

    def jet(self, center: Ball, radius, order: int):
        prec = self.precision
        x = TaylorJet.variable(center, radius, order, prec)
        sjet = x.scale(Ball.exact(self.ratio, prec)) \
            + Ball.exact(self.offset, prec)
        lval = balls.log(Ball.exact(self.ratio, prec))
        ljet = TaylorJet.constant(lval, x)
        return sjet, ljet


# ---------------------------------------------------------------------------
# systems

class BranchSystem:
    __slots__ = ("name", "domain", "branches", "rational", "precision",
                 "meta", "max_jet_order")

    def __init__(self, name, domain, branches, rational, precision, meta,
                 max_jet_order: int = None):
        self.name = name
        self.domain = domain
        self.branches = tuple(branches)
        self.rational = rational
        self.precision = precision
        self.meta = dict(meta)
        # Implicit-inverse branches carry derivative recurrences only up to
        # the third slot; closed-form branches expand as deep as jets allow.
        self.max_jet_order = max_jet_order if max_jet_order is not None \
            else jets.MAX_ORDER
        for i, b in enumerate(self.branches):
            b.index = i

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def domain_ball(self) -> Ball:
        return Ball.from_endpoints(
            mpfr(self.domain[0], precision=self.precision + 8),
            mpfr(self.domain[1], precision=self.precision + 8),
            self.precision,
        )

    def branch_values(self, y: Ball):
        return tuple(b.evaluate(y) for b in self.branches)


def _domain_slack(prec: int) -> mpfr:
    return mpfr(2) ** (8 - prec)


def _check_images(branches, domain, prec, strict: bool,
                  err=DomainViolation):
    # All comparisons at extended precision; the global (53-bit) mpfr
    # context must never touch these endpoints.
    up = balls._ctxs(prec + 16)[1]
    lo = mpfr(domain[0], precision=prec + 8)
    hi = mpfr(domain[1], precision=prec + 8)
    scale = max(lo, up.minus(lo), hi, up.minus(hi), mpfr(1))
    tol = up.mul(_domain_slack(prec), scale)
    for b in branches:
        if up.sub(lo, b.image.lo) > tol or up.sub(b.image.hi, hi) > tol:
            raise err(f"branch image {b.image} escapes domain [{lo},{hi}]")
    for a, b in zip(branches, branches[1:]):
        gap_ok = a.image.hi < b.image.lo if strict \
            else up.sub(a.image.hi, b.image.lo) <= tol
        if not gap_ok:
            raise err("branch images out of order or overlapping")


def _certify_rational_family(rmap: RationalMap, branches, domain, prec):
    """Sign-definiteness, covering, images, and contraction, all certified."""
    p1 = rmap.deriv_nums[0]
    dlo = Ball.exact(domain[0], prec)
    dhi = Ball.exact(domain[1], prec)
    for b in branches:
        sign = rootfind.certified_sign(
            lambda x: rootfind.horner_ball(p1, x),
            b.newton[0], b.newton[1], prec)
        den_sq_sign = 1
        if rmap.den != (1,):
            # R' = P1/D^2 keeps the sign of P1 wherever D is nonzero; make
            # sure the bracket stays clear of the pole.
            rootfind.certified_sign(
                lambda x: rootfind.horner_ball(rmap.den, x),
                b.cover[0], b.cover[1], prec)
        if sign * den_sq_sign != b.monotonic:
            raise DomainViolation(
                f"declared monotonicity {b.monotonic} contradicts certified "
                f"derivative sign {sign}")
        # R must span the whole codomain across the cover bracket.
        v_left = rmap.value_ball(Ball.exact(b.cover[0], prec))
        v_right = rmap.value_ball(Ball.exact(b.cover[1], prec))
        if b.monotonic < 0:
            v_left, v_right = v_right, v_left
        if not (v_left.lo <= dlo.lo and v_right.hi >= dhi.hi):
            raise DomainViolation(
                f"bracket {b.cover} does not span the codomain")
        # Image from the endpoint roots; monotone, so the hull is exact.
        e0 = b.evaluate(dlo)
        e1 = b.evaluate(dhi)
        b.image = e0.union(e1)
        # Contraction: |R'| > 1 on the image, i.e. sign*P1 - D^2 > 0 there.
        g = _padd(_pscale(p1, b.monotonic),
                  _pscale(_pmul(rmap.den, rmap.den), -1))
        if rootfind.certified_sign(
                lambda x: rootfind.horner_ball(g, x),
                b.image.lo, b.image.hi, prec) != 1:
            raise DomainViolation("branch fails the expansion bound")
    _check_images(branches, domain, prec, strict=True)


def make_sierpinski_gasket(d: int, precision: int = DEFAULT_PRECISION):
    """Two-branch system inverting x(A - x) with A = d + 3, domain [0, A]."""
    if not isinstance(d, int) or d < 2:
        raise DomainViolation(f"gasket rank must be an integer >= 2, got {d}")
    a = d + 3
    prec = precision
    rmap = RationalMap((0, a, -1))
    lower = _SqrtBranch(a, -1, prec)
    upper = _SqrtBranch(a, +1, prec)
    # A^2 - 4x >= A^2 - 4A > 1 on the domain: radicand stays positive and
    # the slope bound |S'| = (A^2-4x)^(-1/2) < 1 is certified in one stroke.
    if rootfind.certified_sign(
            lambda x: rootfind.horner_ball((a * a - 1, -4), x),
            0, a, prec) != 1:
        raise DomainViolation("gasket branches are not contracting")
    zero = Ball.exact(0, prec)
    top = Ball.exact(a, prec)
    lower.image = lower.evaluate(zero).union(lower.evaluate(top))
    upper.image = upper.evaluate(zero).union(upper.evaluate(top))
    branches = (lower, upper)
    _check_images(branches, (0, a), prec, strict=True)
    return BranchSystem(f"sierpinski:d={d}", (0, a), branches, rmap, prec,
                        {"d": d, "vertex_degree_parameter": a})


_SG3_NUM = (0, 180, -141, 36, -3)
_SG3_DEN = (14, -3)
_SG3_BRACKETS = (
    # (cover, newton, monotonic); endpoints are exact dyadics.
    ((Fraction(0), Fraction(13, 16)),
     (Fraction(-1, 16), Fraction(13, 16)), +1),
    ((Fraction(3, 2), Fraction(3)),
     (Fraction(3, 2), Fraction(49, 16)), -1),
    ((Fraction(63, 16), Fraction(71, 16)),
     (Fraction(63, 16), Fraction(71, 16)), +1),
    ((Fraction(79, 16), Fraction(6)),
     (Fraction(79, 16), Fraction(6)), +1),
)


def make_sg3(precision: int = DEFAULT_PRECISION):
    """Four-branch system for the level-3 triangle lattice map on [0, 6]."""
    prec = precision
    rmap = RationalMap(_SG3_NUM, _SG3_DEN)
    branches = tuple(
        _RationalBranch(rmap, cover, newton, mono, prec)
        for cover, newton, mono in _SG3_BRACKETS
    )
    _certify_rational_family(rmap, branches, (0, 6), prec)
    return BranchSystem("sg3", (0, 6), branches, rmap, prec, {},
                        max_jet_order=3)


_VICSEK_NUM = (0, 15, 48, 36)
_VICSEK_BRACKETS = (
    ((Fraction(-1), Fraction(-3, 4)),
     (Fraction(-1), Fraction(-3, 4)), +1),
    ((Fraction(-9, 16), Fraction(-1, 4)),
     (Fraction(-9, 16), Fraction(-1, 4)), -1),
    ((Fraction(-1, 8), Fraction(0)),
     (Fraction(-1, 8), Fraction(1, 16)), +1),
)


def make_vicsek(precision: int = DEFAULT_PRECISION):
    """Three-branch system for the plus-shaped lattice cubic on [-1, 0]."""
    prec = precision
    rmap = RationalMap(_VICSEK_NUM)
    branches = tuple(
        _RationalBranch(rmap, cover, newton, mono, prec)
        for cover, newton, mono in _VICSEK_BRACKETS
    )
    _certify_rational_family(rmap, branches, (-1, 0), prec)
    return BranchSystem("vicsek", (-1, 0), branches, rmap, prec, {},
                        max_jet_order=3)


def make_affine_cantor(ratio, k: int, precision: int = DEFAULT_PRECISION):
    """k affine maps of rational contraction ratio, equally spaced on [0, 1]."""
    ratio = Fraction(ratio)
    if not (0 < ratio < 1):
        raise DomainViolation(f"contraction ratio must be in (0, 1): {ratio}")
    if not isinstance(k, int) or k < 2:
        raise DomainViolation(f"need at least two maps, got {k}")
    if ratio * k > 1:
        raise OverlapError(
            f"ratio {ratio} with {k} maps forces interior overlap")
    prec = precision
    step = (1 - ratio) / (k - 1)
    branches = []
    for j in range(k):
        b = _AffineBranch(ratio, j * step, prec)
        b.image = b.evaluate(Ball.exact(0, prec)).union(
            b.evaluate(Ball.exact(1, prec)))
        branches.append(b)
    _check_images(branches, (0, 1), prec, strict=False, err=OverlapError)
    return BranchSystem(f"cantor:r={ratio},k={k}", (0, 1), branches, None,
                        prec, {"ratio": ratio, "k": k})


# ---------------------------------------------------------------------------
# registry

def moran_bracket(d: int, precision: int = DEFAULT_PRECISION):
    """A-priori dimension bounds for the rank-d gasket family.

    Lower bound log 2 / log(d+3); upper bound 2 log 2 over the sum of the
    logs of d+3 and d-1 (for d = 2 the second log vanishes and the upper
    bound is just twice the lower one).
    """
    if not isinstance(d, int) or d < 2:
        raise DomainViolation(f"gasket rank must be an integer >= 2, got {d}")
    ne = balls._ctxs(precision)[2]
    log2 = ne.log(mpfr(2))
    lo = ne.div(log2, ne.log(mpfr(d + 3)))
    hi = ne.div(ne.mul(log2, 2),
                ne.add(ne.log(mpfr(d + 3)), ne.log(mpfr(d - 1))))
    return lo, hi


def _parse_kv(args: str):
    out = {}
    for piece in args.split(","):
        if "=" not in piece:
            raise UnknownFamily(f"malformed family argument {piece!r}")
        key, _, val = piece.partition("=")
        out[key.strip()] = val.strip()
    return out


@lru_cache(maxsize=None)
def get_system(name: str, precision: int = DEFAULT_PRECISION) -> BranchSystem:
    """Build (and cache) the branch system named by a registry string."""
    text = name.strip()
    head, _, args = text.partition(":")
    head = head.lower()
    try:
        if head == "sg3" and not args:
            return make_sg3(precision)
        if head == "vicsek" and not args:
            return make_vicsek(precision)
        if head == "sierpinski":
            kv = _parse_kv(args)
            if set(kv) != {"d"}:
                raise UnknownFamily(f"gasket family needs d=<int>: {text!r}")
            return make_sierpinski_gasket(int(kv["d"]), precision)
        if head == "cantor":
            kv = _parse_kv(args)
            if set(kv) != {"r", "k"}:
                raise UnknownFamily(
                    f"cantor family needs r=<ratio>,k=<int>: {text!r}")
            return make_affine_cantor(Fraction(kv["r"]), int(kv["k"]),
                                      precision)
    except (ValueError, ZeroDivisionError) as exc:
        raise UnknownFamily(f"cannot parse family {text!r}: {exc}") from None
    raise UnknownFamily(f"no family named {text!r}")
