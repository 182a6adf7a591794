"""Directed-rounding ball arithmetic on top of gmpy2 / MPFR.

A Ball is stored as a pair of mpfr endpoints [lo, hi] at a fixed working
precision, and presents the (center, radius, precision) view required by the
rest of the package.  Every operation rounds the lower endpoint toward -inf
and the upper endpoint toward +inf, so the result interval always contains
the exact image of the input intervals (soundness).  Balls are immutable.

Precision discipline: an operation on balls of mixed precision returns a
ball at the minimum of the input precisions.  Constants that are not exactly
representable (decimal strings, general rationals) become one-ulp-wide balls
via two directed conversions.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import gmpy2
from gmpy2 import mpfr, mpq

from .errors import DivisorContainsZero, DomainViolation

DEFAULT_PRECISION = 128
EXTENDED_PRECISION = 512


@lru_cache(maxsize=None)
def _ctxs(prec: int):
    """(round-down, round-up, round-nearest) context triple at *prec* bits."""
    if prec < 2:
        raise ValueError(f"precision must be >= 2 bits, got {prec}")
    dn = gmpy2.context(precision=prec, round=gmpy2.RoundDown)
    up = gmpy2.context(precision=prec, round=gmpy2.RoundUp)
    ne = gmpy2.context(precision=prec, round=gmpy2.RoundToNearest)
    return dn, up, ne


def _convert_pair(value, prec: int):
    """Directed conversions of an exact value; returns (lo, hi) mpfr pair."""
    dn, up, _ = _ctxs(prec)
    if isinstance(value, Fraction):
        value = mpq(value.numerator, value.denominator)
    with dn:
        lo = mpfr(value)
    with up:
        hi = mpfr(value)
    return lo, hi


class Ball:
    """Closed interval [lo, hi] with directed-rounding endpoint semantics."""

    __slots__ = ("_lo", "_hi", "_prec")

    def __init__(self, lo, hi, prec: int = DEFAULT_PRECISION):
        # Coerce endpoints outward so the stored pair never shrinks the input.
        object.__setattr__(self, "_lo", _round_endpoint(lo, prec, down=True))
        object.__setattr__(self, "_hi", _round_endpoint(hi, prec, down=False))
        object.__setattr__(self, "_prec", prec)
        if not self._lo <= self._hi:
            raise ValueError(f"invalid ball endpoints: lo={self._lo} > hi={self._hi}")

    def __setattr__(self, name, value):
        raise AttributeError("Ball is immutable")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def _raw(lo, hi, prec: int) -> "Ball":
        """Endpoints already directed-rounded at prec: skip re-rounding.

        Only for arithmetic-kernel use; the ordering check stays.
        """
        b = object.__new__(Ball)
        object.__setattr__(b, "_lo", lo)
        object.__setattr__(b, "_hi", hi)
        object.__setattr__(b, "_prec", prec)
        if not lo <= hi:
            raise ValueError(f"invalid ball endpoints: lo={lo} > hi={hi}")
        return b

    @staticmethod
    def exact(value, prec: int = DEFAULT_PRECISION) -> "Ball":
        """Ball from an exact int / Fraction / mpfr / decimal string.

        Values not representable at *prec* bits come back one ulp wide.
        """
        lo, hi = _convert_pair(value, prec)
        return Ball(lo, hi, prec)

    @staticmethod
    def from_endpoints(lo, hi, prec: int = DEFAULT_PRECISION) -> "Ball":
        return Ball(lo, hi, prec)

    @staticmethod
    def from_center_radius(center, radius, prec: int = DEFAULT_PRECISION) -> "Ball":
        dn, up, _ = _ctxs(prec)
        c_lo, c_hi = _convert_pair(center, prec)
        r_lo, r_hi = _convert_pair(radius, prec)
        if r_lo < 0:
            raise ValueError("radius must be nonnegative")
        return Ball(dn.sub(c_lo, r_hi), up.add(c_hi, r_hi), prec)

    # -- views ---------------------------------------------------------------

    @property
    def lo(self) -> mpfr:
        return self._lo

    @property
    def hi(self) -> mpfr:
        return self._hi

    @property
    def precision(self) -> int:
        return self._prec

    @property
    def center(self) -> mpfr:
        _, _, ne = _ctxs(self._prec)
        return ne.div(ne.add(self._lo, self._hi), 2)

    @property
    def radius(self) -> mpfr:
        _, up, _ = _ctxs(self._prec)
        c = self.center
        return max(up.sub(self._hi, c), up.sub(c, self._lo))

    def width(self) -> mpfr:
        _, up, _ = _ctxs(self._prec)
        return up.sub(self._hi, self._lo)

    def mid_exact(self) -> mpfr:
        """Exact midpoint (lo+hi)/2, carried at prec+8 bits so no rounding."""
        _, _, ne = _ctxs(self._prec + 8)
        return ne.div(ne.add(self._lo, self._hi), 2)

    # -- predicates ----------------------------------------------------------

    def contains(self, other) -> bool:
        """Membership of a number (int/Fraction/mpfr) or enclosure of a Ball."""
        if isinstance(other, Ball):
            return self._lo <= other._lo and other._hi <= self._hi
        q = _as_exact_number(other)
        return self._lo <= q <= self._hi

    def contains_interior(self, other: "Ball") -> bool:
        return self._lo < other._lo and other._hi < self._hi

    def contains_zero(self) -> bool:
        return self._lo <= 0 <= self._hi

    def is_positive(self) -> bool:
        return self._lo > 0

    def is_negative(self) -> bool:
        return self._hi < 0

    def overlaps(self, other: "Ball") -> bool:
        return self._lo <= other._hi and other._lo <= self._hi

    # -- lattice -------------------------------------------------------------

    def union(self, other: "Ball") -> "Ball":
        prec = min(self._prec, other._prec)
        return Ball(min(self._lo, other._lo), max(self._hi, other._hi), prec)

    def intersect(self, other: "Ball"):
        """Intersection ball, or None when the intervals are disjoint."""
        prec = min(self._prec, other._prec)
        lo = max(self._lo, other._lo)
        hi = min(self._hi, other._hi)
        if lo > hi:
            return None
        return Ball(lo, hi, prec)

    # -- operators ------------------------------------------------------------

    def __add__(self, other):
        return add(self, _coerce(other, self._prec))

    def __radd__(self, other):
        return add(_coerce(other, self._prec), self)

    def __sub__(self, other):
        return sub(self, _coerce(other, self._prec))

    def __rsub__(self, other):
        return sub(_coerce(other, self._prec), self)

    def __mul__(self, other):
        return mul(self, _coerce(other, self._prec))

    def __rmul__(self, other):
        return mul(_coerce(other, self._prec), self)

    def __truediv__(self, other):
        return div(self, _coerce(other, self._prec))

    def __rtruediv__(self, other):
        return div(_coerce(other, self._prec), self)

    def __neg__(self):
        # gmpy2 unary minus rounds at the *global* context; negate explicitly.
        dn, up, _ = _ctxs(self._prec)
        return Ball._raw(dn.minus(self._hi), up.minus(self._lo), self._prec)

    def __abs__(self):
        return absolute(self)

    def __repr__(self):
        return f"Ball[{self._lo!r}, {self._hi!r}; prec={self._prec}]"

    def __eq__(self, other):
        return (
            isinstance(other, Ball)
            and self._lo == other._lo
            and self._hi == other._hi
            and self._prec == other._prec
        )

    def __hash__(self):
        return hash((str(self._lo), str(self._hi), self._prec))


def _round_endpoint(x, prec: int, down: bool) -> mpfr:
    dn, up, _ = _ctxs(prec)
    ctx = dn if down else up
    if isinstance(x, mpfr) and x.precision <= prec:
        # Re-rounding at >= precision is exact; keep canonical precision.
        with ctx:
            return mpfr(x)
    if isinstance(x, (int,)):
        with ctx:
            return mpfr(x)
    if isinstance(x, Fraction):
        with ctx:
            return mpfr(mpq(x.numerator, x.denominator))
    with ctx:
        return mpfr(x)


def _as_exact_number(x):
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, float):
        raise TypeError("refusing float membership test; pass Fraction/mpfr/str")
    if isinstance(x, str):
        # Exact decimal: scale to an integer ratio.
        return mpq(Fraction(x).numerator, Fraction(x).denominator)
    return x


def _coerce(x, prec: int) -> Ball:
    if isinstance(x, Ball):
        return x
    if isinstance(x, (int, Fraction, mpfr)):
        return Ball.exact(x, prec)
    raise TypeError(f"cannot coerce {type(x).__name__} to Ball")


# -- binary operations ---------------------------------------------------------


def add(a: Ball, b: Ball) -> Ball:
    prec = a._prec if a._prec <= b._prec else b._prec
    dn, up, _ = _ctxs(prec)
    return Ball._raw(dn.add(a._lo, b._lo), up.add(a._hi, b._hi), prec)


def sub(a: Ball, b: Ball) -> Ball:
    prec = a._prec if a._prec <= b._prec else b._prec
    dn, up, _ = _ctxs(prec)
    return Ball._raw(dn.sub(a._lo, b._hi), up.sub(a._hi, b._lo), prec)


def mul(a: Ball, b: Ball) -> Ball:
    prec = a._prec if a._prec <= b._prec else b._prec
    dn, up, _ = _ctxs(prec)
    al, ah, bl, bh = a._lo, a._hi, b._lo, b._hi
    # Sign-split the common cases; the mixed case falls back to 4 corners.
    if al >= 0:
        if bl >= 0:
            return Ball._raw(dn.mul(al, bl), up.mul(ah, bh), prec)
        if bh <= 0:
            return Ball._raw(dn.mul(ah, bl), up.mul(al, bh), prec)
        return Ball._raw(dn.mul(ah, bl), up.mul(ah, bh), prec)
    if ah <= 0:
        if bl >= 0:
            return Ball._raw(dn.mul(al, bh), up.mul(ah, bl), prec)
        if bh <= 0:
            return Ball._raw(dn.mul(ah, bh), up.mul(al, bl), prec)
        return Ball._raw(dn.mul(al, bh), up.mul(al, bl), prec)
    lo = min(dn.mul(al, bl), dn.mul(al, bh), dn.mul(ah, bl), dn.mul(ah, bh))
    hi = max(up.mul(al, bl), up.mul(al, bh), up.mul(ah, bl), up.mul(ah, bh))
    return Ball._raw(lo, hi, prec)


def div(a: Ball, b: Ball) -> Ball:
    if b._lo <= 0 <= b._hi:
        raise DivisorContainsZero(f"divisor {b!r} contains zero")
    prec = a._prec if a._prec <= b._prec else b._prec
    dn, up, _ = _ctxs(prec)
    al, ah, bl, bh = a._lo, a._hi, b._lo, b._hi
    if bl > 0:
        if al >= 0:
            return Ball._raw(dn.div(al, bh), up.div(ah, bl), prec)
        if ah <= 0:
            return Ball._raw(dn.div(al, bl), up.div(ah, bh), prec)
        return Ball._raw(dn.div(al, bl), up.div(ah, bl), prec)
    if al >= 0:
        return Ball._raw(dn.div(ah, bh), up.div(al, bl), prec)
    if ah <= 0:
        return Ball._raw(dn.div(ah, bl), up.div(al, bh), prec)
    return Ball._raw(dn.div(ah, bh), up.div(al, bh), prec)


# -- elementary functions -------------------------------------------------------


def sqrt(a: Ball) -> Ball:
    if a._lo < 0:
        raise DomainViolation(f"sqrt of ball {a!r} containing negatives")
    dn, up, _ = _ctxs(a._prec)
    return Ball._raw(dn.sqrt(a._lo), up.sqrt(a._hi), a._prec)


def log(a: Ball) -> Ball:
    if a._lo <= 0:
        raise DomainViolation(f"log of ball {a!r} touching (-inf, 0]")
    dn, up, _ = _ctxs(a._prec)
    return Ball._raw(dn.log(a._lo), up.log(a._hi), a._prec)


def exp(a: Ball) -> Ball:
    dn, up, _ = _ctxs(a._prec)
    return Ball._raw(dn.exp(a._lo), up.exp(a._hi), a._prec)


def cos(a: Ball) -> Ball:
    """Enclosure of cos over the interval: endpoint value widened by the
    interval width (|cos'| <= 1), clamped to [-1, 1]."""
    prec = a._prec
    dn, up, _ = _ctxs(prec)
    w = up.sub(a._hi, a._lo)
    lo = dn.sub(dn.cos(a._lo), w)
    hi = up.add(up.cos(a._lo), w)
    return Ball._raw(max(lo, mpfr(-1)), min(hi, mpfr(1)), prec)


def absolute(a: Ball) -> Ball:
    if a._lo >= 0:
        return a
    if a._hi <= 0:
        return -a
    _, up, _ = _ctxs(a._prec)
    return Ball._raw(mpfr(0), max(up.minus(a._lo), a._hi), a._prec)


def _pow_point_dir(x: mpfr, t: mpfr, prec: int, down: bool) -> mpfr:
    """Directed x**t for x > 0 via exp(t*log x) with sound rounding chains."""
    dn, up, _ = _ctxs(prec)
    out = dn if down else up
    if x == 1:
        return out.add(mpfr(0), 1)
    # Lower bound of t*log(x) wants log rounded toward the result direction,
    # accounting for the sign of t; mul/exp then keep the same direction.
    want_low = down
    if t >= 0:
        lx = (dn if want_low else up).log(x)
    else:
        lx = (up if want_low else dn).log(x)
    y = out.mul(t, lx)
    return out.exp(y)


def pow_real(a: Ball, t) -> Ball:
    """a**t for a strictly positive ball and a real (mpfr/int/Fraction) t."""
    prec = a.precision
    if a.lo <= 0:
        raise DomainViolation(f"pow_real of ball {a!r} touching (-inf, 0]")
    t_lo, t_hi = _convert_pair(t, prec)
    if t_lo != t_hi:
        # Exponent itself carries rounding error: bound over both corners.
        lo_cands = []
        hi_cands = []
        for tt in (t_lo, t_hi):
            lo_cands.append(min(_pow_point_dir(a.lo, tt, prec, True),
                                _pow_point_dir(a.hi, tt, prec, True)))
            hi_cands.append(max(_pow_point_dir(a.lo, tt, prec, False),
                                _pow_point_dir(a.hi, tt, prec, False)))
        return Ball(min(lo_cands), max(hi_cands), prec)
    t_m = t_lo
    if t_m >= 0:
        lo = _pow_point_dir(a.lo, t_m, prec, True)
        hi = _pow_point_dir(a.hi, t_m, prec, False)
    else:
        lo = _pow_point_dir(a.hi, t_m, prec, True)
        hi = _pow_point_dir(a.lo, t_m, prec, False)
    return Ball(lo, hi, prec)


def hull(balls) -> Ball:
    balls = list(balls)
    if not balls:
        raise ValueError("hull of empty collection")
    out = balls[0]
    for b in balls[1:]:
        out = out.union(b)
    return out
