"""Derivative-slot soundness of the jet layer.

Closed-form derivatives (rational wherever possible, 512-bit point
evaluations otherwise) must land inside the corresponding jet slots, and
the interval-wide range lane must dominate the point lane.
"""

from fractions import Fraction

import gmpy2
import pytest
from gmpy2 import mpfr

from dimcert import balls, jets
from dimcert.balls import Ball
from dimcert.errors import DivisorContainsZero, DomainViolation
from dimcert.jets import MAX_ORDER, TaylorJet

PREC = 128
HIGH = gmpy2.context(precision=4 * PREC)


def to_fraction(x: mpfr) -> Fraction:
    return Fraction(*x.as_integer_ratio())


def contains_fraction(ball: Ball, value: Fraction) -> bool:
    return to_fraction(ball.lo) <= value <= to_fraction(ball.hi)


def contains_mpfr(ball: Ball, value: mpfr) -> bool:
    return contains_fraction(ball, to_fraction(value))


def var(center: Fraction, radius: Fraction, order: int) -> TaylorJet:
    return TaylorJet.variable(Ball.exact(center, PREC), radius, order, PREC)


def const(value, like: TaylorJet) -> TaylorJet:
    return TaylorJet.constant(Ball.exact(value, PREC), like)


def test_square_jet_slots():
    v = var(Fraction(1), Fraction(1, 16), 2)
    sq = v * v
    # h(1) = 1, h'(1) = 2, and the interval-wide second derivative is 2
    assert contains_fraction(sq.point[0], Fraction(1))
    assert contains_fraction(sq.point[1], Fraction(2))
    assert contains_fraction(sq.rng[2], Fraction(2))
    lo, hi = Fraction(15, 16), Fraction(17, 16)
    assert contains_fraction(sq.rng[0], lo * lo)
    assert contains_fraction(sq.rng[0], hi * hi)
    assert sq.coefficients == sq.point + (sq.rng[2],)


def test_rational_jet_value_and_slope():
    v = var(Fraction(0), Fraction(1, 32), 3)
    h = (v * v + Ball.exact(1, PREC)) / (v + Ball.exact(2, PREC))
    # (x^2+1)/(x+2) at 0 is 1/2 with slope -1/4
    assert contains_fraction(h.value_at_center(), Fraction(1, 2))
    assert contains_fraction(h.point[1], Fraction(-1, 4))
    assert h.value_at_center().width() < 1e-30


def test_sqrt_affine_jet_slots():
    v = var(Fraction(0), Fraction(1, 64), 3)
    s = jets.sqrt(v.scale(Ball.exact(-4, PREC)) + Ball.exact(25, PREC))
    # sqrt(25 - 4x) at 0: value 5, slope -2/5, curvature -4/125
    assert contains_fraction(s.point[0], Fraction(5))
    assert contains_fraction(s.point[1], Fraction(-2, 5))
    assert contains_fraction(s.point[2], Fraction(-4, 125))
    assert s.point[0].width() < 1e-30


def test_log_derivative_closed_forms():
    c = Fraction(7, 4)
    w = jets.log(var(c, Fraction(1, 128), 6))
    with HIGH:
        oracle0 = gmpy2.log(mpfr(gmpy2.mpq(7, 4), precision=4 * PREC))
    assert contains_mpfr(w.point[0], oracle0)
    sign = 1
    for k in range(1, 6):
        # d^k/dx^k log x = (-1)^(k-1) (k-1)! / x^k
        exact = sign * Fraction(gmpy2.fac(k - 1)) / c**k
        assert contains_fraction(w.point[k], exact), f"slot {k}"
        sign = -sign


def test_exp_derivative_closed_forms():
    c = Fraction(-3, 8)
    e = jets.exp(var(c, Fraction(1, 256), 5))
    with HIGH:
        oracle = gmpy2.exp(mpfr(gmpy2.mpq(-3, 8), precision=4 * PREC))
    for k in range(5):
        assert contains_mpfr(e.point[k], oracle), f"slot {k}"
    assert contains_mpfr(e.rng[5], oracle)


def test_reciprocal_derivative_closed_forms():
    c = Fraction(5, 3)
    r = jets.reciprocal(var(c, Fraction(1, 100), 5))
    sign = 1
    for k in range(5):
        # d^k/dx^k (1/x) = (-1)^k k! / x^(k+1)
        exact = sign * Fraction(gmpy2.fac(k)) / c ** (k + 1)
        assert contains_fraction(r.point[k], exact), f"slot {k}"
        sign = -sign


def test_pow_real_rational_exponent():
    p = jets.pow_real(var(Fraction(4), Fraction(1, 64), 3), Fraction(3, 2))
    # x^(3/2) at 4: value 8, slope 3, curvature 3/8
    assert contains_fraction(p.point[0], Fraction(8))
    assert contains_fraction(p.point[1], Fraction(3))
    assert contains_fraction(p.point[2], Fraction(3, 8))


def test_range_lane_dominates_point_lane():
    v = var(Fraction(1, 2), Fraction(1, 16), 4)
    h = jets.exp(v * v)
    for k in range(h.order):
        assert to_fraction(h.rng[k].lo) <= to_fraction(h.point[k].lo)
        assert to_fraction(h.point[k].hi) <= to_fraction(h.rng[k].hi)


def test_compose_against_exact_derivatives():
    inner = var(Fraction(1, 2), Fraction(1, 128), 3)
    g = inner * inner
    outer_point = [balls.exp(g.point[0])] * 3
    outer_rng = [balls.exp(g.rng[0])] * 4
    h = jets.compose(outer_point, outer_rng, g)
    with HIGH:
        base = gmpy2.exp(mpfr(gmpy2.mpq(1, 4), precision=4 * PREC))
    e = to_fraction(base)
    # exp(x^2) at 1/2: h = e^(1/4), h' = e^(1/4), h'' = 3 e^(1/4)
    assert contains_fraction(h.point[0], e)
    assert contains_fraction(h.point[1], e)
    assert contains_fraction(h.point[2], 3 * e)


def test_first_derivative_brackets_finite_difference():
    delta = Fraction(1, 10**6)

    def eval_at(x: Fraction) -> float:
        b = Ball.exact(x, PREC)
        out = balls.sqrt(balls.sub(Ball.exact(25, PREC),
                                   balls.mul(Ball.exact(4, PREC), b)))
        return float(balls.mul(out, balls.exp(-b)).center)

    c = Fraction(3, 10)
    v = var(c, Fraction(1, 1024), 2)
    h = jets.sqrt(const(25, v) - v.scale(Ball.exact(4, PREC))) * jets.exp(-v)
    fd = (eval_at(c + delta) - eval_at(c - delta)) / (2 * float(delta))
    assert abs(float(h.point[1].center) - fd) < 1e-8


def test_reciprocal_through_zero_rejected():
    v = var(Fraction(0), Fraction(1, 2), 3)
    with pytest.raises(DivisorContainsZero):
        jets.reciprocal(v)


def test_absolute_requires_definite_sign():
    pos = var(Fraction(1), Fraction(1, 4), 3)
    neg = var(Fraction(-1), Fraction(1, 4), 3)
    straddle = var(Fraction(0), Fraction(1, 4), 3)
    assert contains_fraction(jets.absolute(pos).point[0], Fraction(1))
    assert contains_fraction(jets.absolute(neg).point[0], Fraction(1))
    assert contains_fraction(jets.absolute(neg).point[1], Fraction(-1))
    with pytest.raises(DomainViolation):
        jets.absolute(straddle)


def test_constant_jet_has_zero_derivatives():
    like = var(Fraction(2), Fraction(1, 8), 4)
    k = const(Fraction(7, 3), like)
    assert contains_fraction(k.value_at_center(), Fraction(7, 3))
    for slot in k.point[1:] + k.rng[1:]:
        assert to_fraction(slot.lo) == 0 and to_fraction(slot.hi) == 0


def test_arithmetic_dispatch_matches_operators():
    a = var(Fraction(3), Fraction(1, 32), 3)
    b = jets.exp(a.scale(Ball.exact(Fraction(-1, 2), PREC)))
    for op, fn in (("add", lambda x, y: x + y), ("sub", lambda x, y: x - y),
                   ("mul", lambda x, y: x * y), ("div", lambda x, y: x / y)):
        lhs = jets.jet_arith(op, a, b)
        rhs = fn(a, b)
        for u, v in zip(lhs.coefficients, rhs.coefficients):
            assert to_fraction(u.lo) == to_fraction(v.lo)
            assert to_fraction(u.hi) == to_fraction(v.hi)
    named = jets.jet_compose("sqrt", a)
    direct = jets.sqrt(a)
    assert to_fraction(named.point[0].lo) == to_fraction(direct.point[0].lo)


def test_order_limits_enforced():
    center = Ball.exact(1, PREC)
    TaylorJet.variable(center, Fraction(1, 8), MAX_ORDER, PREC)
    with pytest.raises(ValueError):
        TaylorJet.variable(center, Fraction(1, 8), 0, PREC)
    with pytest.raises(ValueError):
        TaylorJet.variable(center, Fraction(1, 8), MAX_ORDER + 1, PREC)


def test_lane_length_mismatch_rejected():
    v = var(Fraction(1), Fraction(1, 8), 3)
    with pytest.raises(ValueError):
        TaylorJet(v.center, v.domain, 3, v.point[:2], v.rng)
    with pytest.raises(ValueError):
        v + var(Fraction(1), Fraction(1, 8), 4)


def test_high_order_slots_stay_sound():
    c = Fraction(9, 8)
    w = jets.log(var(c, Fraction(1, 512), MAX_ORDER))
    sign = 1
    for k in range(1, MAX_ORDER):
        exact = sign * Fraction(gmpy2.fac(k - 1)) / c**k
        assert contains_fraction(w.point[k], exact), f"slot {k}"
        sign = -sign
    assert contains_fraction(w.rng[MAX_ORDER],
                             -Fraction(gmpy2.fac(MAX_ORDER - 1)) / c**MAX_ORDER)
