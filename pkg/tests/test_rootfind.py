"""Certified sign tests and monotone root isolation.

Root enclosures are checked with exact rational sign changes of the
defining polynomial at the enclosure endpoints, so the oracle itself
cannot round.
"""

import random
from fractions import Fraction

import pytest
from gmpy2 import mpfr

from dimcert import balls, rootfind
from dimcert.balls import Ball
from dimcert.errors import RootIsolationFailure

PREC = 128


def to_fraction(x: mpfr) -> Fraction:
    return Fraction(*x.as_integer_ratio())


def quad_map(x: Ball) -> Ball:
    # lambda -> lambda (5 - lambda), the level-1 spectral decimation map
    p = x.precision
    return balls.mul(x, balls.sub(Ball.exact(5, p), x))


def quad_slope(x: Ball) -> Ball:
    p = x.precision
    return balls.sub(Ball.exact(5, p), balls.mul(Ball.exact(2, p), x))


def test_horner_ball_exact_on_integers():
    out = rootfind.horner_ball([5, -2, 0, 3], Ball.exact(2, PREC))
    assert to_fraction(out.lo) == 25 and to_fraction(out.hi) == 25
    assert rootfind.horner_float([5, -2, 0, 3], 2.0) == 25.0


def test_horner_ball_contains_rational_evaluations():
    rng = random.Random(91)
    for _ in range(500):
        coeffs = [Fraction(rng.randint(-50, 50), rng.randint(1, 9))
                  for _ in range(rng.randint(1, 6))]
        x = Fraction(rng.randint(-40, 40), rng.randint(1, 7))
        out = rootfind.horner_ball(coeffs, Ball.exact(x, PREC))
        exact = sum(c * x**i for i, c in enumerate(coeffs))
        assert to_fraction(out.lo) <= exact <= to_fraction(out.hi)


def test_certified_sign_definite_cases():
    def plus(x):
        return balls.add(balls.mul(x, x), Ball.exact(1, x.precision))

    def minus(x):
        return -plus(x)

    assert rootfind.certified_sign(plus, -2, 2, PREC) == 1
    assert rootfind.certified_sign(minus, -2, 2, PREC) == -1


def test_certified_sign_rejects_crossing_and_touching():
    ident = lambda x: x
    square = lambda x: balls.mul(x, x)
    with pytest.raises(RootIsolationFailure):
        rootfind.certified_sign(ident, -1, 1, PREC)
    # x^2 touches zero, so no strict sign exists at any depth
    with pytest.raises(RootIsolationFailure):
        rootfind.certified_sign(square, -1, 1, PREC, max_depth=10)


def test_certified_min_above():
    def f(x):
        return balls.add(balls.mul(x, x), Ball.exact(2, x.precision))

    rootfind.certified_min_above(f, -1, 1, PREC, 1)
    with pytest.raises(RootIsolationFailure):
        rootfind.certified_min_above(f, -1, 1, PREC, 4)
    with pytest.raises(RootIsolationFailure):
        rootfind.certified_min_above(f, -1, 1, PREC, 2, max_depth=8)


def test_isolate_monotone_root_quadratic():
    y = Ball.exact(3, PREC)
    root = rootfind.isolate_monotone_root(
        quad_map, quad_slope, 0, Fraction(12, 5), 0, Fraction(12, 5), y, PREC,
        f_float=lambda x: x * (5 - x))
    lo, hi = to_fraction(root.lo), to_fraction(root.hi)
    # p(x) = x^2 - 5x + 3 decreases through its smaller root (5 - sqrt 13)/2,
    # so an exact sign change across [lo, hi] proves containment
    p = lambda x: x * x - 5 * x + 3
    assert p(lo) > 0 > p(hi)
    assert root.width() < 1e-30
    assert abs(float(root.center) - 0.6972243622680054) < 1e-12
    image = quad_map(root)
    assert to_fraction(image.lo) <= 3 <= to_fraction(image.hi)


def test_isolate_monotone_root_fat_target():
    y = Ball.from_center_radius(mpfr(3, precision=PREC),
                                mpfr("1e-10", precision=PREC), PREC)
    root = rootfind.isolate_monotone_root(
        quad_map, quad_slope, 0, Fraction(12, 5), 0, Fraction(12, 5), y, PREC,
        f_float=lambda x: x * (5 - x))
    lo, hi = to_fraction(root.lo), to_fraction(root.hi)
    p = lambda x: x * x - 5 * x + 3
    assert p(lo) > 0 > p(hi)
    # width tracks the target's width, not the ulp floor
    assert 1e-12 < root.width() < 1e-8


def test_isolate_monotone_root_unreachable_target():
    # sup of x(5-x) on [0, 2.4] is 6.24, so y = 7 has no preimage
    y = Ball.exact(7, PREC)
    with pytest.raises(RootIsolationFailure):
        rootfind.isolate_monotone_root(
            quad_map, quad_slope, 0, Fraction(12, 5), 0, Fraction(12, 5),
            y, PREC, f_float=lambda x: x * (5 - x))
