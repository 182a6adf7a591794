"""Collocation grid, interpolation enclosures, and the power step.

The affine family supplies an exact operator oracle: with k equal
branches of ratio q the constant function is a genuine eigenfunction, so
the dominant eigenvalue must equal k q^t to within working rounding.
Interpolation enclosures are cross-checked at the nodes, where the true
interpolant value is the stored sample itself.  High-precision oracles
use explicit context calls; entering a shared context object re-entrantly
corrupts the global mpfr state.
"""

import random
from fractions import Fraction

import gmpy2
import pytest
from gmpy2 import mpfr

from dimcert import balls
from dimcert.balls import Ball
from dimcert.chebyshev import (ChebyshevGrid, CollocationMatrix,
                               build_test_function, cardinals_ball,
                               chebyshev_coefficients, chebyshev_grid,
                               eval_test_function, interp_ball, interp_jet,
                               leading_left_eigenvector, pressure_estimate)
from dimcert.errors import NoConvergence, OutOfDomain
from dimcert.jets import TaylorJet
from dimcert.systems import get_system

PREC = 128
H = gmpy2.context(precision=4 * PREC)


def to_fraction(x: mpfr) -> Fraction:
    return Fraction(*x.as_integer_ratio())


def contains_fraction(ball: Ball, value: Fraction) -> bool:
    return to_fraction(ball.lo) <= value <= to_fraction(ball.hi)


def high_theta(m: int, n: int) -> mpfr:
    # transform angle (n + 1/2) pi / m at 4x precision
    return H.div(H.mul(H.const_pi(), 2 * n + 1), 2 * m)


def test_grid_nodes_match_cosine_formula():
    m = 8
    grid = chebyshev_grid(m, (0, 5), PREC)
    assert grid.m == m and grid.precision == PREC
    half = H.div(mpfr(5), 2)
    for i in range(m):
        theta = high_theta(m, m - 1 - i)
        ref = H.add(half, H.mul(half, H.cos(theta)))
        assert abs(to_fraction(grid.nodes[i]) - to_fraction(ref)) \
            < Fraction(1, 10**35)
    assert all(a < b for a, b in zip(grid.nodes, grid.nodes[1:]))
    with pytest.raises(ValueError):
        ChebyshevGrid(0, (0, 1), PREC)


def test_cardinals_partition_of_unity():
    grid = chebyshev_grid(9, (0, 1), PREC)
    rng = random.Random(7)
    for _ in range(25):
        x = Ball.exact(Fraction(rng.randint(1, 1023), 1024), PREC)
        cards = cardinals_ball(grid, x)
        total = cards[0]
        for c in cards[1:]:
            total = balls.add(total, c)
        assert contains_fraction(total, Fraction(1))


def test_cardinals_kronecker_at_nodes():
    grid = chebyshev_grid(6, (0, 1), PREC)
    for i, node in enumerate(grid.nodes):
        cards = cardinals_ball(grid, Ball.exact(node, PREC))
        for j, c in enumerate(cards):
            want = Fraction(1 if i == j else 0)
            assert contains_fraction(c, want)
            assert c.width() < 1e-30


def test_coefficients_recover_chebyshev_combination():
    # samples of 3 T0 + (1/2) T2 - 2 T5 on the mapped interval [0, 5]
    m = 6
    grid = chebyshev_grid(m, (0, 5), PREC)
    values = []
    for i in range(m):
        theta = high_theta(m, m - 1 - i)
        values.append(H.sub(H.add(mpfr(3), H.div(H.cos(H.mul(theta, 2)), 2)),
                            H.mul(mpfr(2), H.cos(H.mul(theta, 5)))))
    coeffs = chebyshev_coefficients(grid, values)
    expect = [Fraction(3), Fraction(0), Fraction(1, 2), Fraction(0),
              Fraction(0), Fraction(-2)]
    for got, want in zip(coeffs, expect):
        assert abs(to_fraction(got.center) - want) < Fraction(1, 10**30)
        assert got.width() < 1e-28


def test_interp_ball_reproduces_node_values():
    rng = random.Random(11)
    grid = chebyshev_grid(10, (0, 1), PREC)
    values = [mpfr(Fraction(rng.randint(90, 200), 100), precision=PREC)
              for _ in range(10)]
    for node, v in zip(grid.nodes, values):
        out = interp_ball(grid, values, Ball.exact(node, PREC))
        assert contains_fraction(out, to_fraction(v))
        assert out.width() < 1e-28


def test_interp_ball_agrees_with_cardinal_form():
    rng = random.Random(13)
    grid = chebyshev_grid(12, (0, 1), PREC)
    values = [mpfr(Fraction(rng.randint(50, 150), 100), precision=PREC)
              for _ in range(12)]
    for _ in range(20):
        c = Fraction(rng.randint(16, 1008), 1024)
        x = Ball.from_center_radius(mpfr(gmpy2.mpq(c.numerator, c.denominator),
                                         precision=PREC),
                                    mpfr(2, precision=PREC) ** -40, PREC)
        clenshaw = interp_ball(grid, values, x)
        cards = cardinals_ball(grid, x)
        prod = balls.mul(cards[0], Ball.exact(values[0], PREC))
        for card, v in zip(cards[1:], values[1:]):
            prod = balls.add(prod, balls.mul(card, Ball.exact(v, PREC)))
        # both enclose the true interpolant over x, so they must meet
        assert clenshaw.overlaps(prod)


def test_interp_jet_derivatives_of_mapped_t2():
    # p(x) = T2(u), u = (x - 5/2)/(5/2): p(1) = -7/25, p'(1) = -24/25,
    # p'' = 16/25 everywhere
    m = 5
    grid = chebyshev_grid(m, (0, 5), PREC)
    values = [H.cos(H.mul(high_theta(m, m - 1 - i), 2)) for i in range(m)]
    xjet = TaylorJet.variable(Ball.exact(1, PREC), Fraction(1, 100), 3, PREC)
    out = interp_jet(grid, values, xjet)
    tol = Fraction(1, 10**25)
    assert abs(to_fraction(out.point[0].center) + Fraction(7, 25)) < tol
    assert abs(to_fraction(out.point[1].center) + Fraction(24, 25)) < tol
    assert abs(to_fraction(out.point[2].center) - Fraction(16, 25)) < tol
    direct = interp_ball(grid, values, Ball.exact(1, PREC))
    assert out.point[0].overlaps(direct)


def test_interp_jet_constant_grid():
    grid = chebyshev_grid(1, (0, 1), PREC)
    xjet = TaylorJet.variable(Ball.exact(Fraction(1, 2), PREC),
                              Fraction(1, 16), 2, PREC)
    out = interp_jet(grid, [mpfr(7, precision=PREC)], xjet)
    assert contains_fraction(out.point[0], Fraction(7))
    assert contains_fraction(out.point[1], Fraction(0))


def test_power_iteration_on_known_matrix():
    entries = [[mpfr(2), mpfr(1)], [mpfr(0), mpfr(1)]]
    M = CollocationMatrix(entries, 2, 0, None, PREC)
    lam, u = leading_left_eigenvector(M, mpfr(2) ** -60)
    assert abs(float(lam) - 2.0) < 1e-15
    assert abs(float(u[0]) - 1.0) < 1e-15 and abs(float(u[1]) - 1.0) < 1e-15


def test_power_iteration_failure_modes():
    swap = CollocationMatrix([[mpfr(0), mpfr(2)], [mpfr(2), mpfr(0)]],
                             2, 0, None, PREC)
    with pytest.raises(NoConvergence):
        leading_left_eigenvector(swap, mpfr(2) ** -60, max_iterations=50,
                                 start=[1, 0.5])
    dead = CollocationMatrix([[mpfr(0), mpfr(0)], [mpfr(0), mpfr(0)]],
                             2, 0, None, PREC)
    with pytest.raises(NoConvergence):
        leading_left_eigenvector(dead, mpfr(2) ** -60)


def test_pressure_matches_affine_closed_form():
    system = get_system("cantor:r=1/3,k=2", PREC)
    log2 = to_fraction(H.log(mpfr(2)))
    log3 = to_fraction(H.log(mpfr(3)))
    cases = ((Fraction(0), log2),
             (Fraction(1), log2 - log3),
             (log2 / log3, Fraction(0)))
    for t, want in cases:
        got = pressure_estimate(system, t, 12)
        assert abs(to_fraction(got) - want) < Fraction(1, 10**28), f"t={t}"


def test_build_test_function_positive_candidate():
    system = get_system("cantor:r=1/3,k=2", PREC)
    f = build_test_function(system, Fraction(1, 2), 10)
    assert len(f.values) == 10
    assert min(f.values) > 0
    # equal affine ratios make the true eigenfunction constant
    spread = H.sub(max(f.values), min(f.values))
    assert abs(float(spread)) < 1e-25
    assert abs(float(f.eigenvalue) - 2 * 3 ** -0.5) < 1e-12


def test_eval_test_function_node_fast_path_and_domain():
    system = get_system("cantor:r=1/3,k=2", PREC)
    f = build_test_function(system, Fraction(1, 2), 8)
    node = f.grid.nodes[3]
    out = eval_test_function(f, Ball.exact(node, PREC))
    assert to_fraction(out.lo) == to_fraction(f.values[3])
    assert to_fraction(out.hi) == to_fraction(f.values[3])
    inside = eval_test_function(f, Ball.exact(Fraction(1, 2), PREC))
    assert inside.is_positive()
    with pytest.raises(OutOfDomain):
        eval_test_function(f, Ball.exact(Fraction(3, 2), PREC))
    with pytest.raises(OutOfDomain):
        eval_test_function(f, Ball.exact(Fraction(-1, 2), PREC))


def test_gasket_test_function_positive_and_interpolates():
    system = get_system("sierpinski:d=2", PREC)
    t = Fraction(5516, 10000)
    f = build_test_function(system, t, 20)
    assert min(f.values) > 0
    # eigenvalue at a near-dimension t sits close to 1
    assert abs(float(f.eigenvalue) - 1.0) < 1e-2
    mid = Ball.exact(Fraction(5, 2), PREC)
    assert eval_test_function(f, mid).is_positive()
