"""Collocation of the weighted composition operator on Chebyshev nodes.

The operator acting on functions over the branch-system domain is

    (L_t f)(x) = sum_j |S_j'(x)|^t f(S_j(x)),

whose leading eigenvalue exp(P(t)) crosses 1 exactly at the Hausdorff
dimension of the limit set.  This module discretizes L_t on the Lagrange
basis of m Chebyshev points (first kind, open), extracts a positive
candidate eigenfunction by power iteration, and offers certified
evaluation of the resulting interpolant.  Matrix assembly and the power
iteration are deliberately non-rigorous (round-to-nearest): the candidate
only needs to be good, not certified, because the min-max verification
carries all the rigor downstream.

Two evaluation forms coexist, one per trust level.

Non-rigorous assembly uses the product form of the cardinal polynomials,

    l_i(x) = prod_{j<i}(x - x_j) * prod_{j>i}(x - x_j) / prod_{j!=i}(x_i - x_j),

computed with prefix/suffix products: no divisions by (x - x_i), hence no
removable singularity near the nodes, and all m cardinals cost O(m)
multiplications per evaluation point.

Certified evaluation (ball and jet lanes) instead converts the node
values once into Chebyshev-basis coefficients and runs Clenshaw's
recurrence.  The distinction matters: on an interval argument of radius
r the cardinal products overestimate by roughly sum_i |l_i'| * r, a
factor that grows like m^2 and destroys late bisection leaves, while
Clenshaw's overestimate scales with the interpolant's own derivative,
sum_j |a_j| j^2 r, which stays bounded for the geometrically decaying
coefficient sequences produced here.  The certified object is the
polynomial with the exact cosine-transform coefficients of the stored
node values; all rigorous call sites evaluate that same polynomial.
Jet arguments go through the polynomial's derivative tower (cached per
candidate) evaluated by scalar Clenshaw passes, then one composition
with the argument jet, so the per-leaf cost is O(p m) ball products
rather than O(p^2 m).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import gmpy2
from gmpy2 import mpfr

from . import balls, jets
from .balls import Ball, DEFAULT_PRECISION
from .errors import NoConvergence, NonPositiveCandidate, OutOfDomain
from .jets import MAX_ORDER, TaylorJet


def _to_mpfr(value, prec: int) -> mpfr:
    ne = balls._ctxs(prec)[2]
    if isinstance(value, Fraction):
        return ne.div(mpfr(value.numerator, precision=prec),
                      mpfr(value.denominator, precision=prec))
    return mpfr(value, precision=prec)


class ChebyshevGrid:
    """First-kind Chebyshev nodes mapped to [a, b], with product-form data."""

    __slots__ = ("m", "interval", "nodes", "barycentric_weights",
                 "precision", "_node_balls", "_inv_denoms",
                 "_mid_ball", "_inv_half_ball")

    def __init__(self, m: int, interval, precision: int = DEFAULT_PRECISION):
        if m < 1:
            raise ValueError("need at least one node")
        prec = precision
        ne = balls._ctxs(prec)[2]
        a = _to_mpfr(interval[0], prec)
        b = _to_mpfr(interval[1], prec)
        mid = ne.div(ne.add(a, b), 2)
        half = ne.div(ne.sub(b, a), 2)
        pi = ne.const_pi()
        nodes = []
        for i in range(m):
            # increasing order: theta runs from near pi down to near 0
            theta = ne.div(ne.mul(pi, 2 * (m - 1 - i) + 1), 2 * m)
            nodes.append(ne.add(mid, ne.mul(half, ne.cos(theta))))
        self.m = m
        self.interval = (interval[0], interval[1])
        self.precision = prec
        self.nodes = tuple(nodes)
        self._node_balls = tuple(Ball.exact(x, prec) for x in nodes)
        inv = []
        wts = []
        one = Ball.exact(1, prec)
        for i in range(m):
            d = one
            for j in range(m):
                if j != i:
                    d = balls.mul(d, balls.sub(self._node_balls[i],
                                               self._node_balls[j]))
            inv.append(balls.div(one, d))
            wts.append(ne.div(mpfr(1), d.center))
        self._inv_denoms = tuple(inv)
        self.barycentric_weights = tuple(wts)
        # Exact affine map to [-1, 1] for the coefficient-form evaluator.
        a_ball = Ball.exact(interval[0], prec)
        b_ball = Ball.exact(interval[1], prec)
        half_b = Ball.exact(Fraction(1, 2), prec)
        self._mid_ball = balls.mul(balls.add(a_ball, b_ball), half_b)
        self._inv_half_ball = balls.div(
            one, balls.mul(balls.sub(b_ball, a_ball), half_b))


def chebyshev_grid(m: int, interval,
                   precision: int = DEFAULT_PRECISION) -> ChebyshevGrid:
    return ChebyshevGrid(m, interval, precision)


def _prefix_suffix_ball(grid: ChebyshevGrid, x: Ball):
    m = grid.m
    one = Ball.exact(1, grid.precision)
    pre = [one] * m
    for i in range(1, m):
        pre[i] = balls.mul(pre[i - 1], balls.sub(x, grid._node_balls[i - 1]))
    suf = [one] * m
    for i in range(m - 2, -1, -1):
        suf[i] = balls.mul(suf[i + 1], balls.sub(x, grid._node_balls[i + 1]))
    return pre, suf


def cardinals_ball(grid: ChebyshevGrid, x: Ball):
    """Certified enclosures of all m cardinal polynomials at x."""
    pre, suf = _prefix_suffix_ball(grid, x)
    return [balls.mul(balls.mul(p, s), d)
            for p, s, d in zip(pre, suf, grid._inv_denoms)]


@lru_cache(maxsize=8)
def _cos_matrix(m: int, prec: int):
    """Balls cos(j*theta_n), theta_n = (n+1/2)pi/m, for j, n in 0..m-1."""
    dn, up, _ = balls._ctxs(prec)
    pi_ball = Ball.from_endpoints(dn.const_pi(), up.const_pi(), prec)
    rows = []
    for j in range(m):
        row = []
        for n in range(m):
            angle = balls.mul(pi_ball,
                              Ball.exact(Fraction(j * (2 * n + 1), 2 * m), prec))
            row.append(balls.cos(angle))
        rows.append(tuple(row))
    return tuple(rows)


@lru_cache(maxsize=32)
def _coefficients_cached(m: int, prec: int, interval, values):
    # Node index i increases with x; transform index n orders by decreasing
    # cos, so v_n = values[m-1-n].
    cosmat = _cos_matrix(m, prec)
    out = []
    for j in range(m):
        row = cosmat[j]
        acc = Ball.exact(0, prec)
        for n in range(m):
            acc = balls.add(acc, balls.mul(Ball.exact(values[m - 1 - n], prec),
                                           row[n]))
        factor = Fraction(1, m) if j == 0 else Fraction(2, m)
        out.append(balls.mul(acc, Ball.exact(factor, prec)))
    return tuple(out)


def chebyshev_coefficients(grid: ChebyshevGrid, values):
    """Enclosures of the Chebyshev-basis coefficients of the interpolant."""
    return _coefficients_cached(grid.m, grid.precision, grid.interval,
                                tuple(values))


@lru_cache(maxsize=32)
def _derivative_tower(m: int, prec: int, interval, values):
    """Chebyshev coefficients of d^i p / dx^i for i = 0 .. min(m-1, MAX_ORDER).

    Level i+1 follows from level i by the basis derivative recurrence
    b[k-1] = b[k+1] + 2k a[k] (then halve b[0]) and one chain-rule scale by
    2/(b - a); each level is one shorter than the last.
    """
    base = _coefficients_cached(m, prec, interval, values)
    half = Ball.exact(Fraction(1, 2), prec)
    one = Ball.exact(1, prec)
    a_ball = Ball.exact(interval[0], prec)
    b_ball = Ball.exact(interval[1], prec)
    ih = balls.div(one, balls.mul(balls.sub(b_ball, a_ball), half))
    tower = [base]
    for _ in range(min(m - 1, MAX_ORDER)):
        prev = tower[-1]
        n = len(prev)
        if n <= 1:
            break
        b = [Ball.exact(0, prec)] * (n + 1)
        for k in range(n - 1, 0, -1):
            b[k - 1] = balls.add(b[k + 1],
                                 balls.mul(prev[k], Ball.exact(2 * k, prec)))
        b[0] = balls.mul(b[0], half)
        tower.append(tuple(balls.mul(c, ih) for c in b[:n - 1]))
    return tuple(tower)


def _clenshaw_ball(coeffs, u: Ball, prec: int) -> Ball:
    n = len(coeffs)
    if n == 0:
        return Ball.exact(0, prec)
    if n == 1:
        return coeffs[0]
    two_u = balls.add(u, u)
    b1 = Ball.exact(0, prec)
    b2 = b1
    for k in range(n - 1, 0, -1):
        b1, b2 = balls.add(balls.sub(balls.mul(two_u, b1), b2), coeffs[k]), b1
    return balls.add(balls.sub(balls.mul(u, b1), b2), coeffs[0])


def interp_ball(grid: ChebyshevGrid, values, x: Ball) -> Ball:
    """Certified enclosure of the interpolant at the ball x (Clenshaw)."""
    prec = grid.precision
    coeffs = chebyshev_coefficients(grid, values)
    if grid.m == 1:
        return coeffs[0]
    u = balls.mul(balls.sub(x, grid._mid_ball), grid._inv_half_ball)
    return _clenshaw_ball(coeffs, u, prec)


def interp_jet(grid: ChebyshevGrid, values, xjet: TaylorJet) -> TaylorJet:
    """Jet of the interpolant composed with xjet (certified, both lanes).

    Evaluates the cached derivative tower of the interpolant at the jet's
    center value (point lane) and at its whole range (range lane) with
    scalar Clenshaw passes, then composes with the argument jet.  Tower
    levels past the polynomial degree are identically zero.
    """
    prec = grid.precision
    q = xjet.order
    if grid.m == 1:
        return TaylorJet.constant(chebyshev_coefficients(grid, values)[0],
                                  xjet)
    tower = _derivative_tower(grid.m, prec, grid.interval, tuple(values))
    u_pt = balls.mul(balls.sub(xjet.point[0], grid._mid_ball),
                     grid._inv_half_ball)
    u_rg = balls.mul(balls.sub(xjet.rng[0], grid._mid_ball),
                     grid._inv_half_ball)
    zero = Ball.exact(0, prec)
    outer_pt = []
    outer_rg = []
    for i in range(q + 1):
        if i < len(tower):
            if i < q:
                outer_pt.append(_clenshaw_ball(tower[i], u_pt, prec))
            outer_rg.append(_clenshaw_ball(tower[i], u_rg, prec))
        else:
            if i < q:
                outer_pt.append(zero)
            outer_rg.append(zero)
    return jets.compose(outer_pt, outer_rg, xjet)


def _cardinals_plain(grid: ChebyshevGrid, x: mpfr, ne):
    m = grid.m
    pre = [mpfr(1)] * m
    for i in range(1, m):
        pre[i] = ne.mul(pre[i - 1], ne.sub(x, grid.nodes[i - 1]))
    suf = [mpfr(1)] * m
    for i in range(m - 2, -1, -1):
        suf[i] = ne.mul(suf[i + 1], ne.sub(x, grid.nodes[i + 1]))
    return [ne.mul(ne.mul(pre[i], suf[i]), grid._inv_denoms[i].center)
            for i in range(m)]


# ---------------------------------------------------------------------------
# assembly

class _Assembly:
    """Per-(system, grid) node data reused across all t."""

    __slots__ = ("slopes_log", "cardinal_cols")

    def __init__(self, system, grid: ChebyshevGrid):
        prec = grid.precision
        ne = balls._ctxs(prec)[2]
        self.slopes_log = []
        self.cardinal_cols = []
        for branch in system.branches:
            logs = []
            cols = []
            for x in grid.nodes:
                s, llog = branch.value_and_slope_log(Ball.exact(x, prec))
                logs.append(llog.center)
                cols.append(_cardinals_plain(grid, s.center, ne))
            self.slopes_log.append(logs)
            self.cardinal_cols.append(cols)


_ASSEMBLY_CACHE = {}


def _assembly(system, grid: ChebyshevGrid) -> _Assembly:
    key = (system.name, system.precision, grid.m, grid.precision)
    got = _ASSEMBLY_CACHE.get(key)
    if got is None:
        got = _Assembly(system, grid)
        _ASSEMBLY_CACHE[key] = got
    return got


class CollocationMatrix:
    __slots__ = ("entries", "m", "t", "system", "precision")

    def __init__(self, entries, m, t, system, precision):
        self.entries = entries
        self.m = m
        self.t = t
        self.system = system
        self.precision = precision


def collocation_matrix(system, t, grid: ChebyshevGrid) -> CollocationMatrix:
    """Entry (i, j) = sum over branches of |S'(x_j)|^t * l_i(S(x_j))."""
    prec = grid.precision
    ne = balls._ctxs(prec)[2]
    asm = _assembly(system, grid)
    tm = _to_mpfr(t, prec)
    m = grid.m
    rows = [[mpfr(0)] * m for _ in range(m)]
    for logs, cols in zip(asm.slopes_log, asm.cardinal_cols):
        for j in range(m):
            w = ne.exp(ne.mul(tm, logs[j]))
            col = cols[j]
            for i in range(m):
                rows[i][j] = ne.add(rows[i][j], ne.mul(w, col[i]))
    return CollocationMatrix(rows, m, t, system, prec)


def leading_left_eigenvector(M: CollocationMatrix, tol,
                             max_iterations: int = None, start=None):
    """Dominant eigenvalue and left eigenvector, max entry normalized to 1.

    Stops when successive eigenvalue estimates and iterate entries both
    settle below tol (the vector test is the stricter one; eigenvalues of
    near-diagonal matrices stabilize long before the vector does).
    """
    prec = M.precision
    ne = balls._ctxs(prec)[2]
    m = M.m
    cap = max_iterations or max(2000, 4 * prec)
    u = [mpfr(v, precision=prec) for v in start] if start \
        else [mpfr(1)] * m
    lam_prev = None
    for it in range(1, cap + 1):
        w = [mpfr(0)] * m
        for i in range(m):
            ui = u[i]
            row = M.entries[i]
            for j in range(m):
                w[j] = ne.add(w[j], ne.mul(ui, row[j]))
        pivot = max(range(m), key=lambda j: abs(w[j]))
        lam = w[pivot]
        if lam == 0:
            raise NoConvergence("power iterate collapsed to zero", it, 0.0)
        nxt = [ne.div(wj, lam) for wj in w]
        drift = max(abs(ne.sub(a, b)) for a, b in zip(nxt, u))
        u = nxt
        if lam_prev is not None and abs(ne.sub(lam, lam_prev)) < tol \
                and drift < tol:
            return lam, u
        lam_prev = lam
    raise NoConvergence("power iteration hit its cap", cap,
                        float(lam_prev) if lam_prev is not None else None)


class TestFunction:
    """Positive interpolant candidate: node values plus the grid they live on."""

    __slots__ = ("grid", "values", "t", "eigenvalue")

    def __init__(self, grid: ChebyshevGrid, values, t, eigenvalue=None):
        self.grid = grid
        self.values = tuple(values)
        self.t = t
        self.eigenvalue = eigenvalue


def default_power_tol(prec: int) -> mpfr:
    return mpfr(2) ** (-(prec // 2))


def build_test_function(system, t, m: int, precision: int = None,
                        start=None) -> TestFunction:
    """Candidate eigenfunction of L_t: power iteration on the m-point grid."""
    prec = precision or system.precision
    grid = chebyshev_grid(m, system.domain, prec)
    M = collocation_matrix(system, t, grid)
    lam, v = leading_left_eigenvector(M, default_power_tol(prec),
                                      start=start)
    if min(v) <= 0:
        raise NonPositiveCandidate(
            f"candidate at t={float(_to_mpfr(t, 64)):.6f}, m={m} has "
            f"non-positive node values; raise m")
    return TestFunction(grid, v, t, eigenvalue=lam)


def eval_test_function(f: TestFunction, x: Ball) -> Ball:
    """Certified enclosure of the interpolant at x (x inside the interval)."""
    grid = f.grid
    prec = grid.precision
    a = _to_mpfr(grid.interval[0], prec)
    b = _to_mpfr(grid.interval[1], prec)
    if x.lo < a or x.hi > b:
        raise OutOfDomain(f"{x} is not inside [{a}, {b}]")
    if x.lo == x.hi:
        for node, value in zip(grid.nodes, f.values):
            if x.lo == node:
                return Ball.exact(value, prec)
    return interp_ball(grid, f.values, x)


def pressure_estimate(system, t, m: int, precision: int = None):
    """log of the dominant collocation eigenvalue; steering diagnostic only."""
    prec = precision or system.precision
    grid = chebyshev_grid(m, system.domain, prec)
    M = collocation_matrix(system, t, grid)
    lam, _ = leading_left_eigenvector(M, default_power_tol(prec))
    return balls._ctxs(prec)[2].log(lam)
