"""Finite-graph companion: level graphs, Dirichlet spectra, decimation.

Level-n graphs of the triangle construction live in exact coordinates:
a vertex (p, q) stands for the plane point (p, q*sqrt(3)) with p, q
rational, so the three halving maps and all vertex identifications are
exact Fraction arithmetic.  Spectra are ordinary double-precision dense
eigensolves: this module validates the decimation story, it is not part
of the certified pipeline.

Laplacian convention: Delta f(x) = sum over neighbours (f(y) - f(x))
with no degree normalization; the Dirichlet matrix is -Delta restricted
to interior vertices (boundary rows and columns deleted).  Interior
vertices all have degree 4, so the matrix is 4I - A_int.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import balls
from .balls import Ball
from .errors import DomainViolation, EmptyInterior, LevelTooLarge

# Halving maps toward the three corners, in (p, q*sqrt(3)) coordinates.
_HALF = Fraction(1, 2)
_OFFSETS = (
    (Fraction(0), Fraction(0)),
    (Fraction(1, 2), Fraction(0)),
    (Fraction(1, 4), Fraction(1, 4)),
)
_CORNERS = ((Fraction(0), Fraction(0)),
            (Fraction(1), Fraction(0)),
            (Fraction(1, 2), Fraction(1, 2)))

MAX_LEVEL = 8
MAX_ORBIT_GENERATIONS = 20
MAX_JULIA_DEPTH = 16
EXCEPTIONAL_EIGENVALUES = (2.0, 5.0, 6.0)


def _apply(offset, point):
    return (point[0] * _HALF + offset[0], point[1] * _HALF + offset[1])


def decimation_map(x):
    """The quadratic x(5 - x) linking consecutive spectral levels."""
    return x * (5 - x)


class LevelGraph:
    __slots__ = ("level", "vertices", "edges", "boundary")

    def __init__(self, level, vertices, edges, boundary):
        self.level = level
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self.boundary = frozenset(boundary)

    @property
    def interior_indices(self):
        return tuple(i for i, v in enumerate(self.vertices)
                     if v not in self.boundary)


def build_level_graph(n: int) -> LevelGraph:
    """Level-n triangle graph with exact vertex coordinates."""
    if not isinstance(n, int) or n < 0:
        raise DomainViolation(f"level must be a non-negative int, got {n}")
    if n > MAX_LEVEL:
        raise LevelTooLarge(f"level {n} above the supported cap {MAX_LEVEL}")
    cells = [_CORNERS]
    for _ in range(n):
        cells = [tuple(_apply(off, p) for p in cell)
                 for off in _OFFSETS for cell in cells]
    vertices = sorted({p for cell in cells for p in cell})
    index = {p: i for i, p in enumerate(vertices)}
    edges = set()
    for cell in cells:
        a, b, c = (index[p] for p in cell)
        edges.add((min(a, b), max(a, b)))
        edges.add((min(a, c), max(a, c)))
        edges.add((min(b, c), max(b, c)))
    return LevelGraph(n, vertices, sorted(edges), _CORNERS)


class SpectrumReport:
    __slots__ = ("level", "boundary_condition", "eigenvalues", "convention")

    def __init__(self, level, eigenvalues,
                 convention="graph laplacian, no degree weights"):
        self.level = level
        self.boundary_condition = "dirichlet"
        self.eigenvalues = tuple(eigenvalues)
        self.convention = convention


def dirichlet_spectrum(g: LevelGraph) -> SpectrumReport:
    """Eigenvalues of -Delta on interior vertices, ascending."""
    interior = g.interior_indices
    if not interior:
        raise EmptyInterior(f"level {g.level} has no interior vertices")
    pos = {v: i for i, v in enumerate(interior)}
    size = len(interior)
    mat = np.zeros((size, size))
    degree = np.zeros(size)
    for a, b in g.edges:
        ia, ib = pos.get(a), pos.get(b)
        if ia is not None:
            degree[ia] += 1
        if ib is not None:
            degree[ib] += 1
        if ia is not None and ib is not None:
            mat[ia, ib] -= 1.0
            mat[ib, ia] -= 1.0
    mat[np.diag_indices(size)] = degree
    return SpectrumReport(g.level, np.linalg.eigvalsh(mat).tolist())


def decimation_check(lower: SpectrumReport, upper: SpectrumReport,
                     tol: float = 1e-9) -> dict:
    """Map upper eigenvalues through x(5-x) onto the lower spectrum.

    Eigenvalues within tol of the exceptional set are set aside; every
    other upper eigenvalue must land within tol of some lower one.
    """
    if upper.level != lower.level + 1:
        raise DomainViolation("reports must be consecutive levels")
    matched, exceptional, unmatched = [], [], []
    lows = lower.eigenvalues
    for lam in upper.eigenvalues:
        if min(abs(lam - e) for e in EXCEPTIONAL_EIGENVALUES) <= tol:
            exceptional.append(lam)
            continue
        image = decimation_map(lam)
        best = min(lows, key=lambda mu: abs(mu - image))
        if abs(best - image) <= tol:
            matched.append((lam, image, best))
        else:
            unmatched.append(lam)
    return {"matched": matched, "exceptional": exceptional,
            "unmatched": unmatched, "tolerance": tol}


class BackwardOrbit:
    __slots__ = ("seed", "generations", "points")

    def __init__(self, seed, generations, points):
        self.seed = seed
        self.generations = generations
        self.points = tuple(points)


def backward_orbit(system, y, n: int) -> BackwardOrbit:
    """All n-fold inverse-branch images of y, tagged by branch word."""
    if not isinstance(n, int) or n < 0:
        raise DomainViolation(f"generation count must be >= 0, got {n}")
    if n > MAX_ORBIT_GENERATIONS:
        raise LevelTooLarge(
            f"{n} generations above the cap {MAX_ORBIT_GENERATIONS}")
    prec = system.precision
    frontier = [("", Ball.exact(y, prec))]
    for _ in range(n):
        frontier = [(word + str(j), branch.evaluate(ball))
                    for word, ball in frontier
                    for j, branch in enumerate(system.branches)]
    return BackwardOrbit(y, n, frontier)


def cascade_limit(z, iterations: int, precision: int = 256):
    """Renormalized inverse cascade 5^N S_minus^N(z) with diagnostics.

    S_minus is the lower inverse branch of x(5-x); near its fixed point 0
    the slope is 1/5, so the renormalized sequence converges geometrically
    and successive differences shrink by about that slope.
    """
    from . import systems
    if not isinstance(iterations, int) or not 0 <= iterations <= 200:
        raise DomainViolation(
            f"iteration count must be in 0..200, got {iterations}")
    zf = float(z)
    if not 0 <= zf <= 5:
        raise DomainViolation(f"seed {z} outside [0, 5]")
    system = systems.get_system("sierpinski:d=2", precision)
    lower = system.branches[0]
    five = Ball.exact(5, precision)
    x = Ball.exact(z, precision)
    scale = Ball.exact(1, precision)
    values = [x]
    for _ in range(iterations):
        x = lower.evaluate(x)
        scale = balls.mul(scale, five)
        values.append(balls.mul(scale, x))
    diffs = [abs(float(b.center - a.center))
             for a, b in zip(values, values[1:])]
    ratios = [d2 / d1 for d1, d2 in zip(diffs, diffs[1:]) if d1 > 0]
    report = {
        "iterations": iterations,
        "final_width": float(values[-1].width()),
        "last_difference": diffs[-1] if diffs else 0.0,
        "late_ratios": ratios[-5:],
    }
    return values[-1], report


def julia_sample(system, depth: int):
    """Branch-word images of the domain midpoint, sorted ascending floats."""
    if not isinstance(depth, int) or depth < 0:
        raise DomainViolation(f"depth must be >= 0, got {depth}")
    if depth > MAX_JULIA_DEPTH:
        raise LevelTooLarge(f"depth {depth} above the cap {MAX_JULIA_DEPTH}")
    prec = system.precision
    lo, hi = system.domain
    seed = balls.mul(balls.add(Ball.exact(lo, prec), Ball.exact(hi, prec)),
                     Ball.exact(Fraction(1, 2), prec))
    frontier = [seed]
    for _ in range(depth):
        frontier = [branch.evaluate(ball)
                    for ball in frontier for branch in system.branches]
    return sorted(float(b.center) for b in frontier)


def box_count_estimate(points, scales=None) -> float:
    """Least-squares slope of log N(s) against log(1/s)."""
    if scales is None:
        scales = [2.0 ** -j for j in range(4, 10)]
    xs, ys = [], []
    for s in scales:
        boxes = {int(np.floor(p / s)) for p in points}
        xs.append(np.log(1.0 / s))
        ys.append(np.log(len(boxes)))
    slope = np.polyfit(xs, ys, 1)[0]
    return float(slope)
