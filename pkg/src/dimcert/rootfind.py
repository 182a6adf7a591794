"""Certified sign evaluation and monotone root isolation.

The verification pipeline needs two primitives, both sound:

* ``certified_sign``: prove a ball-evaluable function has one strict sign on
  an interval, by adaptive bisection of ball enclosures.

* ``isolate_monotone_root``: given a bracket on which the map's derivative
  has already been certified sign-definite, produce a tight certified
  enclosure of the unique solution of R(x) = y.  A fast non-rigorous seed
  (float bisection plus mpfr Newton) is followed by an epsilon-inflation
  interval Newton step, which is the only part that carries the proof.
"""

from __future__ import annotations

import gmpy2
from gmpy2 import mpfr

from . import balls
from .balls import Ball
from .errors import RootIsolationFailure


def horner_ball(coeffs, x: Ball, prec: int = None) -> Ball:
    """Evaluate sum coeffs[i] * x^i with ball arithmetic (coeffs exact)."""
    prec = prec or x.precision
    acc = Ball.exact(coeffs[-1], prec)
    for c in reversed(coeffs[:-1]):
        acc = balls.add(balls.mul(acc, x), Ball.exact(c, prec))
    return acc


def horner_float(coeffs, x: float) -> float:
    acc = float(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        acc = acc * x + float(c)
    return acc


def certified_sign(f_ball, lo, hi, prec: int, max_depth: int = 28) -> int:
    """Certified sign (+1/-1) of f on [lo, hi]; raises if undecidable.

    Splits at exact dyadic midpoints carried a few bits above *prec* so the
    partition is endpoint-exact.
    """
    ne = balls._ctxs(prec + 8)[2]
    stack = [(mpfr(lo, precision=prec + 8), mpfr(hi, precision=prec + 8), 0)]
    seen = 0
    while stack:
        a, b, depth = stack.pop()
        enc = f_ball(Ball.from_endpoints(a, b, prec))
        if enc.is_positive():
            sign = 1
        elif enc.is_negative():
            sign = -1
        else:
            if depth >= max_depth:
                raise RootIsolationFailure(
                    f"sign of interval [{a},{b}] undecidable at depth {depth}"
                )
            m = ne.div(ne.add(a, b), 2)
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
            continue
        if seen == 0:
            seen = sign
        elif seen != sign:
            raise RootIsolationFailure("mixed signs over requested interval")
    if seen == 0:
        raise RootIsolationFailure("empty interval")
    return seen


def certified_min_above(f_ball, lo, hi, prec: int, threshold,
                        max_depth: int = 24) -> None:
    """Prove inf of f over [lo, hi] strictly exceeds *threshold*."""
    thr = Ball.exact(threshold, prec)

    def g(x):
        return balls.sub(f_ball(x), thr)

    sign = certified_sign(g, lo, hi, prec, max_depth)
    if sign != 1:
        raise RootIsolationFailure("function dips below threshold")


def _bisect_seed_float(f_float, a: float, b: float, y: float,
                       iters: int = 60) -> float:
    fa = f_float(a) - y
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = f_float(m) - y
        if (fa <= 0 and fm >= 0) or (fa >= 0 and fm <= 0):
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def isolate_monotone_root(R_ball, dR_ball, newton_lo, newton_hi,
                          cover_lo, cover_hi, y: Ball, prec: int,
                          f_float=None) -> Ball:
    """Certified enclosure of the unique root of R(x) = y in the cover bracket.

    Preconditions (certified by the caller, once per branch):
      * dR is sign-definite on [newton_lo, newton_hi] (superset of the cover),
      * R crosses every admissible y exactly once inside the cover bracket.

    Returns a Ball containing {x : R(x) in y}, typically a few ulps wide
    plus the propagated width of y.
    """
    ne = balls._ctxs(prec + 8)[2]
    y_mid = float(y.center)

    # Non-rigorous seed.
    if f_float is not None:
        seed = _bisect_seed_float(f_float, float(cover_lo), float(cover_hi), y_mid)
    else:
        seed = _bisect_seed_ball(R_ball, cover_lo, cover_hi, y, prec)

    # mpfr Newton refinement at full precision (still non-rigorous).
    s = mpfr(seed, precision=prec + 8)
    yc = y.center
    for _ in range(_newton_steps(prec)):
        rs = R_ball(Ball.exact(s, prec)).center
        ds = dR_ball(Ball.exact(s, prec)).center
        if ds == 0:
            break
        s = ne.sub(s, ne.div(ne.sub(rs, yc), ds))
        s = min(max(s, mpfr(newton_lo, precision=prec + 8)),
                mpfr(newton_hi, precision=prec + 8))

    # Epsilon inflation + interval Newton certification.
    up = balls._ctxs(prec)[1]
    base = up.mul(max(s, up.minus(s), mpfr(1)), mpfr(2) ** (4 - prec))
    delta = max(base, up.mul(y.radius, mpfr(4)) if y.radius > 0 else base)
    for _ in range(6):
        z_lo = max(ne.sub(s, delta), mpfr(newton_lo, precision=prec + 8))
        z_hi = min(ne.add(s, delta), mpfr(newton_hi, precision=prec + 8))
        Z = Ball.from_endpoints(z_lo, z_hi, prec)
        mid = Ball.exact(Z.mid_exact(), prec)
        num = balls.sub(R_ball(mid), y)
        den = dR_ball(Z)
        if not den.contains_zero():
            N = balls.sub(mid, balls.div(num, den))
            # Strict interior inclusion proves existence and uniqueness in Z;
            # anything weaker proves nothing about a box built from a guess.
            if Z.contains_interior(N):
                # One more contraction pass tightens the enclosure.
                out = N
                for _ in range(2):
                    mid2 = Ball.exact(out.mid_exact(), prec)
                    num2 = balls.sub(R_ball(mid2), y)
                    N2 = balls.sub(mid2, balls.div(num2, dR_ball(out)))
                    nxt = N2.intersect(out)
                    if nxt is None:
                        break
                    out = nxt
                return out
        delta = up.mul(delta, mpfr(8))
    raise RootIsolationFailure(
        f"interval Newton inclusion failed near x={float(s):.6g} for y~{y_mid:.6g}"
    )


def _newton_steps(prec: int) -> int:
    # float seed carries ~50 correct bits; each step doubles them.
    steps = 2
    bits = 48
    while bits < prec + 8:
        bits *= 2
        steps += 1
    return steps


def _bisect_seed_ball(R_ball, a, b, y: Ball, prec: int) -> mpfr:
    ne = balls._ctxs(64)[2]
    a = mpfr(a, precision=64)
    b = mpfr(b, precision=64)
    yc = mpfr(y.center, precision=64)
    fa = R_ball(Ball.exact(a, 64)).center - yc
    for _ in range(70):
        m = ne.div(ne.add(a, b), 2)
        fm = R_ball(Ball.exact(m, 64)).center - yc
        if (fa <= 0) == (fm <= 0):
            a, fa = m, fm
        else:
            b = m
    return ne.div(ne.add(a, b), 2)
