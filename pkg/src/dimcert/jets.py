"""Derivative jets over balls.

A TaylorJet tracks a function h on a fat interval X = [c-r, c+r] in two
parallel lanes:

  point lane  P[k] = enclosure of h^(k)(c)      for k = 0 .. p-1
  range lane  R[k] = enclosure of h^(k)(X)      for k = 0 .. p

Slots hold plain derivative values (no factorial normalization).  The public
``coefficients`` view is the p point slots followed by the interval-wide
order-p slot, matching the certification bound

    h(c) +- ( sum_{i=1}^{p-1} |h^(i)(c)| r^i  +  sup|h^(p)| r^p ).

Arithmetic uses the Leibniz rule per lane; compositions (exp, log, sqrt,
reciprocal) use the standard derivative recurrences obtained by
differentiating the defining identity (e.g. s*s = u for sqrt), so any
order up to MAX_ORDER is supported at O(p^2) ball operations.  Everything
is sound because each lane's slots are themselves sound enclosures and the
recurrences hold pointwise.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial

from . import balls
from .balls import Ball
from .errors import DomainViolation

MAX_ORDER = 12


def _check_order(p: int):
    if not 1 <= p <= MAX_ORDER:
        raise ValueError(f"jet order must be in 1..{MAX_ORDER}, got {p}")


@lru_cache(maxsize=None)
def _binom(n: int, k: int) -> int:
    if k in (0, n):
        return 1
    return _binom(n - 1, k - 1) + _binom(n - 1, k)


class TaylorJet:
    __slots__ = ("center", "domain", "order", "point", "rng")

    def __init__(self, center: Ball, domain: Ball, order: int, point, rng):
        _check_order(order)
        if len(point) != order or len(rng) != order + 1:
            raise ValueError("lane lengths inconsistent with order")
        self.center = center
        self.domain = domain
        self.order = order
        self.point = tuple(point)
        self.rng = tuple(rng)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def variable(center: Ball, radius, order: int, prec: int) -> "TaylorJet":
        """Jet of the identity map x on [center - radius, center + radius]."""
        _check_order(order)
        r = Ball.exact(radius, prec) if not isinstance(radius, Ball) else radius
        domain = Ball(
            balls._ctxs(prec)[0].sub(center.lo, r.hi),
            balls._ctxs(prec)[1].add(center.hi, r.hi),
            prec,
        )
        one = Ball.exact(1, prec)
        zero = Ball.exact(0, prec)
        point = [center] + [one] + [zero] * (order - 2)
        rng = [domain] + [one] + [zero] * (order - 1)
        return TaylorJet(center, domain, order, point[:order], rng)

    @staticmethod
    def constant(value: Ball, like: "TaylorJet") -> "TaylorJet":
        zero = Ball.exact(0, value.precision)
        point = [value] + [zero] * (like.order - 1)
        rng = [value] + [zero] * like.order
        return TaylorJet(like.center, like.domain, like.order, point, rng)

    @property
    def coefficients(self):
        return self.point + (self.rng[self.order],)

    @property
    def precision(self) -> int:
        return self.point[0].precision

    def value(self) -> Ball:
        """Direct enclosure of h over the whole fat interval."""
        return self.rng[0]

    def value_at_center(self) -> Ball:
        return self.point[0]

    def radius_upper(self):
        """Upper bound on the expansion radius max(hi-c, c-lo)."""
        prec = self.domain.precision
        up = balls._ctxs(prec)[1]
        c = self.center
        return max(up.sub(self.domain.hi, c.lo), up.sub(c.hi, self.domain.lo))

    # -- ring operations ------------------------------------------------------

    def _zip(self, other, fn):
        if self.order != other.order:
            raise ValueError("jet order mismatch")
        point = [fn(a, b) for a, b in zip(self.point, other.point)]
        rng = [fn(a, b) for a, b in zip(self.rng, other.rng)]
        return TaylorJet(self.center, self.domain, self.order, point, rng)

    def __add__(self, other):
        if isinstance(other, Ball):
            return self._shift(other)
        return self._zip(other, balls.add)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if isinstance(other, Ball):
            return self._shift(-other)
        return self._zip(other, balls.sub)

    def __neg__(self):
        return TaylorJet(
            self.center, self.domain, self.order,
            [-a for a in self.point], [-a for a in self.rng],
        )

    def _shift(self, const: Ball):
        point = (balls.add(self.point[0], const),) + self.point[1:]
        rng = (balls.add(self.rng[0], const),) + self.rng[1:]
        return TaylorJet(self.center, self.domain, self.order, point, rng)

    def scale(self, const: Ball) -> "TaylorJet":
        return TaylorJet(
            self.center, self.domain, self.order,
            [balls.mul(a, const) for a in self.point],
            [balls.mul(a, const) for a in self.rng],
        )

    def __mul__(self, other):
        if isinstance(other, Ball):
            return self.scale(other)
        if self.order != other.order:
            raise ValueError("jet order mismatch")
        point = _leibniz(self.point, other.point)
        rng = _leibniz(self.rng, other.rng)
        return TaylorJet(self.center, self.domain, self.order, point, rng)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, Ball):
            return self.scale(balls.div(Ball.exact(1, other.precision), other))
        return self * reciprocal(other)


@lru_cache(maxsize=4096)
def _int_ball(n: int, prec: int) -> Ball:
    return Ball.exact(n, prec)


@lru_cache(maxsize=4096)
def _fraction_ball(num: int, den: int, prec: int) -> Ball:
    return Ball.exact(Fraction(num, den), prec)


def _leibniz(a, b):
    # (fg)^(k) = sum_i C(k,i) f^(i) g^(k-i).
    n = min(len(a), len(b))
    prec = a[0].precision
    out = []
    for k in range(n):
        acc = None
        for i in range(k + 1):
            term = balls.mul(a[i], b[k - i])
            c = _binom(k, i)
            if c != 1:
                term = balls.mul(term, _int_ball(c, prec))
            acc = term if acc is None else balls.add(acc, term)
        out.append(acc)
    return out


# -- composition with elementary functions --------------------------------------


def _per_lane(jet: TaylorJet, lane_fn) -> TaylorJet:
    point = lane_fn(jet.point)
    rng = lane_fn(jet.rng)
    return TaylorJet(jet.center, jet.domain, jet.order, point, rng)


def sqrt(jet: TaylorJet) -> TaylorJet:
    """s = sqrt(u) via s*s = u:  2 s0 s_n = u_n - sum_{0<k<n} C(n,k) s_k s_{n-k}."""
    prec = jet.precision

    def lane(u):
        s0 = balls.sqrt(u[0])
        two_s0 = balls.mul(_int_ball(2, prec), s0)
        out = [s0]
        for n in range(1, len(u)):
            acc = u[n]
            for k in range(1, n):
                term = balls.mul(out[k], out[n - k])
                c = _binom(n, k)
                if c != 1:
                    term = balls.mul(term, _int_ball(c, prec))
                acc = balls.sub(acc, term)
            out.append(balls.div(acc, two_s0))
        return out

    return _per_lane(jet, lane)


def log(jet: TaylorJet) -> TaylorJet:
    """w = log(u) via u = exp(w):  u_n = sum_{k>=1} C(n-1,k-1) w_k u_{n-k}."""
    prec = jet.precision

    def lane(u):
        out = [balls.log(u[0])]
        for n in range(1, len(u)):
            acc = u[n]
            for k in range(1, n):
                term = balls.mul(out[k], u[n - k])
                c = _binom(n - 1, k - 1)
                if c != 1:
                    term = balls.mul(term, _int_ball(c, prec))
                acc = balls.sub(acc, term)
            out.append(balls.div(acc, u[0]))
        return out

    return _per_lane(jet, lane)


def exp(jet: TaylorJet) -> TaylorJet:
    """e = exp(u):  e_n = sum_{k=1..n} C(n-1,k-1) u_k e_{n-k}."""
    prec = jet.precision

    def lane(u):
        out = [balls.exp(u[0])]
        for n in range(1, len(u)):
            acc = None
            for k in range(1, n + 1):
                term = balls.mul(u[k], out[n - k])
                c = _binom(n - 1, k - 1)
                if c != 1:
                    term = balls.mul(term, _int_ball(c, prec))
                acc = term if acc is None else balls.add(acc, term)
            out.append(acc)
        return out

    return _per_lane(jet, lane)


def reciprocal(jet: TaylorJet) -> TaylorJet:
    """r = 1/u via r*u = 1:  r_n = -(sum_{k=1..n} C(n,k) u_k r_{n-k}) / u0."""
    prec = jet.precision

    def lane(u):
        out = [balls.div(_int_ball(1, prec), u[0])]
        for n in range(1, len(u)):
            acc = None
            for k in range(1, n + 1):
                term = balls.mul(u[k], out[n - k])
                c = _binom(n, k)
                if c != 1:
                    term = balls.mul(term, _int_ball(c, prec))
                acc = term if acc is None else balls.add(acc, term)
            out.append(balls.div(-acc, u[0]))
        return out

    return _per_lane(jet, lane)


def pow_real(jet: TaylorJet, t) -> TaylorJet:
    """u^t for u positive over the fat interval, as exp(t*log u)."""
    tb = Ball.exact(t, jet.precision) if not isinstance(t, Ball) else t
    return exp(log(jet).scale(tb))


def absolute(jet: TaylorJet) -> TaylorJet:
    """|u| for u sign-definite over the whole fat interval."""
    v = jet.rng[0]
    if v.is_positive():
        return jet
    if v.is_negative():
        return -jet
    raise DomainViolation("abs of a jet whose range straddles zero")


def _compose_lane(fd, gd, prec: int):
    """Derivative slots of f(g(x)) from f-derivatives fd at the inner value
    and inner derivative slots gd (gd[0] unused beyond defining the point).

    Scales to truncated power series, accumulates fd[k]/k! * (g - g0)^k by
    convolution powers, and scales back.  Exact finite identity per slot
    (series coefficients above the slot order never reach it), so ball
    evaluation is sound lane-wise.
    """
    n = len(fd)
    zero = Ball.exact(0, prec)
    if n == 1:
        return [fd[0]]
    d = [zero]
    for k in range(1, n):
        d.append(balls.mul(gd[k], _fraction_ball(1, factorial(k), prec)))
    h = [fd[0]] + [zero] * (n - 1)
    pw = list(d)
    for k in range(1, n):
        fck = balls.mul(fd[k], _fraction_ball(1, factorial(k), prec))
        for i in range(k, n):
            h[i] = balls.add(h[i], balls.mul(fck, pw[i]))
        if k + 1 < n:
            nxt = [zero] * n
            for i in range(k, n - 1):
                pi = pw[i]
                for j in range(1, n - i):
                    nxt[i + j] = balls.add(nxt[i + j],
                                           balls.mul(pi, d[j]))
            pw = nxt
    out = [h[0]]
    for i in range(1, n):
        out.append(balls.mul(h[i], _int_ball(factorial(i), prec)))
    return out


def compose(outer_point, outer_rng, inner: TaylorJet) -> TaylorJet:
    """Jet of f(g(x)) given enclosures of f's derivatives at the inner jet.

    outer_point[k] must enclose f^(k)(g(c)) for k = 0..order-1 and
    outer_rng[k] must enclose f^(k)(g(X)) for k = 0..order, where g is the
    inner jet's underlying function.
    """
    q = inner.order
    if len(outer_point) < q or len(outer_rng) < q + 1:
        raise ValueError("outer derivative lists shorter than the jet order")
    prec = inner.precision
    point = _compose_lane(list(outer_point[:q]), list(inner.point), prec)
    rng = _compose_lane(list(outer_rng[:q + 1]), list(inner.rng), prec)
    return TaylorJet(inner.center, inner.domain, q, point, rng)


# -- contract-parity dispatchers -------------------------------------------------

_ARITH = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}

_COMPOSE = {"sqrt": sqrt, "log": log, "exp": exp, "reciprocal": reciprocal}


def jet_arith(op: str, a: TaylorJet, b: TaylorJet) -> TaylorJet:
    return _ARITH[op](a, b)


def jet_compose(outer, a: TaylorJet) -> TaylorJet:
    if callable(outer):
        return outer(a)
    return _COMPOSE[outer](a)
