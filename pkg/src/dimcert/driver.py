"""Outer bisection on the dimension parameter.

Maintains certified bounds t0 < dim < t1: at each midpoint T a positive
candidate eigenfunction is built and the certifier tries to prove
inf h > 1 (dimension above T, raise t0) and then sup h < 1 (dimension
below T, lower t1).  A double failure escalates effort along the config's
ladder: collocation rank doubles up to its cap, then the working
precision doubles once, then the bisection depth gains 4.  If the ladder
runs dry the midpoint is retried once at the off-center dyadic point
t0 + (31/64)(t1 - t0); this keeps the loop moving when the dimension sits
on (or indistinguishably near) the exact midpoint, where neither strict
inequality is provable.  Exhausting that too annotates the certificate
and stops; the last certified bounds are always returned.

The non-rigorous collocation eigenvalue steers effort only: its distance
from 1 picks the internal jet depth, and a midpoint whose estimated gap
sits below the resolution floor 4 * 2^(-prec/2) is skipped straight to
the off-center retry rather than burning the leaf budget on an interval
that straddles the dimension.  No certified statement depends on the
estimate.

Plain halving leaves the final endpoints on a power-of-two grid, which
often fails to pin the last decimal the achieved width supports (the
endpoints straddle a decimal boundary).  A short terminal phase therefore
runs a few extra midpoint tests on the decimal grid itself, binary
searching the boundaries inside the bracket until the digits up to one
position past the epsilon decade are decided.  Every such test is a full
certification like any other midpoint, and the phase is best-effort: an
undecidable boundary just ends it with the bracket so far intact.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction

from gmpy2 import mpfr

from . import certify, chebyshev, systems
from .certify import INF_ABOVE_ONE, SUP_BELOW_ONE, VerificationTask
from .errors import (BracketViolation, DepthExhausted, NonPositiveCandidate,
                     NoConvergence)

_DEFAULT_EPSILON = Fraction(1, 10 ** 15)
ESCALATION_STAGES = ("m", "precision", "k")


class RunConfig:
    """Validated knobs for one dimension run."""

    __slots__ = ("epsilon", "m_initial", "m_max", "k", "p", "precision",
                 "threads", "escalation")

    def __init__(self, epsilon=_DEFAULT_EPSILON, m_initial: int = 30,
                 m_max: int = 120, k: int = 18, p: int = 2,
                 precision: int = 128, threads: int = 1,
                 escalation=ESCALATION_STAGES):
        epsilon = Fraction(epsilon)
        if not 0 < epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
        if not (isinstance(m_initial, int) and isinstance(m_max, int)
                and 2 <= m_initial <= m_max):
            raise ValueError(
                f"need 2 <= m_initial <= m_max, got {m_initial}, {m_max}")
        if not (isinstance(k, int) and k >= 0):
            raise ValueError(f"depth limit must be >= 0, got {k}")
        if p not in (1, 2, 3):
            raise ValueError(f"derivative order must be 1, 2 or 3, got {p}")
        if not (isinstance(precision, int) and precision >= 53):
            raise ValueError(f"precision must be an int >= 53, got {precision}")
        if not (isinstance(threads, int) and threads >= 1):
            raise ValueError(f"threads must be >= 1, got {threads}")
        escalation = tuple(escalation)
        if any(s not in ESCALATION_STAGES for s in escalation):
            raise ValueError(f"unknown escalation stage in {escalation}")
        self.epsilon = epsilon
        self.m_initial = m_initial
        self.m_max = m_max
        self.k = k
        self.p = p
        self.precision = precision
        self.threads = threads
        self.escalation = escalation

    def snapshot(self) -> dict:
        return {
            "epsilon": str(self.epsilon),
            "m_initial": self.m_initial,
            "m_max": self.m_max,
            "k": self.k,
            "p": self.p,
            "precision": self.precision,
            "threads": self.threads,
            "escalation": list(self.escalation),
        }


class MidpointRecord:
    """One certified direction at one parameter value, replayable."""

    __slots__ = ("T", "direction", "m", "precision", "depth_limit",
                 "derivative_order", "jet_order", "values", "log")

    def __init__(self, T: Fraction, direction: str, m: int, precision: int,
                 depth_limit: int, derivative_order: int, jet_order: int,
                 values, log):
        self.T = T
        self.direction = direction
        self.m = m
        self.precision = precision
        self.depth_limit = depth_limit
        self.derivative_order = derivative_order
        self.jet_order = jet_order
        self.values = tuple(values)
        self.log = log


class DimensionCertificate:
    __slots__ = ("family", "t0", "t1", "midpoints", "config",
                 "runtime_seconds", "status", "failure")

    def __init__(self, family: str, t0: Fraction, t1: Fraction, midpoints,
                 config: RunConfig, runtime_seconds: float, status: str,
                 failure=None):
        self.family = family
        self.t0 = t0
        self.t1 = t1
        self.midpoints = list(midpoints)
        self.config = config
        self.runtime_seconds = runtime_seconds
        self.status = status
        self.failure = failure

    @property
    def width(self) -> Fraction:
        return self.t1 - self.t0

    def midpoint_value(self) -> Fraction:
        return (self.t0 + self.t1) / 2


def decided_digits(t0: Fraction, t1: Fraction, max_decimals: int = 50) -> str:
    """Decimal digits pinned down by the open bracket (t0, t1).

    Certified brackets are strict on both sides, so the digit at decimal
    position k is decided exactly when one cell [j/10^k, (j+1)/10^k]
    contains the whole open interval; endpoints sitting on the cell
    boundary still decide the digit.  This sees through brackets whose
    endpoints are adjacent decimal-grid points, where a naive string
    prefix would drop the last digit.
    """
    if not t0 < t1:
        raise ValueError("bracket endpoints must satisfy t0 < t1")
    if math.floor(t0) != math.ceil(t1) - 1:
        return ""
    out = str(math.floor(t0))
    for k in range(1, max_decimals + 1):
        scale = 10 ** k
        cell = math.floor(t0 * scale)
        if cell != math.ceil(t1 * scale) - 1:
            break
        if k == 1:
            out += "."
        out += str(cell % 10)
    return out


def sanity_bracket(system):
    """A-priori bounds the certified dimension must respect.

    Gasket family members get the closed-form bracket; everything else
    gets the trivial (0, 1) and the check is vacuous.
    """
    d = system.meta.get("d")
    if d is not None:
        return systems.moran_bracket(d, system.precision)
    return mpfr(0), mpfr(1)


def _gap_floor(prec: int) -> mpfr:
    return mpfr(2) ** (2 - prec // 2)


def _jet_depth(gap, p: int, cap: int) -> int:
    """Internal expansion depth from the estimated eigenvalue gap.

    Calibrated on the rank-2 gasket: deeper jets cost per leaf but
    collapse the leaf count near the dimension, where the inequality
    clearance shrinks with the gap.
    """
    g = float(gap)
    if g > 1e-3:
        q = p
    elif g > 1e-6:
        q = 3
    elif g > 1e-9:
        q = 4
    elif g > 1e-12:
        q = 6
    elif g > 1e-18:
        q = 8
    elif g > 1e-26:
        q = 10
    else:
        q = 12
    return min(max(q, p), cap)


class _Effort:
    """Current escalation state; persists across midpoints."""

    __slots__ = ("m", "precision", "k", "base")

    def __init__(self, config: RunConfig):
        self.m = config.m_initial
        self.precision = config.precision
        self.k = config.k
        self.base = config

    def escalate(self):
        for stage in self.base.escalation:
            if stage == "m" and self.m * 2 <= self.base.m_max:
                self.m *= 2
                return stage
            if stage == "precision" and self.precision == self.base.precision:
                self.precision *= 2
                return stage
            if stage == "k" and self.k == self.base.k:
                self.k += 4
                return stage
        return None


def _build_candidate(system, T, m: int, prec: int, warm: dict):
    start = warm.get((m, prec))
    if start is not None and len(start) != m:
        start = None
    f = chebyshev.build_test_function(system, T, m, prec, start=start)
    warm[(m, prec)] = tuple(f.values)
    return f


def _attempt(system, T, f, direction, effort: _Effort, config: RunConfig,
             jet_order: int):
    task = VerificationTask(system, T, f, direction, effort.k,
                            derivative_order=config.p, jet_order=jet_order)
    try:
        ok, log = certify.verify_minmax(task, threads=config.threads)
    except DepthExhausted:
        return None, None
    return ok, log


def _decide_at(system_name, T: Fraction, effort: _Effort, config: RunConfig,
               warm: dict):
    """Try to certify one direction at T, escalating on double failure.

    Returns (direction, MidpointRecord) or None when the ladder is
    exhausted or the estimated gap is below the resolution floor.
    """
    while True:
        system = systems.get_system(system_name, effort.precision)
        try:
            f = _build_candidate(system, T, effort.m, effort.precision, warm)
        except (NonPositiveCandidate, NoConvergence):
            f = None
        if f is not None:
            gap = abs(f.eigenvalue - 1)
            if gap < _gap_floor(effort.precision):
                return None
            q = _jet_depth(gap, config.p, system.max_jet_order)
            try:
                pos_ok, _ = certify.verify_positive(f, system, effort.k)
            except DepthExhausted:
                pos_ok = False
            if pos_ok:
                for direction in (INF_ABOVE_ONE, SUP_BELOW_ONE):
                    ok, log = _attempt(system, T, f, direction, effort,
                                       config, q)
                    if ok:
                        rec = MidpointRecord(
                            T, direction, effort.m, effort.precision,
                            effort.k, config.p, q, f.values, log)
                        return direction, rec
        if effort.escalate() is None:
            return None


_ALIGNMENT_BUDGET = 10


def _alignment_target(epsilon: Fraction) -> int:
    # first decimal position finer than epsilon
    k = 1
    while Fraction(1, 10 ** k) >= epsilon:
        k += 1
    return k


def _align_decimal_digits(system, t0, t1, effort, config, warm, midpoints):
    """Extend the decided-digit prefix to the epsilon-implied position.

    Binary search over the decimal boundaries inside (t0, t1) at the
    coarsest undecided position; each probe is a full midpoint
    certification appended to the record list.  Best effort: running out
    of budget or hitting an undecidable boundary leaves the (already
    certified) bracket as is.
    """
    target = _alignment_target(config.epsilon)
    budget = _ALIGNMENT_BUDGET
    while budget > 0:
        spot = None
        for k in range(1, target + 1):
            scale = 10 ** k
            j_lo = math.floor(t0 * scale) + 1
            j_hi = math.ceil(t1 * scale) - 1
            if j_lo <= j_hi:
                spot = (scale, j_lo, j_hi)
                break
        if spot is None:
            break
        scale, j_lo, j_hi = spot
        probe = Fraction(j_lo + (j_hi - j_lo) // 2, scale)
        decided = _decide_at(system.name, probe, effort, config, warm)
        budget -= 1
        if decided is None:
            break
        direction, rec = decided
        midpoints.append(rec)
        if direction == INF_ABOVE_ONE:
            t0 = rec.T
        else:
            t1 = rec.T
    return t0, t1


def estimate_dimension(system, config: RunConfig) -> DimensionCertificate:
    """Bisect the dimension parameter until t1 - t0 < epsilon.

    Always returns a certificate; an exhausted escalation ladder is
    reported in the failure annotation with the last certified bounds
    intact, never raised past this function.
    """
    t_start = time.perf_counter()
    t0, t1 = Fraction(0), Fraction(1)
    effort = _Effort(config)
    warm = {}
    midpoints = []
    failure = None
    # Off-center retries shrink the bracket by 33/64 instead of 1/2; the
    # cap leaves room for a few of them plus ladder stalls.
    max_iterations = int(math.ceil(
        math.log2(1 / float(config.epsilon)) * 1.1)) + 16
    while t1 - t0 >= config.epsilon:
        if len(midpoints) >= max_iterations:
            failure = {"midpoint": str((t0 + t1) / 2),
                       "reason": "iteration cap reached"}
            break
        width = t1 - t0
        decided = None
        tried = []
        for T in ((t0 + t1) / 2, t0 + Fraction(31, 64) * width):
            tried.append(T)
            decided = _decide_at(system.name, T, effort, config, warm)
            if decided is not None:
                break
        if decided is None:
            failure = {
                "midpoint": str(tried[0]),
                "retry": str(tried[-1]),
                "reason": "escalation ladder exhausted in both directions",
            }
            break
        direction, rec = decided
        midpoints.append(rec)
        if direction == INF_ABOVE_ONE:
            t0 = rec.T
        else:
            t1 = rec.T
    if failure is None:
        t0, t1 = _align_decimal_digits(system, t0, t1, effort, config, warm,
                                       midpoints)
    runtime = time.perf_counter() - t_start
    status = "ok" if failure is None else "inconclusive"
    cert = DimensionCertificate(system.name, t0, t1, midpoints, config,
                                runtime, status, failure)
    if status == "ok":
        lo, hi = sanity_bracket(system)
        lo_f = Fraction(*lo.as_integer_ratio())
        hi_f = Fraction(*hi.as_integer_ratio())
        if not (lo_f < t0 and t1 < hi_f):
            raise BracketViolation(
                f"certified bracket ({float(t0)}, {float(t1)}) escapes the "
                f"a-priori bracket ({float(lo)}, {float(hi)}) for "
                f"{system.name}")
    return cert


def table_run(d_range, config: RunConfig):
    """One certificate per gasket rank; inconclusive rows stay annotated."""
    out = []
    for d in d_range:
        system = systems.get_system(f"sierpinski:d={d}", config.precision)
        out.append(estimate_dimension(system, config))
    return out
