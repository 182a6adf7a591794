"""Rigorous verification of the min-max eigenvalue inequalities.

Given a strictly positive candidate f and a parameter t, the quantity

    h(x) = (L_t f)(x) / f(x)

satisfies: inf h > 1 on the whole domain forces the leading eigenvalue of
L_t above 1 (so the dimension exceeds t), and sup h < 1 forces it below 1
(dimension under t).  This module certifies one of those strict
inequalities by adaptive bisection: every subinterval gets an enclosure of
h from two independent lanes,

  * the direct interval image of h over the subinterval, and
  * mean-value bounds around the center,
        h(c) +- ( sum_{i=1..q-1} |h^(i)(c)| r^i + sup |h^(q)| r^q ),
    one per available derivative order q,

all intersected.  The mean-value form keeps iterated first-order shape
verbatim; inserting 1/i! factors would tighten it further, which is noted
here and deliberately not done.  A leaf is accepted when the intersection
clears the inequality, conclusively refutes the claim when it lies
entirely on the wrong side of 1, and is split otherwise, to depth at most
k.  Running out of depth is inconclusive, never a refutation.

Logs record every accepted leaf (exact dyadic center/radius), so an
independent replay can re-derive every enclosure from scratch and confirm
both the inequalities and that the leaves tile the domain exactly.
"""

from __future__ import annotations

from gmpy2 import mpfr

from . import balls, chebyshev, jets
from .balls import Ball
from .errors import (CoverageGap, DepthExhausted, DivisorContainsZero,
                     DomainViolation, InequalityFailure)
from .jets import TaylorJet

INF_ABOVE_ONE = "InfAboveOne"
SUP_BELOW_ONE = "SupBelowOne"

# Hard cap on processed subintervals per verification, defending against
# runaway adaptive splitting before the depth limit does.
LEAF_BUDGET = 200_000


class VerificationTask:
    __slots__ = ("system", "t", "f", "direction", "depth_limit",
                 "derivative_order", "margin", "jet_order")

    def __init__(self, system, t, f, direction, depth_limit: int,
                 derivative_order: int = 2, margin=0, jet_order: int = None):
        if direction not in (INF_ABOVE_ONE, SUP_BELOW_ONE):
            raise ValueError(f"unknown direction {direction!r}")
        if depth_limit < 0 or derivative_order < 1:
            raise ValueError("bad depth or derivative order")
        # jet_order is the internal expansion depth; the mean-value bound
        # may draw on every order up to it.  Never below the reported order.
        if jet_order is None:
            jet_order = derivative_order
        if jet_order < derivative_order:
            raise ValueError("jet order below derivative order")
        cap = getattr(system, "max_jet_order", None)
        if cap is not None and jet_order > cap:
            raise ValueError(
                f"jet order {jet_order} exceeds system cap {cap}")
        self.system = system
        self.t = t
        self.f = f
        self.direction = direction
        self.depth_limit = depth_limit
        self.derivative_order = derivative_order
        self.margin = margin
        self.jet_order = jet_order


class LogRecord:
    __slots__ = ("center", "radius", "enclosure", "depth", "method")

    def __init__(self, center, radius, enclosure: Ball, depth: int,
                 method: str):
        self.center = center
        self.radius = radius
        self.enclosure = enclosure
        self.depth = depth
        self.method = method


class VerificationLog:
    __slots__ = ("records", "outcome", "checked", "max_depth")

    def __init__(self):
        self.records = []
        self.outcome = "incomplete"
        self.checked = 0
        self.max_depth = 0


def transfer_ratio_jet(system, t, f, center: Ball, radius, order: int):
    """Jet of h = (L_t f)/f over [center - radius, center + radius]."""
    prec = system.precision
    t_ball = Ball.exact(t, prec)
    xjet = TaylorJet.variable(center, radius, order, prec)
    den = chebyshev.interp_jet(f.grid, f.values, xjet)
    num = None
    for branch in system.branches:
        sjet, ljet = branch.jet(center, radius, order)
        weight = jets.exp(ljet.scale(t_ball))
        term = weight * chebyshev.interp_jet(f.grid, f.values, sjet)
        num = term if num is None else num + term
    return num / den


def taylor_bound(h_jet: TaylorJet, r, p: int) -> Ball:
    """Enclosure of h over the jet's interval, intersected across lanes.

    Every order q <= p yields its own valid mean-value enclosure
    h(c) +- (sum_{i<q} |h^(i)(c)| r^i + sup|h^(q)| r^q); deep orders win on
    wide leaves (the r^q term vanishes), shallow ones when the high slots
    are noisy.  All of them, plus the direct range-lane image, enclose the
    true range, so their running intersection does too.
    """
    prec = h_jet.precision
    dn, up, _ = balls._ctxs(prec)
    rb = Ball.exact(r, prec) if not isinstance(r, Ball) else r
    c = h_jet.point[0]
    out = h_jet.rng[0]
    dev = Ball.exact(0, prec)
    rpow = rb
    for q in range(1, p + 1):
        dev_q = balls.add(dev, balls.mul(balls.absolute(h_jet.rng[q]), rpow))
        wide = Ball.from_endpoints(dn.sub(c.lo, dev_q.hi),
                                   up.add(c.hi, dev_q.hi), prec)
        tight = out.intersect(wide)
        # Rounding can in principle make two sound lanes disjoint; keep
        # the tighter one rather than failing.
        if tight is None:
            tight = wide if wide.width() < out.width() else out
        out = tight
        if q < p:
            dev = balls.add(dev, balls.mul(balls.absolute(h_jet.point[q]),
                                           rpow))
            rpow = balls.mul(rpow, rb)
    return out


def _thresholds(direction: str, margin, prec: int):
    up = balls._ctxs(prec)[1]
    down = balls._ctxs(prec)[0]
    if direction == INF_ABOVE_ONE:
        accept = up.add(mpfr(1), mpfr(margin)) if margin else mpfr(1)
        return accept, mpfr(1)
    accept = down.sub(mpfr(1), mpfr(margin)) if margin else mpfr(1)
    return accept, mpfr(1)


def _leaf_enclosure(task: VerificationTask, center, radius):
    prec = task.system.precision
    c_ball = Ball.exact(center, prec)
    h = transfer_ratio_jet(task.system, task.t, task.f, c_ball, radius,
                           task.jet_order)
    direct = h.rng[0]
    enc = taylor_bound(h, radius, task.jet_order)
    method = "taylor-bound"
    if task.direction == INF_ABOVE_ONE:
        if direct.lo >= enc.lo:
            method = "direct-ball"
    else:
        if direct.hi <= enc.hi:
            method = "direct-ball"
    return enc, method


def _bisect_run(task: VerificationTask, evaluate, lo, hi):
    """Shared adaptive DFS: evaluate(center, radius) -> (enclosure, method).

    Returns (verdict, log) with verdict True (verified), False (refuted);
    raises DepthExhausted when inconclusive.
    """
    prec = task.system.precision
    ne = balls._ctxs(prec + 8)[2]
    accept_thr, refute_thr = _thresholds(task.direction, task.margin, prec)
    log = VerificationLog()
    stack = [(mpfr(lo, precision=prec + 8), mpfr(hi, precision=prec + 8), 0)]
    while stack:
        a, b, depth = stack.pop()
        log.checked += 1
        log.max_depth = max(log.max_depth, depth)
        if log.checked > LEAF_BUDGET:
            log.outcome = "inconclusive"
            raise DepthExhausted("leaf budget exhausted", log)
        center = ne.div(ne.add(a, b), 2)
        radius = ne.div(ne.sub(b, a), 2)
        enc = None
        try:
            enc, method = evaluate(center, radius)
        except (DivisorContainsZero, DomainViolation):
            # Enclosures too coarse to stay clear of 0: refine.
            pass
        if enc is not None:
            if task.direction == INF_ABOVE_ONE:
                ok = enc.lo > accept_thr
                bad = enc.hi < refute_thr
            else:
                ok = enc.hi < accept_thr
                bad = enc.lo > refute_thr
            if ok:
                log.records.append(LogRecord(center, radius, enc, depth,
                                             method))
                continue
            if bad:
                log.records.append(LogRecord(center, radius, enc, depth,
                                             method))
                log.outcome = "refuted"
                return False, log
        if depth >= task.depth_limit:
            log.records.append(LogRecord(
                center, radius,
                enc if enc is not None else Ball.from_endpoints(
                    mpfr("-inf"), mpfr("inf"), prec),
                depth, "undecided"))
            log.outcome = "inconclusive"
            raise DepthExhausted("depth limit reached undecided", log)
        mid = ne.div(ne.add(a, b), 2)
        stack.append((mid, b, depth + 1))
        stack.append((a, mid, depth + 1))
    log.outcome = "verified"
    return True, log


def verify_minmax(task: VerificationTask, threads: int = 1):
    """Certify inf h > 1 or sup h < 1 over the whole domain.

    Deterministic depth-first order (left child first).  Threads pre-split
    the domain into aligned chunks, so the merged log can be a refinement
    of the serial one (never coarser); for a fixed thread count the log is
    deterministic, and every log replays under recheck_log either way.
    """
    lo, hi = task.system.domain
    if threads > 1:
        return _verify_minmax_parallel(task, threads)
    return _bisect_run(task, lambda c, r: _leaf_enclosure(task, c, r),
                       lo, hi)


def verify_positive(f, system, k: int):
    """Certify min f > 0 on the domain by the same adaptive bisection."""

    def evaluate(center, radius):
        c_ball = Ball.from_center_radius(center, radius, system.precision)
        return chebyshev.interp_ball(f.grid, f.values, c_ball), "direct-ball"

    prec = system.precision
    ne = balls._ctxs(prec + 8)[2]
    log = VerificationLog()
    lo, hi = system.domain
    stack = [(mpfr(lo, precision=prec + 8), mpfr(hi, precision=prec + 8), 0)]
    while stack:
        a, b, depth = stack.pop()
        log.checked += 1
        log.max_depth = max(log.max_depth, depth)
        if log.checked > LEAF_BUDGET:
            log.outcome = "inconclusive"
            raise DepthExhausted("leaf budget exhausted", log)
        center = ne.div(ne.add(a, b), 2)
        radius = ne.div(ne.sub(b, a), 2)
        enc, method = evaluate(center, radius)
        if enc.is_positive():
            log.records.append(LogRecord(center, radius, enc, depth, method))
            continue
        if enc.is_negative():
            log.records.append(LogRecord(center, radius, enc, depth, method))
            log.outcome = "refuted"
            return False, log
        if depth >= k:
            log.records.append(LogRecord(center, radius, enc, depth,
                                         "undecided"))
            log.outcome = "inconclusive"
            raise DepthExhausted("depth limit reached undecided", log)
        mid = ne.div(ne.add(a, b), 2)
        stack.append((mid, b, depth + 1))
        stack.append((a, mid, depth + 1))
    log.outcome = "verified"
    return True, log


def _chunk_payload(task: VerificationTask, lo, hi):
    f = task.f
    return {
        "family": task.system.name,
        "precision": task.system.precision,
        "t": task.t,
        "m": f.grid.m,
        "values": tuple(f.values),
        "direction": task.direction,
        "depth_limit": task.depth_limit,
        "order": task.derivative_order,
        "jet_order": task.jet_order,
        "margin": task.margin,
        "lo": lo,
        "hi": hi,
    }


def _run_chunk(payload):
    from . import systems
    system = systems.get_system(payload["family"], payload["precision"])
    grid = chebyshev.chebyshev_grid(payload["m"], system.domain,
                                    payload["precision"])
    f = chebyshev.TestFunction(grid, payload["values"], payload["t"])
    task = VerificationTask(system, payload["t"], f, payload["direction"],
                            payload["depth_limit"], payload["order"],
                            payload["margin"], payload["jet_order"])
    try:
        ok, log = _bisect_run(task,
                              lambda c, r: _leaf_enclosure(task, c, r),
                              payload["lo"], payload["hi"])
        return ("refuted" if not ok else "verified"), log
    except DepthExhausted as exc:
        return "inconclusive", exc.log


def _verify_minmax_parallel(task: VerificationTask, threads: int):
    import concurrent.futures as cf

    prec = task.system.precision
    ne = balls._ctxs(prec + 8)[2]
    lo, hi = task.system.domain
    pieces = 1
    while pieces < 2 * threads:
        pieces *= 2
    cuts = [mpfr(lo, precision=prec + 8)]
    width = ne.sub(mpfr(hi, precision=prec + 8), cuts[0])
    for i in range(1, pieces):
        cuts.append(ne.add(cuts[0], ne.div(ne.mul(width, i), pieces)))
    cuts.append(mpfr(hi, precision=prec + 8))
    payloads = [_chunk_payload(task, cuts[i], cuts[i + 1])
                for i in range(pieces)]
    merged = VerificationLog()
    depth_shift = pieces.bit_length() - 1
    try:
        with cf.ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_chunk, payloads))
    except Exception:
        return _bisect_run(task, lambda c, r: _leaf_enclosure(task, c, r),
                           lo, hi)
    for outcome, log in results:
        for rec in log.records:
            merged.records.append(LogRecord(rec.center, rec.radius,
                                            rec.enclosure,
                                            rec.depth + depth_shift,
                                            rec.method))
        merged.checked += log.checked
        merged.max_depth = max(merged.max_depth, log.max_depth + depth_shift)
        if outcome == "refuted":
            merged.outcome = "refuted"
            return False, merged
        if outcome == "inconclusive":
            merged.outcome = "inconclusive"
            raise DepthExhausted("chunk inconclusive", merged)
    merged.outcome = "verified"
    return True, merged


def recheck_log(log: VerificationLog, task: VerificationTask) -> bool:
    """Replay a verified log: fresh enclosures, exact tiling, inequalities.

    Rejects logs whose leaves fail to tile the domain (CoverageGap), whose
    subintervals no longer certify when recomputed, or whose recorded
    enclosures are disjoint from the freshly computed ones
    (InequalityFailure either way).
    """
    if log.outcome != "verified":
        raise InequalityFailure(f"log outcome is {log.outcome!r}")
    prec = task.system.precision
    ne = balls._ctxs(prec + 8)[2]
    lo, hi = task.system.domain
    leaves = sorted(log.records, key=lambda rec: rec.center)
    cursor = mpfr(lo, precision=prec + 8)
    accept_thr, _ = _thresholds(task.direction, task.margin, prec)
    for rec in leaves:
        a = ne.sub(rec.center, rec.radius)
        b = ne.add(rec.center, rec.radius)
        if a != cursor:
            raise CoverageGap(f"leaf starts at {a}, expected {cursor}")
        cursor = b
        enc, _ = _leaf_enclosure(task, rec.center, rec.radius)
        if task.direction == INF_ABOVE_ONE:
            ok = enc.lo > accept_thr
        else:
            ok = enc.hi < accept_thr
        if not ok:
            raise InequalityFailure(
                f"leaf at {float(rec.center):.6g} no longer certifies")
        if not enc.overlaps(rec.enclosure):
            raise InequalityFailure(
                f"recorded enclosure at {float(rec.center):.6g} is disjoint "
                "from the recomputed one")
    if cursor != mpfr(hi, precision=prec + 8):
        raise CoverageGap(f"leaves end at {cursor}, expected {hi}")
    return True
