"""Adaptive min-max verification and log replay.

With the constant candidate on the two-branch quadratic family the
transfer ratio has the closed form h(x) = 2 (25 - 4x)^(-t/2), so each
direction's verdict, the depth it needs, and the inconclusive regime are
all known in advance.
"""

import math
from fractions import Fraction

import pytest
from gmpy2 import mpfr

from dimcert import certify, chebyshev
from dimcert.balls import Ball
from dimcert.certify import (INF_ABOVE_ONE, SUP_BELOW_ONE, LogRecord,
                             VerificationLog, VerificationTask, recheck_log,
                             taylor_bound, transfer_ratio_jet, verify_minmax,
                             verify_positive)
from dimcert.errors import DepthExhausted, InequalityFailure, CoverageGap
from dimcert.systems import get_system

PREC = 128


def const_one(system, t):
    grid = chebyshev.chebyshev_grid(1, system.domain, PREC)
    return chebyshev.TestFunction(grid, [mpfr(1, precision=PREC)], t)


def gasket_task(t, direction, depth=18, order=2):
    system = get_system("sierpinski:d=2", PREC)
    return VerificationTask(system, t, const_one(system, t), direction,
                            depth, derivative_order=order)


def test_branch_count_certifies_at_depth_zero():
    # t = 0 makes h identically the branch count
    ok, log = verify_minmax(gasket_task(Fraction(0), INF_ABOVE_ONE))
    assert ok and log.outcome == "verified"
    assert log.max_depth == 0 and log.checked == 1
    rec = log.records[0]
    assert float(rec.enclosure.lo) > 1.99 and float(rec.enclosure.hi) < 2.01


def test_slope_sum_certifies_within_four_levels():
    # t = 1: sup h = 2/sqrt(5) < 1 on the whole interval
    ok, log = verify_minmax(gasket_task(Fraction(1), SUP_BELOW_ONE))
    assert ok and log.outcome == "verified"
    assert log.max_depth <= 4
    for rec in log.records:
        assert float(rec.enclosure.hi) < 1


def test_inf_above_one_at_low_exponent():
    # t = 3/10: inf h = 2 * 25^(-3/20) = 1.23406... > 1
    ok, log = verify_minmax(gasket_task(Fraction(3, 10), INF_ABOVE_ONE))
    assert ok and log.outcome == "verified"
    floor = min(float(rec.enclosure.lo) for rec in log.records)
    assert 1 < floor <= 2 * 25 ** -0.15
    assert log.max_depth <= 8


def test_wrong_direction_is_refuted_immediately():
    ok, log = verify_minmax(gasket_task(Fraction(1), INF_ABOVE_ONE))
    assert not ok and log.outcome == "refuted"
    assert log.checked == 1
    assert float(log.records[-1].enclosure.hi) < 1


def test_near_crossing_exhausts_depth():
    # h(0) sits within ~1e-17 of 1 here, far below what depth 8 resolves
    t = Fraction(math.log(4) / math.log(25))
    with pytest.raises(DepthExhausted) as info:
        verify_minmax(gasket_task(t, INF_ABOVE_ONE, depth=8))
    log = info.value.log
    assert log.outcome == "inconclusive"
    assert log.records[-1].method == "undecided"


def test_margin_shifts_the_acceptance_threshold():
    system = get_system("sierpinski:d=2", PREC)
    f = const_one(system, Fraction(0))
    easy = VerificationTask(system, Fraction(0), f, INF_ABOVE_ONE, 3,
                            margin=0.5)
    ok, log = verify_minmax(easy)
    assert ok and log.max_depth == 0
    hard = VerificationTask(system, Fraction(0), f, INF_ABOVE_ONE, 3,
                            margin=1.5)
    with pytest.raises(DepthExhausted):
        verify_minmax(hard)


def test_leaf_budget_guard(monkeypatch):
    monkeypatch.setattr(certify, "LEAF_BUDGET", 3)
    t = Fraction(math.log(4) / math.log(25))
    with pytest.raises(DepthExhausted, match="budget"):
        verify_minmax(gasket_task(t, INF_ABOVE_ONE, depth=30))


def test_sampling_never_contradicts_verified_claim():
    task = gasket_task(Fraction(3, 10), INF_ABOVE_ONE)
    ok, _ = verify_minmax(task)
    assert ok
    tiny = Fraction(1, 10**30)
    for i in range(200):
        x = Ball.exact(Fraction(5 * i, 200) + tiny, PREC)
        h = transfer_ratio_jet(task.system, task.t, task.f, x, tiny, 2)
        assert float(h.rng[0].hi) > 1, f"sample {i} contradicts inf > 1"


def test_taylor_bound_contains_center_value():
    task = gasket_task(Fraction(3, 10), INF_ABOVE_ONE)
    center = Ball.exact(Fraction(5, 2), PREC)
    h = transfer_ratio_jet(task.system, task.t, task.f, center,
                           Fraction(1, 16), 2)
    enc = taylor_bound(h, Fraction(1, 16), 2)
    assert enc.lo <= h.point[0].lo and h.point[0].hi <= enc.hi
    assert enc.overlaps(h.rng[0])


def test_recheck_accepts_fresh_log():
    task = gasket_task(Fraction(3, 10), INF_ABOVE_ONE)
    ok, log = verify_minmax(task)
    assert ok
    assert recheck_log(log, task) is True


def test_recheck_rejects_corruptions():
    # a real candidate near the crossing forces a multi-leaf log
    system = get_system("sierpinski:d=2", PREC)
    t = Fraction(11, 20)
    f = chebyshev.build_test_function(system, t, 20)
    task = VerificationTask(system, t, f, INF_ABOVE_ONE, 18,
                            derivative_order=2)
    ok, log = verify_minmax(task)
    assert ok and len(log.records) >= 2

    # dropping a leaf opens a hole in the tiling
    holed = VerificationLog()
    holed.outcome = "verified"
    holed.records = log.records[:-1]
    with pytest.raises(CoverageGap):
        recheck_log(holed, task)

    # a displaced enclosure still certifies but no longer matches
    moved = VerificationLog()
    moved.outcome = "verified"
    moved.records = list(log.records)
    rec = moved.records[0]
    moved.records[0] = LogRecord(rec.center, rec.radius,
                                 Ball.exact(5, PREC), rec.depth, rec.method)
    with pytest.raises(InequalityFailure):
        recheck_log(moved, task)

    # claiming the opposite direction must fail the inequality recheck
    flipped = VerificationTask(task.system, task.t, task.f, SUP_BELOW_ONE,
                               task.depth_limit)
    with pytest.raises(InequalityFailure):
        recheck_log(log, flipped)

    unfinished = VerificationLog()
    with pytest.raises(InequalityFailure):
        recheck_log(unfinished, task)


def test_verify_positive_paths():
    system = get_system("cantor:r=1/3,k=2", PREC)
    f = chebyshev.build_test_function(system, Fraction(1, 2), 8)
    ok, log = verify_positive(f, system, 10)
    assert ok and log.outcome == "verified"
    grid = chebyshev.chebyshev_grid(4, system.domain, PREC)
    bad = chebyshev.TestFunction(grid, [mpfr(-1, precision=PREC)] * 4,
                                 Fraction(1, 2))
    ok, log = verify_positive(bad, system, 10)
    assert not ok and log.outcome == "refuted"
    # a negative leftmost node refutes once the descent reaches it
    mixed = chebyshev.TestFunction(
        grid, [mpfr(-1, precision=PREC)] + [mpfr(1, precision=PREC)] * 3,
        Fraction(1, 2))
    ok, log = verify_positive(mixed, system, 24)
    assert not ok and log.outcome == "refuted"
    # with the dip on the right, the left-first search hits the crossing
    # cell before any strictly negative leaf and runs out of depth there
    tail = chebyshev.TestFunction(
        grid, [mpfr(1, precision=PREC)] * 3 + [mpfr(-1, precision=PREC)],
        Fraction(1, 2))
    with pytest.raises(DepthExhausted):
        verify_positive(tail, system, 24)


def test_parallel_verdict_matches_and_replays():
    task = gasket_task(Fraction(3, 10), INF_ABOVE_ONE)
    ok_serial, log_serial = verify_minmax(task)
    ok_par, log_par = verify_minmax(task, threads=2)
    assert ok_serial and ok_par
    assert log_par.outcome == "verified"
    assert len(log_par.records) >= len(log_serial.records)
    assert recheck_log(log_par, task) is True


def test_task_validation():
    system = get_system("sierpinski:d=2", PREC)
    f = const_one(system, Fraction(0))
    with pytest.raises(ValueError):
        VerificationTask(system, 0, f, "Sideways", 10)
    with pytest.raises(ValueError):
        VerificationTask(system, 0, f, INF_ABOVE_ONE, -1)
    with pytest.raises(ValueError):
        VerificationTask(system, 0, f, INF_ABOVE_ONE, 10, derivative_order=0)
    with pytest.raises(ValueError):
        VerificationTask(system, 0, f, INF_ABOVE_ONE, 10,
                         derivative_order=3, jet_order=2)
    sg3 = get_system("sg3", PREC)
    f3 = const_one(sg3, Fraction(0))
    with pytest.raises(ValueError):
        VerificationTask(sg3, 0, f3, INF_ABOVE_ONE, 10, derivative_order=2,
                         jet_order=4)
