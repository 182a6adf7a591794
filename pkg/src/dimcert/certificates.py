"""Certificate serialization, digests and independent replay.

A certificate is pure data: every number that feeds a certified statement
is stored as an exact decimal string (the values are dyadic rationals, so
the decimal expansion is finite: a/2^k = a*5^k/10^k).  Replay rebuilds
the branch system from the family string, reconstitutes each midpoint's
test function from its stored node values, re-derives every leaf
enclosure from scratch and re-checks the tiling and the inequalities.
Nothing from the producing run is trusted beyond the claim being checked.

JSON is canonical (sorted keys, tight separators), so identical runs are
byte-identical except for the runtime_seconds field, which is excluded
from digests.  Midpoint logs above the inline threshold move to a sidecar
file next to the certificate, referenced by content hash.
"""

from __future__ import annotations

import hashlib
import json
import os
from fractions import Fraction

from gmpy2 import mpfr, mpq

from . import balls, certify, chebyshev, driver, systems
from . import __version__
from .balls import Ball
from .certify import LogRecord, VerificationLog, VerificationTask
from .errors import CoverageGap, DepthExhausted, InequalityFailure

SCHEMA_VERSION = 1
INLINE_LOG_LIMIT = 10 * 1024 * 1024


# ---------------------------------------------------------------------------
# exact decimal round-trip

def dyadic_decimal(x) -> str:
    """Exact finite decimal string of a 10-smooth rational.

    Bisection midpoints are dyadic; the digit-alignment phase adds test
    points on the decimal grid, so denominators 2^a 5^b must round-trip.
    """
    if isinstance(x, Fraction):
        n, d = x.numerator, x.denominator
    elif isinstance(x, int):
        n, d = x, 1
    else:
        n, d = x.as_integer_ratio()
    a = 0
    while d % 2 == 0:
        d //= 2
        a += 1
    b = 0
    while d % 5 == 0:
        d //= 5
        b += 1
    if d != 1:
        raise ValueError(f"denominator is not of the form 2^a 5^b: {x}")
    k = max(a, b)
    sign = "-" if n < 0 else ""
    digits = str(abs(n) * 2 ** (k - a) * 5 ** (k - b))
    if k == 0:
        return sign + digits
    digits = digits.rjust(k + 1, "0")
    return f"{sign}{digits[:-k]}.{digits[-k:]}"


def decimal_to_mpfr(s: str, prec: int) -> mpfr:
    """Parse an exact decimal back to mpfr; exact when the value fits prec."""
    f = Fraction(s)
    return mpfr(mpq(f.numerator, f.denominator), precision=prec)


# ---------------------------------------------------------------------------
# canonical JSON and digests

def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True)


def digest(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode("ascii")).hexdigest()


def certificate_digest(doc) -> str:
    """Content hash over everything except the volatile runtime field."""
    clean = {k: v for k, v in doc.items() if k != "runtime_seconds"}
    return digest(clean)


# ---------------------------------------------------------------------------
# serialization

def _log_to_dict(log: VerificationLog) -> dict:
    return {
        "outcome": log.outcome,
        "checked": log.checked,
        "max_depth": log.max_depth,
        "records": [
            [dyadic_decimal(r.center), dyadic_decimal(r.radius),
             dyadic_decimal(r.enclosure.lo), dyadic_decimal(r.enclosure.hi),
             r.depth, r.method]
            for r in log.records
        ],
    }


def _midpoint_to_dict(rec, domain) -> dict:
    return {
        "T": dyadic_decimal(rec.T),
        "direction": rec.direction,
        "m": rec.m,
        "precision": rec.precision,
        "depth_limit": rec.depth_limit,
        "derivative_order": rec.derivative_order,
        "jet_order": rec.jet_order,
        "test_function": {
            "m": rec.m,
            "interval": [dyadic_decimal(Fraction(domain[0])),
                         dyadic_decimal(Fraction(domain[1]))],
            "t": dyadic_decimal(rec.T),
            "values": [dyadic_decimal(v) for v in rec.values],
        },
        "log": _log_to_dict(rec.log),
    }


def certificate_to_dict(cert) -> dict:
    system = systems.get_system(cert.family, cert.config.precision)
    return {
        "schema_version": SCHEMA_VERSION,
        "family": cert.family,
        "config": cert.config.snapshot(),
        "t0": dyadic_decimal(cert.t0),
        "t1": dyadic_decimal(cert.t1),
        "status": cert.status,
        "failure": cert.failure,
        "midpoints": [_midpoint_to_dict(rec, system.domain)
                      for rec in cert.midpoints],
        "environment": {
            "precision_bits": cert.config.precision,
            "build_id": f"dimcert-{__version__}",
        },
        "runtime_seconds": cert.runtime_seconds,
    }


def save_certificate(cert, path: str) -> dict:
    """Write certificate JSON; oversized inline logs spill to a sidecar.

    Returns the document as written (with any log indirection applied).
    """
    doc = certificate_to_dict(cert)
    text = canonical_json(doc)
    if len(text) > INLINE_LOG_LIMIT:
        sidecar = {}
        for mp in doc["midpoints"]:
            log_doc = mp.pop("log")
            h = digest(log_doc)
            sidecar[h] = log_doc
            mp["log_digest"] = h
        side_path = path + ".logs.json"
        doc["log_sidecar"] = os.path.basename(side_path)
        with open(side_path, "w") as fh:
            fh.write(canonical_json(sidecar))
        text = canonical_json(doc)
    with open(path, "w") as fh:
        fh.write(text)
    return doc


def load_certificate(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("log_sidecar"):
        side_path = os.path.join(os.path.dirname(os.path.abspath(path)),
                                 doc["log_sidecar"])
        with open(side_path) as fh:
            sidecar = json.load(fh)
        for mp in doc["midpoints"]:
            if "log" in mp:
                continue
            h = mp.get("log_digest")
            if h not in sidecar:
                raise InequalityFailure(f"sidecar is missing log {h}")
            if digest(sidecar[h]) != h:
                raise InequalityFailure(f"sidecar log {h} fails its digest")
            mp["log"] = sidecar[h]
    return doc


# ---------------------------------------------------------------------------
# replay

def _rebuild_log(log_doc: dict, prec: int) -> VerificationLog:
    log = VerificationLog()
    log.outcome = log_doc["outcome"]
    log.checked = log_doc["checked"]
    log.max_depth = log_doc["max_depth"]
    for center, radius, lo, hi, depth, method in log_doc["records"]:
        enclosure = Ball.from_endpoints(decimal_to_mpfr(lo, prec),
                                        decimal_to_mpfr(hi, prec), prec)
        log.records.append(LogRecord(decimal_to_mpfr(center, prec + 8),
                                     decimal_to_mpfr(radius, prec + 8),
                                     enclosure, depth, method))
    return log


def _replay_midpoint(family: str, mp: dict) -> None:
    prec = mp["precision"]
    system = systems.get_system(family, prec)
    tf = mp["test_function"]
    if tf["m"] != mp["m"]:
        raise InequalityFailure("test function rank disagrees with record")
    grid = chebyshev.chebyshev_grid(mp["m"], system.domain, prec)
    values = [decimal_to_mpfr(v, prec) for v in tf["values"]]
    t = Fraction(mp["T"])
    if Fraction(tf["t"]) != t:
        raise InequalityFailure("test function was built at a different t")
    f = chebyshev.TestFunction(grid, values, t)
    try:
        ok, _ = certify.verify_positive(f, system, mp["depth_limit"])
    except DepthExhausted:
        ok = False
    if not ok:
        raise InequalityFailure(f"candidate at T={mp['T']} is not positive")
    task = VerificationTask(system, t, f, mp["direction"], mp["depth_limit"],
                            mp["derivative_order"], 0, mp["jet_order"])
    certify.recheck_log(_rebuild_log(mp["log"], prec), task)


def replay_certificate(doc: dict) -> bool:
    """Re-derive every certified statement in the document from scratch.

    Raises CoverageGap / InequalityFailure on any discrepancy; returns
    True when everything replays.
    """
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InequalityFailure(
            f"unsupported schema version {doc.get('schema_version')!r}")
    family = doc["family"]
    t0 = Fraction(doc["t0"])
    t1 = Fraction(doc["t1"])
    if not t0 < t1:
        raise InequalityFailure(f"bounds are not ordered: {doc['t0']}, "
                                f"{doc['t1']}")
    lower_ts = [Fraction(0)]
    upper_ts = [Fraction(1)]
    for mp in doc["midpoints"]:
        if mp["direction"] not in (certify.INF_ABOVE_ONE,
                                   certify.SUP_BELOW_ONE):
            raise InequalityFailure(f"unknown direction {mp['direction']!r}")
        _replay_midpoint(family, mp)
        if mp["direction"] == certify.INF_ABOVE_ONE:
            lower_ts.append(Fraction(mp["T"]))
        else:
            upper_ts.append(Fraction(mp["T"]))
    if max(lower_ts) != t0 or min(upper_ts) != t1:
        raise InequalityFailure(
            "recorded bounds do not match the certified midpoints")
    if max(lower_ts) >= min(upper_ts):
        raise InequalityFailure("certified directions overlap")
    if doc["status"] == "ok":
        epsilon = Fraction(doc["config"]["epsilon"])
        if not t1 - t0 < epsilon:
            raise InequalityFailure(
                f"final width {float(t1 - t0):.3e} is not below epsilon")
        system = systems.get_system(family, doc["config"]["precision"])
        lo, hi = driver.sanity_bracket(system)
        if not (Fraction(*lo.as_integer_ratio()) < t0
                and t1 < Fraction(*hi.as_integer_ratio())):
            raise InequalityFailure(
                "certified bracket escapes the a-priori sanity bracket")
    return True
