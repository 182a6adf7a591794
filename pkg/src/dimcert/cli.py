"""Command-line surface for certification runs, tables, and the lab.

Exit codes: 0 success, 1 usage or unknown-family error, 2 a certification
finished without reaching the requested width (a partial certificate is
still written), 3 a certificate failed replay.  Usage problems are
reported on stderr before any computation starts.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from fractions import Fraction

from . import certificates, decimation, driver, systems
from .errors import (BracketViolation, CoverageGap, DimcertError,
                     InequalityFailure)

_ENV_THREADS = "DIM_THREADS"
_ENV_PRECISION = "DIM_PRECISION"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract reserves 2 for
    # inconclusive runs, so route everything through _UsageError -> 1.
    def error(self, message):
        raise _UsageError(message)


def _resolve_env_int(flag_value, env_name: str, fallback: int) -> int:
    if flag_value is not None:
        return flag_value
    raw = os.environ.get(env_name)
    if not raw:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise _UsageError(f"{env_name} must be an integer, got {raw!r}")


def _parse_epsilon(raw) -> Fraction:
    if raw is None:
        return Fraction(1, 10 ** 15)
    try:
        eps = Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise _UsageError(f"--epsilon must be a decimal, got {raw!r}")
    if not 0 < eps < 1:
        raise _UsageError(f"--epsilon must lie in (0, 1), got {raw}")
    return eps


def _build_config(args) -> driver.RunConfig:
    threads = _resolve_env_int(args.threads, _ENV_THREADS, 1)
    precision = _resolve_env_int(args.precision, _ENV_PRECISION, 128)
    rank = args.rank if args.rank is not None else 30
    max_rank = args.max_rank if args.max_rank is not None else max(120, rank)
    try:
        return driver.RunConfig(
            epsilon=_parse_epsilon(args.epsilon),
            m_initial=rank,
            m_max=max_rank,
            k=args.depth if args.depth is not None else 18,
            p=args.derivs if args.derivs is not None else 2,
            precision=precision,
            threads=threads,
        )
    except ValueError as exc:
        raise _UsageError(str(exc))


def _emit(text: str, output) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _default_cert_path(family: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9]+", "-", family).strip("-")
    return f"{slug}.cert.json"


# ---------------------------------------------------------------------------
# subcommands

def _cmd_dim(args) -> int:
    config = _build_config(args)
    try:
        system = systems.get_system(args.family, config.precision)
    except (DimcertError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    cert = driver.estimate_dimension(system, config)
    path = args.output or _default_cert_path(args.family)
    doc = certificates.save_certificate(cert, path)
    report = {
        "family": cert.family,
        "status": cert.status,
        "t0": certificates.dyadic_decimal(cert.t0),
        "t1": certificates.dyadic_decimal(cert.t1),
        "digits": driver.decided_digits(cert.t0, cert.t1),
        "width": float(cert.width),
        "midpoints": len(cert.midpoints),
        "certificate": path,
        "digest": certificates.certificate_digest(doc),
        "runtime_seconds": cert.runtime_seconds,
    }
    if cert.failure:
        report["failure"] = cert.failure
    if args.format == "json":
        _emit(json.dumps(report, indent=2) + "\n", args.output_report)
    else:
        lines = [f"{key}: {report[key]}" for key in report]
        _emit("\n".join(lines) + "\n", args.output_report)
    return 0 if cert.status == "ok" else 2


def _table_rows(args, config):
    if args.family:
        try:
            system = systems.get_system(args.family, config.precision)
        except (DimcertError, ValueError) as exc:
            raise _UsageError(str(exc))
        return [(args.family, driver.estimate_dimension(system, config))]
    match = re.fullmatch(r"(\d+)\.\.(\d+)", args.range or "2..10")
    if not match:
        raise _UsageError(f"--range must look like 2..10, got {args.range!r}")
    lo, hi = int(match.group(1)), int(match.group(2))
    if not 2 <= lo <= hi:
        raise _UsageError(f"--range endpoints must satisfy 2 <= lo <= hi")
    certs = driver.table_run(range(lo, hi + 1), config)
    return [(str(d), cert) for d, cert in zip(range(lo, hi + 1), certs)]


def _cmd_table(args) -> int:
    config = _build_config(args)
    rows = []
    worst = 0
    for label, cert in _table_rows(args, config):
        digits = driver.decided_digits(cert.t0, cert.t1)
        if cert.status == "ok" and len(digits) >= 16:
            value = digits[:16]
        elif cert.status == "ok":
            value = digits
        else:
            value = "inconclusive"
            worst = 2
        rows.append({
            "d": label,
            "value": value,
            "t0": certificates.dyadic_decimal(cert.t0),
            "t1": certificates.dyadic_decimal(cert.t1),
            "runtime_seconds": f"{cert.runtime_seconds:.3f}",
        })
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(
            buf, fieldnames=["d", "value", "t0", "t1", "runtime_seconds"])
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    _emit(text, args.output)
    return worst


def _cmd_spectrum(args) -> int:
    try:
        graph = decimation.build_level_graph(args.level)
        report = decimation.dirichlet_spectrum(graph)
    except DimcertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["index", "eigenvalue"])
        for i, lam in enumerate(report.eigenvalues):
            writer.writerow([i, repr(lam)])
        text = buf.getvalue()
    elif args.format == "text":
        text = ", ".join(f"{lam:.12g}" for lam in report.eigenvalues) + "\n"
    else:
        text = json.dumps({
            "level": report.level,
            "boundary_condition": report.boundary_condition,
            "convention": report.convention,
            "eigenvalues": list(report.eigenvalues),
        }, indent=2) + "\n"
    _emit(text, args.output)
    return 0


def _cmd_orbit(args) -> int:
    precision = _resolve_env_int(args.precision, _ENV_PRECISION, 128)
    try:
        seed = Fraction(args.value)
    except (ValueError, ZeroDivisionError):
        raise _UsageError(f"orbit seed must be a decimal, got {args.value!r}")
    try:
        system = systems.get_system(args.family, precision)
        orbit = decimation.backward_orbit(system, seed, args.generations)
    except DimcertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    points = [{"word": word, "value": float(ball.center),
               "radius": float(ball.width()) / 2}
              for word, ball in orbit.points]
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["word", "value", "radius"])
        for pt in points:
            writer.writerow([pt["word"], repr(pt["value"]), repr(pt["radius"])])
        text = buf.getvalue()
    elif args.format == "text":
        text = "".join(f"{pt['word']} {pt['value']!r}\n" for pt in points)
    else:
        text = json.dumps({
            "family": args.family,
            "seed": str(seed),
            "generations": args.generations,
            "points": points,
        }, indent=2) + "\n"
    _emit(text, args.output)
    return 0


def _cmd_verify_cert(args) -> int:
    try:
        doc = certificates.load_certificate(args.path)
        certificates.replay_certificate(doc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CoverageGap, InequalityFailure, BracketViolation) as exc:
        print(f"replay failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (DimcertError, json.JSONDecodeError, KeyError, TypeError,
            ValueError) as exc:
        print(f"replay failed: malformed certificate: {exc}", file=sys.stderr)
        return 3
    report = {
        "family": doc["family"],
        "t0": doc["t0"],
        "t1": doc["t1"],
        "status": doc["status"],
        "digest": certificates.certificate_digest(doc),
        "replay": "ok",
    }
    if args.format == "json":
        _emit(json.dumps(report, indent=2) + "\n", args.output)
    else:
        _emit("\n".join(f"{k}: {v}" for k, v in report.items()) + "\n",
              args.output)
    return 0


# ---------------------------------------------------------------------------
# parser wiring

def _add_config_flags(sub) -> None:
    sub.add_argument("--epsilon", help="target bracket width, decimal")
    sub.add_argument("--rank", type=int, help="initial collocation rank")
    sub.add_argument("--max-rank", type=int, dest="max_rank",
                     help="escalation ceiling for the collocation rank")
    sub.add_argument("--depth", type=int, help="bisection depth limit")
    sub.add_argument("--derivs", type=int, help="derivative order 1-3")
    sub.add_argument("--precision", type=int, help="working precision, bits")
    sub.add_argument("--threads", type=int, help="leaf-check worker count")


def build_parser() -> _Parser:
    parser = _Parser(prog="dimcert",
                     description="Certified dimension bounds and the "
                                 "decimation lab")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_dim = sub.add_parser("dim", help="certify one family's dimension")
    p_dim.add_argument("family")
    _add_config_flags(p_dim)
    p_dim.add_argument("--output", help="certificate path")
    p_dim.add_argument("--output-report", dest="output_report",
                       help="write the run report here instead of stdout")
    p_dim.add_argument("--format", choices=["json", "csv", "text"],
                       default="text")
    p_dim.set_defaults(func=_cmd_dim)

    p_table = sub.add_parser("table", help="dimension table over gasket ranks")
    p_table.add_argument("--range", help="inclusive rank range, e.g. 2..10")
    p_table.add_argument("--family", help="single-row mode for one family")
    _add_config_flags(p_table)
    p_table.add_argument("--output", help="write the table here")
    p_table.add_argument("--format", choices=["json", "csv", "text"],
                         default="csv")
    p_table.set_defaults(func=_cmd_table)

    p_spec = sub.add_parser("spectrum", help="Dirichlet spectrum at a level")
    p_spec.add_argument("level", type=int)
    p_spec.add_argument("--output")
    p_spec.add_argument("--format", choices=["json", "csv", "text"],
                        default="json")
    p_spec.set_defaults(func=_cmd_spectrum)

    p_orb = sub.add_parser("orbit", help="backward orbit of a point")
    p_orb.add_argument("value")
    p_orb.add_argument("generations", type=int)
    p_orb.add_argument("--family", default="sierpinski:d=2")
    p_orb.add_argument("--precision", type=int)
    p_orb.add_argument("--output")
    p_orb.add_argument("--format", choices=["json", "csv", "text"],
                       default="json")
    p_orb.set_defaults(func=_cmd_orbit)

    p_ver = sub.add_parser("verify-cert", help="replay a certificate")
    p_ver.add_argument("path")
    p_ver.add_argument("--output")
    p_ver.add_argument("--format", choices=["json", "csv", "text"],
                       default="text")
    p_ver.set_defaults(func=_cmd_verify_cert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise _UsageError("a subcommand is required "
                              "(dim, table, spectrum, orbit, verify-cert)")
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
