"""``rvb`` command line: collapse | dist | sweep | sample | verify.

Exit codes: 0 success, 1 verification failure, 2 usage or parameter error.
Output goes to stdout or, with ``--out``, atomically to a single file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from fractions import Fraction

from . import __version__, emission, simulator, states, verify
from .errors import CapacityError, DomainError, SymmetryError

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _rational(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _fmt(x: float, precision: int) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.{precision}g}"
    return "0" if s == "-0" else s


def _json_float(x: float):
    return None if math.isinf(x) or math.isnan(x) else x


def _meta(args, seed=None) -> dict:
    timestamp = None
    if args.timestamp:
        timestamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    elif os.environ.get("SOURCE_DATE_EPOCH"):
        epoch = int(os.environ["SOURCE_DATE_EPOCH"])
        timestamp = datetime.fromtimestamp(epoch, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return {"command": args.command, "version": __version__, "seed": seed, "timestamp": timestamp}


def _csv_text(header, rows, comments=()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(meta, data) -> str:
    return json.dumps({"meta": meta, "data": data}, indent=2, sort_keys=False) + "\n"


def _emit(text: str, out_path: str | None):
    if out_path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(out_path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rvb-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- subcommands -------------------------------------------------------------

def cmd_collapse(args) -> str:
    shape = states.SystemShape(args.m, args.n)
    shape.check_p(args.p)
    state = states.collapsed_state(shape, args.p)
    cutoff = 10.0 ** (-args.precision)
    entries = [(state.bitstring(i), a) for i, a in state.nonzero(cutoff)]
    s_tot = Fraction(shape.N - shape.M, 2) + args.p
    m_tot = Fraction(shape.M - shape.N, 2) - args.p
    unpaired = shape.N - shape.M + 2 * args.p
    norm = state.norm()
    if args.format == "csv":
        comments = [f"M={shape.M} N={shape.N} p={args.p}",
                    f"S_tot={_rational(s_tot)} m_tot={_rational(m_tot)}",
                    f"unpaired={unpaired} norm={_fmt(norm, args.precision)}"]
        rows = [(b, _fmt(a, args.precision)) for b, a in entries]
        return _csv_text(["basis", "amplitude"], rows, comments)
    data = {
        "M": shape.M, "N": shape.N, "p": args.p,
        "S_tot": _rational(s_tot), "m_tot": _rational(m_tot),
        "unpaired": unpaired, "norm": norm,
        "amplitudes": [{"basis": b, "amplitude": a} for b, a in entries],
    }
    return _json_text(_meta(args), data)


def _resolve_n(M: int, n, alpha) -> int:
    if (n is None) == (alpha is None):
        raise UsageError("give exactly one of --n or --alpha")
    if n is not None:
        return n
    N = emission.as_fraction(alpha) * M
    if N.denominator != 1:
        raise UsageError(f"alpha={alpha} gives non-integer N = {N} for M={M}")
    return int(N)


def cmd_dist(args) -> str:
    M = args.m
    N = _resolve_n(M, args.n, args.alpha)
    dist = emission.emission_distribution(M, N)
    probs = dist.as_dict()
    # full grid p = 0..M; p below the threshold carries probability 0
    rows = []
    for p in range(0, M + 1):
        exact = probs.get(p, Fraction(0))
        gamma = p / M if M else 0.0
        row = {"p": p, "gamma": gamma, "prob_exact": _rational(exact), "prob_float": float(exact)}
        if args.density:
            row["density"] = float(exact * M) if M else float(exact)
        rows.append(row)
    if args.format == "csv":
        header = ["p", "gamma", "prob_exact", "prob_float"] + (["density"] if args.density else [])
        out = [[r["p"], _fmt(r["gamma"], args.precision), r["prob_exact"], _fmt(r["prob_float"], args.precision)]
               + ([_fmt(r["density"], args.precision)] if args.density else []) for r in rows]
        return _csv_text(header, out)
    return _json_text(_meta(args), {"M": M, "N": N, "rows": rows})


def _alpha_grid(lo: Fraction, hi: Fraction, steps: int):
    if steps < 1 or hi < lo or lo < 0:
        return []
    if steps == 1:
        return [lo]
    return [lo + (hi - lo) * k / (steps - 1) for k in range(steps)]


def cmd_sweep(args) -> str:
    lo = emission.as_fraction(args.alpha_min)
    hi = emission.as_fraction(args.alpha_max)
    if any(M < 1 for M in args.m):
        raise UsageError("every --m must be >= 1")
    grid = _alpha_grid(lo, hi, args.steps)
    requests = []
    seen = set()
    for M in args.m:
        for alpha in grid:
            N = math.floor(alpha * M + Fraction(1, 2))
            snapped = Fraction(N, M)
            if snapped != alpha:
                print(f"warning: alpha={float(alpha):g} snapped to {float(snapped):g} for M={M}", file=sys.stderr)
            if (M, N) in seen:
                continue
            seen.add((M, N))
            requests.append((M, snapped, alpha))
    if not requests:
        raise UsageError("empty alpha grid")
    points = _sweep_points([(M, a) for M, a, _ in requests], args.workers)
    if args.format == "csv":
        header = ["alpha", "M", "gamma_bar", "M_var_gamma", "q_bar", "q_var", "mean_var_ratio"]
        rows = [[_fmt(float(pt.alpha), args.precision), pt.M, _fmt(pt.gamma_bar, args.precision),
                 _fmt(pt.M * pt.gamma_var, args.precision), _fmt(pt.q_bar, args.precision),
                 _fmt(pt.q_var, args.precision), _fmt(pt.mean_var_ratio, args.precision)]
                for pt in points]
        return _csv_text(header, rows)
    data = {"rows": [
        {"alpha": _rational(pt.alpha), "alpha_requested": _rational(req), "snapped": pt.alpha != req,
         "M": pt.M, "N": pt.N, "gamma_bar": pt.gamma_bar, "M_var_gamma": pt.M * pt.gamma_var,
         "q_bar": pt.q_bar, "q_var": pt.q_var, "mean_var_ratio": _json_float(pt.mean_var_ratio)}
        for pt, (_, _, req) in zip(points, requests)
    ]}
    return _json_text(_meta(args), data)


def _sweep_points(pairs, workers):
    if workers and workers > 1 and len(pairs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(emission.sweep_point, *zip(*pairs)))
    return [emission.sweep_point(M, a) for M, a in pairs]


def cmd_sample(args) -> str:
    if args.shots < 1:
        raise UsageError("--shots must be >= 1")
    report = simulator.sample_collapse(states.SystemShape(args.m, args.n), args.shots, args.seed,
                                       workers=args.workers)
    if args.format == "csv":
        probs = emission.emission_distribution(args.m, args.n).as_dict()
        comments = [f"M={report.M} N={report.N} shots={report.shots} seed={report.seed}",
                    f"chi_square={_fmt(report.chi_square, args.precision)} dof={report.dof} "
                    f"p_value={_fmt(report.p_value_bound, args.precision)}"]
        rows = [[p, c, _rational(probs[p])] for p, c in sorted(report.counts.items())]
        return _csv_text(["p", "count", "prob_exact"], rows, comments)
    return _json_text(_meta(args, seed=args.seed), report.as_dict())


def cmd_verify(args):
    if args.max_mu > simulator.BRUTE_FORCE_MAX_SITES:
        raise CapacityError(f"--max-mu is limited to {simulator.BRUTE_FORCE_MAX_SITES} (brute-force stage)")
    if args.max_mu < 1:
        raise UsageError("--max-mu must be >= 1")

    def progress(r):
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name} ({r.cases} cases)", file=sys.stderr)
        for f in r.failures[:3]:
            if f is not None:
                print(f"    {r.name} failed at {tuple(f['case'])}: {f['detail']}", file=sys.stderr)

    results = verify.run_all(args.max_mu, args.tolerance, progress=progress)
    passed = all(r.passed for r in results)
    data = {"passed": passed, "max_mu": args.max_mu, "tolerance": args.tolerance,
            "checks": [r.as_dict() for r in results]}
    if args.format == "csv":
        rows = [[r.name, "pass" if r.passed else "fail", r.cases, len(r.failures)] for r in results]
        text = _csv_text(["check", "status", "cases", "failures"], rows)
    else:
        text = _json_text(_meta(args), data)
    return text, passed


# -- parser --------------------------------------------------------------------

def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", metavar="PATH", help="write to PATH instead of stdout")
    common.add_argument("--precision", type=int, default=12, help="significant digits for floats")
    common.add_argument("--timestamp", action="store_true", help="stamp JSON meta with the current time")

    parser = argparse.ArgumentParser(prog="rvb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rvb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collapse", parents=[common], help="collapsed spin state after p photons")
    p.add_argument("--m", type=_nonneg, required=True)
    p.add_argument("--n", type=_nonneg, required=True)
    p.add_argument("--p", type=int, required=True)

    p = sub.add_parser("dist", parents=[common], help="exact photon-count distribution")
    p.add_argument("--m", type=_nonneg, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--n", type=_nonneg)
    g.add_argument("--alpha", type=str)
    p.add_argument("--density", action="store_true", help="add P/(1/M), a unit-area density column")

    p = sub.add_parser("sweep", parents=[common], help="moments over an alpha grid")
    p.add_argument("--m", type=int, nargs="+", required=True)
    p.add_argument("--alpha-min", type=str, required=True)
    p.add_argument("--alpha-max", type=str, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("sample", parents=[common], help="Monte Carlo photon counting")
    p.add_argument("--m", type=_nonneg, required=True)
    p.add_argument("--n", type=_nonneg, required=True)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("verify", parents=[common], help="run the verification suite")
    p.add_argument("--max-mu", type=int, default=12)
    p.add_argument("--tolerance", type=float, default=1e-9)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            text, passed = cmd_verify(args)
            code = EXIT_OK if passed else EXIT_VERIFY_FAILED
        else:
            handler = {"collapse": cmd_collapse, "dist": cmd_dist, "sweep": cmd_sweep, "sample": cmd_sample}
            text = handler[args.command](args)
            code = EXIT_OK
    except (UsageError, DomainError, CapacityError, SymmetryError, ValueError) as exc:
        print(f"rvb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(text, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
