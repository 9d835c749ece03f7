"""Command-line front end.

Exit status is 0 on success, 2 on invalid input and 1 on runtime failure;
it never encodes whether a test rejected.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import calibration as cal
from . import simulation as sim
from .distributions import (
    ProbVector,
    identity_weight,
    lp_mixture_weight,
    mixture_weight,
    pi0_weight,
    piecewise_uniform,
    power_law,
    truncated_weight,
    uniform,
)
from .errors import CapabilityError, UStatError, ValidationError
from .io import load_counts, load_dist, load_weight

OUTPUT_DIR_ENV = "USTATGOF_OUTPUT_DIR"


def _num(text, what, cast=float):
    try:
        return cast(text)
    except ValueError:
        raise ValidationError(f"bad {what} {text!r}") from None


def parse_dist(spec: str) -> tuple[ProbVector, float | None]:
    """``unif:<d> | powerlaw:<d>:<r> | piecewise:<d>:<omega1> | file:<path>``.

    Returns the vector and, for power laws, the exponent.
    """
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    if kind == "unif" and len(parts) == 1:
        return uniform(_num(parts[0], "dimension", int)), 0.0
    if kind == "powerlaw" and len(parts) == 2:
        r = _num(parts[1], "exponent")
        return power_law(_num(parts[0], "dimension", int), r), r
    if kind == "piecewise" and len(parts) == 2:
        return piecewise_uniform(_num(parts[0], "dimension", int), _num(parts[1], "omega1")), None
    if kind == "file" and rest:
        return load_dist(rest), None
    raise ValidationError(f"bad distribution spec {spec!r}")


def parse_weight(spec: str, pi0: ProbVector):
    """``identity | pi0 | mixture:<gamma> | trunc | lp:<p> | file:<path>``."""
    kind, _, arg = spec.partition(":")
    if kind == "identity" and not arg:
        return identity_weight(pi0.d)
    if kind == "pi0" and not arg:
        return pi0_weight(pi0)
    if kind == "mixture":
        return mixture_weight(pi0, _num(arg, "gamma") if arg else 0.5)
    if kind == "trunc" and not arg:
        return truncated_weight(pi0)
    if kind == "lp" and arg:
        return lp_mixture_weight(pi0, math.inf if arg == "inf" else _num(arg, "p"))
    if kind == "file" and arg:
        w = load_weight(arg)
        if w.d != pi0.d:
            raise ValidationError(f"weight file has d={w.d}, null has d={pi0.d}")
        return w
    raise ValidationError(f"bad weight spec {spec!r}")


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _resolve_out(path: str | None) -> Path | None:
    if path is None or path == "-":
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(text: str, out: str | None):
    target = _resolve_out(out)
    if target is None:
        sys.stdout.write(text)
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)


# -- verbs -------------------------------------------------------------------

def cmd_test(args) -> str:
    counts = load_counts(args.counts)
    pi0, _ = parse_dist(args.null)
    if counts.d != pi0.d:
        raise ValidationError(f"counts have d={counts.d}, null has d={pi0.d}")
    if args.calib == "poisson":
        res = cal.poisson_test(counts, pi0, args.alpha)
    elif args.calib == "gaussian":
        res = cal.gaussian_test(counts, pi0, parse_weight(args.weight, pi0), args.alpha)
    elif args.calib == "chebyshev":
        res = cal.minimax_test(counts, pi0, parse_weight(args.weight, pi0), args.alpha)
    else:
        res = cal.empirical_quantile_calibrated_test(counts, pi0, args.statistic, args.alpha, args.reps,
                                                     args.seed, args.threads)
    return to_json(res.to_dict())


def _report_text(report, fmt) -> str:
    return report.to_csv() if fmt == "csv" else to_json(report.to_dict())


def cmd_power(args) -> str:
    pi0, r0 = parse_dist(args.null)
    alts = []
    for spec in args.alt:
        pi, r = parse_dist(spec)
        if pi.d != pi0.d:
            raise ValidationError(f"alternative {spec!r} has d={pi.d}, null has d={pi0.d}")
        alts.append(r if r is not None else pi)
    stats = tuple(s.strip() for s in args.stats.split(",") if s.strip())
    cfg = sim.PowerStudyConfig(null=r0 if r0 is not None else pi0, alternatives=alts, n=args.n, d=pi0.d,
                               reps=args.reps, alpha=args.alpha, statistic_kinds=stats,
                               calibration=args.calib, seed=args.seed, workers=args.threads, label="power")
    return _report_text(sim.run_power_study(cfg), args.format)


def cmd_figure(args) -> str:
    report = sim.run_figure(args.number, scale=args.scale, seed=args.seed, workers=args.threads,
                            reps=args.reps)
    return _report_text(report, args.format)


def cmd_diagnose(args) -> str:
    pi0, _ = parse_dist(args.null)
    pi, _ = parse_dist(args.alt) if args.alt else (pi0, None)
    w = parse_weight(args.weight, pi0)
    diag = cal.regime_diagnostics(pi, pi0, w, args.n, args.sigma, strict=False)
    return to_json(diag.to_dict())


def cmd_tvbound(args) -> str:
    pi, _ = parse_dist(args.dist)
    eta = cal.poisson_reference(pi, pi, args.n)[0]
    return to_json({"tv_bound": cal.tv_bound(pi, args.n), "eta": eta, "n": args.n, "d": pi.d})


def cmd_plan(args) -> str:
    eps_sq, rate = cal.separation_planner(args.d, args.n, args.alpha, args.zeta, args.C)
    return to_json({"eps_sq_required": eps_sq, "eps_required": math.sqrt(eps_sq), "minimax_rate": rate,
                    "d": args.d, "n": args.n, "alpha": args.alpha, "zeta": args.zeta, "C": args.C})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ustatgof", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, fmt_default="json", formats=("json",)):
        p.add_argument("--out", help="output path (default: standard output)")
        p.add_argument("--format", choices=formats, default=fmt_default)

    def seeded(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1, help="worker cap; never changes the output")

    p = sub.add_parser("test", help="run one calibrated test")
    p.add_argument("--counts", required=True)
    p.add_argument("--null", required=True)
    p.add_argument("--weight", default="mixture:0.5")
    p.add_argument("--calib", choices=cal.CALIBRATIONS, default="chebyshev")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--statistic", default="u_mix", help="statistic for monte_carlo calibration")
    p.add_argument("--reps", type=int, default=1000)
    seeded(p)
    common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("power", help="Monte Carlo power study")
    p.add_argument("--null", required=True)
    p.add_argument("--alt", action="append", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--stats", default=",".join(sim.FIGURE2_STATISTICS))
    p.add_argument("--calib", choices=cal.CALIBRATIONS, default="monte_carlo")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    seeded(p)
    common(p, "csv", ("csv", "json"))
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("figure", help="regenerate the data behind a simulation figure")
    p.add_argument("number", type=int, choices=(1, 2, 3))
    p.add_argument("--scale", choices=("paper", "desk"), default="paper")
    p.add_argument("--reps", type=int)
    seeded(p)
    common(p, "csv", ("csv", "json"))
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("diagnose", help="regime diagnostics")
    p.add_argument("--null", required=True)
    p.add_argument("--alt")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--weight", default="identity")
    p.add_argument("--sigma", type=float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("tvbound", help="Poisson approximation bound for the collision count")
    p.add_argument("--dist", required=True)
    p.add_argument("--n", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_tvbound)

    p = sub.add_parser("plan", help="separation needed by the minimax test")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--zeta", type=float, default=0.05)
    p.add_argument("--C", type=float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_plan)
    return parser


def _fail(args, exc, status) -> int:
    code = getattr(exc, "code", "runtime_error")
    if getattr(args, "format", "json") == "json":
        sys.stdout.write(to_json({"error": {"code": code, "message": str(exc)}}))
    print(f"ustatgof: error [{code}]: {exc}", file=sys.stderr)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text = args.func(args)
        _emit(text, args.out)
    except (ValidationError, ValueError) as exc:
        return _fail(args, exc, 2)
    except (UStatError, CapabilityError, OSError, RuntimeError, ArithmeticError) as exc:
        return _fail(args, exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
