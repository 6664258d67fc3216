"""Command line: ``python -m cfldp <subcommand> ...``.

Every subcommand writes CSV (stdout or ``--out``) preceded by ``# key: value``
header lines recording the version, the full configuration, the seed and the
precision. Bodies depend only on what the header records.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Sequence

from . import __version__

DEFAULT_EXACT_N = "5:18"
DEFAULT_MC_N = "50,100,200,400,800"
DEFAULT_ALPHA_GRID = "1.0:6.0:0.1"
VERIFY_BUDGET = 10_000_000


def parse_number(s: str) -> Fraction:
    """Decimal string (``1e6`` allowed), ``p/q``, or one of ``2gamma``, ``alpha_min``."""
    from .thermo_rate import ALPHA_MIN, TWO_GAMMA

    s = s.strip()
    named = {"2gamma": TWO_GAMMA, "alpha_min": ALPHA_MIN}
    if s in named:
        return Fraction(named[s])
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from exc


def parse_grid(text: str) -> list[Fraction]:
    """``lo:hi:step`` (inclusive, exact arithmetic) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = [parse_number(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(Fraction(1))
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected lo:hi:step")
        lo, hi, step = parts
        count = math.floor((hi - lo) / step)
        return [lo + i * step for i in range(count + 1)]
    return [parse_number(p) for p in text.split(",") if p.strip()]


def parse_int_grid(text: str) -> list[int]:
    vals = parse_grid(text)
    if any(v.denominator != 1 or v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return [int(v) for v in vals]


def parse_count(s: str) -> int:
    v = parse_number(s)
    if v.denominator != 1 or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return int(v)


# -- subcommands --------------------------------------------------------------


def cmd_expand(args, out) -> int:
    from .cf_core import PrecisionError, convergents, default_bits, expand, parse_real

    bits = args.precision_bits or max(256, default_bits(args.n))
    x = parse_real(args.x, bits=bits)
    try:
        d = expand(x, args.n)
    except PrecisionError as exc:
        print(f"error: {exc}; raise --precision-bits", file=sys.stderr)
        return 2
    _header(out, args, precision_bits=bits)
    out.write("k,digit,p,q,finite\n")
    for c, a in zip(convergents(d), d):
        out.write(f"{c.k},{a},{c.p},{c.q},{int(d.finite)}\n")
    return 0


def cmd_tail(args, out) -> int:
    from .cylinder_tail import DEFAULT_BUDGET, TailQuery, exact_tail, write_tail_csv

    budget = args.budget or DEFAULT_BUDGET
    results = []
    for n in args.n:
        for a in args.alpha:
            results.append(exact_tail(TailQuery(n, a, args.side), budget=budget, workers=args.workers))
    _header(out, args, budget=budget)
    write_tail_csv(results, out, timing=args.timing)
    return 0


def cmd_mc(args, out) -> int:
    from .mc_sampler import GENERATOR, McConfig, estimate_tail, write_mc_csv

    ests = []
    for n in args.n:
        cfg = McConfig(n, args.samples, seed=args.seed, precision_bits=args.precision_bits, engine=args.engine)
        for a in args.alpha:
            ests.append(estimate_tail(cfg, a, args.side, workers=args.workers))
    _header(out, args, generator=GENERATOR)
    write_mc_csv(ests, out)
    return 0


def cmd_pressure(args, out) -> int:
    from .thermo_rate import DEFAULT_DISC, pressure

    _header(out, args, discretization=DEFAULT_DISC.metadata())
    out.write("t,pressure,eigenvalue,iterations,refinement_delta\n")
    for t in args.t:
        r = pressure(float(t), DEFAULT_DISC, refine=args.refine)
        delta = "" if r.refinement_delta is None else repr(r.refinement_delta)
        out.write(f"{float(t)!r},{r.value!r},{r.eigenvalue!r},{r.iterations},{delta}\n")
    return 0


def cmd_rate(args, out) -> int:
    from .thermo_rate import DEFAULT_DISC, spectrum, write_spectrum_csv

    rows = spectrum([float(a) for a in args.alpha], DEFAULT_DISC, refine=args.refine, margin=args.margin)
    _header(out, args, discretization=DEFAULT_DISC.metadata())
    write_spectrum_csv(rows, out)
    return 0


def _figure1_grid() -> list[float]:
    from .thermo_rate import ALPHA_MIN

    near = [ALPHA_MIN + 10.0**-k for k in (3, 2.5, 2, 1.5)]
    body = [float(a) for a in parse_grid("1.0:6.0:0.1")]
    far = [float(a) for a in parse_grid("7:20:1") + parse_grid("25:60:5")]
    return near + body + far


def cmd_figure1(args, out) -> int:
    from .thermo_rate import ALPHA_MIN, DEFAULT_DISC, spectrum

    grid = [float(a) for a in args.alpha] if args.alpha else _figure1_grid()
    rows = spectrum(grid, DEFAULT_DISC, refine=False, margin=args.margin)
    _header(out, args, discretization=DEFAULT_DISC.metadata())
    out.write("kind,alpha,I_alpha,I_prime,b_alpha,note\n")
    for rp in rows:
        if isinstance(rp, tuple):
            out.write(f"curve,{rp[0]!r},,,,failed\n")
        else:
            out.write(f"curve,{rp.alpha!r},{rp.I!r},{rp.Iprime!r},{rp.b!r},\n")
    # limits annotated on the curve
    out.write(f"limit,{ALPHA_MIN!r},{ALPHA_MIN!r},,0.0,I(alpha_min) = alpha_min\n")
    out.write(f"limit,{ALPHA_MIN!r},,-inf,,I' -> -inf as alpha -> alpha_min+\n")
    out.write("limit,inf,,0.5,0.5,I' -> 1/2 as alpha -> inf\n")
    return 0


def cmd_verify_bound(args, out) -> int:
    from .bounds import check_bound, in_window, write_bound_csv
    from .thermo_rate import DEFAULT_DISC, ConvergenceError, OutOfDomainError, PositivityError, rate_point

    ns = args.n or parse_int_grid(DEFAULT_EXACT_N if args.mode == "exact" else DEFAULT_MC_N)
    sides = ["upper", "lower"] if args.side == "both" else [args.side]
    budget = args.budget or VERIFY_BUDGET
    rates = {}
    rows = []
    for a in args.alpha:
        if a not in rates:
            try:
                rates[a] = rate_point(float(a), DEFAULT_DISC)
            except (OutOfDomainError, ConvergenceError, PositivityError):
                rates[a] = None
        for n in ns:
            for side in sides:
                if args.window_only and not in_window(n, a, side):
                    continue
                rows.append(
                    check_bound(
                        n,
                        a,
                        side,
                        mode=args.mode,
                        rate=rates[a],
                        budget=budget,
                        samples=args.samples,
                        seed=args.seed,
                        engine=args.engine,
                        precision_bits=args.precision_bits,
                        workers=args.workers,
                    )
                )
    _header(out, args, budget=budget)
    write_bound_csv(rows, out)
    if args.mode == "exact":
        failed = [r for r in rows if r.in_window and r.passed is not True]
        if failed:
            for r in failed:
                print(f"bound not certified: n={r.n} alpha={r.alpha} side={r.side} ({r.certificate})", file=sys.stderr)
            return 1
    return 0


# -- plumbing -----------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, Fraction):
        from .cylinder_tail import format_rational

        return format_rational(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _header(out, args, **extra) -> None:
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    lines = [
        f"version: {__version__}",
        f"command: {args.command}",
        f"config: {json.dumps(config, sort_keys=True)}",
        f"seed: {args.seed}",
        f"precision_bits: {extra.pop('precision_bits', None) or args.precision_bits or 'default'}",
    ]
    for k, v in extra.items():
        lines.append(f"{k}: {json.dumps(v, sort_keys=True) if isinstance(v, dict) else v}")
    for line in lines:
        out.write(f"# {line}\n")


def build_parser() -> argparse.ArgumentParser:
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--precision-bits", type=parse_count, default=None, help="working precision in bits")
    glob.add_argument("--budget", type=parse_count, default=None, help="enumeration budget (prefixes visited)")
    glob.add_argument("--seed", type=parse_count, default=0)
    glob.add_argument("--out", default="-", help="output path, '-' for stdout")
    glob.add_argument("--workers", type=parse_count, default=1)

    p = argparse.ArgumentParser(prog="cfldp", description="Continued-fraction large deviations toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("expand", parents=[glob], help="digits and convergents of x")
    s.add_argument("--x", required=True, help="p/q, decimal, golden or sqrt2m1")
    s.add_argument("--n", type=parse_count, required=True)
    s.set_defaults(func=cmd_expand)

    s = sub.add_parser("tail", parents=[glob], help="exact tail measures by enumeration")
    s.add_argument("--n", type=parse_int_grid, required=True)
    s.add_argument("--alpha", type=parse_grid, required=True)
    s.add_argument("--side", choices=["upper", "lower"], default="upper")
    s.add_argument("--timing", action="store_true", help="fill the seconds column (breaks byte-identity)")
    s.set_defaults(func=cmd_tail)

    s = sub.add_parser("mc", parents=[glob], help="Monte Carlo tail estimates")
    s.add_argument("--n", type=parse_int_grid, required=True)
    s.add_argument("--alpha", type=parse_grid, required=True)
    s.add_argument("--side", choices=["upper", "lower"], default="upper")
    s.add_argument("--samples", type=parse_count, default=100_000)
    s.add_argument("--engine", choices=["dyadic", "markov"], default="dyadic")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("pressure", parents=[glob], help="pressure P(t)")
    s.add_argument("--t", type=parse_grid, required=True)
    s.add_argument("--refine", action="store_true", help="also report the N+8 refinement change")
    s.set_defaults(func=cmd_pressure)

    s = sub.add_parser("rate", parents=[glob], help="rate function and spectrum on an alpha grid")
    s.add_argument("--alpha", type=parse_grid, default=parse_grid(DEFAULT_ALPHA_GRID))
    s.add_argument("--margin", type=float, default=1e-4)
    s.add_argument("--no-refine", dest="refine", action="store_false")
    s.set_defaults(func=cmd_rate)

    s = sub.add_parser("figure1", parents=[glob], help="(alpha, I(alpha)) curve with its limits")
    s.add_argument("--alpha", type=parse_grid, default=None)
    s.add_argument("--margin", type=float, default=1e-4)
    s.set_defaults(func=cmd_figure1)

    s = sub.add_parser("verify-bound", parents=[glob], help="check tails against C_a exp(-I(a) n)")
    s.add_argument("--n", type=parse_int_grid, default=None)
    s.add_argument("--alpha", type=parse_grid, default=parse_grid(DEFAULT_ALPHA_GRID))
    s.add_argument("--side", choices=["upper", "lower", "both"], default="both")
    s.add_argument("--mode", choices=["exact", "mc"], default="exact")
    s.add_argument("--samples", type=parse_count, default=100_000)
    s.add_argument("--engine", choices=["dyadic", "markov"], default="markov")
    s.add_argument("--window-only", action="store_true", help="skip rows outside the window")
    s.set_defaults(func=cmd_verify_bound)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.out == "-":
        return args.func(args, sys.stdout)
    with open(args.out, "w", newline="") as fh:
        return args.func(args, fh)


if __name__ == "__main__":
    sys.exit(main())
