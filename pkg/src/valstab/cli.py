"""Command-line front end: ``report``, ``check``, ``scan`` and ``perturb``.

Exit codes: 0 when every check passes, 1 on an assertion failure, 2 on bad
input.  Every command given ``--out`` writes its outputs and a
``config.json`` echo there; reruns with the same arguments are
byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .invariants import InvariantError, invariant_report
from .perturb import (
    PerturbationError,
    check_s_estimate,
    fmt_decimal,
    measure_beta_modulus,
    nef_basis,
    standard_directions,
)
from .ratgeom import fmt_rational, parse_rational
from .scanner import (
    ScanError,
    SliceSpec,
    continuity_report,
    csv_text,
    scan_slice,
    write_json,
    write_matrix,
)
from .suites import SUITES, run_suites
from .toric import (
    STANDARD,
    ToricError,
    ToricVariety,
    load_variety,
    parse_divisor,
    parse_valuation,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    variety: str
    inputs: dict = field(default_factory=dict)
    budget: int | None = None
    eps: list[str] | None = None
    grid: int | None = None
    seed: int | None = None
    precision: int = 30
    out: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# input helpers
# ---------------------------------------------------------------------------

def resolve_variety(arg: str) -> ToricVariety:
    """A JSON file path, or the name of a shipped variety (P2, P3, P1xP1,
    P1xP1xP1, F1)."""
    path = Path(arg)
    if path.exists():
        return load_variety(path)
    if arg in STANDARD:
        with resources.as_file(resources.files("valstab") / "data" / f"{arg}.json") as p:
            return load_variety(p)
    raise InputError(f"no variety file {arg!r} and no shipped variety of that name; "
                     f"shipped: {sorted(STANDARD)}")


def parse_eps_list(text: str) -> list[Fraction]:
    """``"1/16,1/32"`` or a power range ``"2^-4..2^-10"``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        try:
            base_lo, e_lo = lo.split("^")
            base_hi, e_hi = hi.split("^")
            if base_lo != base_hi:
                raise ValueError
            base, a, b = int(base_lo), int(e_lo), int(e_hi)
        except ValueError:
            raise InputError(f"bad eps range {text!r}; expected like 2^-4..2^-10") from None
        step = 1 if b >= a else -1
        return [Fraction(base) ** k for k in range(a, b + step, step)]
    out = [parse_rational(p) for p in text.split(",") if p.strip()]
    if not out or any(e <= 0 for e in out):
        raise InputError("eps values must be positive")
    return out


def parse_range(text: str) -> tuple[Fraction, Fraction]:
    parts = text.split(":")
    if len(parts) != 2:
        raise InputError(f"range {text!r} must look like lo:hi")
    lo, hi = (parse_rational(p) for p in parts)
    if lo > hi:
        raise InputError(f"empty range {text!r}")
    return lo, hi


def _q(x) -> str | None:
    return None if x is None else fmt_rational(x)


def _emit(out: str | None, files: dict[str, str], config: RunConfig) -> None:
    if out is None:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (d / name).write_text(text)
    (d / "config.json").write_text(config.to_json())


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

FIELD_LABELS = {
    "A": "A", "vol": "Vol", "tau": "tau", "S": "S", "j": "j", "mu": "mu", "s": "s",
    "stilde": "s~", "beta_direct": "beta", "beta_s_form": "beta (s form)",
    "beta_stilde_form": "beta (s~ form)", "beta_over_S": "beta/S",
}


def cmd_report(args) -> int:
    X = resolve_variety(args.variety)
    L = parse_divisor(X, args.divisor)
    v = parse_valuation(args.valuation, X.dim)
    rep = invariant_report(X, L, v)
    digits = args.precision
    lines = [f"variety {X.name or args.variety}   L = {args.divisor}   v = {v}"]
    if not rep.ample:
        lines.append("L is not ample: only the big-class invariants are reported")
    for key, label in FIELD_LABELS.items():
        val = rep.values.get(key)
        if val is None:
            continue
        dec = fmt_decimal(val, min(digits, 12), "ROUND_HALF_EVEN")
        lines.append(f"  {label:<16} {str(val):>20}   {dec:>22}   exact")
    prof = rep.profile
    lines.append(f"  profile breakpoints: {', '.join(str(b) for b in prof.breakpoints)}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    data = {
        "variety": X.to_dict(), "divisor": args.divisor, "valuation": list(v.v),
        "ample": rep.ample,
        "values": {k: _q(x) for k, x in rep.values.items()},
        "exact": rep.exact,
        "profile": {"breakpoints": [fmt_rational(b) for b in prof.breakpoints],
                    "pieces": [[fmt_rational(c) for c in p] for p in prof.pieces]},
    }
    config = RunConfig("report", args.variety, {"divisor": args.divisor, "valuation": args.valuation},
                       precision=digits, out=args.out)
    _emit(args.out, {"report.json": json.dumps(data, indent=2, sort_keys=True) + "\n",
                     "report.txt": text}, config)
    return EXIT_OK


def cmd_check(args) -> int:
    X = resolve_variety(args.variety)
    names = args.suite or ["all"]
    if names != ["all"]:
        for n in names:
            if n not in SUITES:
                raise InputError(f"unknown suite {n!r}; known: {sorted(SUITES)}")
    results = run_suites(X, names, seed=args.seed, samples=args.samples)
    ok = True
    for r in results:
        ok = ok and r.passed
        tag = "PASS" if r.passed else "FAIL"
        extra = "" if r.exact else " (interval bound)"
        print(f"{tag}  {r.name:<22} samples={r.samples:<6} max residual={float(r.max_residual):.3g}{extra}")
        for note in r.notes:
            print(f"      note: {note}")
        for ce in r.counterexamples:
            print(f"      counterexample: {json.dumps(ce, sort_keys=True)}")
    config = RunConfig("check", args.variety, {"suites": names, "samples": args.samples},
                       seed=args.seed, out=args.out)
    _emit(args.out, {"check.json": json.dumps([r.to_dict() for r in results], indent=2,
                                              sort_keys=True) + "\n"}, config)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_scan(args) -> int:
    X = resolve_variety(args.variety)
    L0 = parse_divisor(X, args.base)
    H1 = parse_divisor(X, args.dir1)
    H2 = parse_divisor(X, args.dir2) if args.dir2 else None
    a_range = parse_range(args.a_range)
    b_range = parse_range(args.b_range) if args.b_range else (Fraction(0), Fraction(0))
    spec = SliceSpec(L0, H1, H2, a_range, b_range, args.grid, args.budget)
    out = Path(args.out) if args.out else None
    ck = out / "scan.jsonl" if out and args.resume else None
    records = scan_slice(X, spec, checkpoint=ck, timing=args.timing)
    levels = [parse_rational(c) for c in args.levels.split(",")] if args.levels else []
    rep = continuity_report(records, levels, args.modulus and parse_rational(args.modulus))
    summary = {"continuity": rep.to_dict()}
    if args.refine:
        fine = SliceSpec(L0, H1, H2, a_range, b_range, 2 * args.grid, args.budget)
        fine_rep = continuity_report(scan_slice(X, fine, timing=args.timing), levels)
        ratio = rep.max_jump / fine_rep.max_jump if fine_rep.max_jump else None
        summary["refined"] = {"grid": 2 * args.grid, "continuity": fine_rep.to_dict(),
                              "jump_ratio": _q(ratio),
                              "jump_ratio_float": None if ratio is None else float(ratio)}
    ample = [r for r in records if r.ample]
    zs = [r.zeta for r in ample]
    print(f"{len(ample)}/{len(records)} ample grid points; zeta in "
          f"[{fmt_rational(min(zs))}, {fmt_rational(max(zs))}]")
    print(f"max adjacent jump {float(rep.max_jump):.6g} at step {fmt_rational(rep.step)}")
    if args.refine:
        r = summary["refined"]
        print(f"refined grid {r['grid']}: max jump "
              f"{r['continuity']['max_jump_float']:.6g}, ratio {r['jump_ratio_float']}")
    for c, pts in rep.refinement_flags.items():
        print(f"level {c}: {len(pts)} refinement flags")
    print(f"homogeneity: {rep.homogeneity_pairs} proportional pairs, "
          f"{'exact' if rep.homogeneity_ok else 'VIOLATED'}")
    failed = not rep.homogeneity_ok or bool(rep.flagged_jumps)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "scan.csv").write_text(csv_text(records))
        write_json(out / "scan.json", X, spec, records, summary)
        write_matrix(out / "scan.matrix", spec, records)
    config = RunConfig("scan", args.variety,
                       {"base": args.base, "dir1": args.dir1, "dir2": args.dir2,
                        "a_range": args.a_range, "b_range": args.b_range,
                        "levels": args.levels, "modulus": args.modulus,
                        "refine": args.refine, "timing": args.timing, "resume": args.resume},
                       budget=args.budget, grid=args.grid, out=args.out)
    _emit(args.out, {}, config)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_perturb(args) -> int:
    X = resolve_variety(args.variety)
    L = parse_divisor(X, args.divisor)
    eps_grid = parse_eps_list(args.eps)
    basis = nef_basis(X, L)
    if args.direction:
        dirs = [(d, parse_divisor(X, d)) for d in args.direction]
    else:
        dirs = standard_directions(basis)
    digits = args.precision
    ok = True
    checks, tables = [], []
    for name, H in dirs:
        for eps in eps_grid:
            r = check_s_estimate(X, L, None, None, eps, H=H, direction=name, budget=args.budget,
                                 digits=digits, enforce_precondition=False)
            ok = ok and r.passed
            checks.append(r.to_json())
            pre = "" if r.precondition else "  (outside bigness precondition)"
            print(f"S-estimate {name:<10} eps={fmt_rational(eps):<8} "
                  f"{'PASS' if r.passed else 'FAIL'}{pre}")
        T = measure_beta_modulus(X, L, H, eps_grid, args.budget, name, digits=digits)
        ok = ok and T.passed
        tables.append(T.to_json(digits))
        decay = "n/a" if T.decay is None else T.decay
        print(f"modulus {name:<10} monotone={T.monotone} decay={decay} transfer={T.transfer_ok}")
        for row in T.rows:
            f = "skipped" if row.f_filtered is None else f"{float(row.f_filtered):.6g}"
            print(f"    eps={fmt_rational(row.eps):<8} f={f}")
    data = {
        "variety": X.to_dict(), "divisor": args.divisor, "budget": args.budget,
        "basis": {"classes": [[fmt_rational(c) for c in A.coeffs] for A in basis.classes],
                  "t": [fmt_rational(t) for t in basis.t]},
        "s_estimate": checks, "modulus": tables,
    }
    config = RunConfig("perturb", args.variety, {"divisor": args.divisor, "directions": args.direction},
                       budget=args.budget, eps=[fmt_rational(e) for e in eps_grid],
                       precision=digits, out=args.out)
    _emit(args.out, {"perturb.json": json.dumps(data, indent=2, sort_keys=True) + "\n"}, config)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="valstab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("report", help="all invariants at one (L, v)")
    r.add_argument("variety", help="variety JSON file or shipped name (P2, F1, ...)")
    r.add_argument("divisor", help='e.g. "3H", "-K", "H1+2H2"')
    r.add_argument("valuation", help='e.g. "e1", "(0,1)"')
    r.add_argument("--precision", type=int, default=30, help="decimal digits in rendered output")
    r.add_argument("--out", help="output directory")
    r.set_defaults(func=cmd_report)

    c = sub.add_parser("check", help="randomised identity and inequality suites")
    c.add_argument("variety")
    c.add_argument("--suite", action="append", help=f"one of {', '.join(SUITES)} (repeatable)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--samples", type=int, default=100)
    c.add_argument("--out")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("scan", help="zeta over a grid of an ample-cone slice")
    s.add_argument("variety")
    s.add_argument("--base", required=True, help="centre class L0")
    s.add_argument("--dir1", required=True, help="first direction H1")
    s.add_argument("--dir2", help="second direction H2 (omit for a ray or line slice)")
    s.add_argument("--a-range", default="-1/2:1/2", help="lo:hi for the H1 coefficient")
    s.add_argument("--b-range", help="lo:hi for the H2 coefficient")
    s.add_argument("--grid", type=int, default=8, help="intervals per side")
    s.add_argument("--budget", type=int, default=3, help="sup-norm bound on valuations")
    s.add_argument("--levels", default="-1/2,-1/4,0", help="levels c for openness flags")
    s.add_argument("--modulus", help="flag neighbour jumps above this value")
    s.add_argument("--refine", action="store_true", help="also scan at twice the resolution")
    s.add_argument("--resume", action="store_true", help="checkpoint to and resume from OUT/scan.jsonl")
    s.add_argument("--timing", action="store_true", help="record per-point milliseconds")
    s.add_argument("--out")
    s.set_defaults(func=cmd_scan)

    q = sub.add_parser("perturb", help="S-estimate bounds and the modulus of beta")
    q.add_argument("variety")
    q.add_argument("divisor")
    q.add_argument("--direction", action="append", help="direction class (default: nef-basis set)")
    q.add_argument("--eps", default="2^-4..2^-10", help='"1/16,1/32" or "2^-4..2^-10"')
    q.add_argument("--budget", type=int, default=3)
    q.add_argument("--precision", type=int, default=30, help="digits for outward-rounded decimals")
    q.add_argument("--out")
    q.set_defaults(func=cmd_perturb)
    return p


def _protect_negatives(argv: list[str]) -> list[str]:
    """Let ``-K`` or ``-e1`` through as values: every option is ``--long``
    (or ``-h``), and argparse never reads a token containing a space as a
    flag."""
    return [f" {a}" if a.startswith("-") and not a.startswith("--") and a != "-h" else a
            for a in argv]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_protect_negatives(argv))
    for key, val in vars(args).items():
        if isinstance(val, str):
            setattr(args, key, val.strip())
        elif isinstance(val, list):
            setattr(args, key, [x.strip() if isinstance(x, str) else x for x in val])
    try:
        return args.func(args)
    except (InputError, ToricError, ScanError, PerturbationError, InvariantError, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
