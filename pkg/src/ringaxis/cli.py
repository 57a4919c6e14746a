"""Command-line surface: constants, simulate, verify, search, reconstruct.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 numeric failure (collision, divergence, budget), 4 seed outside
the collisionless family without --allow-unbounded.

Every output file starts with a manifest header (version, command line,
settings, outputs, timestamp) so a run can be reproduced from the file
alone.  The timestamp honors SOURCE_DATE_EPOCH; the recorded command
strips --jobs so worker count never changes output bytes.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dynamics import radial_bounds_from_seed
from .errors import (BudgetExceededError, CollisionDomainError, ConfigurationError,
                     DivergenceError, OutsideFamilyError, SegmentError,
                     TheoremViolationError)
from .integrate import IntegratorSettings, integrate, write_trajectory_csv
from .model import (SEED_FIELDS, SeedConfig, closed_form_ring_sums, format_record_line,
                    make_constants, parse_seed_mapping, seed_from_mapping,
                    seed_to_mapping, validate_family)
from .nbody import cross_validate, reconstructed_samples, write_body_rows_csv
from .search import (CATALOG_FIELDS, candidate_to_record, load_known_orbits,
                     make_candidate, parse_seed_table, refine, sweep,
                     verify_recurrence, write_catalog)

_SWEEPABLE = ("y10", "dy20", "df0", "t0", "m1", "m2")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        stamp = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        stamp = datetime.now(timezone.utc)
    return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def _strip_jobs(argv: Sequence[str]) -> list[str]:
    # --jobs must not influence output bytes; scrub it from the recorded command.
    shown = []
    skip = False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--jobs":
            skip = True
            continue
        if tok.startswith("--jobs="):
            continue
        shown.append(tok)
    return shown


def run_manifest(argv: Sequence[str], settings: IntegratorSettings,
                 outputs: Sequence[str]) -> list[str]:
    return [
        f"ringaxis {__version__}",
        "command: ringaxis " + " ".join(_strip_jobs(argv)),
        f"settings: rel_tol={settings.rel_tol!r} abs_tol={settings.abs_tol!r}",
        "outputs: " + " ".join(outputs),
        f"timestamp: {_timestamp()}",
    ]


# ---------------------------------------------------------------------------
# Shared flag groups.

def _add_seed_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("seed")
    g.add_argument("--config", metavar="FILE",
                   help="seed file: 'key = value' lines or a JSON object")
    g.add_argument("--n", type=int, help="ring body count (>= 2)")
    g.add_argument("--m1", type=float, help="axial mass")
    g.add_argument("--m2", type=float, help="ring body mass")
    g.add_argument("--y10", type=float, help="initial ring radius")
    g.add_argument("--dy20", type=float, help="initial tangential speed")
    g.add_argument("--df0", type=float, help="initial axial speed (default 0)")
    g.add_argument("--theta0", nargs=2, type=int, metavar=("P", "Q"),
                   help="target angle (P/Q)*pi")
    g.add_argument("--t0", type=float, help="candidate period")


def _add_settings_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rel-tol", type=float, default=1e-12)
    p.add_argument("--abs-tol", type=float, default=1e-12)


def _settings(args: argparse.Namespace) -> IntegratorSettings:
    return IntegratorSettings(rel_tol=args.rel_tol, abs_tol=args.abs_tol)


def _build_seed(args: argparse.Namespace,
                defaults: dict[str, str] | None = None) -> SeedConfig:
    kv: dict[str, str] = dict(defaults or {})
    if args.config:
        kv.update(parse_seed_mapping(Path(args.config).read_text(encoding="utf-8")))
    for name in ("n", "m1", "m2", "y10", "dy20", "df0", "t0"):
        val = getattr(args, name)
        if val is not None:
            kv[name] = repr(val)
    if args.theta0 is not None:
        kv["theta0_p"], kv["theta0_q"] = str(args.theta0[0]), str(args.theta0[1])
    kv.setdefault("df0", "0.0")
    kv.setdefault("theta0_p", "0")
    kv.setdefault("theta0_q", "1")
    return seed_from_mapping(kv)


def _seed_given(args: argparse.Namespace) -> bool:
    return args.config is not None or any(
        getattr(args, f) is not None for f in ("n", "m1", "m2", "y10", "dy20"))


def _require_t_end(seed: SeedConfig, args: argparse.Namespace) -> float:
    t_end = getattr(args, "t_end", None)
    if t_end is None:
        t_end = seed.t0
    if t_end is None:
        raise ConfigurationError("need --t-end or a seed with --t0")
    if not t_end > 0:
        raise ConfigurationError(f"integration span must be positive, got {t_end}")
    return float(t_end)


def _family_gate(seed: SeedConfig, args: argparse.Namespace) -> None:
    if not validate_family(seed).in_L and not args.allow_unbounded:
        raise OutsideFamilyError(
            "seed is outside the collisionless family (needs c1 != 0 and c2 < 0); "
            "pass --allow-unbounded to integrate it anyway")


def _plot_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + ".png"


# ---------------------------------------------------------------------------
# Commands.

def cmd_constants(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if args.n is None or args.n < 2:
        raise ConfigurationError("constants needs --n with an integer >= 2")
    rc = make_constants(args.n, 1.0, 1.0)
    print(f"n = {args.n}")
    print(f"a_n = {_fmt(rc.a_n)}")
    print(f"b_n = {_fmt(rc.b_n)}")
    print(f"b_n/2 - a_n = {_fmt(rc.b_n / 2.0 - rc.a_n)}")
    closed = closed_form_ring_sums(args.n)
    if closed is not None:
        a_cf, b_cf = closed
        print(f"closed form a_n = {_fmt(a_cf)}  |difference| = {abs(rc.a_n - a_cf):.3e}")
        print(f"closed form b_n = {_fmt(b_cf)}  |difference| = {abs(rc.b_n - b_cf):.3e}")
    return 0


def cmd_simulate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    seed = _build_seed(args)
    settings = _settings(args)
    t_end = _require_t_end(seed, args)
    _family_gate(seed, args)
    flags = validate_family(seed)

    traj = integrate(seed, t_end=t_end, settings=settings)
    outputs = [args.out]
    if not args.no_plot:
        outputs.append(_plot_path(args.out))
    manifest = run_manifest(argv, settings, outputs)
    write_trajectory_csv(traj, args.out, num_samples=args.samples,
                         manifest_lines=manifest)
    if not args.no_plot:
        from .plots import plot_trajectory
        plot_trajectory(traj, _plot_path(args.out))

    c = traj.conserved
    print("seed: " + format_record_line(seed_to_mapping(seed), SEED_FIELDS))
    print(f"c1 = {_fmt(c.c1)}")
    print(f"c2 = {_fmt(c.c2)}")
    print(f"in_L = {str(flags.in_L).lower()}  in_B = {str(flags.in_B).lower()}")
    if flags.in_L:
        rb = radial_bounds_from_seed(seed)
        print(f"d = {_fmt(rb.d)}")
        print(f"r_lo = {_fmt(rb.r_lo)}  r_hi = {_fmt(rb.r_hi)}")
    print(f"turning points: {len(traj.events)}")
    print(f"max relative c2 drift = {traj.c2_rel_drift:.3e}")
    print("wrote: " + ", ".join(outputs))
    return 0


def _verify_row(q: SeedConfig, settings: IntegratorSettings,
                args: argparse.Namespace) -> dict:
    flags = validate_family(q)
    rep = verify_recurrence(q, settings)
    result = {
        "in_L": flags.in_L,
        "xi": rep["xi"],
        "r_return_dev": rep["r_return_dev"],
        "closure": rep["closure"],
        "s": rep["full_period_multiplier"],
        "cross_dev": None,
    }
    ok = flags.in_L and rep["xi"] < args.xi_tol
    if rep["closure"] is not None:
        ok = ok and rep["closure"] < args.closure_tol
    if not args.skip_cross:
        # gate on the relative deviation: scale-free across unit choices
        cross = cross_validate(q, settings=settings, tol=args.cross_tol)
        result["cross_dev"] = cross["max_pos_dev_rel"]
        ok = ok and cross["max_pos_dev_rel"] < args.cross_tol
    result["ok"] = ok
    return result


def cmd_verify(args: argparse.Namespace, argv: Sequence[str]) -> int:
    settings = _settings(args)
    if _seed_given(args):
        rows = [_build_seed(args)]
    elif args.fixture is not None:
        rows = parse_seed_table(Path(args.fixture).read_text(encoding="utf-8"))
    else:
        rows = load_known_orbits()
    if not rows:
        raise ConfigurationError("no rows to verify")

    failures = 0
    for i, q in enumerate(rows, start=1):
        res = _verify_row(q, settings, args)
        failures += 0 if res["ok"] else 1
        closure = "" if res["closure"] is None else _fmt(res["closure"])
        cross = "" if res["cross_dev"] is None else _fmt(res["cross_dev"])
        print(f"row={i} n={q.n} xi={_fmt(res['xi'])} closure={closure} "
              f"r_return_dev={_fmt(res['r_return_dev'])} cross_dev={cross} "
              f"s={res['s']} in_L={1 if res['in_L'] else 0} "
              f"pass={1 if res['ok'] else 0}")
    print(f"# passed {len(rows) - failures}/{len(rows)} rows "
          f"(xi_tol={args.xi_tol:g}, closure_tol={args.closure_tol:g}, "
          f"cross_tol={args.cross_tol:g})")
    return 0 if failures == 0 else 1


def _parse_grid(spec: str) -> dict[str, list[float]]:
    axes: dict[str, list[float]] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        name, eq, rng = part.partition("=")
        name = name.strip()
        bits = rng.split(":")
        if not eq or len(bits) != 3:
            raise ConfigurationError(
                f"grid axis {part!r} is not of the form name=lo:hi:count")
        if name not in _SWEEPABLE:
            raise ConfigurationError(
                f"cannot sweep over {name!r}; choose from {', '.join(_SWEEPABLE)}")
        try:
            lo, hi, count = float(bits[0]), float(bits[1]), int(bits[2])
        except ValueError as exc:
            raise ConfigurationError(f"bad grid axis {part!r}: {exc}") from None
        if count < 0:
            raise ConfigurationError(f"grid axis {part!r} has negative count")
        axes[name] = [float(v) for v in np.linspace(lo, hi, count)]
    if not axes:
        raise ConfigurationError("empty grid specification")
    return axes


def cmd_search(args: argparse.Namespace, argv: Sequence[str]) -> int:
    settings = _settings(args)
    if args.grid is None and not getattr(args, "from_seed", False):
        raise ConfigurationError("search needs --grid or --from")

    if getattr(args, "from_seed", False):
        base = _build_seed(args)
        cand = make_candidate(base, settings)
        refined = refine(cand, settings, target=args.target)
        print(f"xi at seed = {_fmt(cand.xi)}")
        print(f"xi refined = {_fmt(refined.xi)}")
        print("candidate: " + format_record_line(candidate_to_record(refined),
                                                 CATALOG_FIELDS))
        candidates = [refined]
    else:
        axes = _parse_grid(args.grid)
        # swept fields need no explicit flag; the axis itself seeds the base value
        placeholders = {name: repr(vals[0]) if vals else "1.0"
                        for name, vals in axes.items()}
        base = _build_seed(args, defaults=placeholders)
        result = sweep(base, axes, threshold=args.threshold, settings=settings,
                       jobs=args.jobs, target=args.target)
        candidates = result.candidates
        print(f"evaluated {result.evaluated} grid points; "
              f"{result.out_of_family} outside the family; "
              f"{len(candidates)} candidates")

    outputs = [args.out]
    if not args.no_plot:
        outputs.append(_plot_path(args.out))
    write_catalog(args.out, candidates,
                  manifest_lines=run_manifest(argv, settings, outputs))
    if not args.no_plot:
        from .plots import plot_catalog
        plot_catalog(candidates, _plot_path(args.out))
    print("wrote: " + ", ".join(outputs))
    return 0


def cmd_reconstruct(args: argparse.Namespace, argv: Sequence[str]) -> int:
    seed = _build_seed(args)
    settings = _settings(args)
    t_end = _require_t_end(seed, args)
    _family_gate(seed, args)

    traj = integrate(seed, t_end=t_end, settings=settings, detect_events=False)
    ts, positions, velocities = reconstructed_samples(traj, num_samples=args.samples)
    outputs = [args.out]
    if not args.no_plot:
        outputs.append(_plot_path(args.out))
    write_body_rows_csv(args.out, ts, positions, velocities,
                        manifest_lines=run_manifest(argv, settings, outputs))
    if not args.no_plot:
        from .plots import plot_bodies
        plot_bodies(ts, positions, _plot_path(args.out))

    masses = np.array([seed.m1] + [seed.m2] * seed.n)
    com = np.einsum("b,tbi->ti", masses, positions) / masses.sum()
    print(f"bodies: {seed.n + 1}")
    print(f"samples: {args.samples}")
    print(f"max |center of mass| = {float(np.max(np.abs(com))):.3e}")
    print("wrote: " + ", ".join(outputs))
    return 0


# ---------------------------------------------------------------------------
# Parser assembly and dispatch.

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringaxis",
        description="Simulate and verify ring-plus-axis (n+1)-body solutions.")
    parser.add_argument("--version", action="version",
                        version=f"ringaxis {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="ring interaction constants for a given n")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("simulate", help="integrate the reduced system, write CSV + figure")
    _add_seed_flags(p)
    _add_settings_flags(p)
    p.add_argument("--t-end", type=float, help="integration span (default: the seed's t0)")
    p.add_argument("--out", default="trajectory.csv")
    p.add_argument("--samples", type=int, default=2001)
    p.add_argument("--allow-unbounded", action="store_true",
                   help="integrate seeds outside the collisionless family")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check periodicity and cross-validation per table row")
    _add_seed_flags(p)
    _add_settings_flags(p)
    p.add_argument("--fixture", metavar="FILE",
                   help="seed table to verify (default: the packaged reference table)")
    p.add_argument("--xi-tol", type=float, default=1e-3,
                   help="bound on the periodicity residual")
    p.add_argument("--closure-tol", type=float, default=5e-2,
                   help="bound on the full-period state-closure norm")
    p.add_argument("--cross-tol", type=float, default=1e-6,
                   help="bound on reduced-vs-full body position deviation, "
                        "relative to the system size")
    p.add_argument("--skip-cross", action="store_true",
                   help="skip the full-Cartesian cross validation")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("search", help="sweep a seed grid for periodic candidates, or refine one")
    _add_seed_flags(p)
    _add_settings_flags(p)
    p.add_argument("--grid", metavar="SPEC",
                   help="comma-separated axes, each name=lo:hi:count")
    p.add_argument("--from", dest="from_seed", action="store_true",
                   help="refine the single seed given by flags/config")
    p.add_argument("--threshold", type=float, default=1e-3,
                   help="xi below which a grid point becomes a candidate")
    p.add_argument("--target", type=float, default=1e-10,
                   help="refinement stops once xi falls below this")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="catalog.txt")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("reconstruct", help="emit full Cartesian body rows from a reduced run")
    _add_seed_flags(p)
    _add_settings_flags(p)
    p.add_argument("--t-end", type=float)
    p.add_argument("--out", default="bodies.csv")
    p.add_argument("--samples", type=int, default=501)
    p.add_argument("--allow-unbounded", action="store_true")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OutsideFamilyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (CollisionDomainError, DivergenceError, BudgetExceededError,
            TheoremViolationError, SegmentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
