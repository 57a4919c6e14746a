"""Periodicity residual, table verification, and candidate refinement.

A seed with candidate period t0 and target angle theta0 is periodic (up to
the rigid rotation by theta0) exactly when the residual

    xi = (fdot(t0) - df0)^2 + (theta(t0) - theta0)^2 + rdot(t0)^2 + f(t0)^2

vanishes.  This module evaluates xi, verifies closure over the full period
s*t0 (s the smallest integer with s*theta0 = 0 mod 2 pi), refines
candidates with a derivative-free simplex search, and sweeps grids of
seeds in parallel with deterministic output.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from importlib import resources
from math import gcd
from multiprocessing import Pool
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import (BudgetExceededError, CollisionDomainError, ConfigurationError,
                     DivergenceError, OutsideFamilyError)
from .integrate import IntegratorSettings, endpoint_state
from .model import (SEED_FIELDS, SeedConfig, format_record_line, parse_record_line,
                    seed_from_mapping, seed_to_mapping, validate_family)

# xi above this is treated as clearly non-periodic; the long full-period
# closure integration is skipped for such seeds.
CLOSURE_SKIP_XI = 1e-2

CATALOG_FIELDS = SEED_FIELDS + ("xi", "refined", "s")


@dataclass(frozen=True)
class PeriodicCandidate:
    """A seed with its periodicity residual.

    full_period_multiplier is the smallest integer s with s*theta0 a
    multiple of 2 pi; after time s*t0 the orbit closes in the inertial
    frame, not merely up to rotation.
    """

    q: SeedConfig
    xi: float
    refined: bool
    full_period_multiplier: int


def full_period_multiplier(theta0: tuple[int, int]) -> int:
    """Smallest s >= 1 with s*(p/q)*pi an integer multiple of 2*pi."""
    p, q = theta0
    return 2 * q // gcd(abs(p), 2 * q) if p != 0 else 1


def _require_in_family(q: SeedConfig) -> None:
    flags = validate_family(q)
    if not flags.in_L:
        raise OutsideFamilyError(
            "xi needs a seed with c1 != 0 and c2 < 0; got one outside the family")


def xi_components(q: SeedConfig, settings: IntegratorSettings | None = None) -> dict:
    """The four squared terms of xi, plus the endpoint state, at t0."""
    if q.t0 is None:
        raise ConfigurationError("xi needs a candidate period t0")
    _require_in_family(q)
    s_end = endpoint_state(q, q.t0, settings)
    return {
        "fdot_term": (s_end.fdot - q.df0) ** 2,
        "theta_term": (s_end.theta - q.theta0_float) ** 2,
        "rdot_term": s_end.rdot**2,
        "f_term": s_end.f**2,
        "endpoint": s_end,
    }


def xi(q: SeedConfig, settings: IntegratorSettings | None = None) -> float:
    """Periodicity residual at (t0, theta0).  Zero certifies a periodic orbit."""
    parts = xi_components(q, settings)
    return parts["fdot_term"] + parts["theta_term"] + parts["rdot_term"] + parts["f_term"]


def make_candidate(q: SeedConfig, settings: IntegratorSettings | None = None) -> PeriodicCandidate:
    return PeriodicCandidate(q=q, xi=xi(q, settings), refined=False,
                             full_period_multiplier=full_period_multiplier(q.theta0))


def verify_recurrence(q: SeedConfig, settings: IntegratorSettings | None = None) -> dict:
    """xi plus direct closure checks.

    Reports |r(t0) - y10| (measured, not assumed: xi itself has no radius
    term) and, when xi is small enough to be worth it, the full-state
    closure after s*t0: the euclidean norm of
    (f, fdot - df0, r - y10, rdot, theta - s*theta0) at time s*t0.
    """
    parts = xi_components(q, settings)
    s_end = parts.pop("endpoint")
    xi_val = parts["fdot_term"] + parts["theta_term"] + parts["rdot_term"] + parts["f_term"]
    s = full_period_multiplier(q.theta0)
    report = {
        "xi": xi_val,
        **parts,
        "r_return_dev": abs(s_end.r - q.y10),
        "full_period_multiplier": s,
        "closure": None,
        "closure_skipped": True,
        "periodic": False,
    }
    if xi_val > CLOSURE_SKIP_XI:
        return report
    end = endpoint_state(q, s * q.t0, settings)
    p, qq = q.theta0
    closure = float(np.sqrt(
        end.f**2 + (end.fdot - q.df0) ** 2 + (end.r - q.y10) ** 2
        + end.rdot**2 + (end.theta - s * p * np.pi / qq) ** 2))
    report["closure"] = closure
    report["closure_skipped"] = False
    report["periodic"] = True
    return report


_REFINE_PARAMS = ("y10", "dy20", "df0", "t0")


def _refine_objective(x: np.ndarray, base: SeedConfig, scale: np.ndarray,
                      settings: IntegratorSettings | None) -> float:
    vals = x * scale
    try:
        q = base.replace(y10=float(vals[0]), dy20=float(vals[1]),
                         df0=float(vals[2]), t0=float(vals[3]))
    except ConfigurationError:
        return float("inf")
    if not validate_family(q).in_L:
        return float("inf")
    try:
        return xi(q, settings)
    except (CollisionDomainError, DivergenceError, BudgetExceededError, OutsideFamilyError):
        return float("inf")


def refine(cand: PeriodicCandidate, settings: IntegratorSettings | None = None,
           target: float = 1e-12, max_evals: int = 400,
           steps: Sequence[float] = (1e-4, 1e-6)) -> PeriodicCandidate:
    """Minimize xi over (y10, dy20, df0, t0) with masses, n, theta0 fixed.

    Runs a Nelder-Mead simplex from the candidate, restarting with a
    tighter simplex around the best point per entry in steps.  Steps out
    of the family cost +inf, so the search cannot leave it.  Monotone:
    the returned xi never exceeds the input's (as re-evaluated under
    settings); if no improvement is found the input comes back flagged
    unrefined.
    """
    q0 = cand.q
    if q0.t0 is None:
        raise ConfigurationError("refine needs a candidate period t0")
    vals0 = np.array([q0.y10, q0.dy20, q0.df0, q0.t0])
    scale = np.where(np.abs(vals0) > 0.0, vals0, 1.0)
    x_best = vals0 / scale
    f_start = _refine_objective(x_best, q0, scale, settings)
    f_best = f_start
    if f_best <= target:
        return replace(cand, xi=f_best, refined=True)

    for step in steps:
        simplex = np.tile(x_best, (5, 1))
        for i in range(4):
            simplex[i + 1, i] += step
        res = minimize(_refine_objective, x_best, args=(q0, scale, settings),
                       method="Nelder-Mead",
                       options={"initial_simplex": simplex, "maxfev": max_evals,
                                "fatol": max(target * 1e-2, 1e-30), "xatol": 1e-13})
        if res.fun < f_best:
            f_best, x_best = float(res.fun), res.x
        if f_best <= target:
            break

    if not f_best < f_start:
        return replace(cand, refined=False)
    vals = x_best * scale
    q_ref = q0.replace(y10=float(vals[0]), dy20=float(vals[1]),
                       df0=float(vals[2]), t0=float(vals[3]))
    return PeriodicCandidate(q=q_ref, xi=f_best, refined=True,
                             full_period_multiplier=cand.full_period_multiplier)


@dataclass(frozen=True)
class SweepResult:
    candidates: list[PeriodicCandidate]
    evaluated: int
    out_of_family: int


def _sweep_eval(task) -> tuple[str, PeriodicCandidate | None]:
    base_kv, names, point, threshold, settings, do_refine, target = task
    q = seed_from_mapping(dict(base_kv))
    q = q.replace(**{name: float(v) for name, v in zip(names, point)})
    try:
        cand = make_candidate(q, settings)
    except OutsideFamilyError:
        return ("out_of_family", None)
    except (CollisionDomainError, DivergenceError, BudgetExceededError):
        return ("failed", None)
    if cand.xi >= threshold:
        return ("above_threshold", None)
    if do_refine:
        cand = refine(cand, settings, target=target)
    return ("ok", cand)


def _seeds_close(a: SeedConfig, b: SeedConfig, rel: float = 1e-6) -> bool:
    for name in _REFINE_PARAMS:
        va = getattr(a, name) if name != "t0" else (a.t0 or 0.0)
        vb = getattr(b, name) if name != "t0" else (b.t0 or 0.0)
        if abs(va - vb) > rel * max(abs(va), abs(vb), 1e-300):
            return False
    return True


def sweep(base: SeedConfig, axes: Mapping[str, Sequence[float]], threshold: float,
          settings: IntegratorSettings | None = None, jobs: int = 1,
          do_refine: bool = True, target: float = 1e-10) -> SweepResult:
    """Evaluate xi over a grid, refine hits, and dedupe.

    axes maps SeedConfig field names to value lists; the grid is their
    cartesian product in the given axis order.  Results are merged in
    grid-index order no matter how many workers run, so the output is
    identical for any jobs count.
    """
    for name in axes:
        if name not in ("y10", "dy20", "df0", "t0", "m1", "m2"):
            raise ConfigurationError(f"cannot sweep over field {name!r}")
    names = list(axes.keys())
    grids = [[float(v) for v in axes[k]] for k in names]
    points = list(itertools.product(*grids))
    base_kv = tuple(sorted(seed_to_mapping(base).items()))
    tasks = [(base_kv, names, p, threshold, settings, do_refine, target) for p in points]
    if jobs <= 1:
        raw = [_sweep_eval(t) for t in tasks]
    else:
        with Pool(processes=jobs) as pool:
            raw = pool.map(_sweep_eval, tasks)

    out_of_family = sum(1 for status, _ in raw if status == "out_of_family")
    candidates: list[PeriodicCandidate] = []
    for status, cand in raw:
        if status != "ok" or cand is None:
            continue
        if any(_seeds_close(cand.q, kept.q) for kept in candidates):
            continue
        candidates.append(cand)
    return SweepResult(candidates=candidates, evaluated=len(points),
                       out_of_family=out_of_family)


# ---------------------------------------------------------------------------
# Catalog and fixture IO.

def candidate_to_record(cand: PeriodicCandidate) -> dict[str, str]:
    kv = seed_to_mapping(cand.q)
    kv["xi"] = repr(cand.xi)
    kv["refined"] = "1" if cand.refined else "0"
    kv["s"] = str(cand.full_period_multiplier)
    return kv


def candidate_from_record(kv: dict[str, str]) -> PeriodicCandidate:
    q = seed_from_mapping(kv)
    return PeriodicCandidate(
        q=q,
        xi=float(kv["xi"]),
        refined=kv.get("refined", "0") == "1",
        full_period_multiplier=int(kv.get("s", full_period_multiplier(q.theta0))),
    )


def write_catalog(path: str, candidates: Iterable[PeriodicCandidate],
                  manifest_lines: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in manifest_lines:
            fh.write(f"# {line}\n")
        for cand in candidates:
            fh.write(format_record_line(candidate_to_record(cand), CATALOG_FIELDS) + "\n")


def read_catalog(path: str) -> list[PeriodicCandidate]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            out.append(candidate_from_record(parse_record_line(line)))
    return out


def parse_seed_table(text: str) -> list[SeedConfig]:
    """Parse a seed table: one record line per seed, '#' comments ignored."""
    seeds = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        seeds.append(seed_from_mapping(parse_record_line(line)))
    return seeds


def load_known_orbits() -> list[SeedConfig]:
    """The packaged reference table of periodic-orbit seeds."""
    text = resources.files("ringaxis").joinpath("fixtures/known_orbits").read_text(encoding="utf-8")
    return parse_seed_table(text)
