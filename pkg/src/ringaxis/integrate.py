"""Trajectory integration for the reduced system.

Wraps an embedded Dormand-Prince 5(4) pair with quartic dense output, adds
radial turning-point detection on top of the dense interpolant, and tracks
energy drift as the primary accuracy diagnostic.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .dynamics import energy_along, make_ode
from .errors import BudgetExceededError, CollisionDomainError, ConfigurationError, DivergenceError
from .model import ConservedPair, ReducedState, RingConstants, SeedConfig, conserved_from_seed, make_constants

# Sub-sampling density per accepted step when scanning for rdot sign changes.
# The quartic interpolant cannot oscillate faster than this within one step
# taken at tight tolerances.
_EVENT_SUBSAMPLES = 8

# Turning points with |rddot| below this fraction of the term-magnitude scale
# are treated as degenerate (circular orbit) and not classified.
_FLATNESS_FRACTION = 1e-8


@dataclass(frozen=True)
class IntegratorSettings:
    """Tolerances and budgets for one integration run.

    rel_tol, abs_tol   local error controls, each in (0, 1e-3].
    max_step           optional cap on step size (default: unrestricted).
    max_time           optional wall-clock budget in seconds; exceeding it
                       raises BudgetExceededError instead of returning a
                       partial trajectory.
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_time: float | None = None

    def __post_init__(self) -> None:
        for name, val in (("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)):
            if not (0.0 < val <= 1e-3):
                raise ConfigurationError(f"{name} must be in (0, 1e-3], got {val}")
        if not self.max_step > 0.0:
            raise ConfigurationError(f"max_step must be positive, got {self.max_step}")
        if self.max_time is not None and not self.max_time > 0.0:
            raise ConfigurationError(f"max_time must be positive, got {self.max_time}")


class RadialEvent(NamedTuple):
    """A radial turning point: rdot(t) = 0 with definite curvature."""

    t: float
    kind: str  # "rdot_zero_min" or "rdot_zero_max"
    r: float


@dataclass
class Trajectory:
    """Result of integrating one seed over [0, t_end].

    ts, ys          accepted step times and states, ys has shape (5, len(ts)).
    dense           vectorized interpolant: dense(t) -> state array.
    events          radial turning points in increasing time order.
    c2_rel_drift    max over accepted steps of |E(t) - c2| / |c2|.
    """

    seed: SeedConfig
    rc: RingConstants
    conserved: ConservedPair
    settings: IntegratorSettings
    ts: np.ndarray
    ys: np.ndarray
    dense: Callable[[np.ndarray], np.ndarray]
    events: list[RadialEvent]
    c2_rel_drift: float
    rhs_evals: int = 0

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    def state_at(self, t: float) -> ReducedState:
        if not (self.ts[0] - 1e-12 <= t <= self.ts[-1] + 1e-12):
            raise ConfigurationError(
                f"t={t} outside the integrated span [{self.ts[0]}, {self.ts[-1]}]")
        f, fdot, r, rdot, theta = np.asarray(self.dense(t), dtype=float)
        return ReducedState(t=float(t), f=float(f), fdot=float(fdot),
                            r=float(r), rdot=float(rdot), theta=float(theta))

    def samples(self, num: int) -> tuple[np.ndarray, np.ndarray]:
        """num uniformly spaced times over the span and the states there."""
        if num < 2:
            raise ConfigurationError(f"need at least 2 samples, got {num}")
        grid = np.linspace(self.ts[0], self.ts[-1], num)
        return grid, np.asarray(self.dense(grid), dtype=float)

    def drift_along(self, grid: np.ndarray) -> np.ndarray:
        """Relative energy drift |E(t) - c2| / |c2| at each grid time."""
        ys = np.asarray(self.dense(grid), dtype=float)
        e = energy_along(ys, self.conserved.c1, self.rc, self.seed.n, self.seed.m1, self.seed.m2)
        return np.abs(e - self.conserved.c2) / abs(self.conserved.c2)


class _BudgetedRHS:
    """RHS wrapper that enforces a wall-clock deadline, checked every 256 calls."""

    def __init__(self, rhs: Callable, deadline: float | None):
        self._rhs = rhs
        self._deadline = deadline
        self.calls = 0

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        self.calls += 1
        if self._deadline is not None and self.calls % 256 == 0 \
                and time.monotonic() > self._deadline:
            raise BudgetExceededError(
                f"integration wall-clock budget exhausted after {self.calls} derivative calls")
        return self._rhs(t, y)


def initial_state(seed: SeedConfig) -> np.ndarray:
    """Family initial conditions: [f, fdot, r, rdot, theta] at t = 0."""
    return np.array([0.0, seed.df0, seed.y10, 0.0, 0.0])


def _rddot(f: float, r: float, c1: float, rc: RingConstants, m1: float, m2: float) -> float:
    h = math.hypot(r, rc.k * f)
    return c1 * c1 / r**3 - rc.a_n * m2 / (r * r) - m1 * r / (h * h * h)


def _rddot_scale(f: float, r: float, c1: float, rc: RingConstants, m1: float, m2: float) -> float:
    h = math.hypot(r, rc.k * f)
    return abs(c1 * c1 / r**3) + rc.a_n * m2 / (r * r) + m1 * r / (h * h * h)


def _classify_turning_point(t: float, dense, c1: float, rc: RingConstants,
                            m1: float, m2: float) -> RadialEvent | None:
    f, _, r, _, _ = np.asarray(dense(t), dtype=float)
    acc = _rddot(float(f), float(r), c1, rc, m1, m2)
    if abs(acc) <= _FLATNESS_FRACTION * _rddot_scale(float(f), float(r), c1, rc, m1, m2):
        return None
    kind = "rdot_zero_min" if acc > 0.0 else "rdot_zero_max"
    return RadialEvent(t=float(t), kind=kind, r=float(r))


def _scan_turning_points(ts: np.ndarray, dense, seed: SeedConfig, c1: float,
                         rc: RingConstants) -> list[RadialEvent]:
    m1, m2 = seed.m1, seed.m2
    events: list[RadialEvent] = []
    t_end = float(ts[-1])
    merge_dt = 1e-10 * max(1.0, t_end)

    # Degenerate-circular guard: when rdot never rises above integrator
    # noise there are no genuine turning points to find.
    speed_scale = max(abs(seed.dy20), abs(seed.df0), abs(c1) / seed.y10, 1e-300)
    probe = np.asarray(dense(np.linspace(ts[0], t_end, 257)), dtype=float)
    if float(np.max(np.abs(probe[3]))) <= 1e-8 * speed_scale:
        return []

    def rdot_at(t: float) -> float:
        return float(dense(t)[3])

    ev0 = _classify_turning_point(float(ts[0]), dense, c1, rc, m1, m2)
    if ev0 is not None and abs(rdot_at(float(ts[0]))) < 1e-12 * speed_scale:
        events.append(ev0)

    for i in range(len(ts) - 1):
        a, b = float(ts[i]), float(ts[i + 1])
        if b <= a:
            continue
        sub = np.linspace(a, b, _EVENT_SUBSAMPLES + 1)
        vals = np.asarray(dense(sub), dtype=float)[3]
        for j in range(_EVENT_SUBSAMPLES):
            va, vb = float(vals[j]), float(vals[j + 1])
            t_star: float | None = None
            if va == 0.0:
                t_star = float(sub[j])
            elif va * vb < 0.0:
                t_star = brentq(rdot_at, float(sub[j]), float(sub[j + 1]),
                                xtol=1e-13, rtol=4.0 * np.finfo(float).eps)
                # One guarded Newton step using the analytic curvature
                # tightens |rdot| at the root to interpolation accuracy.
                fs, _, rs, vs, _ = np.asarray(dense(t_star), dtype=float)
                acc = _rddot(float(fs), float(rs), c1, rc, m1, m2)
                if acc != 0.0:
                    t_new = t_star - float(vs) / acc
                    if sub[j] <= t_new <= sub[j + 1]:
                        t_star = t_new
            if t_star is None or not (ts[0] < t_star <= t_end):
                continue
            if events and abs(t_star - events[-1].t) < merge_dt:
                continue
            ev = _classify_turning_point(t_star, dense, c1, rc, m1, m2)
            if ev is not None:
                events.append(ev)
    return events


def integrate(seed: SeedConfig, t_end: float | None = None,
              settings: IntegratorSettings | None = None,
              detect_events: bool = True) -> Trajectory:
    """Integrate the reduced system over [0, t_end] with dense output.

    t_end defaults to the seed's candidate period t0.  Raises
    CollisionDomainError when the ring radius leaves the positive domain,
    DivergenceError when the stepper stalls for any other reason, and
    BudgetExceededError when settings.max_time elapses first.
    """
    if settings is None:
        settings = IntegratorSettings()
    if t_end is None:
        t_end = seed.t0
    if t_end is None or not t_end > 0.0:
        raise ConfigurationError(f"need a positive end time, got {t_end!r}")
    rc = make_constants(seed.n, seed.m1, seed.m2)
    conserved = conserved_from_seed(seed)
    deadline = None if settings.max_time is None else time.monotonic() + settings.max_time
    rhs = _BudgetedRHS(make_ode(seed), deadline)
    sol = solve_ivp(rhs, (0.0, float(t_end)), initial_state(seed), method="RK45",
                    rtol=settings.rel_tol, atol=settings.abs_tol,
                    max_step=settings.max_step, dense_output=True)
    if not sol.success:
        if sol.status == -1:
            raise CollisionDomainError(
                f"integration stalled at t={sol.t[-1]:.6g} of {t_end:.6g}: {sol.message}")
        raise DivergenceError(f"integration failed: {sol.message}")

    energies = energy_along(sol.y, conserved.c1, rc, seed.n, seed.m1, seed.m2)
    drift = float(np.max(np.abs(energies - conserved.c2)) / abs(conserved.c2))
    events = _scan_turning_points(sol.t, sol.sol, seed, conserved.c1, rc) if detect_events else []
    return Trajectory(seed=seed, rc=rc, conserved=conserved, settings=settings,
                      ts=sol.t, ys=sol.y, dense=sol.sol, events=events,
                      c2_rel_drift=drift, rhs_evals=rhs.calls)


def integrate_from_state(seed: SeedConfig, state0: ReducedState, t_end: float,
                         settings: IntegratorSettings | None = None,
                         detect_events: bool = False) -> Trajectory:
    """Integrate from an arbitrary reduced state instead of the family start.

    seed supplies n, the masses and c1 (= y10*dy20); state0 supplies the
    initial conditions.  The returned trajectory's clock starts at 0
    regardless of state0.t.  Used for time-reversal and continuation
    checks; the family-standard entry point is integrate().
    """
    if settings is None:
        settings = IntegratorSettings()
    if not t_end > 0.0:
        raise ConfigurationError(f"need a positive end time, got {t_end!r}")
    rc = make_constants(seed.n, seed.m1, seed.m2)
    conserved = conserved_from_seed(seed)
    y0 = np.array([state0.f, state0.fdot, state0.r, state0.rdot, state0.theta])
    deadline = None if settings.max_time is None else time.monotonic() + settings.max_time
    rhs = _BudgetedRHS(make_ode(seed), deadline)
    sol = solve_ivp(rhs, (0.0, float(t_end)), y0, method="RK45",
                    rtol=settings.rel_tol, atol=settings.abs_tol,
                    max_step=settings.max_step, dense_output=True)
    if not sol.success:
        if sol.status == -1:
            raise CollisionDomainError(
                f"integration stalled at t={sol.t[-1]:.6g} of {t_end:.6g}: {sol.message}")
        raise DivergenceError(f"integration failed: {sol.message}")
    e_ref = float(energy_along(y0.reshape(5, 1), conserved.c1, rc,
                               seed.n, seed.m1, seed.m2)[0])
    energies = energy_along(sol.y, conserved.c1, rc, seed.n, seed.m1, seed.m2)
    drift = float(np.max(np.abs(energies - e_ref)) / abs(e_ref))
    events = _scan_turning_points(sol.t, sol.sol, seed, conserved.c1, rc) if detect_events else []
    return Trajectory(seed=seed, rc=rc, conserved=conserved, settings=settings,
                      ts=sol.t, ys=sol.y, dense=sol.sol, events=events,
                      c2_rel_drift=drift, rhs_evals=rhs.calls)


def endpoint_state(seed: SeedConfig, t_end: float,
                   settings: IntegratorSettings | None = None) -> ReducedState:
    """State at t_end only, without dense output.  The search hot path."""
    if settings is None:
        settings = IntegratorSettings()
    if not t_end > 0.0:
        raise ConfigurationError(f"need a positive end time, got {t_end!r}")
    deadline = None if settings.max_time is None else time.monotonic() + settings.max_time
    rhs = _BudgetedRHS(make_ode(seed), deadline)
    sol = solve_ivp(rhs, (0.0, float(t_end)), initial_state(seed), method="RK45",
                    rtol=settings.rel_tol, atol=settings.abs_tol,
                    max_step=settings.max_step, t_eval=(float(t_end),))
    if not sol.success:
        if sol.status == -1:
            raise CollisionDomainError(
                f"integration stalled at t={sol.t[-1] if len(sol.t) else 0.0:.6g}: {sol.message}")
        raise DivergenceError(f"integration failed: {sol.message}")
    f, fdot, r, rdot, theta = (float(v) for v in sol.y[:, -1])
    return ReducedState(t=float(t_end), f=f, fdot=fdot, r=r, rdot=rdot, theta=theta)


def monotone_segments(traj: Trajectory) -> list[tuple[float, float]]:
    """Time intervals between consecutive turning points.

    On each returned (t_a, t_b) the ring radius is strictly monotone, so
    r is invertible there.  Fewer than two events means no complete
    monotone leg was captured and the list is empty.
    """
    if len(traj.events) < 2:
        return []
    return [(traj.events[i].t, traj.events[i + 1].t) for i in range(len(traj.events) - 1)]


def write_trajectory_csv(traj: Trajectory, path: str, num_samples: int = 2001,
                         manifest_lines: Sequence[str] = ()) -> None:
    """Write uniform samples as CSV: t,f,fdot,r,rdot,theta,c2_rel_drift.

    Floats carry 17 significant digits so the file round-trips binary64.
    Lines starting with '#' carry the run manifest and are ignored by
    readers.
    """
    grid, ys = traj.samples(num_samples)
    drift = traj.drift_along(grid)
    with open(path, "w", encoding="utf-8") as fh:
        for line in manifest_lines:
            fh.write(f"# {line}\n")
        fh.write("t,f,fdot,r,rdot,theta,c2_rel_drift\n")
        for i, t in enumerate(grid):
            row = (t, ys[0, i], ys[1, i], ys[2, i], ys[3, i], ys[4, i], drift[i])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
