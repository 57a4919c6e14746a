"""Reduced equations of motion and first integrals.

After factoring out the rigid rotation of the n-gon and the center-of-mass
constraint, the system closes on five variables

    y = [f, fdot, r, rdot, theta]

where f is the axial coordinate of body 0, r the ring radius and theta the
unwrapped ring phase.  The axis-to-ring distance is h = sqrt(r^2 + (k f)^2)
with k = (m1 + n m2)/(n m2).
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import CollisionDomainError, OutsideFamilyError, TheoremViolationError
from .model import ConservedPair, RadialBounds, RingConstants, SeedConfig, conserved_from_seed, make_constants

RHS = Callable[[float, np.ndarray], np.ndarray]


def reduced_rhs(t: float, y: Sequence[float], c1: float, rc: RingConstants,
                n: int, m1: float, m2: float) -> np.ndarray:
    """Time derivative of the reduced state for any ring size n.

    fddot  = -(m1 + n m2) f / h^3
    rddot  = c1^2/r^3 - a_n m2/r^2 - m1 r/h^3
    thetadot = c1/r^2
    """
    f, fdot, r, rdot, _ = y
    if r <= 0.0:
        raise CollisionDomainError(f"ring radius hit {r} at t={t}")
    h = math.hypot(r, rc.k * f)
    h3 = h * h * h
    fddot = -rc.mu_f * f / h3
    rddot = c1 * c1 / r**3 - rc.a_n * m2 / (r * r) - m1 * r / h3
    return np.array([fdot, fddot, rdot, rddot, c1 / (r * r)])


def make_ode(seed: SeedConfig) -> RHS:
    """Specialized right-hand side with all constants bound to locals.

    The returned callable is what the integrator hammers on, so it avoids
    attribute lookups and allocates one small array per call.
    """
    rc = make_constants(seed.n, seed.m1, seed.m2)
    c1 = seed.y10 * seed.dy20
    k = rc.k
    mu_f = rc.mu_f
    an_m2 = rc.a_n * seed.m2
    m1 = seed.m1
    c1sq = c1 * c1
    hypot = math.hypot

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        f = y[0]
        r = y[2]
        if r <= 0.0:
            raise CollisionDomainError(f"ring radius hit {r} at t={t}")
        h = hypot(r, k * f)
        h3 = h * h * h
        rsq = r * r
        return np.array([
            y[1],
            -mu_f * f / h3,
            y[3],
            c1sq / (rsq * r) - an_m2 / rsq - m1 * r / h3,
            c1 / rsq,
        ])

    return rhs


def three_body_rhs(t: float, y: Sequence[float], m1: float, m2: float, c1: float) -> np.ndarray:
    """Closed-form right-hand side for n = 2 (two ring bodies plus the axial one)."""
    f, fdot, r, rdot, _ = y
    if r <= 0.0:
        raise CollisionDomainError(f"ring radius hit {r} at t={t}")
    k = (m1 + 2.0 * m2) / (2.0 * m2)
    h = math.hypot(r, k * f)
    h3 = h * h * h
    fddot = -2.0 * m2 * k * f / h3
    rddot = c1 * c1 / r**3 - m2 / (4.0 * r * r) - 2.0 * (k - 1.0) * m2 * r / h3
    return np.array([fdot, fddot, rdot, rddot, c1 / (r * r)])


def four_body_rhs(t: float, y: Sequence[float], m1: float, m2: float, c1: float) -> np.ndarray:
    """Closed-form right-hand side for n = 3 (equilateral ring plus the axial body)."""
    f, fdot, r, rdot, _ = y
    if r <= 0.0:
        raise CollisionDomainError(f"ring radius hit {r} at t={t}")
    ell = math.sqrt(3.0)
    k = (m1 + 3.0 * m2) / (3.0 * m2)
    h = math.hypot(r, k * f)
    h3 = h * h * h
    fddot = -(m1 + 3.0 * m2) * f / h3
    rddot = c1 * c1 / r**3 - 3.0 * m2 / (ell**3 * r * r) - m1 * r / h3
    return np.array([fdot, fddot, rdot, rddot, c1 / (r * r)])


def energy_of(f, fdot, r, rdot, c1: float, rc: RingConstants,
              n: int, m1: float, m2: float):
    """Total energy c2 evaluated pointwise; broadcasts over array inputs.

    c2 = (n m2/2)(rdot^2 + c1^2/r^2) + [m1 (m1 + n m2)/(2 n m2)] fdot^2
         - n m1 m2/h - n b_n m2^2/(2 r)
    """
    h = np.hypot(r, rc.k * np.asarray(f, dtype=float))
    return (
        0.5 * n * m2 * (np.asarray(rdot) ** 2 + c1 * c1 / np.asarray(r) ** 2)
        + m1 * rc.mu_f / (2.0 * n * m2) * np.asarray(fdot) ** 2
        - n * m1 * m2 / h
        - 0.5 * n * rc.b_n * m2**2 / np.asarray(r)
    )


def energy_along(ys: np.ndarray, c1: float, rc: RingConstants,
                 n: int, m1: float, m2: float) -> np.ndarray:
    """Energy at each column of a (5, N) state array."""
    return energy_of(ys[0], ys[1], ys[2], ys[3], c1, rc, n, m1, m2)


def energy(s, rc: RingConstants, c1: float, m1: float, m2: float, n: int) -> float:
    """Total energy c2 of one reduced state."""
    return float(energy_of(s.f, s.fdot, s.r, s.rdot, c1, rc, n, m1, m2))


def radial_bounds(c: ConservedPair, n: int, m1: float, m2: float, rc: RingConstants) -> RadialBounds:
    """Collision-excluding bracket (r_lo, r_hi) for the ring radius.

    Valid only on the negative-energy, nonzero-angular-momentum family;
    then every achievable radius satisfies

        c2 r^2 + n (m1 m2 + b_n m2^2 / 2) r - (n m2/2) c1^2 >= 0

    and the bracket endpoints are the roots of the equality.  r_lo > 0, so
    the ring can never collapse to the axis, and r_hi < inf bounds it.
    """
    if c.c1 == 0.0 or not c.c2 < 0.0:
        raise OutsideFamilyError(
            f"radial bounds need c1 != 0 and c2 < 0, got c1={c.c1}, c2={c.c2}")
    d = 2.0 * n * c.c1**2 * c.c2 * m2 + n**2 * (m1 * m2 + 0.5 * rc.b_n * m2**2) ** 2
    if d < 0.0:
        raise OutsideFamilyError(
            f"no radius satisfies the energy constraint (discriminant {d} < 0); "
            "the conserved pair does not belong to any actual trajectory")
    b = n * m1 * m2 + 0.5 * n * rc.b_n * m2**2
    sq = math.sqrt(d)
    r_lo = (-b + sq) / (2.0 * c.c2)
    r_hi = (-b - sq) / (2.0 * c.c2)
    return RadialBounds(d=d, r_lo=r_lo, r_hi=r_hi)


def radial_bounds_from_seed(seed: SeedConfig) -> RadialBounds:
    rc = make_constants(seed.n, seed.m1, seed.m2)
    return radial_bounds(conserved_from_seed(seed), seed.n, seed.m1, seed.m2, rc)


def circular_dy20(n: int, m1: float, m2: float, y10: float) -> float:
    """Tangential speed making the planar (f = 0) seed exactly circular.

    Setting the radial acceleration to zero at r = y10 with f = 0 gives
    c1^2 = (m1 + a_n*m2) * y10, i.e. dy20 = sqrt((m1 + a_n*m2)/y10).
    """
    rc = make_constants(n, m1, m2)
    return math.sqrt((m1 + rc.a_n * m2) / y10)


def characteristic_period(seed: SeedConfig) -> float:
    """Orbital time scale: the period of the circular orbit of radius y10."""
    rc = make_constants(seed.n, seed.m1, seed.m2)
    return 2.0 * math.pi * math.sqrt(seed.y10**3 / (seed.m1 + rc.a_n * seed.m2))


def check_radial_confinement(rs: np.ndarray, bounds: RadialBounds,
                             slack: float = 1e-9) -> tuple[bool, float, float]:
    """Check sampled radii against the bracket.

    Returns (ok, min_r, max_r).  slack is a relative margin absorbing the
    integrator's own error at the bracket endpoints, where rdot = 0 and the
    trajectory touches the bound tangentially.
    """
    min_r = float(np.min(rs))
    max_r = float(np.max(rs))
    lo = bounds.r_lo * (1.0 - slack)
    hi = bounds.r_hi * (1.0 + slack)
    return (min_r >= lo and max_r <= hi), min_r, max_r


def no_collision_certificate(traj, rb: RadialBounds | None = None,
                             min_samples: int = 2000, slack: float = 0.0) -> dict:
    """Confinement certificate over a dense sampling of a trajectory.

    traj duck-types the integrate.Trajectory interface: attributes ts
    (accepted step times), dense (vectorized interpolant), events, seed.
    The sample grid is the union of accepted steps, at least min_samples
    uniform points, and all turning-point times, so near-extremal radii
    are not missed between steps.  Returns the margins to each bound; a
    violated bound raises TheoremViolationError because it signals an
    integrator or formula transcription bug, not physics.

    slack relaxes the check by a relative margin; keep it 0 except for
    planar seeds, whose turning radii coincide with the bounds exactly
    and graze them within integrator error.
    """
    bounds = rb if rb is not None else radial_bounds_from_seed(traj.seed)
    t_lo, t_hi = float(traj.ts[0]), float(traj.ts[-1])
    grid = np.union1d(traj.ts, np.linspace(t_lo, t_hi, max(min_samples, 2)))
    if traj.events:
        grid = np.union1d(grid, [ev.t for ev in traj.events])
    rs = traj.dense(grid)[2]
    ok, min_r, max_r = check_radial_confinement(rs, bounds, slack=slack)
    report = {
        "ok": ok,
        "r_lo": bounds.r_lo,
        "r_hi": bounds.r_hi,
        "min_r": min_r,
        "max_r": max_r,
        "margin_lo": min_r - bounds.r_lo,
        "margin_hi": bounds.r_hi - max_r,
        "samples": int(grid.size),
    }
    if not ok:
        raise TheoremViolationError(
            f"radius left the no-collision bracket: r in [{min_r}, {max_r}] "
            f"vs bounds ({bounds.r_lo}, {bounds.r_hi})")
    return report
