"""Cartesian reconstruction and direct (n+1)-body cross-validation.

The reduced system is an exact factorization, not an approximation, so a
direct integration of the full Newtonian equations from the reconstructed
initial state must reproduce the reconstructed trajectory to integrator
accuracy.  This module provides both directions: reduced state -> full
Cartesian state, and an independent full integrator to compare against.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CollisionDomainError, ConfigurationError, DivergenceError
from .integrate import IntegratorSettings, Trajectory, _BudgetedRHS, integrate
from .model import ReducedState

# Bodies closer than this are treated as collided; the potential is not
# meaningfully evaluable below it in binary64.
_MIN_SEPARATION = 1e-12


@dataclass(frozen=True)
class FullState:
    """Cartesian snapshot of all n+1 bodies.

    Body 0 is the axial mass; bodies 1..n are the ring in phase order.
    positions and velocities have shape (n+1, 3).
    """

    t: float
    masses: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    @property
    def n_ring(self) -> int:
        return len(self.masses) - 1


@dataclass
class FullTrajectory:
    masses: np.ndarray
    ts: np.ndarray
    ys: np.ndarray
    dense: Callable[[np.ndarray], np.ndarray]

    @property
    def n_bodies(self) -> int:
        return len(self.masses)

    def state_at(self, t: float) -> FullState:
        nb = self.n_bodies
        y = np.asarray(self.dense(t), dtype=float)
        return FullState(t=float(t), masses=self.masses,
                         positions=y[: 3 * nb].reshape(nb, 3),
                         velocities=y[3 * nb:].reshape(nb, 3))


def masses_vector(n: int, m1: float, m2: float) -> np.ndarray:
    return np.array([m1] + [m2] * n, dtype=float)


def reconstruct_full(s: ReducedState, n: int, m1: float, m2: float, c1: float) -> FullState:
    """Cartesian configuration corresponding to one reduced state.

    Body 0 sits at (0, 0, f); ring body j sits at angle
    phi_j = theta + 2 pi j / n, radius r, height -(m1/(n m2)) f, so the
    center of mass is pinned at the origin.  The ring's angular rate is
    recovered from the angular momentum as thetadot = c1 / r^2, which is
    why c1 enters the signature alongside the state.
    """
    phis = s.theta + 2.0 * math.pi * np.arange(n) / n
    cos_p, sin_p = np.cos(phis), np.sin(phis)
    thetadot = c1 / (s.r * s.r)
    z_ring = -(m1 / (n * m2)) * s.f
    vz_ring = -(m1 / (n * m2)) * s.fdot

    pos = np.empty((n + 1, 3))
    vel = np.empty((n + 1, 3))
    pos[0] = (0.0, 0.0, s.f)
    vel[0] = (0.0, 0.0, s.fdot)
    pos[1:, 0] = s.r * cos_p
    pos[1:, 1] = s.r * sin_p
    pos[1:, 2] = z_ring
    vel[1:, 0] = s.rdot * cos_p - s.r * sin_p * thetadot
    vel[1:, 1] = s.rdot * sin_p + s.r * cos_p * thetadot
    vel[1:, 2] = vz_ring
    return FullState(t=s.t, masses=masses_vector(n, m1, m2), positions=pos, velocities=vel)


def pack(state: FullState) -> np.ndarray:
    return np.concatenate([state.positions.ravel(), state.velocities.ravel()])


def make_full_ode(masses: Sequence[float]) -> Callable[[float, np.ndarray], np.ndarray]:
    """Direct pairwise-gravity right-hand side (G = 1), vectorized over bodies."""
    m = np.asarray(masses, dtype=float)
    nb = m.size

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        pos = y[: 3 * nb].reshape(nb, 3)
        vel = y[3 * nb:].reshape(nb, 3)
        diff = pos[None, :, :] - pos[:, None, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        np.fill_diagonal(d2, np.inf)
        if float(np.min(d2)) < _MIN_SEPARATION**2:
            raise CollisionDomainError(f"bodies within {_MIN_SEPARATION} of each other at t={t}")
        inv3 = d2**-1.5  # diagonal maps to 0, removing self-interaction
        acc = np.einsum("ij,ijk->ik", inv3 * m[None, :], diff)
        return np.concatenate([vel.ravel(), acc.ravel()])

    return rhs


def nbody_rhs(fs: FullState) -> np.ndarray:
    """Accelerations of all bodies at one snapshot, shape (n+1, 3)."""
    nb = len(fs.masses)
    y = pack(fs)
    deriv = make_full_ode(fs.masses)(fs.t, y)
    return deriv[3 * nb:].reshape(nb, 3)


def integrate_full(state0: FullState, t_end: float,
                   settings: IntegratorSettings | None = None) -> FullTrajectory:
    """Integrate the full Newtonian system from a Cartesian snapshot."""
    if settings is None:
        settings = IntegratorSettings()
    if not t_end > 0.0:
        raise ConfigurationError(f"need a positive end time, got {t_end!r}")
    deadline = None if settings.max_time is None else time.monotonic() + settings.max_time
    rhs = _BudgetedRHS(make_full_ode(state0.masses), deadline)
    sol = solve_ivp(rhs, (0.0, float(t_end)), pack(state0), method="RK45",
                    rtol=settings.rel_tol, atol=settings.abs_tol,
                    max_step=settings.max_step, dense_output=True)
    if not sol.success:
        if sol.status == -1:
            raise CollisionDomainError(
                f"full integration stalled at t={sol.t[-1]:.6g} of {t_end:.6g}: {sol.message}")
        raise DivergenceError(f"full integration failed: {sol.message}")
    return FullTrajectory(masses=np.asarray(state0.masses, dtype=float),
                          ts=sol.t, ys=sol.y, dense=sol.sol)


def cartesian_energy(state: FullState) -> float:
    m = state.masses
    kinetic = 0.5 * float(np.sum(m * np.einsum("ij,ij->i", state.velocities, state.velocities)))
    potential = 0.0
    for i in range(len(m)):
        for j in range(i + 1, len(m)):
            dist = float(np.linalg.norm(state.positions[i] - state.positions[j]))
            if dist < _MIN_SEPARATION:
                raise CollisionDomainError(f"bodies {i} and {j} within {_MIN_SEPARATION}")
            potential -= m[i] * m[j] / dist
    return kinetic + potential


def linear_momentum(state: FullState) -> np.ndarray:
    return np.einsum("i,ij->j", state.masses, state.velocities)


def angular_momentum(state: FullState) -> np.ndarray:
    return np.einsum("i,ij->j", state.masses, np.cross(state.positions, state.velocities))


def cross_validate(q, t_end: float | None = None,
                   settings: IntegratorSettings | None = None,
                   num_samples: int = 1000,
                   tol: float = 1e-6,
                   traj: Trajectory | None = None,
                   raise_on_divergence: bool = False) -> dict:
    """Compare the reduced model against a direct full integration.

    q is a SeedConfig; a precomputed reduced trajectory may be supplied
    via traj to skip re-integration.  Both integrations start from the
    identical reconstructed Cartesian state at t = 0.  At num_samples
    uniform times the reduced state is reconstructed to Cartesian
    coordinates and compared body-by-body with the direct integration.

    The gate (ok / raise) applies to the maximum absolute position
    deviation over all bodies and samples; the report also carries the
    deviation relative to the largest coordinate magnitude, plus shape
    diagnostics of the directly-integrated ring: radius spread, worst
    deviation of neighboring angular gaps from 2 pi / n, worst deviation
    of ring height from -(m1/(n m2)) f, and the axial body's off-axis
    distance.
    """
    if traj is None:
        traj = integrate(q, t_end, settings, detect_events=False)
    seed = traj.seed
    n, m1, m2 = seed.n, seed.m1, seed.m2
    c1 = traj.conserved.c1
    if settings is None:
        settings = traj.settings
    full0 = reconstruct_full(traj.state_at(0.0), n, m1, m2, c1)
    ft = integrate_full(full0, traj.t_end, settings)

    grid = np.linspace(0.0, traj.t_end, num_samples)
    red = np.asarray(traj.dense(grid), dtype=float)
    thetadot = c1 / red[2] ** 2
    nb = n + 1
    gap = 2.0 * math.pi / n

    max_pos_dev = 0.0
    max_vel_dev = 0.0
    scale = 0.0
    ring_spread = 0.0
    angle_gap_dev = 0.0
    height_dev = 0.0
    axis_offset = 0.0
    full_states = np.asarray(ft.dense(grid), dtype=float)
    j_idx = 2.0 * math.pi * np.arange(n) / n
    for i in range(grid.size):
        f, fdot, r, rdot, theta = red[:, i]
        phis = theta + j_idx
        cos_p, sin_p = np.cos(phis), np.sin(phis)
        pos_r = np.empty((nb, 3))
        vel_r = np.empty((nb, 3))
        pos_r[0] = (0.0, 0.0, f)
        vel_r[0] = (0.0, 0.0, fdot)
        pos_r[1:, 0] = r * cos_p
        pos_r[1:, 1] = r * sin_p
        pos_r[1:, 2] = -(m1 / (n * m2)) * f
        vel_r[1:, 0] = rdot * cos_p - r * sin_p * thetadot[i]
        vel_r[1:, 1] = rdot * sin_p + r * cos_p * thetadot[i]
        vel_r[1:, 2] = -(m1 / (n * m2)) * fdot

        y_full = full_states[:, i]
        pos_f = y_full[: 3 * nb].reshape(nb, 3)
        vel_f = y_full[3 * nb:].reshape(nb, 3)

        max_pos_dev = max(max_pos_dev, float(np.max(np.linalg.norm(pos_f - pos_r, axis=1))))
        max_vel_dev = max(max_vel_dev, float(np.max(np.linalg.norm(vel_f - vel_r, axis=1))))
        scale = max(scale, float(np.max(np.abs(pos_f))))

        radii = np.hypot(pos_f[1:, 0], pos_f[1:, 1])
        ring_spread = max(ring_spread, float((radii.max() - radii.min()) / radii.mean()))
        angles = np.arctan2(pos_f[1:, 1], pos_f[1:, 0])
        gaps = np.mod(np.diff(np.append(angles, angles[0])), 2.0 * math.pi)
        angle_gap_dev = max(angle_gap_dev, float(np.max(np.abs(gaps - gap))))
        height_dev = max(height_dev, float(np.max(np.abs(pos_f[1:, 2] - (-(m1 / (n * m2)) * f)))))
        axis_offset = max(axis_offset, float(np.hypot(pos_f[0, 0], pos_f[0, 1])))

    rel = max_pos_dev / scale if scale > 0 else max_pos_dev
    report = {
        "max_pos_dev_abs": max_pos_dev,
        "max_pos_dev_rel": rel,
        "max_vel_dev_abs": max_vel_dev,
        "ring_radius_spread_rel": ring_spread,
        "ring_angle_gap_dev": angle_gap_dev,
        "ring_height_dev": height_dev,
        "axis_body_offcenter": axis_offset,
        "length_scale": scale,
        "samples": num_samples,
        "ok": max_pos_dev <= tol,
    }
    if raise_on_divergence and not report["ok"]:
        raise DivergenceError(
            f"full/reduced cross-validation deviates: {max_pos_dev:.3e} > {tol:.3e} absolute")
    return report


def reconstructed_samples(traj: Trajectory, num_samples: int = 501) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cartesian (ts, positions, velocities) sampled from a reduced trajectory.

    positions and velocities have shape (num_samples, n+1, 3) with body 0
    the axial one.
    """
    seed = traj.seed
    c1 = traj.conserved.c1
    ts = np.linspace(0.0, traj.t_end, num_samples)
    nb = seed.n + 1
    positions = np.empty((num_samples, nb, 3))
    velocities = np.empty((num_samples, nb, 3))
    for i, t in enumerate(ts):
        fs = reconstruct_full(traj.state_at(float(t)), seed.n, seed.m1, seed.m2, c1)
        positions[i] = fs.positions
        velocities[i] = fs.velocities
    return ts, positions, velocities


def write_body_rows_csv(path: str, ts: np.ndarray, positions: np.ndarray,
                        velocities: np.ndarray,
                        manifest_lines: Sequence[str] = ()) -> None:
    """Write per-body samples as CSV: t,body,x,y,z,vx,vy,vz."""
    nb = positions.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        for line in manifest_lines:
            fh.write(f"# {line}\n")
        fh.write("t,body,x,y,z,vx,vy,vz\n")
        for i, t in enumerate(ts):
            for b in range(nb):
                row = (*positions[i, b], *velocities[i, b])
                fh.write(f"{t:.17g},{b}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def write_full_csv(ft: FullTrajectory, path: str, num_samples: int = 501,
                   manifest_lines: Sequence[str] = ()) -> None:
    """Write uniform samples as CSV: t,body,x,y,z,vx,vy,vz (one row per body)."""
    nb = ft.n_bodies
    grid = np.linspace(ft.ts[0], ft.ts[-1], num_samples)
    ys = np.asarray(ft.dense(grid), dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        for line in manifest_lines:
            fh.write(f"# {line}\n")
        fh.write("t,body,x,y,z,vx,vy,vz\n")
        for i, t in enumerate(grid):
            y = ys[:, i]
            pos = y[: 3 * nb].reshape(nb, 3)
            vel = y[3 * nb:].reshape(nb, 3)
            for b in range(nb):
                row = (pos[b, 0], pos[b, 1], pos[b, 2], vel[b, 0], vel[b, 1], vel[b, 2])
                fh.write(f"{t:.17g},{b}," + ",".join(f"{v:.17g}" for v in row) + "\n")
