"""The g(r) representation of solutions.

On any interval where rdot keeps one sign, the axial coordinate can be
written as a function of the radius, f = g(r).  g then satisfies a linear
second-order ODE a*g'' + b*g' + c = 0 whose coefficients depend only on
(r, g, g') and the conserved pair, and rdot^2 is recoverable from (r, g,
g') alone.  This module checks that identity on integrated trajectories
and reconstructs t(r), theta(r) by quadrature.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import CollisionDomainError, ConfigurationError, SegmentError
from .integrate import Trajectory
from .model import ConservedPair, RingConstants

# Fraction of the segment's peak |rdot| below which samples are excluded
# from residual statistics: the gpp chain-rule formula divides by rdot^3,
# a removable singularity in exact arithmetic but catastrophic in floats.
TURNING_POINT_BUFFER = 1e-5


class GSample(NamedTuple):
    """One (r, g, g', g'') sample taken on a monotone segment."""

    r: float
    g: float
    gp: float
    gpp: float | None = None


def g_ode_coefficients(r: float, g: float, gp: float, c: ConservedPair,
                       m1: float, m2: float, n: int, rc: RingConstants
                       ) -> tuple[float, float, float]:
    """Coefficients (a, b, c_coef) of a*g'' + b*g' + c_coef = 0, general n.

    a equals -rdot^2 expressed through the energy relation, b equals the
    negated radial acceleration, and c_coef the axial acceleration with
    f = g, so the identity is the chain rule in disguise.
    """
    if not r > 0.0:
        raise CollisionDomainError(f"need r > 0, got {r}")
    h = math.hypot(r, rc.k * g)
    h3 = h * h * h
    num = (2.0 * n**2 * m1 * m2**2 * r**2
           + (n**2 * rc.b_n * m2**3 * r + 2.0 * n * c.c2 * m2 * r**2
              - n**2 * c.c1**2 * m2**2) * h)
    den = r * r * h * (n**2 * m2**2 + m1 * (m1 + n * m2) * gp * gp)
    a = -num / den
    b = -c.c1**2 / r**3 + rc.a_n * m2 / (r * r) + n * (rc.k - 1.0) * m2 * r / h3
    c_coef = -n * rc.k * m2 * g / h3
    return a, b, c_coef


def three_body_g_coefficients(r: float, g: float, gp: float, c: ConservedPair,
                              m1: float, m2: float) -> tuple[float, float, float]:
    """Literal n=2 coefficient forms, kept as an independent transcription."""
    k = (m1 + 2.0 * m2) / (2.0 * m2)
    h = math.sqrt(r * r + k * k * g * g)
    a = (8.0 * (1.0 - k) * m2**2 * r**2
         + (2.0 * c.c1**2 * m2 - r * (m2**2 + 2.0 * c.c2 * r)) * h) \
        / (2.0 * m2 * r**2 * h * (1.0 + (k - 1.0) * k * gp * gp))
    b = -(c.c1**2 / r**3 - m2 / (4.0 * r * r) - 2.0 * (k - 1.0) * m2 * r / h**3)
    c_coef = -2.0 * k * m2 * g / h**3
    return a, b, c_coef


def four_body_g_coefficients(r: float, g: float, gp: float, c: ConservedPair,
                             m1: float, m2: float) -> tuple[float, float, float]:
    """Literal n=3 coefficient forms with l = sqrt(3)."""
    ell = math.sqrt(3.0)
    k = (m1 + 3.0 * m2) / (3.0 * m2)
    h = math.sqrt(r * r + k * k * g * g)
    a = -(18.0 * ell * m1 * m2**2 * r**2
          + (18.0 * m2**3 * r + 6.0 * ell * c.c2 * m2 * r**2
             - 9.0 * ell * c.c1**2 * m2**2) * h) \
        / (ell * r**2 * h * (9.0 * m2**2 + m1 * (m1 + 3.0 * m2) * gp * gp))
    b = -c.c1**2 / r**3 + m2 * math.sqrt(3.0) / (3.0 * r * r) + 3.0 * (k - 1.0) * m2 * r / h**3
    c_coef = -3.0 * k * m2 * g / h**3
    return a, b, c_coef


def g_ode_residual(sample: GSample, c: ConservedPair, m1: float, m2: float,
                   n: int, rc: RingConstants) -> float:
    """a*gpp + b*gp + c_coef at one complete sample (gpp required)."""
    if sample.gpp is None:
        raise ConfigurationError("residual needs gpp; got an incomplete sample")
    a, b, c_coef = g_ode_coefficients(sample.r, sample.g, sample.gp, c, m1, m2, n, rc)
    return a * sample.gpp + b * sample.gp + c_coef


def g_ode_residual_scale(sample: GSample, c: ConservedPair, m1: float, m2: float,
                         n: int, rc: RingConstants) -> float:
    """Magnitude scale |a*gpp| + |b*gp| + |c_coef| for normalizing the residual."""
    if sample.gpp is None:
        raise ConfigurationError("residual scale needs gpp")
    a, b, c_coef = g_ode_coefficients(sample.r, sample.g, sample.gp, c, m1, m2, n, rc)
    return abs(a * sample.gpp) + abs(b * sample.gp) + abs(c_coef)


def rdot_squared_from_g(r: float, g: float, gp: float, c: ConservedPair,
                        m1: float, m2: float, n: int, rc: RingConstants) -> float:
    """rdot^2 recovered from (r, g, g') and the conserved pair.

    Solves the energy relation with fdot = gp*rdot.  A negative value
    means the point is outside the physically reachable band; callers
    must treat that as a turning point, not an error.
    """
    if not r > 0.0:
        raise CollisionDomainError(f"need r > 0, got {r}")
    h = math.hypot(r, rc.k * g)
    num = (c.c2 + n * m1 * m2 / h + 0.5 * n * rc.b_n * m2**2 / r
           - 0.5 * n * m2 * c.c1**2 / (r * r))
    den = 0.5 * n * m2 + m1 * (m1 + n * m2) / (2.0 * n * m2) * gp * gp
    return num / den


def samples_from_trajectory(traj: Trajectory, segment: tuple[float, float],
                            num: int = 200) -> list[GSample]:
    """Chain-rule samples of (r, g, g', g'') on one monotone segment.

    g = f, gp = fdot/rdot, gpp = (fddot*rdot - fdot*rddot)/rdot^3, with
    the second derivatives taken from the equations of motion at the
    dense-output state, not from differentiating a fit.  Samples inside
    the turning-point buffer (|rdot| < TURNING_POINT_BUFFER * max|rdot|
    on the segment) are dropped.
    """
    t_a, t_b = segment
    if not t_b > t_a:
        raise SegmentError(f"empty segment ({t_a}, {t_b})")
    seed, rc = traj.seed, traj.rc
    n, m1, m2 = seed.n, seed.m1, seed.m2
    c1 = traj.conserved.c1
    grid = np.linspace(t_a, t_b, num)
    ys = np.asarray(traj.dense(grid), dtype=float)
    f, fdot, r, rdot = ys[0], ys[1], ys[2], ys[3]
    vmax = float(np.max(np.abs(rdot)))
    if vmax == 0.0:
        raise SegmentError("rdot vanishes identically on the segment")
    h = np.hypot(r, rc.k * f)
    h3 = h**3
    fddot = -rc.mu_f * f / h3
    rddot = c1 * c1 / r**3 - rc.a_n * m2 / r**2 - m1 * r / h3
    keep = np.abs(rdot) >= TURNING_POINT_BUFFER * vmax
    gp = fdot[keep] / rdot[keep]
    gpp = (fddot[keep] * rdot[keep] - fdot[keep] * rddot[keep]) / rdot[keep] ** 3
    return [GSample(r=float(ri), g=float(gi), gp=float(gpi), gpp=float(gppi))
            for ri, gi, gpi, gppi in zip(r[keep], f[keep], gp, gpp)]


def fit_g_spline(samples: Sequence[GSample]) -> CubicSpline:
    """Cubic spline (not-a-knot ends) through the (r, g) points of a segment."""
    if len(samples) < 4:
        raise SegmentError(f"need at least 4 samples for a cubic fit, got {len(samples)}")
    rs = np.array([s.r for s in samples])
    gs = np.array([s.g for s in samples])
    order = np.argsort(rs)
    rs, gs = rs[order], gs[order]
    if np.any(np.diff(rs) <= 0.0):
        raise SegmentError("radii are not strictly monotone; not a valid segment")
    return CubicSpline(rs, gs)


class QuadratureResult(NamedTuple):
    r: np.ndarray
    t: np.ndarray
    theta: np.ndarray
    f: np.ndarray


def _locate_turn(v2: Callable[[float], float], r_end: float, r_inner: float) -> float:
    """Radius where rdot^2 crosses zero, bracketed between endpoint and interior."""
    a, b = r_end, r_inner
    fa, fb = v2(a), v2(b)
    if fa > 0.0:
        return r_end  # endpoint already in the reachable band
    if fb <= 0.0:
        raise SegmentError("rdot^2 not positive in the segment interior")
    return float(brentq(v2, a, b, xtol=1e-15, rtol=8.9e-16))


def reconstruct_by_quadrature(g: Callable[[float], float], r_a: float, r_b: float,
                              c: ConservedPair, m1: float, m2: float, n: int,
                              rc: RingConstants, gp: Callable[[float], float] | None = None,
                              num: int = 101, branch: float | None = None
                              ) -> QuadratureResult:
    """Recover t(r) and theta(r) on [r_a, r_b] by adaptive quadrature.

    dt = dr/rdot and dtheta = c1 dr/(r^2 rdot), with rdot =
    branch*sqrt(rdot_squared_from_g(...)).  branch defaults to
    sign(r_b - r_a), the orientation on which t increases.  gp defaults
    to g.derivative() when g is a spline.  Turning-point endpoints
    (rdot^2 -> 0 like a square root) are integrated under the
    substitution u = sqrt(|r - r_turn|), which removes the singularity.
    Raises SegmentError when rdot^2 fails to stay positive between the
    turning radii.
    """
    if r_a == r_b:
        raise SegmentError("degenerate radius interval")
    if gp is None:
        if hasattr(g, "derivative"):
            gp = g.derivative()
        else:
            raise ConfigurationError("pass gp explicitly when g is not a spline")
    direction = 1.0 if r_b > r_a else -1.0
    if branch is None:
        branch = direction
    if branch not in (-1.0, 1.0):
        raise ConfigurationError(f"branch must be +-1, got {branch}")

    def v2(r: float) -> float:
        return rdot_squared_from_g(r, g(r), gp(r), c, m1, m2, n, rc)

    probe = np.linspace(r_a, r_b, 33)[1:-1]
    v2_probe = np.array([v2(float(r)) for r in probe])
    if np.any(v2_probe <= 0.0):
        raise SegmentError("rdot^2 is not positive in the segment interior")
    scale = float(np.max(v2_probe))

    # Pull singular endpoints to the exact turning radii so the u-substitution
    # sees a clean square-root zero.
    singular_a = v2(r_a) <= 1e-9 * scale
    singular_b = v2(r_b) <= 1e-9 * scale
    ra_eff = _locate_turn(v2, r_a, float(probe[0])) if singular_a else r_a
    rb_eff = _locate_turn(v2, r_b, float(probe[-1])) if singular_b else r_b

    def integrands(r: float) -> tuple[float, float]:
        w = branch * math.sqrt(max(v2(r), 0.0))
        if w == 0.0:
            raise SegmentError(f"rdot vanished at interior radius {r}")
        return 1.0 / w, c.c1 / (r * r * w)

    def quad_pair(lo: float, hi: float, sub_at: float | None) -> tuple[float, float]:
        """Integrate both integrands over [lo, hi]; u-substitute near sub_at."""
        if lo == hi:
            return 0.0, 0.0
        if sub_at is None:
            t_val = quad(lambda r: integrands(r)[0], lo, hi, limit=200)[0]
            th_val = quad(lambda r: integrands(r)[1], lo, hi, limit=200)[0]
            return t_val, th_val
        # r = sub_at + s*u^2 walks from the singular end into the interval
        far = hi if sub_at == lo else lo
        s = 1.0 if far > sub_at else -1.0
        u_hi = math.sqrt(abs(far - sub_at))

        def t_igr(u: float) -> float:
            return integrands(sub_at + s * u * u)[0] * 2.0 * s * u

        def th_igr(u: float) -> float:
            return integrands(sub_at + s * u * u)[1] * 2.0 * s * u

        t_val = quad(t_igr, 0.0, u_hi, limit=200)[0]
        th_val = quad(th_igr, 0.0, u_hi, limit=200)[0]
        if sub_at == hi:
            t_val, th_val = -t_val, -th_val
        return t_val, th_val

    # Cosine-clustered output radii resolve the steep ends without wasting
    # interior points.
    tau = np.linspace(0.0, 1.0, num)
    rs = ra_eff + (rb_eff - ra_eff) * 0.5 * (1.0 - np.cos(math.pi * tau))
    ts = np.zeros(num)
    ths = np.zeros(num)
    for i in range(1, num):
        lo, hi = float(rs[i - 1]), float(rs[i])
        sub = None
        if singular_a and i == 1:
            sub = lo
        elif singular_b and i == num - 1:
            sub = hi
        dt, dth = quad_pair(lo, hi, sub)
        ts[i] = ts[i - 1] + dt
        ths[i] = ths[i - 1] + dth
    fs = np.array([g(float(r)) for r in rs])
    return QuadratureResult(r=rs, t=ts, theta=ths, f=fs)


def write_gsamples_csv(samples: Sequence[GSample], residuals: Sequence[float],
                       path: str, manifest_lines: Sequence[str] = ()) -> None:
    """Write samples as CSV: r,g,gp,gpp,residual with 17 significant digits."""
    if len(samples) != len(residuals):
        raise ConfigurationError("samples and residuals differ in length")
    with open(path, "w", encoding="utf-8") as fh:
        for line in manifest_lines:
            fh.write(f"# {line}\n")
        fh.write("r,g,gp,gpp,residual\n")
        for s, res in zip(samples, residuals):
            gpp = float("nan") if s.gpp is None else s.gpp
            fh.write(",".join(f"{v:.17g}" for v in (s.r, s.g, s.gp, gpp, res)) + "\n")
