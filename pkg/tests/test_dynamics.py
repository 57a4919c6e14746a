"""Reduced equations of motion, energy function, radial bounds, confinement."""

import math

import numpy as np
import pytest

from conftest import draw_family_seed
from ringaxis.dynamics import (
    characteristic_period,
    check_radial_confinement,
    circular_dy20,
    energy_of,
    four_body_rhs,
    make_ode,
    no_collision_certificate,
    radial_bounds,
    radial_bounds_from_seed,
    reduced_rhs,
    three_body_rhs,
)
from ringaxis.errors import OutsideFamilyError, TheoremViolationError
from ringaxis.integrate import integrate
from ringaxis.model import (
    RadialBounds,
    SeedConfig,
    conserved_from_seed,
    make_constants,
)


def random_state(rng):
    f = rng.normal() * 0.5
    fdot = rng.normal() * 0.5
    r = 10.0 ** rng.uniform(-0.5, 0.5)
    rdot = rng.normal() * 0.5
    theta = rng.uniform(-math.pi, math.pi)
    return np.array([f, fdot, r, rdot, theta])


def test_reduced_rhs_matches_three_body_form():
    rng = np.random.default_rng(11)
    for _ in range(50):
        m1 = 10.0 ** rng.uniform(-1, 1)
        m2 = 10.0 ** rng.uniform(-1, 1)
        c1 = rng.normal() * 2.0
        rc = make_constants(2, m1, m2)
        y = random_state(rng)
        general = reduced_rhs(0.0, y, c1, rc, 2, m1, m2)
        special = three_body_rhs(0.0, y, m1, m2, c1)
        np.testing.assert_allclose(general, special, rtol=1e-12, atol=1e-15)


def test_reduced_rhs_matches_four_body_form():
    rng = np.random.default_rng(12)
    for _ in range(50):
        m1 = 10.0 ** rng.uniform(-1, 1)
        m2 = 10.0 ** rng.uniform(-1, 1)
        c1 = rng.normal() * 2.0
        rc = make_constants(3, m1, m2)
        y = random_state(rng)
        general = reduced_rhs(0.0, y, c1, rc, 3, m1, m2)
        special = four_body_rhs(0.0, y, m1, m2, c1)
        np.testing.assert_allclose(general, special, rtol=1e-12, atol=1e-15)


def test_rhs_time_independence():
    rc = make_constants(2, 1.0, 1.0)
    y = np.array([0.1, -0.2, 1.3, 0.4, 0.5])
    a = reduced_rhs(0.0, y, 0.7, rc, 2, 1.0, 1.0)
    b = reduced_rhs(123.0, y, 0.7, rc, 2, 1.0, 1.0)
    np.testing.assert_array_equal(a, b)


def test_energy_equals_c2_at_the_start(known_rows):
    for seed in known_rows:
        c = conserved_from_seed(seed)
        rc = make_constants(seed.n, seed.m1, seed.m2)
        e = energy_of(0.0, seed.df0, seed.y10, 0.0, c.c1, rc, seed.n,
                      seed.m1, seed.m2)
        assert abs(e - c.c2) <= 1e-12 * abs(c.c2)


def test_circular_speed_balances_radial_acceleration():
    rng = np.random.default_rng(5)
    for n in (2, 3, 4, 5, 18):
        m1 = 10.0 ** rng.uniform(-1, 1)
        m2 = 10.0 ** rng.uniform(-1, 1)
        y10 = 10.0 ** rng.uniform(-0.5, 0.5)
        v_c = circular_dy20(n, m1, m2, y10)
        rc = make_constants(n, m1, m2)
        y = np.array([0.0, 0.0, y10, 0.0, 0.0])
        dy = reduced_rhs(0.0, y, y10 * v_c, rc, n, m1, m2)
        # rddot vanishes at the circular radius
        assert abs(dy[3]) <= 1e-13 * (m1 + rc.a_n * m2) / y10**2


def test_circular_orbit_keeps_constant_radius():
    seed = SeedConfig(n=4, m1=2.0, m2=0.5, y10=1.5,
                      dy20=circular_dy20(4, 2.0, 0.5, 1.5), df0=0.0)
    t_c = characteristic_period(seed)
    traj = integrate(seed, t_end=2.0 * t_c)
    rs = traj.dense(np.linspace(0.0, traj.t_end, 500))[2]
    assert np.max(np.abs(rs - 1.5)) < 1e-9


def test_characteristic_period_is_one_revolution_when_circular():
    seed = SeedConfig(n=3, m1=1.0, m2=0.3, y10=2.0,
                      dy20=circular_dy20(3, 1.0, 0.3, 2.0), df0=0.0)
    t_c = characteristic_period(seed)
    traj = integrate(seed, t_end=t_c, detect_events=False)
    theta_end = traj.dense(np.array([t_c]))[4, 0]
    assert abs(theta_end - 2.0 * math.pi) < 1e-9


def test_radial_bounds_need_membership():
    hyperbolic = SeedConfig(n=2, m1=1.0, m2=1.0, y10=1.0, dy20=5.0, df0=0.0)
    with pytest.raises(OutsideFamilyError):
        radial_bounds_from_seed(hyperbolic)


def test_radial_bounds_bracket_the_start(known_rows):
    for seed in known_rows:
        rb = radial_bounds_from_seed(seed)
        assert rb.d > 0.0
        assert 0.0 < rb.r_lo <= seed.y10 * (1 + 1e-12)
        assert seed.y10 * (1 - 1e-12) <= rb.r_hi


def test_bounds_are_roots_of_the_turning_condition():
    # at r = r_lo and r = r_hi the planar radial speed must vanish:
    # c2 = (n*m2/2)*c1^2/r^2 - n*m1*m2/r - n*b_n*m2^2/(2r)
    rng = np.random.default_rng(8)
    for _ in range(20):
        seed = draw_family_seed(rng, 2, bounded=False)
        c = conserved_from_seed(seed)
        rc = make_constants(seed.n, seed.m1, seed.m2)
        rb = radial_bounds(c, seed.n, seed.m1, seed.m2, rc)
        n, m1, m2 = seed.n, seed.m1, seed.m2
        for r in (rb.r_lo, rb.r_hi):
            resid = (n * m2 / 2.0) * c.c1**2 / r**2 - n * m1 * m2 / r \
                - n * rc.b_n * m2**2 / (2.0 * r) - c.c2
            assert abs(resid) <= 1e-9 * abs(c.c2)


def test_check_radial_confinement_semantics():
    rb = RadialBounds(d=1.0, r_lo=1.0, r_hi=2.0)
    ok, lo, hi = check_radial_confinement(np.array([1.2, 1.8]), rb)
    assert ok and lo == 1.2 and hi == 1.8
    ok, _, _ = check_radial_confinement(np.array([0.5, 1.5]), rb)
    assert not ok
    # slack admits grazing contact at the bracket
    ok, _, _ = check_radial_confinement(np.array([1.0 - 1e-12, 2.0]), rb,
                                        slack=1e-9)
    assert ok


def test_no_collision_certificate_on_a_table_row(known_rows):
    seed = known_rows[0]
    traj = integrate(seed, t_end=seed.t0)
    report = no_collision_certificate(traj)
    assert report["ok"]
    assert report["margin_lo"] > 0.0
    assert report["margin_hi"] > 0.0
    assert report["r_lo"] < report["min_r"] <= report["max_r"] < report["r_hi"]


def test_certificate_raises_on_violated_bracket(known_rows):
    seed = known_rows[0]
    traj = integrate(seed, t_end=seed.t0)
    honest = no_collision_certificate(traj)
    pinched = RadialBounds(d=honest["r_lo"], r_lo=honest["min_r"] * 1.01,
                           r_hi=honest["max_r"] * 0.99)
    with pytest.raises(TheoremViolationError):
        no_collision_certificate(traj, rb=pinched)


def test_planar_trajectory_grazes_the_bracket():
    seed = SeedConfig(n=2, m1=1.0, m2=1.0, y10=1.0,
                      dy20=0.8 * circular_dy20(2, 1.0, 1.0, 1.0), df0=0.0)
    rb = radial_bounds_from_seed(seed)
    traj = integrate(seed, t_end=4.0 * characteristic_period(seed))
    report = no_collision_certificate(traj, slack=1e-9)
    assert report["ok"]
    # both turning radii are visited and sit on the bracket itself
    assert abs(report["min_r"] - rb.r_lo) < 1e-9 * rb.r_lo
    assert abs(report["max_r"] - rb.r_hi) < 1e-9 * rb.r_hi


def test_make_ode_closes_over_the_seed(known_rows):
    seed = known_rows[0]
    c = conserved_from_seed(seed)
    rc = make_constants(seed.n, seed.m1, seed.m2)
    rhs = make_ode(seed)
    y = np.array([0.05, -0.1, seed.y10, 0.2, 0.3])
    np.testing.assert_allclose(
        rhs(0.0, y), reduced_rhs(0.0, y, c.c1, rc, seed.n, seed.m1, seed.m2),
        rtol=1e-12, atol=1e-15)
