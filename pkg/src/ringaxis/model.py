"""Domain types and derived constants for the ring-plus-axis family.

The configurations handled by this package have one body of mass m1 confined
to the vertical axis and n bodies of equal mass m2 arranged as a rotating
regular n-gon of radius r(t) at common height -(m1/(n*m2))*f(t), where f(t)
is the axial coordinate of body 0.  Units are gravitational (G = 1).

Everything here is an immutable value object or a pure function; instances
are safe to share across workers.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from math import gcd
from typing import Iterable, NamedTuple

from .errors import CollisionDomainError, ConfigurationError, TheoremViolationError

# The force sum over the n-gon is complex-valued term by term; its imaginary
# part must cancel to rounding noise or the constants are being computed
# wrong.  The guard is relative to the summed term magnitudes, which grow
# roughly like n^2 and carry the roundoff with them.
_IMAG_CANCEL_TOL = 1e-13

#: Keys of the flat serialized seed record, in canonical order.
SEED_FIELDS = ("n", "m1", "m2", "y10", "dy20", "df0", "theta0_p", "theta0_q", "t0")


@dataclass(frozen=True)
class RingConstants:
    """Derived constants of the ring geometry for a given (n, m1, m2).

    k       dimensionless axial distance factor (m1 + n*m2)/(n*m2); the
            axis-to-ring distance is h = sqrt(r^2 + (k*f)^2).
    a_n     ring self-force constant (force sum over the n-gon).
    b_n     ring self-potential constant (inverse-distance sum); a_n = b_n/2.
    mu_f    axial restoring coefficient m1 + n*m2.
    """

    k: float
    a_n: float
    b_n: float
    mu_f: float


@dataclass(frozen=True)
class SeedConfig:
    """Initial conditions for one member of the family.

    The configuration starts with the axial body at the origin moving at
    df0 along the axis, the ring at radius y10 with zero radial velocity
    and tangential speed component dy20 (so c1 = y10*dy20), and phase
    angle zero.

    theta0 is a target angle used by the periodicity residual, stored
    exactly as an integer pair (p, q) meaning (p/q)*pi.  It is normalized
    to q > 0 and gcd(|p|, q) = 1 on construction and never held as a
    rounded float.  t0 is the candidate period associated with theta0.
    """

    n: int
    m1: float
    m2: float
    y10: float
    dy20: float
    df0: float
    theta0: tuple[int, int] = (0, 1)
    t0: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 2:
            raise ConfigurationError(f"need an integer ring count n >= 2, got {self.n!r}")
        if not (self.m1 > 0 and self.m2 > 0):
            raise ConfigurationError(f"masses must be positive, got m1={self.m1}, m2={self.m2}")
        if not self.y10 > 0:
            raise ConfigurationError(f"initial ring radius must be positive, got y10={self.y10}")
        if self.t0 is not None and not self.t0 > 0:
            raise ConfigurationError(f"candidate period must be positive, got t0={self.t0}")
        p, q = self.theta0
        if not (isinstance(p, int) and isinstance(q, int)) or q == 0:
            raise ConfigurationError(f"theta0 must be an integer pair (p, q) with q != 0, got {self.theta0!r}")
        if q < 0:
            p, q = -p, -q
        g = gcd(abs(p), q)
        if g > 1:
            p, q = p // g, q // g
        if p == 0:
            q = 1
        object.__setattr__(self, "theta0", (p, q))

    @property
    def theta0_float(self) -> float:
        """Target angle (p/q)*pi in binary64; evaluate only at the final comparison."""
        p, q = self.theta0
        return p * math.pi / q

    def replace(self, **changes) -> "SeedConfig":
        fields = dict(n=self.n, m1=self.m1, m2=self.m2, y10=self.y10,
                      dy20=self.dy20, df0=self.df0, theta0=self.theta0, t0=self.t0)
        fields.update(changes)
        return SeedConfig(**fields)


@dataclass(frozen=True)
class ReducedState:
    """Full state of the reduced dynamical system at one instant.

    theta is the unwrapped ring phase (never reduced mod 2*pi).  r must be
    positive: a collision is an error condition, never a state.
    """

    t: float
    f: float
    fdot: float
    r: float
    rdot: float
    theta: float

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise CollisionDomainError(f"ring radius must stay positive, got r={self.r} at t={self.t}")


@dataclass(frozen=True)
class ConservedPair:
    """The two first integrals: per-ring-body angular momentum c1 and total energy c2."""

    c1: float
    c2: float


@dataclass(frozen=True)
class RadialBounds:
    """No-collision bracket for the ring radius: r(t) stays in (r_lo, r_hi)."""

    d: float
    r_lo: float
    r_hi: float


class FamilyFlags(NamedTuple):
    in_L: bool  # collisionless, globally defined: c2 < 0 and c1 != 0
    in_B: bool  # additionally satisfies the boundedness inequality


def make_constants(n: int, m1: float, m2: float) -> RingConstants:
    """Derived constants for a ring of n bodies of mass m2 around an axial mass m1.

    a_n is the real part of sum_{j=1}^{n-1} (1 - w^j)/|w^j - 1|^3 with
    w = exp(2*pi*i/n); the imaginary part cancels pairwise and is asserted
    to below 1e-14.  b_n = sum_{j=1}^{n-1} 1/|w^j - 1|.
    """
    if not isinstance(n, int) or n < 2:
        raise ConfigurationError(f"need an integer ring count n >= 2, got {n!r}")
    if not (m1 > 0 and m2 > 0):
        raise ConfigurationError(f"masses must be positive, got m1={m1}, m2={m2}")
    acc = 0j
    b_n = 0.0
    term_scale = 0.0
    for j in range(1, n):
        w = cmath.exp(2j * math.pi * j / n)
        dist = abs(w - 1)
        acc += (1 - w) / dist**3
        b_n += 1.0 / dist
        term_scale += 1.0 / dist**2
    if abs(acc.imag) > _IMAG_CANCEL_TOL * max(1.0, term_scale):
        raise TheoremViolationError(
            f"imaginary part of the ring force sum did not cancel: {acc.imag!r} for n={n}")
    return RingConstants(
        k=(m1 + n * m2) / (n * m2),
        a_n=acc.real,
        b_n=b_n,
        mu_f=m1 + n * m2,
    )


def closed_form_ring_sums(n: int) -> tuple[float, float] | None:
    """(a_n, b_n) in closed form for n <= 5; None above that.

    b_2 = 1/2, b_3 = 2/sqrt(3), b_4 = 1/2 + sqrt(2),
    b_5 = 2*sqrt(1 + 2/sqrt(5)); a_n = b_n/2 throughout.
    """
    forms = {
        2: 0.5,
        3: 2.0 / math.sqrt(3.0),
        4: 0.5 + math.sqrt(2.0),
        5: 2.0 * math.sqrt(1.0 + 2.0 / math.sqrt(5.0)),
    }
    if n not in forms:
        return None
    b_n = forms[n]
    return (b_n / 2.0, b_n)


def conserved_from_seed(q: SeedConfig) -> ConservedPair:
    """Angular momentum and total energy fixed by the seed.

    At the family's initial conditions (r = y10, rdot = 0, f = 0, so the
    axis-to-ring distance h equals y10 and the tangential speed is dy20):

        c1 = y10 * dy20
        c2 = (n*m2/2)*dy20^2 + [m1*(m1 + n*m2)/(2*n*m2)]*df0^2
             - n*m1*m2/y10 - n*b_n*m2^2/(2*y10)

    The kinetic term in df0 enters squared.  c2 equals the Cartesian
    kinetic-plus-potential energy of the reconstructed configuration.
    """
    rc = make_constants(q.n, q.m1, q.m2)
    n, m1, m2 = q.n, q.m1, q.m2
    c1 = q.y10 * q.dy20
    c2 = (
        0.5 * n * m2 * q.dy20**2
        + m1 * rc.mu_f / (2.0 * n * m2) * q.df0**2
        - n * m1 * m2 / q.y10
        - 0.5 * n * rc.b_n * m2**2 / q.y10
    )
    return ConservedPair(c1=c1, c2=c2)


def boundedness_lhs(c: ConservedPair, m1: float, m2: float, n: int, rc: RingConstants) -> float:
    """Left-hand side of the boundedness inequality; bounded solutions have it < 0."""
    return 2.0 * c.c1**2 * c.c2 + n * rc.a_n * m2**2 * (2.0 * m1 + (rc.b_n - rc.a_n) * m2)


def validate_family(q: SeedConfig) -> FamilyFlags:
    """Membership flags for the collisionless family L and its bounded subfamily B."""
    c = conserved_from_seed(q)
    rc = make_constants(q.n, q.m1, q.m2)
    in_l = c.c1 != 0.0 and c.c2 < 0.0
    in_b = in_l and boundedness_lhs(c, q.m1, q.m2, q.n, rc) < 0.0
    return FamilyFlags(in_L=in_l, in_B=in_b)


# ---------------------------------------------------------------------------
# Flat-record serialization.  Floats are written with repr(), which Python
# guarantees to round-trip binary64 exactly.

def seed_to_mapping(q: SeedConfig) -> dict[str, str]:
    p, qq = q.theta0
    vals = {
        "n": str(q.n),
        "m1": repr(q.m1),
        "m2": repr(q.m2),
        "y10": repr(q.y10),
        "dy20": repr(q.dy20),
        "df0": repr(q.df0),
        "theta0_p": str(p),
        "theta0_q": str(qq),
        "t0": "" if q.t0 is None else repr(q.t0),
    }
    return vals


def seed_from_mapping(kv: dict[str, str]) -> SeedConfig:
    missing = [f for f in ("n", "m1", "m2", "y10", "dy20", "df0") if f not in kv]
    if missing:
        raise ConfigurationError(f"seed record is missing fields: {', '.join(missing)}")
    t0_raw = kv.get("t0", "")
    t0 = None if t0_raw in ("", "none", "None") else float(t0_raw)
    return SeedConfig(
        n=int(kv["n"]),
        m1=float(kv["m1"]),
        m2=float(kv["m2"]),
        y10=float(kv["y10"]),
        dy20=float(kv["dy20"]),
        df0=float(kv["df0"]),
        theta0=(int(kv.get("theta0_p", 0)), int(kv.get("theta0_q", 1))),
        t0=t0,
    )


def dump_seed(q: SeedConfig) -> str:
    """Serialize a seed as `key = value` lines (one per SEED_FIELDS entry)."""
    kv = seed_to_mapping(q)
    return "\n".join(f"{k} = {kv[k]}" for k in SEED_FIELDS) + "\n"


def parse_seed_mapping(text: str) -> dict[str, str]:
    """Parse `key = value` lines or a single JSON object into a raw mapping."""
    stripped = text.strip()
    if stripped.startswith("{"):
        obj = json.loads(stripped)
        return {k: str(v) for k, v in obj.items()}
    kv: dict[str, str] = {}
    for raw in stripped.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        kv[key.strip()] = val.strip()
    return kv


def load_seed(text: str) -> SeedConfig:
    """Parse a seed from `key = value` lines or from a single JSON object."""
    return seed_from_mapping(parse_seed_mapping(text))


def parse_record_line(line: str) -> dict[str, str]:
    """Parse one `key=value key=value ...` record line (catalog / fixture format)."""
    kv: dict[str, str] = {}
    for tok in line.split():
        if "=" not in tok:
            raise ConfigurationError(f"malformed record token {tok!r} in line {line!r}")
        key, _, val = tok.partition("=")
        kv[key] = val
    return kv


def format_record_line(kv: dict[str, str], order: Iterable[str]) -> str:
    return " ".join(f"{k}={kv[k]}" for k in order)
