"""Closed-form kinematics of the crank (triangle OBP) and spring lever (triangle OPA).

Vertex naming: O is the common motor axis, B the crank bearing on motor 2
(|OB| = a), P the sliding pivot (|BP| = r_D, |OP| = r) and A the spring
anchor on the output (|OA| = l). The crank angle ``delta`` is the interior
angle at B; it is the stiffness-setting coordinate because r grows
monotonically with it over the whole travel.

All angles are radians, all lengths meters.
"""
import math
from dataclasses import dataclass

from .errors import DomainError, GeometryError

# slack for floating point noise at the travel ends and in arccos arguments
_ANGLE_SLACK = 1e-12
_REL_SLACK = 1e-12


@dataclass(frozen=True)
class DesignParams:
    r_D: float = 0.010
    a: float = 0.0095
    l: float = 0.020
    k: float = 60.0

    def __post_init__(self):
        for name in ("r_D", "a", "l", "k"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        if self.r_D == self.a:
            raise DomainError("r_D == a lets the pivot reach the center axis (dead-lock)")
        if not self.r_max < self.l:
            raise DomainError(
                f"pivot travel [{self.r_min}, {self.r_max}] m must stay inside the lever length l={self.l} m"
            )

    @property
    def r_min(self):
        return abs(self.r_D - self.a)

    @property
    def r_max(self):
        return self.r_D + self.a


@dataclass(frozen=True)
class MechanismConfiguration:
    delta: float
    r: float
    phi_d: float
    epsilon: float
    gamma: float
    alpha: float
    theta: float
    beta: float
    c: float


def _safe_acos(x, what):
    if x > 1.0:
        if x - 1.0 > _ANGLE_SLACK:
            raise GeometryError(f"{what}: arccos argument {x!r} exceeds 1")
        return 0.0
    if x < -1.0:
        if -1.0 - x > _ANGLE_SLACK:
            raise GeometryError(f"{what}: arccos argument {x!r} below -1")
        return math.pi
    return math.acos(x)


def _check_radius(params, r):
    lo, hi = params.r_min, params.r_max
    tol = _REL_SLACK * hi
    if not (lo - tol <= r <= hi + tol):
        raise DomainError(
            f"pivot radius {r!r} m outside the reachable band [{lo!r}, {hi!r}] m"
        )
    return min(max(r, lo), hi)


def radius_for_crank_angle(params, delta):
    """Pivot radius |OP| for crank angle ``delta`` (law of cosines at B)."""
    if not (-_ANGLE_SLACK <= delta <= math.pi + _ANGLE_SLACK):
        raise DomainError(f"crank angle {delta!r} rad outside [0, pi]")
    a, rd = params.a, params.r_D
    r2 = a * a + rd * rd - 2.0 * a * rd * math.cos(delta)
    return math.sqrt(max(r2, 0.0))


def crank_angle_for_radius(params, r):
    """Inverse of :func:`radius_for_crank_angle`."""
    r = _check_radius(params, r)
    a, rd = params.a, params.r_D
    return _safe_acos((a * a + rd * rd - r * r) / (2.0 * a * rd), "crank angle")


def triangle_angles(params, r):
    """Interior angles of triangle OBP for pivot radius ``r``.

    Returns ``(phi_d, epsilon, gamma, delta)``: the angles at P, O and B
    plus ``gamma = pi/2 - delta``. Each angle comes from the three side
    lengths, so there is no arcsin branch to pick.
    """
    r = _check_radius(params, r)
    a, rd = params.a, params.r_D
    delta = crank_angle_for_radius(params, r)
    if r == 0.0:
        raise GeometryError("pivot on the center axis")
    phi_d = _safe_acos((rd * rd + r * r - a * a) / (2.0 * rd * r), "angle at P")
    # the angle at O closes the sum exactly
    epsilon = math.pi - phi_d - delta
    if epsilon < 0.0:
        epsilon = 0.0
    return phi_d, epsilon, math.pi / 2.0 - delta, delta


def spring_lever(params, r, alpha):
    """Distance |AP| between spring anchor and pivot at output deflection ``alpha``."""
    _check_radius(params, r)
    l = params.l
    return math.hypot(l * math.cos(alpha) - r, l * math.sin(alpha))


def spring_deflection(params, r, alpha):
    """Spring deflection angle at A between the lever arms AO and AP.

    Evaluated as atan2(r |sin a|, l - r cos a), which is the same angle as
    the arccos of the cosine-law ratio but stays accurate near zero
    deflection where the arccos argument approaches 1.
    """
    _check_radius(params, r)
    return math.atan2(r * abs(math.sin(alpha)), params.l - r * math.cos(alpha))


def configuration(params, r, alpha=0.0):
    """Full pose for pivot radius ``r`` and output deflection ``alpha``."""
    phi_d, epsilon, gamma, delta = triangle_angles(params, r)
    c = spring_lever(params, r, alpha)
    theta = spring_deflection(params, r, alpha)
    beta = math.pi / 2.0 - abs(alpha) - theta
    return MechanismConfiguration(
        delta=delta, r=r, phi_d=phi_d, epsilon=epsilon, gamma=gamma,
        alpha=alpha, theta=theta, beta=beta, c=c,
    )
