"""Static torques, forces, stiffness and stored energy of the lever mechanism."""
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, SingularityError, UseLimitError
from .geometry import (
    _check_radius, configuration, radius_for_crank_angle, spring_deflection, spring_lever,
)

_SINGULAR_COS = 1e-6


@dataclass(frozen=True)
class StaticsResult:
    T_O: float
    T_A: float
    T_1: float
    T_2: float
    F_P: float
    F_D: float
    F_T1: float
    F_T2: float
    k_e_secant: float
    E_spring: float


class CurveKind(str, Enum):
    TORQUE_VS_DEFLECTION = "torque_vs_deflection"
    STIFFNESS_VS_TORQUE = "stiffness_vs_torque"
    STIFFNESS_RATIO_VS_RADIUS_RATIO = "stiffness_ratio_vs_radius_ratio"


@dataclass(frozen=True)
class CurveSpec:
    r_values: tuple
    alpha_grid: tuple
    output_kind: CurveKind

    def __post_init__(self):
        for name in ("r_values", "alpha_grid"):
            values = np.asarray(getattr(self, name), dtype=float)
            if values.size == 0:
                raise DomainError(f"{name} must not be empty")
            if np.any(np.diff(values) <= 0):
                raise DomainError(f"{name} must be strictly increasing")
        object.__setattr__(self, "output_kind", CurveKind(self.output_kind))


def spring_torque(params, theta):
    if theta < 0:
        raise DomainError(f"spring deflection must be non-negative, got {theta!r}")
    return params.k * theta


def output_torque(params, r, alpha):
    """Output torque needed to hold deflection ``alpha`` at pivot radius ``r``.

    Odd in ``alpha``; the mechanism pushes back on the output with the
    opposite sign.
    """
    if alpha == 0.0:
        _check_radius(params, r)
        return 0.0
    x = abs(alpha)
    c = spring_lever(params, r, x)
    theta = spring_deflection(params, r, x)
    # sin(beta) with beta = pi/2 - alpha - theta
    magnitude = math.cos(x + theta) * params.k * theta / c * r
    # the magnitude itself turns negative once alpha + theta passes pi/2
    return magnitude if alpha > 0 else -magnitude


def effective_stiffness_secant(params, r, alpha):
    if alpha == 0.0:
        raise UseLimitError(
            "secant stiffness is undefined at zero deflection; use small_deflection_stiffness"
        )
    return output_torque(params, r, alpha) / alpha


def small_deflection_stiffness(params, r):
    """Zero-deflection limit k (r / (l - r))**2 of the secant stiffness."""
    if not 0 <= r < params.l:
        raise DomainError(f"pivot radius {r!r} m must lie in [0, l={params.l}) m")
    ratio = r / (params.l - r)
    return params.k * ratio * ratio


def stored_energy(params, r, alpha):
    theta = spring_deflection(params, r, alpha)
    return 0.5 * params.k * theta * theta


def motor_torques(params, r, alpha):
    """Holding torques of motors 1 and 2 and the intermediate forces.

    Returns ``(T_1, T_2, F_P, F_D, F_T1, F_T2)``. The geometry is mirrored
    for negative deflection; the direction asymmetry of the crank enters
    only through the sign(alpha) term on the crank force.
    """
    cfg = configuration(params, r, abs(alpha))
    if alpha == 0.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    cos_eps = math.cos(cfg.epsilon)
    cos_gamma = math.cos(cfg.gamma)
    if abs(cos_eps) < _SINGULAR_COS:
        raise SingularityError(f"cos(epsilon) vanishes at r = {r!r} m")
    if abs(cos_gamma) < _SINGULAR_COS:
        raise SingularityError(f"cos(gamma) vanishes at r = {r!r} m")
    sign = math.copysign(1.0, alpha)
    sin_b, cos_b = math.sin(cfg.beta), math.cos(cfg.beta)
    F_P = params.k * cfg.theta / cfg.c
    F_D = cos_b * F_P / cos_eps
    F_T1 = sin_b * F_P + sign * math.sin(cfg.epsilon) * F_D
    F_T2 = F_D / cos_gamma
    return F_T1 * r, F_T2 * params.r_D, F_P, F_D, F_T1, F_T2


def statics(params, r, alpha):
    """Everything static at one pose, bundled as a :class:`StaticsResult`."""
    T_1, T_2, F_P, F_D, F_T1, F_T2 = motor_torques(params, r, alpha)
    theta = spring_deflection(params, r, alpha)
    T_O = output_torque(params, r, alpha)
    k_e = T_O / alpha if alpha != 0.0 else small_deflection_stiffness(params, r)
    return StaticsResult(
        T_O=T_O, T_A=params.k * theta, T_1=T_1, T_2=T_2, F_P=F_P, F_D=F_D,
        F_T1=F_T1, F_T2=F_T2, k_e_secant=k_e, E_spring=0.5 * params.k * theta * theta,
    )


def generate_curve(params, spec):
    """Tabulate a characterization curve.

    Returns a list of ``(r, x, y)`` rows. For the stiffness map ``r`` is the
    pivot radius and ``x`` the radius ratio r/l; ``alpha_grid`` is unused.
    Torque curves skip zero deflection when the secant stiffness is asked for.
    """
    rows = []
    kind = spec.output_kind
    if kind is CurveKind.STIFFNESS_RATIO_VS_RADIUS_RATIO:
        for r in spec.r_values:
            rows.append((r, r / params.l, small_deflection_stiffness(params, r) / params.k))
        return rows
    for r in spec.r_values:
        for alpha in spec.alpha_grid:
            if kind is CurveKind.TORQUE_VS_DEFLECTION:
                rows.append((r, alpha, output_torque(params, r, alpha)))
            elif alpha != 0.0:
                torque = output_torque(params, r, alpha)
                rows.append((r, torque, torque / alpha))
    return rows


def energy_gradient_audit(params, r_values, alpha_values, step=1e-7):
    """Compare the closed-form motor torques with energy gradients.

    The reference torques are generalized forces obtained by central finite
    differences of the stored energy with respect to each motor angle, with
    the output angle and the other motor held fixed:
    ``T1* = |dE/dphi1|`` and ``T2* = |dE/d delta * d delta/d phi2|`` where
    ``delta = phi2 - phi1``. Returns one dict per grid point; singular
    points are reported with NaN entries.
    """
    rows = []
    for r in r_values:
        d0 = configuration(params, r).delta
        for alpha in alpha_values:
            row = {"r": r, "alpha": alpha}
            try:
                T_1, T_2, *_ = motor_torques(params, r, alpha)
            except SingularityError:
                T_1 = T_2 = math.nan

            def energy(d_phi1, d_phi2):
                delta = d0 + d_phi2 - d_phi1
                rr = radius_for_crank_angle(params, min(max(delta, 0.0), math.pi))
                return stored_energy(params, rr, alpha - d_phi1)

            h = step
            dE_dphi1 = (energy(h, 0.0) - energy(-h, 0.0)) / (2 * h)
            dE_dphi2 = (energy(0.0, h) - energy(0.0, -h)) / (2 * h)
            T1_ref, T2_ref = abs(dE_dphi1), abs(dE_dphi2)
            row.update(
                T_1=T_1, T_2=T_2, T1_energy=T1_ref, T2_energy=T2_ref,
                T1_rel_dev=abs(abs(T_1) - T1_ref) / T1_ref if T1_ref > 0 else math.nan,
                T2_rel_dev=abs(abs(T_2) - T2_ref) / T2_ref if T2_ref > 0 else math.nan,
            )
            rows.append(row)
    return rows
