"""Setpoint pipeline: stiffness -> pivot radius -> crank angle -> motor commands, plus damping rules."""
import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConfigurationError, DomainError
from .geometry import crank_angle_for_radius


@dataclass(frozen=True)
class FitCoefficients:
    p: float = 0.2273
    q: float = 5.9
    scale: float = 1e-3

    def __post_init__(self):
        if not self.p > 0:
            raise DomainError("fit slope p must be positive")
        if not self.scale > 0:
            raise DomainError("fit scale must be positive")


DEFAULT_FIT = FitCoefficients()


@dataclass(frozen=True)
class Setpoints:
    phi_set: float = 0.0
    k_e_set: float = None
    r_set: float = None
    b_set: float = 0.0

    def __post_init__(self):
        if (self.k_e_set is None) == (self.r_set is None):
            raise DomainError("exactly one of k_e_set and r_set must be given")
        if self.k_e_set is not None and not self.k_e_set > 0:
            raise DomainError("stiffness setpoint must be positive")
        if self.b_set < 0:
            raise DomainError("damping setpoint must be non-negative")


def _clamp_to_band(params, r):
    lo, hi = params.r_min, params.r_max
    if r < lo:
        return lo, True
    if r > hi:
        return hi, True
    return r, False


def radius_from_stiffness_fit(coeffs, k_e, params=None):
    """Pivot radius from the cubic-log calibration r = scale (p (ln k_e + q))**3.

    Returns ``(r, clamped)``. Clamping to the reachable band only happens
    when ``params`` is given.
    """
    if not k_e > math.exp(-coeffs.q):
        raise DomainError(f"stiffness {k_e!r} N m/rad at or below exp(-q) = {math.exp(-coeffs.q):.4g}")
    r = coeffs.scale * (coeffs.p * (math.log(k_e) + coeffs.q)) ** 3
    if params is None:
        return r, False
    return _clamp_to_band(params, r)


def radius_from_stiffness_analytic(params, k_e):
    """Exact inverse of the zero-deflection stiffness law; returns ``(r, clamped)``."""
    if not k_e > 0:
        raise DomainError("stiffness must be positive")
    s = math.sqrt(k_e / params.k)
    return _clamp_to_band(params, params.l * s / (1.0 + s))


class StiffnessMap(str, Enum):
    ANALYTIC = "analytic"
    FIT = "fit"


def resolve_radius(params, setpoints, stiffness_map=StiffnessMap.ANALYTIC, coeffs=DEFAULT_FIT):
    """Pivot radius for a setpoint bundle; returns ``(r, clamped)``."""
    if setpoints.r_set is not None:
        r = setpoints.r_set
        if not params.r_min <= r <= params.r_max:
            raise DomainError(
                f"radius setpoint {r!r} m outside [{params.r_min!r}, {params.r_max!r}] m"
            )
        return r, False
    if StiffnessMap(stiffness_map) is StiffnessMap.FIT:
        return radius_from_stiffness_fit(coeffs, setpoints.k_e_set, params)
    return radius_from_stiffness_analytic(params, setpoints.k_e_set)


def motor_commands(params, setpoints, stiffness_map=StiffnessMap.ANALYTIC, coeffs=DEFAULT_FIT):
    """Position commands ``(phi_1, phi_2)`` with phi_2 - phi_1 equal to the crank angle."""
    r, _ = resolve_radius(params, setpoints, stiffness_map, coeffs)
    phi_1 = setpoints.phi_set
    return phi_1, phi_1 + crank_angle_for_radius(params, r)


class TriggerKind(str, Enum):
    NONE = "none"
    NEGATIVE_POSITION = "negative_position"
    TIME_SCHEDULE = "time_schedule"


@dataclass
class DampingTrigger:
    """Damping setpoint rule.

    ``none`` holds ``b_low``; ``time_schedule`` follows ``schedule`` (sorted
    ``(t, b)`` pairs, zero-order held, ``b_low`` before the first entry);
    ``negative_position`` switches to ``b_high`` the first time the output
    position goes negative and keeps it for the rest of the run.
    """

    kind: TriggerKind = TriggerKind.NONE
    b_low: float = 0.0
    b_high: float = 0.0
    schedule: list = field(default_factory=list)
    fired_at: float = None

    def __post_init__(self):
        try:
            self.kind = TriggerKind(self.kind)
        except ValueError:
            raise ConfigurationError(f"unknown damping trigger rule {self.kind!r}") from None
        if self.b_low < 0 or self.b_high < 0:
            raise ConfigurationError("damping levels must be non-negative")
        self.schedule = sorted(self.schedule)

    def reset(self):
        self.fired_at = None

    def __call__(self, eta, eta_dot, t):
        if self.kind is TriggerKind.NEGATIVE_POSITION:
            if self.fired_at is None and eta < 0.0:
                self.fired_at = t
            return self.b_high if self.fired_at is not None else self.b_low
        if self.kind is TriggerKind.TIME_SCHEDULE:
            b = self.b_low
            for t_entry, b_entry in self.schedule:
                if t_entry > t:
                    break
                b = b_entry
            return b
        return self.b_low


def damping_trigger(rule, measured):
    """Active damping setpoint for ``measured = (eta, eta_dot, t)``; updates the latch of ``rule``."""
    if not isinstance(rule, DampingTrigger):
        raise ConfigurationError(f"unsupported trigger rule {rule!r}")
    eta, eta_dot, t = measured
    return rule(eta, eta_dot, t)
