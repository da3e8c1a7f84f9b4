"""Drive models: rate-limited position servos (motors 1, 2) and the torque-mode damper (motor 3)."""
import math
from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class ServoModel:
    velocity_limit: float = 16.0
    torque_limit: float = 12.0
    tracking_bandwidth: float = 50.0

    def __post_init__(self):
        for name in ("velocity_limit", "torque_limit", "tracking_bandwidth"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


# 90 % rise time of 10 ms: tau = 0.010 / ln(10)
DEFAULT_DAMPER_LAG = 0.010 / math.log(10.0)


@dataclass(frozen=True)
class DamperModel:
    b: float = 0.0
    torque_limit: float = 3.0
    lag_time_constant: float = DEFAULT_DAMPER_LAG

    def __post_init__(self):
        if self.b < 0:
            raise DomainError("damping factor must be non-negative")
        if not self.torque_limit > 0:
            raise DomainError("damper torque limit must be positive")
        if self.lag_time_constant < 0:
            raise DomainError("damper lag must be non-negative")


def servo_step(model, commanded, state, dt):
    """Advance a position servo by one step.

    The servo tracks ``commanded`` as a first-order system with corner
    frequency ``tracking_bandwidth`` and clips the resulting velocity to the
    velocity limit. ``state`` is ``(position, velocity)``; the new state is
    returned.
    """
    if not dt > 0:
        raise DomainError("time step must be positive")
    position, _ = state
    error = commanded - position
    if error == 0.0:
        return position, 0.0
    # exact discrete first-order step, then the rate limit
    gain = 1.0 - math.exp(-2.0 * math.pi * model.tracking_bandwidth * dt)
    move = gain * error
    limit = model.velocity_limit * dt
    if move > limit:
        move = limit
    elif move < -limit:
        move = -limit
    return position + move, move / dt


def damper_command(b, phi_dot, eta_dot):
    """Unsaturated damper torque b (phi_dot - eta_dot) applied to the output."""
    return b * (phi_dot - eta_dot)


def saturate(value, limit):
    return max(-limit, min(limit, value))


def lag_step(target, previous, time_constant, dt):
    if time_constant == 0.0:
        return target
    return previous + (target - previous) * (1.0 - math.exp(-dt / time_constant))


def damper_torque(model, phi_dot, eta_dot, prev_torque, dt):
    """Damper torque after saturation and the first-order motor lag."""
    if not dt > 0:
        raise DomainError("time step must be positive")
    command = saturate(damper_command(model.b, phi_dot, eta_dot), model.torque_limit)
    return lag_step(command, prev_torque, model.lag_time_constant, dt)
