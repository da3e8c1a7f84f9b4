"""Fixed-step simulation of the output inertia driven through the variable-stiffness lever.

The output obeys

    J eta'' = -T_O(alpha; r) + T_3 - b_visc eta' - T_coulomb + T_stop + T_ext(t),
    alpha = eta - phi_1,

with motors 1 and 2 acting as servo-tracked position sources. The output
state is integrated with classic RK4 at ``dt_physics``; the setpoint
controller and the damper command run at ``dt_control`` and are held in
between.
"""
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .actuation import DamperModel, ServoModel, lag_step, saturate, servo_step
from .controller import (
    DEFAULT_FIT, DampingTrigger, FitCoefficients, Setpoints, StiffnessMap, TriggerKind,
    resolve_radius,
)
from .errors import (
    ConfigurationError, ConvergenceError, DomainError, SimulationError, SingularityError,
)
from .geometry import DesignParams, crank_angle_for_radius, radius_for_crank_angle
from .statics import motor_torques, small_deflection_stiffness

END_STOP_STIFFNESS = 1e4
END_STOP_DAMPING = 10.0
# velocity scale of the regularized Coulomb friction sign
COULOMB_VELOCITY = 1e-3


class Flag(enum.IntFlag):
    NONE = 0
    T1_LIMIT = 1
    T2_LIMIT = 2
    DAMPER_SATURATED = 4
    END_STOP = 8
    SETPOINT_CLAMPED = 16
    SINGULAR = 32


def apply_backlash(alpha, dead_zone):
    """Deflection transmitted through a symmetric dead zone of total width ``dead_zone``."""
    if dead_zone < 0:
        raise DomainError("dead zone must be non-negative")
    if dead_zone == 0.0:
        return alpha
    excess = abs(alpha) - 0.5 * dead_zone
    if excess <= 0.0:
        return 0.0
    return math.copysign(excess, alpha)


@dataclass(frozen=True)
class Drive:
    """Neutral-position trajectory for motor 1.

    ``kind`` is ``none``, ``sine`` (``amplitude`` * sin(2 pi ``freq_hz`` t)
    for ``cycles`` periods, then held at zero; ``cycles=None`` runs
    forever) or ``pwl`` (linear interpolation through ``points``, held at
    the ends).
    """

    kind: str = "none"
    amplitude: float = 0.0
    freq_hz: float = 0.0
    cycles: float = None
    points: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "sine", "pwl"):
            raise ConfigurationError(f"unknown waveform {self.kind!r}")
        if self.kind == "sine" and not self.freq_hz > 0:
            raise ConfigurationError("sine drive needs a positive frequency")
        if self.kind == "pwl":
            if len(self.points) < 1:
                raise ConfigurationError("pwl drive needs at least one point")
            times = [p[0] for p in self.points]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ConfigurationError("pwl drive times must be strictly increasing")

    @property
    def end_time(self):
        if self.kind == "sine":
            return math.inf if self.cycles is None else self.cycles / self.freq_hz
        if self.kind == "pwl":
            return self.points[-1][0]
        return 0.0

    def __call__(self, t):
        if self.kind == "sine":
            if self.cycles is not None and t >= self.cycles / self.freq_hz:
                return 0.0
            return self.amplitude * math.sin(2.0 * math.pi * self.freq_hz * t)
        if self.kind == "pwl":
            pts = self.points
            if t <= pts[0][0]:
                return pts[0][1]
            for (t0, y0), (t1, y1) in zip(pts, pts[1:]):
                if t <= t1:
                    return y0 + (y1 - y0) * (t - t0) / (t1 - t0)
            return pts[-1][1]
        return 0.0


@dataclass(frozen=True)
class ScheduleEntry:
    """One row of the setpoint schedule; unset fields keep their previous value."""

    t: float
    r_set: float = None
    k_e_set: float = None
    b_set: float = None

    def __post_init__(self):
        if self.r_set is not None and self.k_e_set is not None:
            raise ConfigurationError("a schedule entry sets either r or k_e, not both")


@dataclass(frozen=True)
class TriggerSpec:
    kind: TriggerKind = TriggerKind.TIME_SCHEDULE
    b_low: float = None
    b_high: float = 0.0


@dataclass(frozen=True)
class Scenario:
    design: DesignParams = field(default_factory=DesignParams)
    load_inertia: float = 0.0125
    load_viscous_friction: float = 0.0
    servo1: ServoModel = field(default_factory=ServoModel)
    servo2: ServoModel = field(default_factory=ServoModel)
    damper: DamperModel = field(default_factory=DamperModel)
    drive: Drive = field(default_factory=Drive)
    schedule: tuple = (ScheduleEntry(0.0, r_set=0.010, b_set=0.0),)
    trigger: TriggerSpec = field(default_factory=TriggerSpec)
    backlash: float = 0.0
    coulomb_friction: float = 0.0
    end_stop: float = math.radians(120.0)
    dt_physics: float = 1e-4
    dt_control: float = 1e-3
    duration: float = 1.0
    initial_alpha: float = 0.0
    stiffness_map: StiffnessMap = StiffnessMap.ANALYTIC
    fit: FitCoefficients = DEFAULT_FIT
    ext_torque_amplitude: float = 0.0
    ext_torque_freq_hz: float = 0.0

    def __post_init__(self):
        if not self.load_inertia > 0:
            raise ConfigurationError("load inertia must be positive")
        if not (self.dt_physics > 0 and self.dt_control > 0):
            raise ConfigurationError("time steps must be positive")
        if self.dt_physics > self.dt_control:
            raise ConfigurationError("dt_physics must not exceed dt_control")
        ratio = self.dt_control / self.dt_physics
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigurationError("dt_control must be an integer multiple of dt_physics")
        if not self.end_stop > 0:
            raise ConfigurationError("end stop must be positive")
        if not self.duration > 0:
            raise ConfigurationError("duration must be positive")
        if self.backlash < 0 or self.coulomb_friction < 0 or self.load_viscous_friction < 0:
            raise ConfigurationError("backlash and friction must be non-negative")
        if not self.schedule:
            raise ConfigurationError("the schedule needs at least one entry")
        entries = tuple(sorted(self.schedule, key=lambda e: e.t))
        object.__setattr__(self, "schedule", entries)
        if entries[0].r_set is None and entries[0].k_e_set is None:
            raise ConfigurationError("the first schedule entry must set r or k_e")
        if any(b.t <= a.t for a, b in zip(entries, entries[1:])):
            raise ConfigurationError("schedule times must be strictly increasing")
        object.__setattr__(self, "stiffness_map", StiffnessMap(self.stiffness_map))

    @property
    def control_ratio(self):
        return int(round(self.dt_control / self.dt_physics))

    def with_changes(self, **changes):
        return replace(self, **changes)


TRACE_COLUMNS = (
    "t", "phi1_cmd", "phi1", "phi1_dot", "phi2", "delta", "r", "r_set", "alpha",
    "theta", "eta", "eta_dot", "T_O", "T_1", "T_2", "T3_cmd", "T3", "k_e0",
    "E_spring", "b_set", "flags",
)


class SimTrace:
    """Uniformly sampled simulation record with one read-only array per column."""

    columns = TRACE_COLUMNS

    def __init__(self, data, dt, meta=None):
        missing = [c for c in self.columns if c not in data]
        if missing:
            raise ValueError(f"trace is missing columns {missing}")
        self._data = {}
        for name in self.columns:
            dtype = np.int64 if name == "flags" else float
            arr = np.array(data[name], dtype=dtype)
            arr.setflags(write=False)
            self._data[name] = arr
        self.dt = dt
        self.meta = dict(meta or {})

    def __getitem__(self, name):
        return self._data[name]

    def __getattr__(self, name):
        try:
            return self.__dict__["_data"][name]
        except KeyError:
            raise AttributeError(name) from None

    def __len__(self):
        return len(self._data["t"])

    def window(self, t0, t1):
        t = self._data["t"]
        mask = (t >= t0) & (t <= t1)
        return SimTrace({k: v[mask] for k, v in self._data.items()}, self.dt, self.meta)

    def equals(self, other):
        return all(np.array_equal(self[c], other[c]) for c in self.columns)


@dataclass
class _ScheduleCursor:
    entries: tuple
    index: int = 0
    stiffness: tuple = None  # ("r", value) or ("k", value)
    b: float = None

    def advance(self, t):
        entries = self.entries
        while self.index < len(entries) and entries[self.index].t <= t + 1e-12:
            e = entries[self.index]
            if e.r_set is not None:
                self.stiffness = ("r", e.r_set)
            elif e.k_e_set is not None:
                self.stiffness = ("k", e.k_e_set)
            if e.b_set is not None:
                self.b = e.b_set
            self.index += 1


def build_trigger(scenario):
    spec = scenario.trigger
    schedule = [(e.t, e.b_set) for e in scenario.schedule if e.b_set is not None]
    b_low = spec.b_low
    if b_low is None:
        b_low = schedule[0][1] if schedule else 0.0
    return DampingTrigger(kind=spec.kind, b_low=b_low, b_high=spec.b_high, schedule=schedule)


def _setpoints(cursor, phi_set):
    kind, value = cursor.stiffness
    if kind == "r":
        return Setpoints(phi_set=phi_set, r_set=value)
    return Setpoints(phi_set=phi_set, k_e_set=value)


def simulate(scenario):
    """Run ``scenario`` and return its :class:`SimTrace` sampled at ``dt_control``."""
    p = scenario.design
    k, l, a, rd = p.k, p.l, p.a, p.r_D
    aa_rr = a * a + rd * rd
    two_ard = 2.0 * a * rd
    J = scenario.load_inertia
    visc = scenario.load_viscous_friction
    coulomb = scenario.coulomb_friction
    dead = scenario.backlash
    half_dead = 0.5 * dead
    stop = scenario.end_stop
    ext_amp = scenario.ext_torque_amplitude
    ext_w = 2.0 * math.pi * scenario.ext_torque_freq_hz
    dt = scenario.dt_physics
    n_sub = scenario.control_ratio
    dt_ctrl = dt * n_sub
    n_ticks = int(math.floor(scenario.duration / dt_ctrl + 1e-9)) + 1
    servo1, servo2, damper = scenario.servo1, scenario.servo2, scenario.damper
    drive = scenario.drive

    def torque_out(r, alpha):
        # restoring-torque magnitude law, odd in alpha
        if dead:
            excess = abs(alpha) - half_dead
            if excess <= 0.0:
                return 0.0
            alpha = math.copysign(excess, alpha)
        if alpha == 0.0:
            return 0.0
        x = abs(alpha)
        cx, sx = math.cos(x), math.sin(x)
        c = math.hypot(l * cx - r, l * sx)
        theta = math.atan2(r * sx, l - r * cx)
        magnitude = math.cos(x + theta) * k * theta * r / c
        return magnitude if alpha > 0.0 else -magnitude

    def stop_torque(alpha, alpha_dot):
        if alpha > stop:
            return -END_STOP_STIFFNESS * (alpha - stop) - END_STOP_DAMPING * max(alpha_dot, 0.0)
        if alpha < -stop:
            return -END_STOP_STIFFNESS * (alpha + stop) - END_STOP_DAMPING * min(alpha_dot, 0.0)
        return 0.0

    def accel(t, eta, eta_dot, phi1, v1, delta, T3):
        r = math.sqrt(max(aa_rr - two_ard * math.cos(delta), 0.0))
        alpha = eta - phi1
        tq = -torque_out(r, alpha) + T3 - visc * eta_dot + stop_torque(alpha, eta_dot - v1)
        if coulomb:
            tq -= coulomb * max(-1.0, min(1.0, eta_dot / COULOMB_VELOCITY))
        if ext_amp:
            tq += ext_amp * math.sin(ext_w * t)
        return tq / J

    cursor = _ScheduleCursor(scenario.schedule)
    cursor.advance(0.0)
    trigger = build_trigger(scenario)

    phi1 = drive(0.0)
    setpoints = _setpoints(cursor, phi1)
    r0, _ = resolve_radius(p, setpoints, scenario.stiffness_map, scenario.fit)
    phi2 = phi1 + crank_angle_for_radius(p, r0)
    v1 = v2 = 0.0
    eta = phi1 + scenario.initial_alpha
    eta_dot = 0.0
    T3 = 0.0
    phi1_prev = phi1

    rows = {name: np.empty(n_ticks, dtype=np.int64 if name == "flags" else float) for name in TRACE_COLUMNS}
    t_limit1, t_limit2 = servo1.torque_limit, servo2.torque_limit

    for i in range(n_ticks):
        t = i * dt_ctrl
        cursor.advance(t)
        phi_set = drive(t)
        setpoints = _setpoints(cursor, phi_set)
        try:
            r_set, clamped = resolve_radius(p, setpoints, scenario.stiffness_map, scenario.fit)
        except DomainError as exc:
            raise SimulationError(f"unreachable stiffness setpoint: {exc}", t) from exc
        phi1_cmd = phi_set
        phi2_cmd = phi1_cmd + crank_angle_for_radius(p, r_set)
        b_set = trigger(eta, eta_dot, t)
        T3_raw = b_set * (v1 - eta_dot)
        T3_cmd = saturate(T3_raw, damper.torque_limit)

        # record the state at the tick
        delta = min(max(phi2 - phi1, 0.0), math.pi)
        r = radius_for_crank_angle(p, delta)
        alpha = eta - phi1
        alpha_t = apply_backlash(alpha, dead)
        ax = abs(alpha_t)
        theta = math.atan2(r * math.sin(ax), l - r * math.cos(ax))
        flags = Flag.NONE
        try:
            T_1, T_2, *_ = motor_torques(p, r, alpha_t)
        except SingularityError:
            T_1 = T_2 = math.nan
            flags |= Flag.SINGULAR
        if abs(T_1) > t_limit1:
            flags |= Flag.T1_LIMIT
        if abs(T_2) > t_limit2:
            flags |= Flag.T2_LIMIT
        if abs(T3_raw) > damper.torque_limit:
            flags |= Flag.DAMPER_SATURATED
        if abs(alpha) > stop:
            flags |= Flag.END_STOP
        if clamped:
            flags |= Flag.SETPOINT_CLAMPED
        rows["t"][i] = t
        rows["phi1_cmd"][i] = phi1_cmd
        rows["phi1"][i] = phi1
        # encoder-style velocity: mean over the last control interval
        rows["phi1_dot"][i] = (phi1 - phi1_prev) / dt_ctrl if i else 0.0
        phi1_prev = phi1
        rows["phi2"][i] = phi2
        rows["delta"][i] = delta
        rows["r"][i] = r
        rows["r_set"][i] = r_set
        rows["alpha"][i] = alpha
        rows["theta"][i] = theta
        rows["eta"][i] = eta
        rows["eta_dot"][i] = eta_dot
        rows["T_O"][i] = torque_out(r, alpha)
        rows["T_1"][i] = T_1
        rows["T_2"][i] = T_2
        rows["T3_cmd"][i] = T3_cmd
        rows["T3"][i] = T3
        rows["k_e0"][i] = small_deflection_stiffness(p, r)
        rows["E_spring"][i] = 0.5 * k * theta * theta
        rows["b_set"][i] = b_set
        rows["flags"][i] = int(flags)

        if i == n_ticks - 1:
            break
        for j in range(n_sub):
            ts = t + j * dt
            phi1_new, v1 = servo_step(servo1, phi1_cmd, (phi1, v1), dt)
            phi2_new, v2 = servo_step(servo2, phi2_cmd, (phi2, v2), dt)
            # damper law runs in the drive at the physics rate; b_set is held per tick
            T3 = lag_step(saturate(b_set * (v1 - eta_dot), damper.torque_limit), T3,
                          damper.lag_time_constant, dt)
            d0 = phi2 - phi1
            dv = v2 - v1
            h2 = 0.5 * dt
            # motor angles move linearly across the step
            k1x = eta_dot
            k1v = accel(ts, eta, eta_dot, phi1, v1, d0, T3)
            k2x = eta_dot + h2 * k1v
            k2v = accel(ts + h2, eta + h2 * k1x, k2x, phi1 + h2 * v1, v1, d0 + h2 * dv, T3)
            k3x = eta_dot + h2 * k2v
            k3v = accel(ts + h2, eta + h2 * k2x, k3x, phi1 + h2 * v1, v1, d0 + h2 * dv, T3)
            k4x = eta_dot + dt * k3v
            k4v = accel(ts + dt, eta + dt * k3x, k4x, phi1_new, v1, d0 + dt * dv, T3)
            eta += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            eta_dot += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            phi1, phi2 = phi1_new, phi2_new
            if not (math.isfinite(eta) and math.isfinite(eta_dot)):
                raise SimulationError("non-finite output state", ts + dt)

    meta = {"trigger_time": trigger.fired_at, "drive_end": drive.end_time}
    return SimTrace(rows, dt_ctrl, meta)


@dataclass(frozen=True)
class StepResponseResult:
    t_90: float
    r_initial: float
    r_final: float
    overshoot: float
    t_90_radius: float = None


def _single_step(scenario):
    p = scenario.design
    radii = []
    for e in scenario.schedule:
        if e.r_set is None and e.k_e_set is None:
            continue
        sp = Setpoints(r_set=e.r_set) if e.r_set is not None else Setpoints(k_e_set=e.k_e_set)
        r, _ = resolve_radius(p, sp, scenario.stiffness_map, scenario.fit)
        radii.append((e.t, r))
    changes = [(t, r) for (t, r), (_, prev) in zip(radii[1:], radii) if r != prev]
    if len(radii) < 2 or len(changes) > 1:
        raise ConfigurationError("step response needs exactly one stiffness step in the schedule")
    if not changes:
        return radii[1][0], radii[0][1], radii[0][1]
    return changes[0][0], radii[0][1], changes[0][1]


def _crossing_time(t, y, y0, target):
    """First time ``y`` passes ``target`` moving away from ``y0``, linearly interpolated."""
    sign = 1.0 if target >= y0 else -1.0
    s = sign * (y - target)
    idx = np.nonzero(s >= 0.0)[0]
    if idx.size == 0:
        return None
    i = idx[0]
    if i == 0:
        return t[0]
    return t[i - 1] + (t[i] - t[i - 1]) * (-s[i - 1]) / (s[i] - s[i - 1])


def measure_step_response(scenario, trace=None):
    """90 % rise time of a single stiffness step.

    ``t_90`` is measured on the crank angle (the coordinate the stiffness
    servo moves at its rate limit); ``t_90_radius`` is the same threshold
    taken on the pivot radius itself.
    """
    t_step, r_initial, r_final = _single_step(scenario)
    if r_initial == r_final:
        return StepResponseResult(0.0, r_initial, r_final, 0.0, 0.0)
    if trace is None:
        trace = simulate(scenario)
    p = scenario.design
    t = trace.t
    after = t >= t_step - 1e-12
    ta = t[after] - t_step
    d0 = crank_angle_for_radius(p, r_initial)
    d1 = crank_angle_for_radius(p, r_final)
    t90 = _crossing_time(ta, trace.delta[after], d0, d0 + 0.9 * (d1 - d0))
    t90r = _crossing_time(ta, trace.r[after], r_initial, r_initial + 0.9 * (r_final - r_initial))
    if t90 is None or t90r is None:
        raise ConvergenceError("pivot radius never reached 90 % of the step")
    r_after = trace.r[after]
    if r_final > r_initial:
        excess = max(r_after.max() - r_final, 0.0)
    else:
        excess = max(r_final - r_after.min(), 0.0)
    return StepResponseResult(
        t_90=float(t90), r_initial=r_initial, r_final=r_final,
        overshoot=float(excess / abs(r_final - r_initial)), t_90_radius=float(t90r),
    )


def torque_sweep_scenario(design=None, r=0.0069, dead_zone=0.0, torque_amplitude=2.0,
                          period=4.0, cycles=1, viscous=0.05, coulomb=0.0, dt_physics=1e-4):
    """Locked-motor scenario with a slow sinusoidal external torque on the output."""
    return Scenario(
        design=design or DesignParams(),
        load_viscous_friction=viscous,
        coulomb_friction=coulomb,
        schedule=(ScheduleEntry(0.0, r_set=r, b_set=0.0),),
        backlash=dead_zone,
        ext_torque_amplitude=torque_amplitude,
        ext_torque_freq_hz=1.0 / period,
        duration=cycles * period,
        dt_physics=dt_physics,
    )
