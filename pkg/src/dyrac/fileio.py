"""Scenario text files and CSV tables.

A scenario file is UTF-8 text with ``[section]`` headers and ``key = value``
lines; ``#`` starts a comment. The ``[schedule]`` section instead holds one
entry per line, written as space-separated ``name=value`` fields, e.g.
``t=0.0 r_mm=19.1 b=0.01``. Lengths are given in millimeters (``_mm`` keys)
and converted to meters.
"""
import csv
import math
from importlib import resources
from pathlib import Path

from .actuation import DamperModel, ServoModel
from .controller import FitCoefficients, StiffnessMap, TriggerKind
from .errors import ConfigurationError, DomainError, ScenarioParseError
from .geometry import DesignParams
from .simulator import TRACE_COLUMNS, Drive, Scenario, ScheduleEntry, SimTrace, TriggerSpec

SECTIONS = ("design", "load", "motors", "drive", "schedule", "trigger", "sim")

# key -> (parser, target field, scale)
_KEYS = {
    "design": {
        "r_d_mm": ("float", "r_D", 1e-3),
        "a_mm": ("float", "a", 1e-3),
        "l_mm": ("float", "l", 1e-3),
        "k_spring": ("float", "k", 1.0),
    },
    "load": {
        "inertia": ("float", "load_inertia", 1.0),
        "viscous": ("float", "load_viscous_friction", 1.0),
        "coulomb": ("float", "coulomb_friction", 1.0),
        "backlash_rad": ("float", "backlash", 1.0),
        "end_stop_deg": ("float", "end_stop", math.pi / 180.0),
        "ext_torque_amp": ("float", "ext_torque_amplitude", 1.0),
        "ext_torque_freq_hz": ("float", "ext_torque_freq_hz", 1.0),
    },
    "motors": {
        "pos_vel_limit": ("float", "servo1.velocity_limit", 1.0),
        "pos_torque_limit": ("float", "servo1.torque_limit", 1.0),
        "stiff_vel_limit": ("float", "servo2.velocity_limit", 1.0),
        "stiff_torque_limit": ("float", "servo2.torque_limit", 1.0),
        "bandwidth_hz": ("float", "bandwidth", 1.0),
        "damper_torque_limit": ("float", "damper.torque_limit", 1.0),
        "damper_lag_ms": ("float", "damper.lag_time_constant", 1e-3),
    },
    "drive": {
        "waveform": ("str", "kind", None),
        "amplitude_rad": ("float", "amplitude", 1.0),
        "freq_hz": ("float", "freq_hz", 1.0),
        "cycles": ("float", "cycles", 1.0),
        "points": ("points", "points", None),
    },
    "trigger": {
        "rule": ("str", "kind", None),
        "b_low": ("float", "b_low", 1.0),
        "b_high": ("float", "b_high", 1.0),
    },
    "sim": {
        "dt": ("float", "dt_physics", 1.0),
        "control_dt": ("float", "dt_control", 1.0),
        "duration": ("float", "duration", 1.0),
        "initial_alpha": ("float", "initial_alpha", 1.0),
        "stiffness_map": ("str", "stiffness_map", None),
        "fit_p": ("float", "fit.p", 1.0),
        "fit_q": ("float", "fit.q", 1.0),
    },
}

_SCHEDULE_FIELDS = {"t": ("t", 1.0), "r_mm": ("r_set", 1e-3), "k_e": ("k_e_set", 1.0), "b": ("b_set", 1.0)}

REQUIRED = (("sim", "duration"),)

# range checks reported against the offending key
_POSITIVE = {("load", "inertia"), ("load", "end_stop_deg"), ("sim", "dt"), ("sim", "control_dt"),
             ("sim", "duration")}
_NON_NEGATIVE = {("load", "viscous"), ("load", "coulomb"), ("load", "backlash_rad"),
                 ("trigger", "b_low"), ("trigger", "b_high")}


def _number(text, line, section, key):
    try:
        value = float(text)
    except ValueError:
        raise ScenarioParseError(f"expected a number, got {text!r}", line, section, key) from None
    if not math.isfinite(value):
        raise ScenarioParseError(f"value {text!r} is not finite", line, section, key)
    return value


def _points(text, line, section, key):
    pts = []
    for item in text.replace(",", " ").split():
        if ":" not in item:
            raise ScenarioParseError(f"point {item!r} is not of the form t:angle", line, section, key)
        t, y = item.split(":", 1)
        pts.append((_number(t, line, section, key), _number(y, line, section, key)))
    if not pts:
        raise ScenarioParseError("no points given", line, section, key)
    return tuple(pts)


def parse_scenario(text):
    """Parse scenario file text into a :class:`Scenario`."""
    values = {s: {} for s in SECTIONS}
    where = {}
    schedule = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioParseError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ScenarioParseError(f"unknown section [{section}]", lineno)
            continue
        if section is None:
            raise ScenarioParseError("content before the first section header", lineno)
        if section == "schedule":
            entry = {}
            for field in line.split():
                if "=" not in field:
                    raise ScenarioParseError(f"schedule field {field!r} is not name=value", lineno, section)
                name, value = (s.strip() for s in field.split("=", 1))
                if name not in _SCHEDULE_FIELDS:
                    raise ScenarioParseError("unknown schedule field", lineno, section, name)
                if name in entry:
                    raise ScenarioParseError("field given twice", lineno, section, name)
                target, scale = _SCHEDULE_FIELDS[name]
                entry[target] = _number(value, lineno, section, name) * scale
            if "t" not in entry:
                raise ScenarioParseError("schedule entry without t=", lineno, section, "t")
            try:
                schedule.append((lineno, ScheduleEntry(**entry)))
            except ConfigurationError as exc:
                raise ScenarioParseError(str(exc), lineno, section) from None
            continue
        if "=" not in line:
            raise ScenarioParseError(f"expected key = value, got {line!r}", lineno, section)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        key_info = _KEYS[section].get(key)
        if key_info is None:
            raise ScenarioParseError("unknown key", lineno, section, key)
        if key in values[section]:
            raise ScenarioParseError("key given twice", lineno, section, key)
        kind, _, scale = key_info
        if kind == "float":
            parsed = _number(value, lineno, section, key) * scale
            if (section, key) in _POSITIVE and not parsed > 0:
                raise ScenarioParseError("must be positive", lineno, section, key)
            if (section, key) in _NON_NEGATIVE and parsed < 0:
                raise ScenarioParseError("must be non-negative", lineno, section, key)
        elif kind == "points":
            parsed = _points(value, lineno, section, key)
        else:
            parsed = value.lower()
        values[section][key] = parsed
        where[(section, key)] = lineno

    for section, key in REQUIRED:
        if key not in values[section]:
            raise ScenarioParseError("required key missing", None, section, key)
    if not schedule:
        raise ScenarioParseError("at least one schedule entry is required", None, "schedule")
    return _build(values, where, schedule)


def _fields(values, section):
    out = {}
    for key, value in values[section].items():
        out[_KEYS[section][key][1]] = value
    return out


def _build(values, where, schedule):
    def fail(exc, section, key=None):
        line = where.get((section, key)) if key else None
        raise ScenarioParseError(str(exc), line, section, key) from None

    try:
        design = DesignParams(**_fields(values, "design"))
    except DomainError as exc:
        fail(exc, "design")

    motors = _fields(values, "motors")
    bandwidth = motors.pop("bandwidth", None)
    servos = {}
    for name in ("servo1", "servo2"):
        kw = {f.split(".")[1]: v for f, v in motors.items() if f.startswith(name + ".")}
        if bandwidth is not None:
            kw["tracking_bandwidth"] = bandwidth
        try:
            servos[name] = ServoModel(**kw)
        except DomainError as exc:
            fail(exc, "motors")
    try:
        damper = DamperModel(**{f.split(".")[1]: v for f, v in motors.items() if f.startswith("damper.")})
    except DomainError as exc:
        fail(exc, "motors")

    drive_kw = _fields(values, "drive")
    if drive_kw.get("kind", "none") == "sine":
        for key in ("amplitude_rad", "freq_hz"):
            if key not in values["drive"]:
                raise ScenarioParseError("required for a sine drive", None, "drive", key)
    try:
        drive = Drive(**drive_kw)
    except ConfigurationError as exc:
        fail(exc, "drive", "waveform")

    trig = _fields(values, "trigger")
    try:
        kind = TriggerKind(trig.get("kind", "time_schedule"))
    except ValueError:
        fail(ConfigurationError(f"unknown trigger rule {trig['kind']!r}"), "trigger", "rule")
    trigger = TriggerSpec(kind=kind, b_low=trig.get("b_low"), b_high=trig.get("b_high", 0.0))

    sim = _fields(values, "sim")
    fit_kw = {f.split(".")[1]: sim.pop(f) for f in list(sim) if f.startswith("fit.")}
    if "stiffness_map" in sim:
        try:
            sim["stiffness_map"] = StiffnessMap(sim["stiffness_map"])
        except ValueError:
            fail(ConfigurationError(f"unknown stiffness map {sim['stiffness_map']!r}"), "sim", "stiffness_map")
    try:
        fit = FitCoefficients(**fit_kw)
    except DomainError as exc:
        fail(exc, "sim")

    entries = [e for _, e in schedule]
    for (lineno, e), (_, prev) in zip(schedule[1:], schedule):
        if e.t <= prev.t:
            raise ScenarioParseError("schedule times must be strictly increasing", lineno, "schedule", "t")
    first_line, first = schedule[0]
    if first.r_set is None and first.k_e_set is None:
        raise ScenarioParseError("the first schedule entry must set r_mm or k_e", first_line, "schedule")
    for lineno, e in schedule:
        if e.r_set is not None and not design.r_min <= e.r_set <= design.r_max:
            raise ScenarioParseError(
                f"r_mm outside the reachable band [{design.r_min * 1e3:g}, {design.r_max * 1e3:g}] mm",
                lineno, "schedule", "r_mm",
            )
    try:
        return Scenario(
            design=design, servo1=servos["servo1"], servo2=servos["servo2"], damper=damper,
            drive=drive, schedule=tuple(entries), trigger=trigger, fit=fit,
            **_fields(values, "load"), **sim,
        )
    except (ConfigurationError, DomainError) as exc:
        # remaining checks relate the time steps to each other
        raise ScenarioParseError(str(exc), None, "sim") from None


def bundled_scenarios():
    root = resources.files("dyrac") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def resolve_scenario_path(name):
    """Filesystem path, or a bundled scenario name (an ``examples/`` prefix is accepted)."""
    path = Path(name)
    if path.exists():
        return path
    stem = path.name[:-4] if path.name.endswith(".scn") else path.name
    candidate = resources.files("dyrac") / "scenarios" / f"{stem}.scn"
    if candidate.is_file():
        return candidate
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name!r}")


def load_scenario(name):
    path = resolve_scenario_path(name)
    return parse_scenario(path.read_text(encoding="utf-8"))


CSV_COLUMNS = tuple({"r": "r_m", "r_set": "r_set_m"}.get(c, c) for c in TRACE_COLUMNS)


def _fmt(value):
    return format(value, ".17g")


def write_table(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def read_table(path):
    """Header and float rows of a CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError("empty CSV file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"line {lineno}: non-numeric field") from None
    return header, rows


def write_trace(path, trace):
    cols = [trace[c] for c in TRACE_COLUMNS]
    rows = []
    for i in range(len(trace)):
        row = [_fmt(float(col[i])) for col in cols[:-1]]
        row.append(str(int(cols[-1][i])))
        rows.append(row)
    write_table(path, CSV_COLUMNS, rows)


def read_trace(path):
    header, rows = read_table(path)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError("unexpected trace CSV header")
    data = {name: [row[i] for row in rows] for i, name in enumerate(TRACE_COLUMNS)}
    t = data["t"]
    dt = t[1] - t[0] if len(t) > 1 else 0.0
    return SimTrace(data, dt)
