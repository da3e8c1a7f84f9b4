"""Simulation and analysis toolkit for a sliding-pivot variable impedance actuator."""
from .geometry import (
    DesignParams, MechanismConfiguration, configuration, crank_angle_for_radius,
    radius_for_crank_angle, spring_deflection, spring_lever, triangle_angles,
)
from .statics import (
    CurveKind, CurveSpec, StaticsResult, effective_stiffness_secant, generate_curve,
    motor_torques, output_torque, small_deflection_stiffness, spring_torque, statics,
    stored_energy,
)
from .simulator import Drive, Scenario, ScheduleEntry, SimTrace, TriggerSpec, simulate

__version__ = "0.1.0"
