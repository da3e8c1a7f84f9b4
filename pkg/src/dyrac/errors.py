"""Exception hierarchy shared by all dyrac modules."""


class DyracError(Exception):
    pass


class DomainError(DyracError, ValueError):
    """An argument lies outside the range where the model is defined."""


class GeometryError(DyracError):
    """The mechanism cannot be assembled for the requested pose."""


class SingularityError(GeometryError):
    """A static torque expression has a vanishing denominator."""


class UseLimitError(DyracError, ValueError):
    pass


class ConfigurationError(DyracError, ValueError):
    pass


class SimulationError(DyracError):
    def __init__(self, message, time):
        super().__init__(f"{message} (t = {time:.6f} s)")
        self.time = time


class ConvergenceError(DyracError):
    pass


class FitError(DyracError):
    pass


class DataError(DyracError, ValueError):
    pass


class OptimizationError(DyracError):
    pass


class ScenarioParseError(DyracError):
    def __init__(self, message, line=None, section=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if section is not None:
            where.append(f"section [{section}]")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.section = section
        self.key = key
