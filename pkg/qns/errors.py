from typing import Optional


class QnsError(Exception):
    """ Base class of every error raised by qns-lab. """


class InvalidArgument(QnsError, ValueError):
    pass


class GridError(InvalidArgument):
    pass


class FormulationError(InvalidArgument):
    pass


class ConfigError(QnsError):
    pass


class AdmissibilityError(QnsError):
    def __init__(self, inequality: str, detail: str = ""):
        self.inequality = inequality
        message = f"Parameter constraint violated: {inequality}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class VacuumError(QnsError):
    def __init__(self, count: int, rho_min: float, where: str = "density"):
        self.count = count
        self.rho_min = rho_min
        super().__init__(f"Nonpositive {where} at {count} node(s), min value {rho_min!r}")


class PositivityFailure(QnsError):
    def __init__(self, time: float, count: int, rho_min: float, floor: Optional[float] = None):
        self.time = time
        self.count = count
        self.rho_min = rho_min
        self.floor = floor
        super().__init__(
            f"Density dropped to {rho_min!r} at t={time!r} on {count} node(s) (floor {floor!r})"
        )


class StepUnderflow(QnsError):
    def __init__(self, time: float, dt: float, dt_min: float):
        self.time = time
        self.dt = dt
        self.dt_min = dt_min
        super().__init__(f"Time step {dt!r} fell below dt_min={dt_min!r} at t={time!r}")
