# app/models/wind_farm.py
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from app.errors import DataError


class RampShape(str, Enum):
    CUBIC = "cubic"
    LINEAR = "linear"


@dataclass(frozen=True)
class TurbineModel:
    v_in: float = 2.0       # m/s
    v_r: float = 12.0       # m/s
    v_out: float = 18.0     # m/s
    p_rated: float = 5.0    # MW
    ramp: RampShape = RampShape.CUBIC

    def __post_init__(self):
        object.__setattr__(self, "ramp", RampShape(self.ramp))
        if not 0 < self.v_in < self.v_r < self.v_out:
            raise DataError(f"turbine speeds must satisfy 0 < v_in < v_r < v_out, "
                            f"got ({self.v_in}, {self.v_r}, {self.v_out})")
        if self.p_rated <= 0:
            raise DataError(f"turbine rated power must be positive, got {self.p_rated}")


@dataclass(frozen=True)
class WindFarm:
    bus: int
    speed_min: float                 # m/s, normalisation bounds recorded at fit time
    speed_max: float
    turbine: TurbineModel = field(default_factory=TurbineModel)
    n_turbines: int = 8
    power_factor: float = 0.95
    name: str = ""
    maintenance_cost: float = 0.0    # $/h
    p_min: Optional[float] = None    # MW, default 0
    p_max: Optional[float] = None    # MW, default n_turbines * p_rated

    def __post_init__(self):
        if self.n_turbines < 1:
            raise DataError(f"farm {self.label}: n_turbines must be at least 1")
        if not 0 < self.power_factor <= 1:
            raise DataError(f"farm {self.label}: power factor must be in (0, 1], got {self.power_factor}")
        if not self.speed_min < self.speed_max:
            raise DataError(f"farm {self.label}: speed_min must be below speed_max")
        if self.p_lower > self.p_upper:
            raise DataError(f"farm {self.label}: p_min exceeds p_max")

    @property
    def label(self) -> str:
        return self.name or f"bus {self.bus}"

    @property
    def rated_output(self) -> float:
        return self.n_turbines * self.turbine.p_rated

    @property
    def p_lower(self) -> float:
        return 0.0 if self.p_min is None else self.p_min

    @property
    def p_upper(self) -> float:
        return self.rated_output if self.p_max is None else self.p_max
