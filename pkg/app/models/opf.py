"""Inputs and results of the deterministic flow / OPF solvers."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

import numpy as np

from app.errors import DataError


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


class FlowStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class Injections:
    """Realised loads and wind injections for one sample (MW / MVAr by bus id).

    Loads not listed keep the case's base value. Wind is applied as negative
    load on its host bus.
    """
    wind_p: Dict[int, float] = field(default_factory=dict)
    wind_q: Dict[int, float] = field(default_factory=dict)
    load_p: Dict[int, float] = field(default_factory=dict)
    load_q: Dict[int, float] = field(default_factory=dict)
    fixed_cost: float = 0.0                        # sum of wind-farm d_j, $/h
    wind_p_min: Dict[int, float] = field(default_factory=dict)
    wind_p_max: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for bus, p in self.wind_p.items():
            lo = self.wind_p_min.get(bus, -np.inf)
            hi = self.wind_p_max.get(bus, np.inf)
            if not lo - 1e-9 <= p <= hi + 1e-9:
                raise DataError(f"wind injection {p} MW on bus {bus} outside [{lo}, {hi}]")
        for bus in self.wind_q:
            if bus not in self.wind_p:
                raise DataError(f"reactive wind injection on bus {bus} without active injection")

    def check_buses(self, case):
        known = case.bus_index
        for name in ("wind_p", "wind_q", "load_p", "load_q"):
            for bus in getattr(self, name):
                if bus not in known:
                    raise DataError(f"{name} refers to unknown bus {bus}")

    def net_load(self, case):
        """Per-bus (P, Q) demand in MW/MVAr after subtracting wind."""
        p, q = case.load_vectors()
        for bus, value in self.load_p.items():
            p[case.bus_position(bus)] = value
        for bus, value in self.load_q.items():
            q[case.bus_position(bus)] = value
        for bus, value in self.wind_p.items():
            p[case.bus_position(bus)] -= value
        for bus, value in self.wind_q.items():
            q[case.bus_position(bus)] -= value
        return p, q


@dataclass
class FlowSolution:
    v: np.ndarray            # p.u. per bus
    theta: np.ndarray        # rad per bus
    p_inj: np.ndarray        # MW net injection per bus
    q_inj: np.ndarray        # MVAr
    iterations: int
    max_mismatch: float      # p.u.
    status: FlowStatus


@dataclass
class BranchFlows:
    p_from: np.ndarray   # MW
    q_from: np.ndarray   # MVAr
    p_to: np.ndarray
    q_to: np.ndarray
    s_from: np.ndarray   # MVA
    s_to: np.ndarray
    dv: np.ndarray       # p.u., V_from - V_to

    @property
    def p_cd(self) -> np.ndarray:
        return self.p_from

    @property
    def s_cd(self) -> np.ndarray:
        return self.s_from


@dataclass
class KktResiduals:
    feasibility: float = np.inf
    stationarity: float = np.inf
    complementarity: float = np.inf


@dataclass
class OpfSolution:
    cost: float
    v: np.ndarray
    theta: np.ndarray
    p_gen: np.ndarray        # MW, one entry per case generator (0 when out of service)
    q_gen: np.ndarray
    branch_p: np.ndarray     # MW from-end
    branch_s: np.ndarray     # MVA from-end
    status: SolveStatus
    iterations: int = 0
    kkt: KktResiduals = field(default_factory=KktResiduals)
    solver: str = "ac"
    message: Optional[str] = None

    @property
    def optimal(self) -> bool:
        return self.status == SolveStatus.OPTIMAL


@dataclass(frozen=True)
class GenSetpoints:
    """Per-generator active power (MW) and voltage magnitude (p.u.) set-points."""
    p: np.ndarray
    v: np.ndarray

    @classmethod
    def from_case(cls, case):
        return cls(p=np.array([g.p_set for g in case.gens], dtype=float),
                   v=np.array([g.v_set for g in case.gens], dtype=float))
