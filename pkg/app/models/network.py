"""
Power network case model: buses, branches, generators and their costs.

A NetworkCase is immutable once built. Its admittance matrix is derived
from the branch list when the case is constructed, so every holder of a
case can share it read-only (including worker processes).
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

INF = math.inf


class BusType(str, Enum):
    SLACK = "slack"
    PV = "pv"
    PQ = "pq"


@dataclass(frozen=True)
class BusRecord:
    id: int
    bus_type: BusType
    p_load: float = 0.0      # MW
    q_load: float = 0.0      # MVAr
    v_min: float = 0.9       # p.u.
    v_max: float = 1.1       # p.u.
    base_kv: float = 0.0
    gs: float = 0.0          # MW at 1 p.u.
    bs: float = 0.0          # MVAr at 1 p.u.
    v_set: float = 1.0


@dataclass(frozen=True)
class BranchRecord:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    s_max: float = INF       # MVA, inf = unenforced
    p_max: float = INF       # MW
    dv_max: float = INF      # p.u.
    tap: float = 1.0
    in_service: bool = True


@dataclass(frozen=True)
class GenCost:
    a: float = 0.0   # $/h
    b: float = 0.0   # $/MWh
    c: float = 0.0   # $/MW^2h

    def evaluate(self, p_mw: float) -> float:
        return self.a + self.b * p_mw + self.c * p_mw * p_mw


@dataclass(frozen=True)
class GenRecord:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost: GenCost = field(default_factory=GenCost)
    v_set: float = 1.0
    p_set: float = 0.0
    in_service: bool = True


@dataclass(frozen=True)
class Finding:
    entity: str
    message: str

    def __str__(self):
        return f"{self.entity}: {self.message}"


@dataclass
class ValidationReport:
    findings: List[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, entity: str, message: str):
        self.findings.append(Finding(entity, message))

    def messages(self) -> List[str]:
        return [str(f) for f in self.findings]


@dataclass(frozen=True, eq=False)
class NetworkCase:
    base_mva: float
    buses: Tuple[BusRecord, ...]
    branches: Tuple[BranchRecord, ...]
    gens: Tuple[GenRecord, ...]
    admittance: Optional[sparse.csr_matrix] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "gens", tuple(self.gens))
        index = {}
        for i, bus in enumerate(self.buses):
            index.setdefault(bus.id, i)
        object.__setattr__(self, "_bus_index", index)
        if self.admittance is None and all(bus_id in index for br in self.branches
                                           for bus_id in (br.from_bus, br.to_bus)):
            from app.services.admittance import build_admittance
            object.__setattr__(self, "admittance", build_admittance(self))

    def __eq__(self, other):
        if not isinstance(other, NetworkCase):
            return NotImplemented
        return (self.base_mva == other.base_mva and self.buses == other.buses
                and self.branches == other.branches and self.gens == other.gens)

    __hash__ = None

    # ------------------------------------------------------
    # Lookups
    # ------------------------------------------------------

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def bus_index(self) -> Dict[int, int]:
        return self._bus_index

    def bus_position(self, bus_id: int) -> int:
        return self._bus_index[bus_id]

    @property
    def bus_ids(self) -> List[int]:
        return [b.id for b in self.buses]

    @property
    def slack_position(self) -> int:
        for i, bus in enumerate(self.buses):
            if bus.bus_type == BusType.SLACK:
                return i
        raise ValueError("case has no slack bus")

    def active_branches(self) -> List[int]:
        return [i for i, br in enumerate(self.branches) if br.in_service]

    def active_gens(self) -> List[int]:
        return [k for k, g in enumerate(self.gens) if g.in_service]

    def load_vectors(self) -> Tuple[np.ndarray, np.ndarray]:
        """Base-case loads (MW, MVAr) in bus order."""
        p = np.array([b.p_load for b in self.buses], dtype=float)
        q = np.array([b.q_load for b in self.buses], dtype=float)
        return p, q
