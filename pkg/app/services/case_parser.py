"""
Network case reader/writer.

Two input formats are accepted and told apart by the first meaningful
character: canonical JSON (starts with '{') or the matrix literals of a
MATPOWER-style .m case (baseMVA, bus, branch, gen, gencost). Nothing in a
.m file is evaluated; only the numeric literals are read.
"""
import json
import logging
import math
import re
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

from app.errors import CaseParseError, CaseValidationError
from app.models.network import (
    INF, BranchRecord, BusRecord, BusType, GenCost, GenRecord, NetworkCase, ValidationReport,
)

logger = logging.getLogger(__name__)

CASE_SCHEMA_VERSION = 1

_MATPOWER_BUS_TYPES = {1: BusType.PQ, 2: BusType.PV, 3: BusType.SLACK}
_KNOWN_MATRICES = ("bus", "branch", "gen", "gencost")
_ASSIGN = re.compile(r"^mpc\.(\w+)\s*=\s*(.*)$")


# ----------------------------------------------------------
# Entry point
# ----------------------------------------------------------

def parse_case(text: str) -> NetworkCase:
    """Parse a case body and return a validated NetworkCase."""
    if not isinstance(text, str):
        raise CaseParseError("case text must be a string")
    stripped = _strip_comments_prefix(text)
    if stripped.startswith("{"):
        case = _parse_json(text)
    else:
        case = _parse_matpower(text)

    report = validate_case(case)
    if not report.ok:
        raise CaseValidationError("; ".join(report.messages()))
    logger.debug("parsed case: %d buses, %d branches, %d gens",
                 case.n_bus, len(case.branches), len(case.gens))
    return case


def _strip_comments_prefix(text: str) -> str:
    for line in text.splitlines():
        content = line.split("%", 1)[0].strip()
        if content:
            return content
    return ""


# ----------------------------------------------------------
# MATPOWER matrix literals
# ----------------------------------------------------------

def _parse_matpower(text: str) -> NetworkCase:
    base_mva: Optional[float] = None
    matrices: Dict[str, List[Tuple[int, List[float]]]] = {}
    current: Optional[str] = None
    skipping_cell = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue

        if skipping_cell:
            if "}" in line:
                skipping_cell = False
            continue

        if current is not None:
            body, closed = _split_matrix_end(line)
            _collect_rows(matrices[current], body, lineno, current)
            if closed:
                current = None
            continue

        if line.startswith("function") or line in ("end", "return"):
            continue

        m = _ASSIGN.match(line)
        if not m:
            raise CaseParseError(f"unexpected statement '{line[:40]}'", lineno)
        name, value = m.group(1), m.group(2).strip()

        if value.startswith("["):
            rows: List[Tuple[int, List[float]]] = []
            matrices[name] = rows
            body, closed = _split_matrix_end(value[1:])
            _collect_rows(rows, body, lineno, name)
            if not closed:
                current = name
        elif value.startswith("{"):
            skipping_cell = "}" not in value
        elif name == "baseMVA":
            base_mva = _to_float(value.rstrip(";").strip(), lineno, "baseMVA")
        elif name == "version" or value.startswith("'"):
            continue
        else:
            raise CaseParseError(f"unsupported field mpc.{name}", lineno)

    if current is not None or skipping_cell:
        raise CaseParseError("unterminated matrix literal", len(text.splitlines()))
    if base_mva is None:
        raise CaseParseError("missing baseMVA")
    for name in ("bus", "branch"):
        if name not in matrices:
            raise CaseParseError(f"missing mpc.{name} matrix")
    for name in matrices:
        if name not in _KNOWN_MATRICES:
            logger.debug("ignoring matrix mpc.%s", name)

    buses = _read_buses(matrices["bus"])
    branches = _read_branches(matrices["branch"], {b.id for b in buses})
    gen_rows = matrices.get("gen", [])
    costs = _read_gencost(matrices.get("gencost", []), len(gen_rows))
    gens = _read_gens(gen_rows, costs)

    if not any(b.bus_type == BusType.SLACK for b in buses):
        raise CaseParseError("missing slack bus")
    return NetworkCase(base_mva=base_mva, buses=buses, branches=branches, gens=gens)


def _split_matrix_end(text: str) -> Tuple[str, bool]:
    if "]" in text:
        body, rest = text.split("]", 1)
        return body, True
    return text, False


def _collect_rows(rows, body: str, lineno: int, name: str):
    for chunk in body.split(";"):
        tokens = [t for t in re.split(r"[\s,]+", chunk.strip()) if t]
        if not tokens:
            continue
        rows.append((lineno, [_to_float(t, lineno, name) for t in tokens]))


def _to_float(token: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise CaseParseError(f"bad number '{token}' in {what}", lineno) from None
    if not math.isfinite(value):
        raise CaseParseError(f"non-finite number in {what}", lineno)
    return value


def _require_columns(row: List[float], n: int, lineno: int, what: str):
    if len(row) < n:
        raise CaseParseError(f"{what} row has {len(row)} columns, expected at least {n}", lineno)


def _read_buses(rows) -> List[BusRecord]:
    buses, seen = [], set()
    for lineno, row in rows:
        _require_columns(row, 13, lineno, "bus")
        bus_id = int(row[0])
        if bus_id in seen:
            raise CaseParseError(f"duplicate bus id {bus_id}", lineno)
        seen.add(bus_id)
        code = int(row[1])
        if code not in _MATPOWER_BUS_TYPES:
            raise CaseParseError(f"unsupported bus type {code} on bus {bus_id}", lineno)
        buses.append(BusRecord(
            id=bus_id, bus_type=_MATPOWER_BUS_TYPES[code],
            p_load=row[2], q_load=row[3], gs=row[4], bs=row[5],
            v_set=row[7] if row[7] > 0 else 1.0, base_kv=row[9],
            v_max=row[11], v_min=row[12],
        ))
    return buses


def _read_branches(rows, bus_ids) -> List[BranchRecord]:
    branches = []
    for lineno, row in rows:
        _require_columns(row, 11, lineno, "branch")
        f, t = int(row[0]), int(row[1])
        for end in (f, t):
            if end not in bus_ids:
                raise CaseParseError(f"dangling branch endpoint {end}", lineno)
        if row[9] != 0:
            raise CaseParseError("phase-shifting transformers are not supported", lineno)
        branches.append(BranchRecord(
            from_bus=f, to_bus=t, r=row[2], x=row[3], b_charging=row[4],
            s_max=row[5] if row[5] > 0 else INF,
            tap=row[8] if row[8] != 0 else 1.0,
            in_service=row[10] > 0,
        ))
    return branches


def _read_gencost(rows, n_gen: int) -> List[GenCost]:
    if not rows:
        return [GenCost() for _ in range(n_gen)]
    if len(rows) != n_gen:
        raise CaseParseError(f"gencost has {len(rows)} rows for {n_gen} generators", rows[0][0])
    costs = []
    for lineno, row in rows:
        _require_columns(row, 4, lineno, "gencost")
        if int(row[0]) != 2:
            raise CaseParseError("only polynomial gencost (model 2) is supported", lineno)
        n = int(row[3])
        if n < 1 or n > 3:
            raise CaseParseError(f"polynomial cost of degree {n - 1} is not supported (max 2)", lineno)
        _require_columns(row, 4 + n, lineno, "gencost")
        coeffs = list(reversed(row[4:4 + n])) + [0.0] * (3 - n)   # c0, c1, c2
        costs.append(GenCost(a=coeffs[0], b=coeffs[1], c=coeffs[2]))
    return costs


def _read_gens(rows, costs) -> List[GenRecord]:
    gens = []
    for (lineno, row), cost in zip(rows, costs):
        _require_columns(row, 10, lineno, "gen")
        gens.append(GenRecord(
            bus=int(row[0]), p_set=row[1], q_max=row[3], q_min=row[4],
            v_set=row[5] if row[5] > 0 else 1.0, in_service=row[7] > 0,
            p_max=row[8], p_min=row[9], cost=cost,
        ))
    return gens


# ----------------------------------------------------------
# Canonical JSON
# ----------------------------------------------------------

def _num(value):
    return None if value is None or math.isinf(value) else value


def _unnum(value, default=INF):
    return default if value is None else float(value)


def case_to_json(case: NetworkCase) -> str:
    doc = {
        "schema_version": CASE_SCHEMA_VERSION,
        "base_mva": case.base_mva,
        "buses": [
            {"id": b.id, "bus_type": b.bus_type.value, "p_load": b.p_load, "q_load": b.q_load,
             "v_min": b.v_min, "v_max": b.v_max, "base_kv": b.base_kv,
             "gs": b.gs, "bs": b.bs, "v_set": b.v_set}
            for b in case.buses
        ],
        "branches": [
            {"from_bus": br.from_bus, "to_bus": br.to_bus, "r": br.r, "x": br.x,
             "b_charging": br.b_charging, "s_max": _num(br.s_max), "p_max": _num(br.p_max),
             "dv_max": _num(br.dv_max), "tap": br.tap, "in_service": br.in_service}
            for br in case.branches
        ],
        "gens": [
            {"bus": g.bus, "p_min": g.p_min, "p_max": g.p_max, "q_min": g.q_min, "q_max": g.q_max,
             "cost": {"a": g.cost.a, "b": g.cost.b, "c": g.cost.c},
             "v_set": g.v_set, "p_set": g.p_set, "in_service": g.in_service}
            for g in case.gens
        ],
    }
    return json.dumps(doc, indent=2)


def _parse_json(text: str) -> NetworkCase:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CaseParseError(e.msg, e.lineno) from None
    if not isinstance(doc, dict):
        raise CaseParseError("case JSON must be an object")
    try:
        buses = [
            BusRecord(id=int(b["id"]), bus_type=BusType(b["bus_type"]),
                      p_load=float(b.get("p_load", 0.0)), q_load=float(b.get("q_load", 0.0)),
                      v_min=float(b.get("v_min", 0.9)), v_max=float(b.get("v_max", 1.1)),
                      base_kv=float(b.get("base_kv", 0.0)), gs=float(b.get("gs", 0.0)),
                      bs=float(b.get("bs", 0.0)), v_set=float(b.get("v_set", 1.0)))
            for b in doc["buses"]
        ]
        branches = [
            BranchRecord(from_bus=int(br["from_bus"]), to_bus=int(br["to_bus"]),
                         r=float(br["r"]), x=float(br["x"]),
                         b_charging=float(br.get("b_charging", 0.0)),
                         s_max=_unnum(br.get("s_max")), p_max=_unnum(br.get("p_max")),
                         dv_max=_unnum(br.get("dv_max")), tap=float(br.get("tap", 1.0)),
                         in_service=bool(br.get("in_service", True)))
            for br in doc.get("branches", [])
        ]
        gens = [
            GenRecord(bus=int(g["bus"]), p_min=float(g["p_min"]), p_max=float(g["p_max"]),
                      q_min=float(g["q_min"]), q_max=float(g["q_max"]),
                      cost=GenCost(**{k: float(v) for k, v in g.get("cost", {}).items()}),
                      v_set=float(g.get("v_set", 1.0)), p_set=float(g.get("p_set", 0.0)),
                      in_service=bool(g.get("in_service", True)))
            for g in doc.get("gens", [])
        ]
        base_mva = float(doc["base_mva"])
    except KeyError as e:
        raise CaseParseError(f"missing field {e.args[0]}") from None
    except (TypeError, ValueError, OverflowError, AttributeError) as e:
        raise CaseParseError(f"bad field value: {e}") from None

    seen = set()
    for b in buses:
        if b.id in seen:
            raise CaseParseError(f"duplicate bus id {b.id}")
        seen.add(b.id)
    for br in branches:
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                raise CaseParseError(f"dangling branch endpoint {end}")
    if not any(b.bus_type == BusType.SLACK for b in buses):
        raise CaseParseError("missing slack bus")
    return NetworkCase(base_mva=base_mva, buses=buses, branches=branches, gens=gens)


# ----------------------------------------------------------
# Validation
# ----------------------------------------------------------

def validate_case(case: NetworkCase) -> ValidationReport:
    """List every violated invariant; findings are data, never raised."""
    report = ValidationReport()
    if not case.base_mva > 0:
        report.add("case", f"base_mva must be positive, got {case.base_mva}")

    ids = [b.id for b in case.buses]
    seen = set()
    for bus_id in ids:
        if bus_id in seen:
            report.add(f"bus {bus_id}", f"duplicate bus id {bus_id}")
        seen.add(bus_id)

    slacks = [b.id for b in case.buses if b.bus_type == BusType.SLACK]
    if not slacks:
        report.add("case", "missing slack bus")
    elif len(slacks) > 1:
        report.add("case", f"multiple slack buses {slacks}")

    for b in case.buses:
        if not b.v_min <= b.v_max:
            report.add(f"bus {b.id}", f"v_min {b.v_min} exceeds v_max {b.v_max}")
        if not b.v_min > 0:
            report.add(f"bus {b.id}", f"v_min must be positive, got {b.v_min}")

    for i, br in enumerate(case.branches, start=1):
        name = f"branch {i} ({br.from_bus}-{br.to_bus})"
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                report.add(name, f"dangling branch endpoint {end}")
        if br.from_bus == br.to_bus:
            report.add(name, "from_bus equals to_bus")
        if br.x == 0:
            report.add(name, "zero reactance")
        if not br.s_max > 0:
            report.add(name, f"s_max must be positive, got {br.s_max}")
        if not br.p_max > 0:
            report.add(name, f"p_max must be positive, got {br.p_max}")
        if not br.dv_max > 0:
            report.add(name, f"dv_max must be positive, got {br.dv_max}")

    for k, g in enumerate(case.gens, start=1):
        name = f"gen {k}"
        if g.bus not in seen:
            report.add(name, f"dangling generator bus {g.bus}")
        if not g.p_min <= g.p_max:
            report.add(name, f"p_min {g.p_min} exceeds p_max {g.p_max}")
        if not g.q_min <= g.q_max:
            report.add(name, f"q_min {g.q_min} exceeds q_max {g.q_max}")
        if g.cost.c < 0:
            report.add(name, f"quadratic cost coefficient {g.cost.c} is negative")

    return report


# ----------------------------------------------------------
# Case edits
# ----------------------------------------------------------

def remove_generators(case: NetworkCase, buses) -> NetworkCase:
    """Drop the generators at the given buses; hosts left without one become PQ."""
    buses = set(buses)
    gens = [g for g in case.gens if g.bus not in buses]
    hosting = {g.bus for g in gens}
    new_buses = []
    for b in case.buses:
        if b.id in buses and b.id not in hosting and b.bus_type == BusType.PV:
            b = replace(b, bus_type=BusType.PQ)
        new_buses.append(b)
    return NetworkCase(base_mva=case.base_mva, buses=new_buses, branches=case.branches, gens=gens)
