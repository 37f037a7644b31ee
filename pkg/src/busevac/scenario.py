"""Random scenario generation and `.evac` instance files.

Generated networks follow the three-layer arc pattern (every depot-pickup,
pickup-shelter and shelter-pickup pair).  Published benchmark tables fix the
node/fleet counts and capacities but not travel times, demands, radiation
rates or the trip horizon, so those come from the documented artifact
defaults below: integer travel seconds in [60, 600], integer demands in
[10, 40], transit and waiting radiation rates in [1e-5, 1e-4] mSv/s, a
50 mSv dose limit and a 4-trip horizon.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, fields

from .instance import Bus, EvacuationInstance, validate_instance


class GeneratorError(ValueError):
    """Configuration cannot produce a usable instance."""


class InstanceLoadError(ValueError):
    """Malformed or inconsistent `.evac` document."""


@dataclass(frozen=True)
class GeneratorConfig:
    depots: int = 1
    pickups: int = 5
    shelters: int = 2
    buses: int = 20
    capacity: int = 25
    trips: int = 4
    demand_range: tuple[int, int] = (10, 40)
    travel_time_range: tuple[int, int] = (60, 600)
    tau_range: tuple[float, float] = (1e-5, 1e-4)
    eta_range: tuple[float, float] = (1e-5, 1e-4)
    dose_limit: float = 50.0
    seed: int = 0

    def validate(self) -> list[str]:
        bad = []
        for name in ("depots", "pickups", "shelters", "buses", "capacity", "trips"):
            if getattr(self, name) < 1:
                bad.append(f"{name} must be at least 1")
        for name in ("demand_range", "travel_time_range", "tau_range", "eta_range"):
            lohi = getattr(self, name)
            if len(lohi) != 2 or lohi[0] > lohi[1] or lohi[0] < 0:
                bad.append(f"{name} must be a nonnegative (low, high) pair")
        if self.dose_limit < 0:
            bad.append("dose_limit must be nonnegative")
        return bad


def _ids(prefix: str, count: int) -> list[str]:
    width = len(str(count))
    return [f"{prefix}{k:0{width}d}" for k in range(1, count + 1)]


def generate(config: GeneratorConfig) -> EvacuationInstance:
    """Draw an instance from the config; identical config gives identical output."""
    bad = config.validate()
    if bad:
        raise GeneratorError("; ".join(bad))
    rng = random.Random(config.seed)
    depots = _ids("d", config.depots)
    pickups = _ids("p", config.pickups)
    shelters = _ids("s", config.shelters)

    arcs = (
        [(d, p) for d in depots for p in pickups]
        + [(p, s) for p in pickups for s in shelters]
        + [(s, p) for s in shelters for p in pickups]
    )
    arcs.sort()
    lo_t, hi_t = config.travel_time_range
    lo_tau, hi_tau = config.tau_range
    travel = {a: float(rng.randint(int(lo_t), int(hi_t))) for a in arcs}
    tau = {a: rng.uniform(lo_tau, hi_tau) for a in arcs}
    lo_e, hi_e = config.eta_range
    eta = {p: rng.uniform(lo_e, hi_e) for p in pickups}
    lo_d, hi_d = config.demand_range
    demand = {p: rng.randint(int(lo_d), int(hi_d)) for p in pickups}

    buses = [
        Bus(ident, depots[k % len(depots)])
        for k, ident in enumerate(_ids("", config.buses))
    ]

    total = sum(demand.values())
    volume = config.buses * config.trips * config.capacity
    if total > volume:
        raise GeneratorError(
            f"drawn demand {total} exceeds fleet volume |V|*T*Q = {volume}; "
            "shrink the demand range or grow the fleet"
        )

    return EvacuationInstance(
        depots=depots,
        pickups=pickups,
        shelters=shelters,
        arcs=arcs,
        travel_time=travel,
        arc_radiation=tau,
        node_radiation=eta,
        dose_limit=config.dose_limit,
        capacity=config.capacity,
        demand=demand,
        buses=buses,
        trips=config.trips,
    )


# ---------------------------------------------------------------------------
# .evac documents


def _num(x: float) -> str:
    if x == math.inf:
        return "inf"
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def save_instance(instance: EvacuationInstance) -> str:
    """Canonical `.evac` text; stable under load/save round trips."""
    out = ["# evacuation instance", "NODES"]
    for d in instance.depots:
        out.append(f"{d} depot")
    for p in instance.pickups:
        out.append(f"{p} pickup {_num(instance.node_radiation.get(p, 0.0))}")
    for s in instance.shelters:
        out.append(f"{s} shelter")
    out.append("ARCS")
    for (i, j) in instance.arcs:
        out.append(
            f"{i} {j} {_num(instance.travel_time[(i, j)])} "
            f"{_num(instance.arc_radiation.get((i, j), 0.0))}"
        )
    out.append("PARAMS")
    out.append(f"Q {instance.capacity}")
    out.append(f"T {instance.trips}")
    out.append(f"dose_limit {_num(instance.dose_limit)}")
    out.append("DEMAND")
    for p in instance.pickups:
        out.append(f"{p} {instance.demand.get(p, 0)}")
    out.append("BUSES")
    for b in instance.buses:
        out.append(f"{b.ident} {b.depot}")
    return "\n".join(out) + "\n"


_SECTIONS = ("NODES", "ARCS", "PARAMS", "DEMAND", "BUSES")


def load_instance(text: str) -> EvacuationInstance:
    """Parse an `.evac` document; errors carry the failing section and field."""
    section = None
    depots, pickups, shelters = [], [], []
    eta: dict[str, float] = {}
    arcs = []
    travel, tau = {}, {}
    params: dict[str, float] = {}
    demand: dict[str, int] = {}
    buses: list[tuple[str, str]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line in _SECTIONS:
            section = line
            continue
        parts = line.split()
        try:
            if section == "NODES":
                if parts[1] == "depot":
                    depots.append(parts[0])
                elif parts[1] == "pickup":
                    pickups.append(parts[0])
                    eta[parts[0]] = float(parts[2]) if len(parts) > 2 else 0.0
                elif parts[1] == "shelter":
                    shelters.append(parts[0])
                else:
                    raise InstanceLoadError(
                        f"line {lineno}: NODES: unknown node kind {parts[1]!r}"
                    )
            elif section == "ARCS":
                i, j, t, r = parts[0], parts[1], float(parts[2]), float(parts[3])
                arcs.append((i, j))
                travel[(i, j)] = t
                tau[(i, j)] = r
            elif section == "PARAMS":
                params[parts[0]] = float(parts[1])
            elif section == "DEMAND":
                demand[parts[0]] = int(parts[1])
            elif section == "BUSES":
                buses.append((parts[0], parts[1]))
            else:
                raise InstanceLoadError(f"line {lineno}: data before any section header")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, InstanceLoadError):
                raise
            raise InstanceLoadError(f"line {lineno}: malformed {section} entry: {line!r}") from exc

    known = set(depots) | set(pickups) | set(shelters)
    for (i, j) in arcs:
        if i not in known or j not in known:
            raise InstanceLoadError(f"ARCS: arc ({i}, {j}) references an undeclared node")
    for p in demand:
        if p not in known:
            raise InstanceLoadError(f"DEMAND: unknown node {p}")
    for ident, depot in buses:
        if depot not in set(depots):
            raise InstanceLoadError(f"BUSES: bus {ident} references unknown depot {depot}")
    for field_name in ("Q", "T", "dose_limit"):
        if field_name not in params:
            raise InstanceLoadError(f"PARAMS: missing required field {field_name}")

    instance = EvacuationInstance(
        depots=depots,
        pickups=pickups,
        shelters=shelters,
        arcs=arcs,
        travel_time=travel,
        arc_radiation=tau,
        node_radiation=eta,
        dose_limit=params["dose_limit"],
        capacity=int(params["Q"]),
        demand=demand,
        buses=buses,
        trips=int(params["T"]),
    )
    bad = validate_instance(instance)
    if bad:
        raise InstanceLoadError("instance invalid: " + "; ".join(bad))
    return instance
