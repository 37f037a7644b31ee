"""Exhaustive enumeration oracle for tiny evacuation instances.

Enumerates every legal per-bus trip sequence, every boarding split, and the
canonical visit times, keeping the cheapest combination that passes the full
constraint check.  Used to certify the branch-and-bound engine on instances
small enough to enumerate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .formulation import EvacuationPlan, assemble_plan, check_plan
from .instance import Arc, EvacuationInstance, InstanceError, validate_instance

SEARCH_SPACE_CAP = 10_000_000


class SearchSpaceError(ValueError):
    """Instance too large to enumerate; refusing to sample is deliberate."""


@dataclass(frozen=True)
class OracleResult:
    status: str  # "optimal" or "infeasible"
    objective: float | None
    plan: EvacuationPlan | None


def _legal_routes(instance: EvacuationInstance, bus: str) -> list[tuple[Arc | None, ...]]:
    """All trip sequences for one bus respecting the arc-structure rules.

    Trip 1 leaves the home depot; a pickup must be left on the following
    trip; a shelter either ends the route (idle tail) or hands over to a
    pickup, except on the final trip.
    """
    inst = instance
    home = inst.home_depot[bus]
    T = inst.trips
    routes: list[tuple[Arc | None, ...]] = []

    def extend(seq: list[Arc | None], at: str | None):
        t = len(seq) + 1
        if t > T:
            # a route may not end at a pickup: boarding there could never
            # be delivered, and the flow rules forbid stopping mid-chain
            if at is None or not inst.is_pickup(at):
                routes.append(tuple(seq))
            return
        if at is None:
            # idle tail
            extend(seq + [None], None)
            return
        if inst.is_pickup(at):
            moved = False
            for a in inst.arcs_out_of[at]:
                moved = True
                extend(seq + [a], a[1])
            if not moved:
                return  # stranded at a pickup: dead branch
            return
        # at a shelter: stop here, or continue to a pickup if not final trip
        extend(seq + [None], None)
        if t < T:
            for a in inst.arcs_out_of[at]:
                extend(seq + [a], a[1])

    for a in inst.arcs_out_of.get(home, ()):
        extend([a], a[1])
    return routes


def _pickup_assignments(instance, combo, stamps):
    """Iterate feasible boarding dictionaries for a fixed route combination.

    Boarding quantities are enumerated per pickup visit; shelter visits
    release the full onboard load, which is dominant: any feasible split has
    a full-release counterpart with the same boardings.
    """
    inst = instance
    Q = inst.capacity
    events = []  # (bus, trip_index0, node, kind)
    for m, seq in combo.items():
        for t0, arc in enumerate(seq):
            if arc is None:
                continue
            j = arc[1]
            if inst.is_pickup(j):
                events.append((m, t0, j, "pick"))
            else:
                events.append((m, t0, j, "drop"))
    events.sort()

    remaining = {p: inst.demand.get(p, 0) for p in inst.pickups}
    onboard = {m: 0 for m in combo}
    b: dict[tuple, float] = {}

    transit = {
        p: sum(
            inst.arc_radiation.get((p, s), 0.0) * inst.travel_time[(p, s)]
            for s in inst.shelters
            if (p, s) in inst.travel_time
        )
        for p in inst.pickups
    }
    dose = {(p, m): 0.0 for p in inst.pickups for m in combo}

    def feasible_tail(idx: int) -> bool:
        # remaining demand must fit in the raw capacity of later pickup stops
        room = sum(Q for k in range(idx, len(events)) if events[k][3] == "pick")
        return sum(remaining.values()) <= room

    def rec(idx: int):
        if idx == len(events):
            if all(v == 0 for v in remaining.values()) and all(
                v == 0 for v in onboard.values()
            ):
                yield dict(b)
            return
        if not feasible_tail(idx):
            return
        m, t0, j, kind = events[idx]
        if kind == "drop":
            q = onboard[m]
            b[(j, m, t0 + 1)] = float(q)
            onboard[m] = 0
            yield from rec(idx + 1)
            onboard[m] = q
            del b[(j, m, t0 + 1)]
            return
        arrive = stamps[m][t0][1]
        eta = inst.node_radiation.get(j, 0.0)
        top = min(Q - onboard[m], remaining[j])
        for q in range(top, -1, -1):
            extra = (transit[j] + eta * arrive) * q
            if dose[(j, m)] + extra > inst.dose_limit + 1e-9:
                continue
            b[(j, m, t0 + 1)] = float(q)
            onboard[m] += q
            remaining[j] -= q
            dose[(j, m)] += extra
            yield from rec(idx + 1)
            dose[(j, m)] -= extra
            remaining[j] += q
            onboard[m] -= q
            del b[(j, m, t0 + 1)]

    yield from rec(0)


def brute_force_oracle(instance: EvacuationInstance) -> OracleResult:
    """Exact optimum by exhaustive search over routes and boarding splits.

    Preconditions: (|A|+1)**(|V|*T) within the enumeration cap and small
    integer boarding ranges (capacity and per-node demand at most 4).
    Raises SearchSpaceError when the instance is out of reach.
    """
    bad = validate_instance(instance)
    if bad:
        raise InstanceError("invalid instance: " + "; ".join(bad))

    n_slots = len(instance.bus_ids) * instance.trips
    if (len(instance.arcs) + 1) ** n_slots > SEARCH_SPACE_CAP:
        raise SearchSpaceError(
            f"search space too large: ({len(instance.arcs)}+1)^{n_slots} exceeds {SEARCH_SPACE_CAP}"
        )
    if instance.capacity > 4 or any(d > 4 for d in instance.demand.values()):
        raise SearchSpaceError("boarding ranges too large to enumerate (need Q <= 4, D_j <= 4)")

    fleet_volume = len(instance.bus_ids) * instance.trips * instance.capacity
    if instance.total_demand > fleet_volume:
        return OracleResult("infeasible", None, None)

    from .formulation import arrival_times  # local import keeps module load light

    per_bus = {m: _legal_routes(instance, m) for m in instance.bus_ids}
    if any(not routes for routes in per_bus.values()):
        return OracleResult("infeasible", None, None)

    def route_cost(seq) -> float:
        return sum(instance.travel_time[a] for a in seq if a is not None)

    buses = list(instance.bus_ids)
    combos = []
    for choice in itertools.product(*(per_bus[m] for m in buses)):
        combo = dict(zip(buses, choice))
        combos.append((sum(route_cost(seq) for seq in choice), combo))
    combos.sort(key=lambda item: (item[0], sorted(item[1].items())))

    for cost, combo in combos:
        stamps = arrival_times(instance, {m: list(seq) for m, seq in combo.items()})
        for b in _pickup_assignments(instance, combo, stamps):
            plan = assemble_plan(
                instance, {m: list(seq) for m, seq in combo.items()}, b, time_mode="visit"
            )
            report = check_plan(instance, plan)
            if report.ok:
                return OracleResult("optimal", cost, plan)
    return OracleResult("infeasible", None, None)
