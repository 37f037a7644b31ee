"""End-to-end solve pipeline: instance -> bilinear model -> MILP -> plan.

Wires the branch-and-bound engine to the evacuation semantics: a greedy
constructive plan seeds the incumbent, LP points are completed into full
feasible assignments at every node, and every accepted incumbent is replayed
against the original bilinear constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .bnb import SolveStats, SolverConfig, solve_milp
from .formulation import (
    EvacuationPlan,
    assemble_plan,
    build_mibp,
    check_plan,
    earliest_times,
    trips_by_bus,
)
from .instance import Arc, EvacuationInstance, index_variables, time_upper_bound
from .linearize import BitEncoding, linearize_model
from .milp import MilpProblem


@dataclass
class SolveResult:
    plan: EvacuationPlan | None
    stats: SolveStats
    milp: MilpProblem
    mode: str


class EvacContext:
    """Domain hooks for the MILP engine.

    Translates between flat variable assignments and evacuation plans, builds
    candidates from LP points, and validates incumbents against the original
    bilinear model.  Plans found infeasible by the bilinear check are counted
    in ``rejected`` (and, in the exact mode, should never occur).
    """

    def __init__(self, instance: EvacuationInstance, mode: str):
        self.instance = instance
        self.mode = mode
        self.space = index_variables(instance, with_bits=True)
        self.enc = BitEncoding.for_capacity(instance.capacity)
        self.tub = time_upper_bound(instance)
        self.rejected: list[EvacuationPlan] = []
        inst = instance
        self._x_names = [
            ((i, j, m, t), self.space.name_of(("X", i, j, m, t)))
            for (i, j) in inst.arcs
            for m in inst.bus_ids
            for t in range(1, inst.trips + 1)
        ]
        self._b_names = [
            ((i, m, t), self.space.name_of(("B", i, m, t)))
            for i in inst.pickup_shelter_nodes
            for m in inst.bus_ids
            for t in range(1, inst.trips + 1)
        ]

    # -- plan <-> flat values -------------------------------------------------

    def plan_from_values(self, values: dict[str, float]) -> EvacuationPlan:
        inst = self.instance
        x = {}
        for key, name in self._x_names:
            if values.get(name, 0.0) > 0.5:
                x[key] = 1.0
        b = {}
        for key, name in self._b_names:
            val = values.get(name, 0.0)
            if round(val) != 0:
                b[key] = float(round(val))
        times = {
            (i, m, t): float(values.get(self.space.name_of(("T", i, m, t)), 0.0))
            for i in inst.nodes
            for m in inst.bus_ids
            for t in range(1, inst.trips + 1)
        }
        return EvacuationPlan(instance=inst, x=x, times=times, b=b)

    def values_from_plan(self, plan: EvacuationPlan, v_hint: dict | None = None) -> dict[str, float]:
        """Full MILP assignment: plan variables plus exact bits and products.

        ``v_hint`` supplies product-variable values to keep (clipped to their
        envelopes); without it products are rebuilt exactly from times and
        bits.
        """
        inst = self.instance
        name = self.space.name_of
        values: dict[str, float] = {}
        for key, nm in self._x_names:
            values[nm] = 1.0 if plan.x.get(key, 0.0) > 0.5 else 0.0
        for i in inst.nodes:
            for m in inst.bus_ids:
                for t in range(1, inst.trips + 1):
                    values[name(("T", i, m, t))] = float(plan.times.get((i, m, t), 0.0))
        for key, nm in self._b_names:
            i, m, t = key
            bval = int(round(plan.b.get(key, 0.0)))
            values[nm] = float(bval)
            bits = self.enc.encode(bval)
            tval = float(plan.times.get((i, m, t), 0.0))
            for n, bitval in enumerate(bits):
                values[name(("Y", n, i, m, t))] = float(bitval)
                vname = name(("V", n, i, m, t))
                if v_hint is not None and vname in v_hint:
                    u = (2**n) * self.tub[(i, m, t)]
                    values[vname] = min(max(v_hint[vname], 0.0), u * bitval)
                else:
                    values[vname] = (2**n) * tval * bitval
        return values

    # -- hooks used by the engine ------------------------------------------------

    def accept(self, values: dict[str, float]) -> bool:
        plan = self.plan_from_values(values)
        report = check_plan(self.instance, plan)
        if report.ok:
            return True
        self.rejected.append(plan)
        # the verbatim product rows do not pin the products, so incumbents
        # may violate the original bilinear dose rows; they remain valid
        # solutions of the relaxed MILP and are kept
        return self.mode == "paper-verbatim"

    def candidate(self, lp_values: dict[str, float], integral: bool) -> dict[str, float] | None:
        inst = self.instance
        trips: dict[str, list[Arc | None]] = {}
        for m in inst.bus_ids:
            trips[m] = [None] * inst.trips
        for (i, j, m, t), nm in self._x_names:
            val = lp_values.get(nm, 0.0)
            if val > 0.5:
                prev = trips[m][t - 1]
                if prev is not None:
                    if integral:
                        return None
                    # fractional tie: keep the lexicographically first arc
                    continue
                trips[m][t - 1] = (i, j)
        if not self._routes_connected(trips):
            return None
        if integral:
            b = {}
            for key, nm in self._b_names:
                val = round(lp_values.get(nm, 0.0))
                if val:
                    b[key] = float(val)
        else:
            b = self._greedy_boarding(trips)
            if b is None:
                return None
        plan = assemble_plan(inst, trips, b, time_mode="earliest")
        v_hint = lp_values if (integral and self.mode == "paper-verbatim") else None
        return self.values_from_plan(plan, v_hint=v_hint)

    def initial_solutions(self):
        plan = self.greedy_plan()
        if plan is not None:
            yield self.values_from_plan(plan)

    # -- constructive pieces -------------------------------------------------------

    def _routes_connected(self, trips: dict[str, list[Arc | None]]) -> bool:
        inst = self.instance
        for m, seq in trips.items():
            at = inst.home_depot[m]
            moving = True
            for t0, arc in enumerate(seq):
                if arc is None:
                    moving = False
                    continue
                if not moving or arc[0] != at:
                    return False
                at = arc[1]
                if t0 == 0 and not inst.is_depot(arc[0]):
                    return False
            if seq and seq[0] is None:
                return False
        return True

    def _greedy_boarding(self, trips: dict[str, list[Arc | None]]):
        """Fill boarding counts chronologically: grab what remains, drop all."""
        inst = self.instance
        remaining = {p: inst.demand.get(p, 0) for p in inst.pickups}
        onboard = {m: 0 for m in inst.bus_ids}
        b: dict[tuple, float] = {}
        for t in range(1, inst.trips + 1):
            for m in inst.bus_ids:
                arc = trips[m][t - 1]
                if arc is None:
                    continue
                j = arc[1]
                if inst.is_pickup(j):
                    q = min(inst.capacity - onboard[m], remaining[j])
                    if q > 0:
                        b[(j, m, t)] = float(q)
                        onboard[m] += q
                        remaining[j] -= q
                elif inst.is_shelter(j):
                    if onboard[m] > 0:
                        b[(j, m, t)] = float(onboard[m])
                        onboard[m] = 0
        if any(v > 0 for v in remaining.values()) or any(v > 0 for v in onboard.values()):
            return None
        return b

    def greedy_plan(self) -> EvacuationPlan | None:
        """Constructive initial plan: shuttle runs to the largest open demands."""
        inst = self.instance
        remaining = {p: inst.demand.get(p, 0) for p in inst.pickups}
        trips: dict[str, list[Arc | None]] = {}

        def nearest_shelter(p: str) -> Arc | None:
            outs = [a for a in inst.arcs_out_of[p] if inst.is_shelter(a[1])]
            if not outs:
                return None
            return min(outs, key=lambda a: (inst.travel_time[a], a))

        for m in inst.bus_ids:
            d = inst.home_depot[m]
            seq: list[Arc | None] = []
            outs = inst.arcs_out_of.get(d, ())
            if not outs:
                return None
            at = d
            while len(seq) < inst.trips:
                if inst.is_pickup(at):
                    back = nearest_shelter(at)
                    if back is None:
                        return None
                    seq.append(back)
                    at = back[1]
                    continue
                # at a depot or shelter: head for a pickup if useful and legal
                t_next = len(seq) + 1
                legal = [a for a in (outs if at == d else inst.arcs_out_of[at])]
                legal = [a for a in legal if inst.is_pickup(a[1])]
                if at != d and t_next == inst.trips:
                    legal = []  # shelter-to-pickup is barred on the final trip
                if not legal or (at != d and all(v == 0 for v in remaining.values())):
                    if at == d:
                        # forced departure: cheapest pickup
                        arc = min(outs, key=lambda a: (inst.travel_time[a], a))
                        seq.append(arc)
                        at = arc[1]
                        continue
                    seq.append(None)
                    continue
                target = max(legal, key=lambda a: (remaining.get(a[1], 0), -inst.travel_time[a], a))
                if at != d and remaining.get(target[1], 0) == 0:
                    seq.append(None)
                    continue
                seq.append(target)
                at = target[1]
                # mark the planned grab so later buses spread out
                grab = min(inst.capacity, remaining.get(at, 0))
                remaining[at] = remaining.get(at, 0) - grab
            trips[m] = seq

        # rebuild actual boarding from scratch (the scan above only spread targets)
        for p in inst.pickups:
            remaining[p] = inst.demand.get(p, 0)
        b = self._greedy_boarding(trips)
        if b is None:
            return None
        plan = assemble_plan(inst, trips, b, time_mode="earliest")
        return plan if check_plan(inst, plan).ok else None


def build_models(instance: EvacuationInstance, mode: str = "exact", label: str = ""):
    """Instance -> (bilinear model, MILP) for the chosen linearization mode."""
    mibp = build_mibp(instance)
    milp = linearize_model(mibp, instance, mode=mode)
    if label:
        milp.metadata["instance"] = label
    return mibp, milp


def solve_instance(
    instance: EvacuationInstance,
    mode: str = "exact",
    config: SolverConfig | None = None,
    label: str = "",
) -> SolveResult:
    """Full pipeline: build, linearize, solve, and reconstruct the plan."""
    _, milp = build_models(instance, mode=mode, label=label)
    context = EvacContext(instance, mode)
    values, stats = solve_milp(milp, config or SolverConfig(), context=context)
    plan = context.plan_from_values(values) if values is not None else None
    return SolveResult(plan=plan, stats=stats, milp=milp, mode=mode)
