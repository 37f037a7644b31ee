"""Evacuation model builder and exact feasibility checking.

Builds the original mixed-integer bilinear model as explicit constraint
records (families EQ1..EQ15), evaluates arbitrary assignments against those
original constraints (including the bilinear dose rows), and derives routes,
doses, completion time and cost from solutions.

Family catalogue
----------------
EQ1   per-(pickup, bus) radiation dose cap: transit dose tallied against every
      shelter arc plus waiting dose, the waiting part bilinear in (T, B)
EQ2   visit-time ordering between consecutive trips, over all node pairs
EQ3   pickup flow balance: a bus entering a pickup leaves it next trip
EQ4   shelter flow relaxation: leaving a shelter requires having entered it
EQ5   at most one arc per (bus, trip)
EQ6   every bus departs its home depot on trip 1
EQ7   depot departures forbidden on trips 2..T
EQ8   shelter-to-pickup arcs forbidden on the final trip
EQ9   boarding/release only at a visited node, capped by capacity
EQ10  running onboard count within [0, capacity]
EQ11  full demand picked up at every pickup
EQ12  per-bus pickup/release balance
EQ13  arc variables binary
EQ14  boarding counts nonnegative integers
EQ15  visit times nonnegative
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .instance import (
    Arc,
    EvacuationInstance,
    InstanceError,
    VariableSpace,
    index_variables,
    validate_instance,
)

EQ_IDS = tuple(f"EQ{k}" for k in range(1, 16))

# quantifier-count formulas indexed by family, as functions of set sizes
FAMILY_SIZES = {
    "EQ1": lambda P, S, N, A, V, T, ADP, ASP: P * V,
    "EQ2": lambda P, S, N, A, V, T, ADP, ASP: N * N * V * (T - 1),
    "EQ3": lambda P, S, N, A, V, T, ADP, ASP: P * V * (T - 1),
    "EQ4": lambda P, S, N, A, V, T, ADP, ASP: S * V * (T - 1),
    "EQ5": lambda P, S, N, A, V, T, ADP, ASP: V * T,
    "EQ6": lambda P, S, N, A, V, T, ADP, ASP: V,
    "EQ7": lambda P, S, N, A, V, T, ADP, ASP: ADP * V * (T - 1),
    "EQ8": lambda P, S, N, A, V, T, ADP, ASP: ASP * V,
    "EQ9": lambda P, S, N, A, V, T, ADP, ASP: (P + S) * V * T,
    "EQ10": lambda P, S, N, A, V, T, ADP, ASP: V * T,
    "EQ11": lambda P, S, N, A, V, T, ADP, ASP: P,
    "EQ12": lambda P, S, N, A, V, T, ADP, ASP: V,
    "EQ13": lambda P, S, N, A, V, T, ADP, ASP: A * V * T,
    "EQ14": lambda P, S, N, A, V, T, ADP, ASP: (P + S) * V * T,
    "EQ15": lambda P, S, N, A, V, T, ADP, ASP: N * V * T,
}


class InsufficientTransportError(ValueError):
    """Total demand provably exceeds what the fleet can ever move."""


class MalformedPlanError(ValueError):
    """A plan's arc variables contradict the one-arc-per-trip structure."""


@dataclass(frozen=True)
class Constraint:
    """One constraint record: linear coefficients plus, for EQ1, bilinear terms.

    ``sense`` is one of LE/GE/EQ/RANGE for rows and BIN/INT/NONNEG for
    variable-domain records.  RANGE rows bound the expression to [lo, rhs].
    Bilinear entries are ``(key_a, key_b, coefficient)`` triples.
    """

    eq: str
    key: tuple
    coeffs: dict
    sense: str
    rhs: float = 0.0
    lo: float | None = None
    bilinear: tuple = ()


@dataclass(frozen=True)
class MibpModel:
    """The original bilinear evacuation model in record form."""

    instance: EvacuationInstance
    space: VariableSpace
    objective: dict
    families: dict[str, tuple[Constraint, ...]]

    def family(self, eq: str) -> tuple[Constraint, ...]:
        return self.families[eq]

    def rows(self):
        for eq in EQ_IDS:
            yield from self.families[eq]


def build_mibp(instance: EvacuationInstance) -> MibpModel:
    """Construct every constraint family with its exact quantifier ranges.

    Raises InsufficientTransportError when total demand exceeds the coarse
    fleet volume |V| * T * Q, and InstanceError on invalid instances.
    """
    bad = validate_instance(instance)
    if bad:
        raise InstanceError("invalid instance: " + "; ".join(bad))

    fleet_volume = len(instance.bus_ids) * instance.trips * instance.capacity
    if instance.total_demand > fleet_volume:
        raise InsufficientTransportError(
            f"insufficient transport volume: total demand {instance.total_demand} "
            f"exceeds fleet volume |V|*T*Q = {fleet_volume}"
        )

    space = index_variables(instance, with_bits=False)
    inst = instance
    trips = range(1, inst.trips + 1)
    fam: dict[str, list[Constraint]] = {eq: [] for eq in EQ_IDS}

    objective = {
        ("X", i, j, m, t): inst.travel_time[(i, j)]
        for (i, j) in inst.arcs
        for m in inst.bus_ids
        for t in trips
    }

    # EQ1: dose cap per (pickup, bus); the transit term charges the rate-time
    # product of every shelter arc leaving i against each boarded cohort.
    for i in inst.pickups:
        transit = sum(
            inst.arc_radiation.get((i, j), 0.0) * inst.travel_time[(i, j)]
            for j in inst.shelters
            if (i, j) in inst.travel_time
        )
        eta = inst.node_radiation.get(i, 0.0)
        for m in inst.bus_ids:
            coeffs = {("B", i, m, t): transit for t in trips}
            bilin = tuple((("T", i, m, t), ("B", i, m, t), eta) for t in trips)
            fam["EQ1"].append(
                Constraint("EQ1", (i, m), coeffs, "LE", inst.dose_limit, bilinear=bilin)
            )

    # EQ2: unconditional trip-time ordering over all ordered node pairs.
    arc_set = set(inst.arcs)
    for i in inst.nodes:
        for j in inst.nodes:
            for m in inst.bus_ids:
                for t in range(1, inst.trips):
                    coeffs = {("T", j, m, t + 1): 1.0}
                    coeffs[("T", i, m, t)] = coeffs.get(("T", i, m, t), 0.0) - 1.0
                    if (i, j) in arc_set:
                        coeffs[("X", i, j, m, t)] = -inst.travel_time[(i, j)]
                    fam["EQ2"].append(Constraint("EQ2", (i, j, m, t), coeffs, "GE", 0.0))

    # EQ3 / EQ4: flow balance at pickups (equality) and shelters (inequality).
    for j in inst.pickups:
        for m in inst.bus_ids:
            for t in range(1, inst.trips):
                coeffs = {}
                for a in inst.arcs_into[j]:
                    coeffs[("X", a[0], a[1], m, t)] = 1.0
                for a in inst.arcs_out_of[j]:
                    coeffs[("X", a[0], a[1], m, t + 1)] = -1.0
                fam["EQ3"].append(Constraint("EQ3", (j, m, t), coeffs, "EQ", 0.0))
    for j in inst.shelters:
        for m in inst.bus_ids:
            for t in range(1, inst.trips):
                coeffs = {}
                for a in inst.arcs_into[j]:
                    coeffs[("X", a[0], a[1], m, t)] = 1.0
                for a in inst.arcs_out_of[j]:
                    coeffs[("X", a[0], a[1], m, t + 1)] = -1.0
                fam["EQ4"].append(Constraint("EQ4", (j, m, t), coeffs, "GE", 0.0))

    # EQ5: one arc per (bus, trip).
    for m in inst.bus_ids:
        for t in trips:
            coeffs = {("X", i, j, m, t): 1.0 for (i, j) in inst.arcs}
            fam["EQ5"].append(Constraint("EQ5", (m, t), coeffs, "LE", 1.0))

    # EQ6: forced first departure from the home depot.
    for m in inst.bus_ids:
        d = inst.home_depot[m]
        coeffs = {("X", a[0], a[1], m, 1): 1.0 for a in inst.arcs_out_of[d]}
        fam["EQ6"].append(Constraint("EQ6", (d, m), coeffs, "EQ", 1.0))

    # EQ7: depot departures locked after trip 1.
    for (i, j) in inst.arcs:
        if not inst.is_depot(i):
            continue
        for m in inst.bus_ids:
            for t in range(2, inst.trips + 1):
                fam["EQ7"].append(
                    Constraint("EQ7", (i, j, m, t), {("X", i, j, m, t): 1.0}, "EQ", 0.0)
                )

    # EQ8: no shelter-to-pickup arc on the last trip.
    for (i, j) in inst.arcs:
        if inst.is_shelter(i) and inst.is_pickup(j):
            for m in inst.bus_ids:
                fam["EQ8"].append(
                    Constraint(
                        "EQ8", (i, j, m), {("X", i, j, m, inst.trips): 1.0}, "EQ", 0.0
                    )
                )

    # EQ9: boarding/release bounded by a visit.
    for j in inst.pickup_shelter_nodes:
        for m in inst.bus_ids:
            for t in trips:
                coeffs = {("B", j, m, t): 1.0}
                for a in inst.arcs_into[j]:
                    coeffs[("X", a[0], a[1], m, t)] = -float(inst.capacity)
                fam["EQ9"].append(Constraint("EQ9", (j, m, t), coeffs, "LE", 0.0))

    # EQ10: running onboard count within [0, Q].
    for m in inst.bus_ids:
        for t in trips:
            coeffs = {}
            for l in range(1, t + 1):
                for j in inst.pickups:
                    coeffs[("B", j, m, l)] = 1.0
                for k in inst.shelters:
                    coeffs[("B", k, m, l)] = -1.0
            fam["EQ10"].append(
                Constraint("EQ10", (m, t), coeffs, "RANGE", float(inst.capacity), lo=0.0)
            )

    # EQ11: all evacuees picked up.
    for j in inst.pickups:
        coeffs = {("B", j, m, t): 1.0 for m in inst.bus_ids for t in trips}
        fam["EQ11"].append(
            Constraint("EQ11", (j,), coeffs, "EQ", float(inst.demand.get(j, 0)))
        )

    # EQ12: per-bus balance between boarded and released evacuees.
    for m in inst.bus_ids:
        coeffs = {}
        for t in trips:
            for j in inst.pickups:
                coeffs[("B", j, m, t)] = 1.0
            for k in inst.shelters:
                coeffs[("B", k, m, t)] = -1.0
        fam["EQ12"].append(Constraint("EQ12", (m,), coeffs, "EQ", 0.0))

    # EQ13-EQ15: variable domains.
    for key in space.iter_kind("X"):
        fam["EQ13"].append(Constraint("EQ13", key[1:], {key: 1.0}, "BIN"))
    for key in space.iter_kind("B"):
        fam["EQ14"].append(Constraint("EQ14", key[1:], {key: 1.0}, "INT"))
    for key in space.iter_kind("T"):
        fam["EQ15"].append(Constraint("EQ15", key[1:], {key: 1.0}, "NONNEG"))

    return MibpModel(
        instance=instance,
        space=space,
        objective=objective,
        families={eq: tuple(rows) for eq, rows in fam.items()},
    )


# ---------------------------------------------------------------------------
# plans


@dataclass
class EvacuationPlan:
    """Values of the arc, visit-time and boarding variables for one instance.

    Dictionaries may omit zero entries.  Derived quantities (routes, doses,
    completion time, cost) are recomputed from these raw values on access.
    """

    instance: EvacuationInstance
    x: dict[tuple, float] = field(default_factory=dict)
    times: dict[tuple, float] = field(default_factory=dict)
    b: dict[tuple, float] = field(default_factory=dict)

    def x_value(self, i: str, j: str, m: str, t: int) -> float:
        return self.x.get((i, j, m, t), 0.0)

    def time_value(self, i: str, m: str, t: int) -> float:
        return self.times.get((i, m, t), 0.0)

    def b_value(self, i: str, m: str, t: int) -> float:
        return self.b.get((i, m, t), 0.0)

    @property
    def cost(self) -> float:
        inst = self.instance
        return sum(
            inst.travel_time[(i, j)]
            for (i, j, m, t), val in sorted(self.x.items())
            if val > 0.5
        )

    @property
    def t_evac(self) -> float:
        routes = extract_routes(self)
        worst = 0.0
        for legs in routes.values():
            moves = [leg for leg in legs if leg.arc is not None]
            if moves:
                worst = max(worst, moves[-1].arrive)
        return worst

    @property
    def routes(self):
        return extract_routes(self)

    @property
    def doses(self):
        return compute_doses(self.instance, self)


@dataclass(frozen=True)
class TripLeg:
    """One reported trip of one bus: arc is None for an idle trip."""

    trip: int
    arc: Arc | None
    depart: float
    arrive: float
    load_before: int
    load_after: int

    @property
    def idle(self) -> bool:
        return self.arc is None

    def __str__(self) -> str:
        if self.idle:
            return f"trip {self.trip}: idle"
        return (
            f"trip {self.trip}: {self.arc[0]}->{self.arc[1]} "
            f"[{self.depart:g}s -> {self.arrive:g}s] load {self.load_before}->{self.load_after}"
        )


def trips_by_bus(plan: EvacuationPlan) -> dict[str, list[Arc | None]]:
    """Per-bus arc choice per trip; raises MalformedPlanError on double arcs."""
    inst = plan.instance
    out: dict[str, list[Arc | None]] = {}
    for m in inst.bus_ids:
        seq: list[Arc | None] = []
        for t in range(1, inst.trips + 1):
            chosen = [a for a in inst.arcs if plan.x_value(a[0], a[1], m, t) > 0.5]
            if len(chosen) > 1:
                raise MalformedPlanError(
                    f"bus {m} trip {t} has {len(chosen)} arcs set: {chosen}"
                )
            seq.append(chosen[0] if chosen else None)
        out[m] = seq
    return out


def arrival_times(instance: EvacuationInstance, trips: dict[str, list[Arc | None]]):
    """Canonical timestamps per bus: (depart, arrive) for each trip.

    Buses depart immediately on arrival, so depart[t+1] = arrive[t]; idle
    trips carry the clock forward unchanged.
    """
    stamps: dict[str, list[tuple[float, float]]] = {}
    for m, seq in trips.items():
        clock = 0.0
        legs = []
        for arc in seq:
            dep = clock
            arr = dep + (instance.travel_time[arc] if arc is not None else 0.0)
            legs.append((dep, arr))
            clock = arr
        stamps[m] = legs
    return stamps


def visit_times(instance: EvacuationInstance, trips: dict[str, list[Arc | None]]):
    """Full visit-time assignment pairing each trip's entered node with its arrival.

    Nodes not entered on a trip get that trip's departure stamp, which keeps
    the whole assignment consistent with the trip-ordering rows.
    """
    stamps = arrival_times(instance, trips)
    times: dict[tuple, float] = {}
    for m, seq in trips.items():
        for t0, arc in enumerate(seq):
            dep, arr = stamps[m][t0]
            for n in instance.nodes:
                times[(n, m, t0 + 1)] = arr if (arc is not None and arc[1] == n) else dep
    return times


def earliest_times(instance: EvacuationInstance, trips: dict[str, list[Arc | None]]):
    """Smallest visit-time assignment consistent with the trip-ordering rows.

    Forward recursion: trip-1 stamps are zero, and each next stamp is the max
    of all previous stamps plus the traversed leg where one applies.  Any
    feasible time assignment dominates this one componentwise.
    """
    times: dict[tuple, float] = {}
    for m, seq in trips.items():
        prev = {n: 0.0 for n in instance.nodes}
        for n in instance.nodes:
            times[(n, m, 1)] = 0.0
        for t in range(1, instance.trips):
            arc = seq[t - 1]
            floor = max(prev.values()) if prev else 0.0
            cur = {}
            for n in instance.nodes:
                val = floor
                if arc is not None and arc[1] == n:
                    val = max(val, prev[arc[0]] + instance.travel_time[arc])
                cur[n] = val
                times[(n, m, t + 1)] = val
            prev = cur
    return times


def assemble_plan(
    instance: EvacuationInstance,
    trips: dict[str, list[Arc | None]],
    b: dict[tuple, float],
    time_mode: str = "visit",
) -> EvacuationPlan:
    """Build a full plan from per-bus routes and boarding counts.

    ``time_mode`` picks the visit-time convention: "visit" stamps entered
    nodes with their arrival times, "earliest" takes the componentwise
    minimum assignment.
    """
    x = {
        (arc[0], arc[1], m, t0 + 1): 1.0
        for m, seq in trips.items()
        for t0, arc in enumerate(seq)
        if arc is not None
    }
    times = (
        visit_times(instance, trips) if time_mode == "visit" else earliest_times(instance, trips)
    )
    return EvacuationPlan(instance=instance, x=x, times=times, b=dict(b))


# ---------------------------------------------------------------------------
# feasibility checking


@dataclass(frozen=True)
class Violation:
    """One violated constraint: family, quantifier instance, and the numbers."""

    eq: str
    key: tuple
    lhs: float
    sense: str
    bound: float

    def __str__(self) -> str:
        op = {"LE": "<=", "GE": ">=", "EQ": "==", "BIN": "in {0,1}", "INT": "integer>=0",
              "NONNEG": ">=0", "RANGE": "in range"}[self.sense]
        return f"{self.eq}{self.key}: lhs={self.lhs:.9g} fails {op} {self.bound:.9g}"


@dataclass
class FeasibilityReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_family(self) -> dict[str, list[Violation]]:
        out: dict[str, list[Violation]] = {}
        for v in self.violations:
            out.setdefault(v.eq, []).append(v)
        return out


def _plan_dims_ok(instance: EvacuationInstance, plan: EvacuationPlan) -> None:
    arcs = set(instance.arcs)
    buses = set(instance.bus_ids)
    nodes = set(instance.nodes)
    ps = set(instance.pickup_shelter_nodes)
    T = instance.trips
    for (i, j, m, t) in plan.x:
        if (i, j) not in arcs or m not in buses or not 1 <= t <= T:
            raise ValueError(f"plan dimension mismatch: arc variable ({i},{j},{m},{t})")
    for (i, m, t) in plan.times:
        if i not in nodes or m not in buses or not 1 <= t <= T:
            raise ValueError(f"plan dimension mismatch: time variable ({i},{m},{t})")
    for (i, m, t) in plan.b:
        if i not in ps or m not in buses or not 1 <= t <= T:
            raise ValueError(f"plan dimension mismatch: boarding variable ({i},{m},{t})")


def check_plan(
    instance: EvacuationInstance,
    plan: EvacuationPlan,
    tolerance: float = 1e-6,
    int_tolerance: float = 1e-6,
) -> FeasibilityReport:
    """Evaluate a plan against every original constraint, bilinear dose included.

    Continuous rows are accepted within ``tolerance`` (absolute); binary and
    integer domains within ``int_tolerance`` of an exact integer.  Returns the
    full list of violations with left-hand values and bounds.
    """
    _plan_dims_ok(instance, plan)
    inst = instance
    tol = tolerance
    out: list[Violation] = []
    trips = range(1, inst.trips + 1)

    def fail(eq, key, lhs, sense, bound):
        out.append(Violation(eq, key, float(lhs), sense, float(bound)))

    # EQ1
    for i in inst.pickups:
        transit = sum(
            inst.arc_radiation.get((i, j), 0.0) * inst.travel_time[(i, j)]
            for j in inst.shelters
            if (i, j) in inst.travel_time
        )
        eta = inst.node_radiation.get(i, 0.0)
        for m in inst.bus_ids:
            lhs = 0.0
            for t in trips:
                bv = plan.b_value(i, m, t)
                lhs += transit * bv + eta * plan.time_value(i, m, t) * bv
            if lhs > inst.dose_limit + tol:
                fail("EQ1", (i, m), lhs, "LE", inst.dose_limit)

    # EQ2
    arc_set = set(inst.arcs)
    for m in inst.bus_ids:
        for t in range(1, inst.trips):
            for i in inst.nodes:
                ti = plan.time_value(i, m, t)
                for j in inst.nodes:
                    rhs = ti
                    if (i, j) in arc_set:
                        rhs += inst.travel_time[(i, j)] * plan.x_value(i, j, m, t)
                    lhs = plan.time_value(j, m, t + 1)
                    if lhs < rhs - tol:
                        fail("EQ2", (i, j, m, t), lhs - rhs, "GE", 0.0)

    # EQ3 / EQ4
    for m in inst.bus_ids:
        for t in range(1, inst.trips):
            for j in inst.pickups:
                into = sum(plan.x_value(a[0], a[1], m, t) for a in inst.arcs_into[j])
                outof = sum(plan.x_value(a[0], a[1], m, t + 1) for a in inst.arcs_out_of[j])
                if abs(into - outof) > tol:
                    fail("EQ3", (j, m, t), into - outof, "EQ", 0.0)
            for j in inst.shelters:
                into = sum(plan.x_value(a[0], a[1], m, t) for a in inst.arcs_into[j])
                outof = sum(plan.x_value(a[0], a[1], m, t + 1) for a in inst.arcs_out_of[j])
                if into < outof - tol:
                    fail("EQ4", (j, m, t), into - outof, "GE", 0.0)

    # EQ5
    for m in inst.bus_ids:
        for t in trips:
            lhs = sum(plan.x_value(i, j, m, t) for (i, j) in inst.arcs)
            if lhs > 1.0 + tol:
                fail("EQ5", (m, t), lhs, "LE", 1.0)

    # EQ6
    for m in inst.bus_ids:
        d = inst.home_depot[m]
        lhs = sum(plan.x_value(a[0], a[1], m, 1) for a in inst.arcs_out_of[d])
        if abs(lhs - 1.0) > tol:
            fail("EQ6", (d, m), lhs, "EQ", 1.0)

    # EQ7 / EQ8
    for (i, j) in inst.arcs:
        if inst.is_depot(i):
            for m in inst.bus_ids:
                for t in range(2, inst.trips + 1):
                    val = plan.x_value(i, j, m, t)
                    if abs(val) > tol:
                        fail("EQ7", (i, j, m, t), val, "EQ", 0.0)
        if inst.is_shelter(i) and inst.is_pickup(j):
            for m in inst.bus_ids:
                val = plan.x_value(i, j, m, inst.trips)
                if abs(val) > tol:
                    fail("EQ8", (i, j, m), val, "EQ", 0.0)

    # EQ9
    for j in inst.pickup_shelter_nodes:
        for m in inst.bus_ids:
            for t in trips:
                cap = inst.capacity * sum(
                    plan.x_value(a[0], a[1], m, t) for a in inst.arcs_into[j]
                )
                bv = plan.b_value(j, m, t)
                if bv > cap + tol:
                    fail("EQ9", (j, m, t), bv - cap, "LE", 0.0)

    # EQ10
    for m in inst.bus_ids:
        onboard = 0.0
        for t in trips:
            onboard += sum(plan.b_value(j, m, t) for j in inst.pickups)
            onboard -= sum(plan.b_value(k, m, t) for k in inst.shelters)
            if onboard < -tol or onboard > inst.capacity + tol:
                fail("EQ10", (m, t), onboard, "RANGE", inst.capacity)

    # EQ11 / EQ12
    for j in inst.pickups:
        lhs = sum(plan.b_value(j, m, t) for m in inst.bus_ids for t in trips)
        if abs(lhs - inst.demand.get(j, 0)) > tol:
            fail("EQ11", (j,), lhs, "EQ", inst.demand.get(j, 0))
    for m in inst.bus_ids:
        lhs = sum(plan.b_value(j, m, t) for j in inst.pickups for t in trips) - sum(
            plan.b_value(k, m, t) for k in inst.shelters for t in trips
        )
        if abs(lhs) > tol:
            fail("EQ12", (m,), lhs, "EQ", 0.0)

    # EQ13-EQ15 domains
    for (i, j, m, t), val in sorted(plan.x.items()):
        if min(abs(val), abs(val - 1.0)) > int_tolerance:
            fail("EQ13", (i, j, m, t), val, "BIN", 1.0)
    for (i, m, t), val in sorted(plan.b.items()):
        if abs(val - round(val)) > int_tolerance or val < -int_tolerance:
            fail("EQ14", (i, m, t), val, "INT", 0.0)
    for (i, m, t), val in sorted(plan.times.items()):
        if val < -tol:
            fail("EQ15", (i, m, t), val, "NONNEG", 0.0)

    return FeasibilityReport(out)


def compute_doses(instance: EvacuationInstance, plan: EvacuationPlan) -> dict[tuple, float]:
    """Radiation dose per (pickup, bus) cohort in mSv.

    Transit dose counts the rate-time product of every shelter arc out of the
    pickup against each boarded count; waiting dose is the visit-time-weighted
    boarded count at the pickup itself.
    """
    _plan_dims_ok(instance, plan)
    inst = instance
    doses: dict[tuple, float] = {}
    for i in inst.pickups:
        transit = sum(
            inst.arc_radiation.get((i, j), 0.0) * inst.travel_time[(i, j)]
            for j in inst.shelters
            if (i, j) in inst.travel_time
        )
        eta = inst.node_radiation.get(i, 0.0)
        for m in inst.bus_ids:
            total = 0.0
            for t in range(1, inst.trips + 1):
                bv = plan.b_value(i, m, t)
                total += transit * bv + eta * plan.time_value(i, m, t) * bv
            doses[(i, m)] = total
    return doses


def extract_routes(plan: EvacuationPlan) -> dict[str, list[TripLeg]]:
    """Ordered trip legs per bus with canonical timestamps and onboard loads."""
    inst = plan.instance
    trips = trips_by_bus(plan)
    stamps = arrival_times(inst, trips)
    routes: dict[str, list[TripLeg]] = {}
    for m in inst.bus_ids:
        onboard = 0
        legs = []
        for t0, arc in enumerate(trips[m]):
            dep, arr = stamps[m][t0]
            before = onboard
            if arc is not None:
                j = arc[1]
                delta = int(round(plan.b_value(j, m, t0 + 1)))
                if inst.is_pickup(j):
                    onboard = before + delta
                elif inst.is_shelter(j):
                    onboard = before - delta
            legs.append(
                TripLeg(t0 + 1, arc, dep, arr, before, onboard)
            )
        routes[m] = legs
    return routes
