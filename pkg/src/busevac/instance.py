"""Evacuation network data model and the decision-variable index space.

An instance is a three-layer directed network (depots -> pickups <-> shelters)
with travel times, radiation rates, demands, a homogeneous bus fleet and a
fixed trip horizon.  All downstream modules (model builder, linearizer, file
IO, solver plumbing) share the deterministic variable indexing defined here.

Node and bus identifiers are opaque strings; every ordering used for
deterministic indexing is plain lexicographic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

Arc = tuple[str, str]

VAR_KINDS = ("X", "T", "B", "Y", "V")


class InstanceError(ValueError):
    """Raised when an operation is handed a structurally unusable instance."""


@dataclass(frozen=True, order=True)
class Bus:
    """A bus and the depot it is dispatched from."""

    ident: str
    depot: str


def _canonical_buses(buses) -> tuple[Bus, ...]:
    out = []
    for item in buses:
        if isinstance(item, Bus):
            out.append(item)
        else:
            ident, depot = item
            out.append(Bus(str(ident), str(depot)))
    return tuple(sorted(out, key=lambda b: b.ident))


@dataclass(frozen=True)
class EvacuationInstance:
    """Immutable evacuation network plus all scalar parameters.

    Fields mirror the planning model: `travel_time` (seconds per arc),
    `arc_radiation` (mSv/s in transit), `node_radiation` (mSv/s while waiting
    at a pickup), `dose_limit` (mSv per evacuee cohort), `capacity` (seats per
    bus), `demand` (evacuees per pickup), and `trips` (horizon T, trips are
    numbered 1..T).
    """

    depots: tuple[str, ...]
    pickups: tuple[str, ...]
    shelters: tuple[str, ...]
    arcs: tuple[Arc, ...]
    travel_time: dict[Arc, float]
    arc_radiation: dict[Arc, float]
    node_radiation: dict[str, float]
    dose_limit: float
    capacity: int
    demand: dict[str, int]
    buses: tuple[Bus, ...]
    trips: int

    def __post_init__(self):
        object.__setattr__(self, "depots", tuple(sorted(str(d) for d in self.depots)))
        object.__setattr__(self, "pickups", tuple(sorted(str(p) for p in self.pickups)))
        object.__setattr__(self, "shelters", tuple(sorted(str(s) for s in self.shelters)))
        object.__setattr__(
            self, "arcs", tuple(sorted((str(i), str(j)) for i, j in self.arcs))
        )
        object.__setattr__(self, "travel_time", dict(self.travel_time))
        object.__setattr__(self, "arc_radiation", dict(self.arc_radiation))
        object.__setattr__(self, "node_radiation", dict(self.node_radiation))
        object.__setattr__(self, "demand", dict(self.demand))
        object.__setattr__(self, "buses", _canonical_buses(self.buses))
        object.__setattr__(self, "trips", int(self.trips))
        object.__setattr__(self, "capacity", int(self.capacity))
        object.__setattr__(self, "dose_limit", float(self.dose_limit))

    # -- derived views -----------------------------------------------------

    @cached_property
    def nodes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.depots) | set(self.pickups) | set(self.shelters)))

    @cached_property
    def pickup_shelter_nodes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.pickups) | set(self.shelters)))

    @cached_property
    def bus_ids(self) -> tuple[str, ...]:
        return tuple(b.ident for b in self.buses)

    @cached_property
    def home_depot(self) -> dict[str, str]:
        return {b.ident: b.depot for b in self.buses}

    @cached_property
    def arcs_into(self) -> dict[str, tuple[Arc, ...]]:
        by_head: dict[str, list[Arc]] = {n: [] for n in self.nodes}
        for a in self.arcs:
            if a[1] in by_head:
                by_head[a[1]].append(a)
        return {n: tuple(v) for n, v in by_head.items()}

    @cached_property
    def arcs_out_of(self) -> dict[str, tuple[Arc, ...]]:
        by_tail: dict[str, list[Arc]] = {n: [] for n in self.nodes}
        for a in self.arcs:
            if a[0] in by_tail:
                by_tail[a[0]].append(a)
        return {n: tuple(v) for n, v in by_tail.items()}

    def is_depot(self, n: str) -> bool:
        return n in self._depot_set

    def is_pickup(self, n: str) -> bool:
        return n in self._pickup_set

    def is_shelter(self, n: str) -> bool:
        return n in self._shelter_set

    @cached_property
    def _depot_set(self) -> frozenset[str]:
        return frozenset(self.depots)

    @cached_property
    def _pickup_set(self) -> frozenset[str]:
        return frozenset(self.pickups)

    @cached_property
    def _shelter_set(self) -> frozenset[str]:
        return frozenset(self.shelters)

    @cached_property
    def total_demand(self) -> int:
        return sum(self.demand.get(p, 0) for p in self.pickups)


def validate_instance(instance: EvacuationInstance) -> list[str]:
    """Check every structural invariant; return one message per violation.

    Violations are data, not exceptions: an empty list means the instance is
    well formed.  Each message names the offending field and the failed rule.
    """
    v: list[str] = []
    dep, pick, shel = set(instance.depots), set(instance.pickups), set(instance.shelters)

    if dep & pick or dep & shel or pick & shel:
        v.append(
            "nodes: depot/pickup/shelter id sets must be disjoint "
            f"(overlap: {sorted((dep & pick) | (dep & shel) | (pick & shel))})"
        )
    if len(instance.bus_ids) != len(set(instance.bus_ids)):
        v.append("buses: duplicate bus ids")

    known = dep | pick | shel
    for i, j in instance.arcs:
        if i not in known or j not in known:
            v.append(f"arcs: arc ({i}, {j}) references an undeclared node")
            continue
        ok = (i in dep and j in pick) or (i in pick and j in shel) or (i in shel and j in pick)
        if not ok:
            kind_i = "D" if i in dep else ("P" if i in pick else "S")
            kind_j = "D" if j in dep else ("P" if j in pick else "S")
            v.append(f"arcs: forbidden {kind_i}->{kind_j} arc ({i}, {j})")

    for a in instance.arcs:
        t = instance.travel_time.get(a)
        if t is None:
            v.append(f"travel_time: missing value for arc {a}")
        elif not (t > 0) or math.isinf(t) or math.isnan(t):
            v.append(f"travel_time: must be strictly positive on arc {a} (got {t})")
        r = instance.arc_radiation.get(a, 0.0)
        if r < 0 or math.isnan(r):
            v.append(f"arc_radiation: nonnegative rate required on arc {a} (got {r})")

    for p in instance.pickups:
        r = instance.node_radiation.get(p, 0.0)
        if r < 0 or math.isnan(r):
            v.append(f"node_radiation: nonnegative rate required at {p} (got {r})")
        d = instance.demand.get(p, 0)
        if d < 0 or d != int(d):
            v.append(f"demand: demand nonnegative integer required at {p} (got {d})")
    for n in instance.demand:
        if n not in pick:
            v.append(f"demand: entry for non-pickup node {n}")
    for n in instance.node_radiation:
        if n not in pick:
            v.append(f"node_radiation: entry for non-pickup node {n}")

    if instance.capacity < 1:
        v.append(f"capacity: positive bus capacity required (got {instance.capacity})")
    if instance.dose_limit < 0 or math.isnan(instance.dose_limit):
        v.append(f"dose_limit: nonnegative limit required (got {instance.dose_limit})")
    if instance.trips < 1:
        v.append(f"trips: horizon must be at least 1 (got {instance.trips})")

    for b in instance.buses:
        if b.depot not in dep:
            v.append(f"buses: bus {b.ident} homed at unknown depot {b.depot}")
    return v


def bit_width(capacity: int) -> int:
    """Smallest number of bits w with 2**w - 1 >= capacity.

    This is the width needed for an exact little-endian binary expansion of
    any integer in [0, capacity].
    """
    q = int(capacity)
    if q < 1:
        raise ValueError(f"capacity must be a positive integer (got {capacity})")
    return q.bit_length()


@dataclass(frozen=True)
class TimeUpperBound:
    """Per (node, bus, trip) visit-time ceiling in seconds.

    A bus traverses at most one arc per trip, so any visit time on trip t is
    bounded by t times the longest single leg.  The bound is what makes the
    product linearization big-M free: it is data derived, not a guessed
    constant.
    """

    max_leg: float
    trips: int

    def __getitem__(self, key: tuple[str, str, int]) -> float:
        _node, _bus, t = key
        if not 1 <= t <= self.trips:
            raise KeyError(key)
        return t * self.max_leg

    def value(self, node: str, bus: str, trip: int) -> float:
        return self[(node, bus, trip)]


def time_upper_bound(instance: EvacuationInstance) -> TimeUpperBound:
    """Ceiling on every visit-time variable: trip index times the longest leg."""
    if not instance.arcs:
        raise InstanceError("instance has no arcs; visit-time bounds are undefined")
    max_leg = max(instance.travel_time[a] for a in instance.arcs)
    return TimeUpperBound(max_leg=max_leg, trips=instance.trips)


@dataclass(frozen=True)
class VariableSpace:
    """Deterministic bijection between structured variable keys and 0..n-1.

    Keys are plain tuples with the family letter first:

    * ``("X", i, j, m, t)`` -- arc-traversal binaries,
    * ``("T", i, m, t)``    -- visit-time variables (seconds),
    * ``("B", i, m, t)``    -- evacuees boarded/released at a pickup/shelter,
    * ``("Y", n, i, m, t)`` -- expansion bits of B (present when n_bits > 0),
    * ``("V", n, i, m, t)`` -- products of T with Y bits, pre-scaled by 2**n.

    Flat positions sort by family, then arc/node (lexicographic), then bus,
    then trip, then bit, so the layout is reproducible from the instance
    alone.
    """

    instance: EvacuationInstance
    n_bits: int = 0

    @cached_property
    def _arc_idx(self) -> dict[Arc, int]:
        return {a: k for k, a in enumerate(self.instance.arcs)}

    @cached_property
    def _node_idx(self) -> dict[str, int]:
        return {n: k for k, n in enumerate(self.instance.nodes)}

    @cached_property
    def _ps_idx(self) -> dict[str, int]:
        return {n: k for k, n in enumerate(self.instance.pickup_shelter_nodes)}

    @cached_property
    def _bus_idx(self) -> dict[str, int]:
        return {b: k for k, b in enumerate(self.instance.bus_ids)}

    @cached_property
    def counts(self) -> dict[str, int]:
        inst = self.instance
        n_arc, n_node = len(inst.arcs), len(inst.nodes)
        n_ps, n_bus, n_t = len(inst.pickup_shelter_nodes), len(inst.bus_ids), inst.trips
        c = {
            "X": n_arc * n_bus * n_t,
            "T": n_node * n_bus * n_t,
            "B": n_ps * n_bus * n_t,
            "Y": n_ps * n_bus * n_t * self.n_bits,
            "V": n_ps * n_bus * n_t * self.n_bits,
        }
        return c

    @cached_property
    def _offsets(self) -> dict[str, int]:
        off, acc = {}, 0
        for kind in VAR_KINDS:
            off[kind] = acc
            acc += self.counts[kind]
        return off

    @property
    def size(self) -> int:
        return sum(self.counts.values())

    # -- structured key -> flat position ------------------------------------

    def pos_of(self, key: tuple) -> int:
        inst = self.instance
        kind = key[0]
        n_bus, n_t = len(inst.bus_ids), inst.trips
        if kind == "X":
            _, i, j, m, t = key
            a = self._arc_idx[(i, j)]
            return self._offsets["X"] + (a * n_bus + self._bus_idx[m]) * n_t + (t - 1)
        if kind == "T":
            _, i, m, t = key
            return self._offsets["T"] + (self._node_idx[i] * n_bus + self._bus_idx[m]) * n_t + (t - 1)
        if kind == "B":
            _, i, m, t = key
            return self._offsets["B"] + (self._ps_idx[i] * n_bus + self._bus_idx[m]) * n_t + (t - 1)
        if kind in ("Y", "V"):
            n, i, m, t = key[1], key[2], key[3], key[4]
            if not 0 <= n < self.n_bits:
                raise KeyError(key)
            base = ((self._ps_idx[i] * n_bus + self._bus_idx[m]) * n_t + (t - 1)) * self.n_bits + n
            return self._offsets[kind] + base
        raise KeyError(key)

    def key_of(self, pos: int) -> tuple:
        if not 0 <= pos < self.size:
            raise IndexError(pos)
        inst = self.instance
        n_bus, n_t = len(inst.bus_ids), inst.trips
        for kind in reversed(VAR_KINDS):
            if pos >= self._offsets[kind]:
                rel = pos - self._offsets[kind]
                break
        if kind == "X":
            a, rem = divmod(rel, n_bus * n_t)
            m, t = divmod(rem, n_t)
            i, j = inst.arcs[a]
            return ("X", i, j, inst.bus_ids[m], t + 1)
        if kind == "T":
            i, rem = divmod(rel, n_bus * n_t)
            m, t = divmod(rem, n_t)
            return ("T", inst.nodes[i], inst.bus_ids[m], t + 1)
        if kind == "B":
            i, rem = divmod(rel, n_bus * n_t)
            m, t = divmod(rem, n_t)
            return ("B", inst.pickup_shelter_nodes[i], inst.bus_ids[m], t + 1)
        i, rem = divmod(rel, n_bus * n_t * self.n_bits)
        rem2, n = divmod(rem, self.n_bits)
        m, t = divmod(rem2, n_t)
        return (kind, n, inst.pickup_shelter_nodes[i], inst.bus_ids[m], t + 1)

    # -- iteration and naming ------------------------------------------------

    def iter_kind(self, kind: str) -> Iterator[tuple]:
        start = self._offsets[kind]
        for pos in range(start, start + self.counts[kind]):
            yield self.key_of(pos)

    def iter_keys(self) -> Iterator[tuple]:
        for pos in range(self.size):
            yield self.key_of(pos)

    @staticmethod
    def name_of(key: tuple) -> str:
        kind = key[0]
        if kind == "X":
            _, i, j, m, t = key
            return f"x_{i}_{j}_m{m}_t{t}"
        if kind == "T":
            _, i, m, t = key
            return f"Tv_{i}_m{m}_t{t}"
        if kind == "B":
            _, i, m, t = key
            return f"b_{i}_m{m}_t{t}"
        if kind == "Y":
            _, n, i, m, t = key
            return f"y{n}_{i}_m{m}_t{t}"
        if kind == "V":
            _, n, i, m, t = key
            return f"v{n}_{i}_m{m}_t{t}"
        raise KeyError(key)

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(self.name_of(self.key_of(p)) for p in range(self.size))

    @cached_property
    def name_to_key(self) -> dict[str, tuple]:
        return {self.names[p]: self.key_of(p) for p in range(self.size)}


def index_variables(instance: EvacuationInstance, with_bits: bool = False) -> VariableSpace:
    """Build the deterministic variable index space for an instance.

    With ``with_bits`` the space additionally carries the Y (expansion bits)
    and V (time-bit products) families sized by ``bit_width(capacity)``.
    """
    bits = bit_width(instance.capacity) if with_bits else 0
    return VariableSpace(instance=instance, n_bits=bits)
