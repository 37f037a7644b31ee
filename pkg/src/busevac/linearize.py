"""Exact MILP reformulation of the bilinear evacuation model.

Two steps: (1) binary expansion of every boarding count b into bits y, which
turns the integer-times-continuous dose terms into binary-times-continuous
products, and (2) a big-M-free linearization of those products through
auxiliary variables v bounded by the data-derived visit-time ceilings.

Two product-row modes are supported:

* ``exact`` (default): the standard envelope for a product of a binary and a
  bounded nonnegative continuous variable; v equals the product at every
  integer-feasible point.
* ``paper-verbatim``: only the upper envelope rows; this is a relaxation in
  which v may undershoot the product while all rows hold.  Kept selectable
  for fidelity experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formulation import MibpModel
from .instance import EvacuationInstance, bit_width, index_variables, time_upper_bound
from .milp import BINARY, CONTINUOUS, INTEGER, MilpProblem, MilpRow

MODES = ("exact", "paper-verbatim")

__all__ = [
    "BitEncoding",
    "bit_width",
    "encode_bits",
    "decode_bits",
    "linearize_product",
    "linearize_model",
    "MODES",
]


def encode_bits(value: int, width: int) -> tuple[int, ...]:
    """Little-endian binary expansion of ``value`` into ``width`` bits."""
    k = int(value)
    if not 0 <= k <= 2**width - 1:
        raise ValueError(f"value {value} out of range for {width} bits")
    return tuple((k >> n) & 1 for n in range(width))


def decode_bits(bits) -> int:
    """Exact inverse of encode_bits."""
    return sum((1 << n) * int(b) for n, b in enumerate(bits))


@dataclass(frozen=True)
class BitEncoding:
    """Width and value range of the boarding-count expansion."""

    width: int
    capacity: int

    @classmethod
    def for_capacity(cls, capacity: int) -> "BitEncoding":
        return cls(width=bit_width(capacity), capacity=int(capacity))

    def encode(self, value: int) -> tuple[int, ...]:
        return encode_bits(value, self.width)

    def decode(self, bits) -> int:
        return decode_bits(bits)

    @property
    def max_value(self) -> int:
        return 2**self.width - 1


def linearize_product(upper: float, mode: str = "exact") -> list[MilpRow]:
    """Rows tying w to the product x*y for x in [0, upper], y binary.

    Returned rows are over variable names ``x``, ``y``, ``w``.  In exact mode
    they force w = x*y at every point with y integral; in paper-verbatim mode
    they only cap w from above, so (x=7, y=1, w=3) stays feasible.
    """
    if mode not in MODES:
        raise ValueError(f"unknown linearization mode {mode!r}")
    u = float(upper)
    if not u > 0:
        raise ValueError(f"product upper bound must be positive (got {upper})")
    if mode == "exact":
        return [
            MilpRow("w_cap", "LE", {"w": 1.0, "y": -u}, 0.0),       # w <= U y
            MilpRow("w_below_x", "LE", {"w": 1.0, "x": -1.0}, 0.0),  # w <= x
            MilpRow("w_above_x", "GE", {"w": 1.0, "x": -1.0, "y": -u}, -u),  # w >= x - U(1-y)
            MilpRow("w_nonneg", "GE", {"w": 1.0}, 0.0),
        ]
    return [
        MilpRow("w_above_y", "GE", {"w": 1.0, "y": -1.0}, -1.0),  # y - 1 <= w
        MilpRow("w_cap", "LE", {"w": 1.0, "y": -u}, 0.0),          # w <= U y
        MilpRow("w_nonneg", "GE", {"w": 1.0}, 0.0),
        MilpRow("w_box", "LE", {"w": 1.0}, u),
    ]


def linearize_model(
    mibp: MibpModel, instance: EvacuationInstance, mode: str = "exact"
) -> MilpProblem:
    """Transform the bilinear model into a solver-ready MILP.

    The objective and all purely linear families carry over as rows; the dose
    rows are rewritten over the product variables; bit-linking rows define
    every boarding count from its expansion bits; product rows (mode
    dependent) tie each v to its (visit time, bit) pair with ceilings from
    ``time_upper_bound``.  A non-finite dose limit drops the dose rows and
    nothing else.
    """
    if mode not in MODES:
        raise ValueError(f"unknown linearization mode {mode!r}")
    if mibp.instance is not instance and mibp.instance != instance:
        raise ValueError("model was built from a different instance")

    inst = instance
    space = index_variables(inst, with_bits=True)
    enc = BitEncoding.for_capacity(inst.capacity)
    tub = time_upper_bound(inst)
    name = space.name_of

    prob = MilpProblem(metadata={"mode": mode})

    for key in space.iter_kind("X"):
        prob.add_var(name(key), 0.0, 1.0, BINARY)
    for key in space.iter_kind("T"):
        prob.add_var(name(key), 0.0, kind=CONTINUOUS)
    for key in space.iter_kind("B"):
        prob.add_var(name(key), 0.0, float(inst.capacity), INTEGER)
    for key in space.iter_kind("Y"):
        prob.add_var(name(key), 0.0, 1.0, BINARY)
    for key in space.iter_kind("V"):
        _, n, i, m, t = key
        prob.add_var(name(key), 0.0, (2**n) * tub[(i, m, t)], CONTINUOUS)

    prob.objective = {name(k): c for k, c in mibp.objective.items()}

    def row_name(eq: str, key: tuple, suffix: str = "") -> str:
        return f"{eq.lower()}{suffix}_" + "_".join(str(p) for p in key)

    # dose rows over the product variables
    if inst.dose_limit != float("inf"):
        for con in mibp.family("EQ1"):
            coeffs = {name(k): c for k, c in con.coeffs.items() if c != 0.0}
            for (tkey, bkey, eta) in con.bilinear:
                if eta == 0.0:
                    continue
                _, i, m, t = bkey
                for n in range(enc.width):
                    vn = name(("V", n, i, m, t))
                    coeffs[vn] = coeffs.get(vn, 0.0) + eta
            prob.add_row(row_name("EQ1", con.key), "LE", coeffs, con.rhs)

    # the linear families carry over unchanged (ranges split in two)
    for eq in ("EQ2", "EQ3", "EQ4", "EQ5", "EQ6", "EQ7", "EQ8", "EQ9", "EQ10", "EQ11", "EQ12"):
        for con in mibp.family(eq):
            coeffs = {name(k): c for k, c in con.coeffs.items()}
            if con.sense == "RANGE":
                prob.add_row(row_name(eq, con.key, "lo"), "GE", coeffs, con.lo)
                prob.add_row(row_name(eq, con.key, "hi"), "LE", coeffs, con.rhs)
            else:
                prob.add_row(row_name(eq, con.key), con.sense, coeffs, con.rhs)

    # bit-linking rows: b = sum 2^n y
    for bkey in space.iter_kind("B"):
        _, i, m, t = bkey
        coeffs = {name(bkey): 1.0}
        for n in range(enc.width):
            coeffs[name(("Y", n, i, m, t))] = -float(2**n)
        prob.add_row(f"bl_{i}_m{m}_t{t}", "EQ", coeffs, 0.0)

    # product rows: v_n tracks 2^n * T * y_n with ceiling U = 2^n * Tbar
    for bkey in space.iter_kind("B"):
        _, i, m, t = bkey
        tname = name(("T", i, m, t))
        for n in range(enc.width):
            vname = name(("V", n, i, m, t))
            yname = name(("Y", n, i, m, t))
            u = (2**n) * tub[(i, m, t)]
            scale = float(2**n)
            tag = f"{n}_{i}_m{m}_t{t}"
            prob.add_row(f"pu{tag}", "LE", {vname: 1.0, yname: -u}, 0.0)
            if mode == "exact":
                prob.add_row(f"pt{tag}", "LE", {vname: 1.0, tname: -scale}, 0.0)
                prob.add_row(f"pl{tag}", "GE", {vname: 1.0, tname: -scale, yname: -u}, -u)
            else:
                prob.add_row(f"py{tag}", "GE", {vname: 1.0, yname: -1.0}, -1.0)

    return prob
