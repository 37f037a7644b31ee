"""Plan files: one `name value` line per nonzero plan variable.

The header records the instance label and linearization mode.  Files are
written in index order, so identical plans serialize byte-identically.
"""

from __future__ import annotations

from .formulation import EvacuationPlan
from .instance import EvacuationInstance, index_variables


def _fmt(val: float) -> str:
    if float(val).is_integer():
        return str(int(val))
    return repr(float(val))


def write_plan(plan: EvacuationPlan, instance_label: str = "", mode: str = "exact") -> str:
    space = index_variables(plan.instance, with_bits=False)
    lines = [f"# instance {instance_label}", f"# mode {mode}"]
    for key in space.iter_kind("X"):
        val = plan.x.get(key[1:], 0.0)
        if val:
            lines.append(f"{space.name_of(key)} {_fmt(val)}")
    for key in space.iter_kind("T"):
        val = plan.times.get(key[1:], 0.0)
        if val:
            lines.append(f"{space.name_of(key)} {_fmt(val)}")
    for key in space.iter_kind("B"):
        val = plan.b.get(key[1:], 0.0)
        if val:
            lines.append(f"{space.name_of(key)} {_fmt(val)}")
    return "\n".join(lines) + "\n"


def read_plan(instance: EvacuationInstance, text: str) -> tuple[EvacuationPlan, dict]:
    """Parse a plan file against an instance; unknown names are errors."""
    space = index_variables(instance, with_bits=False)
    lookup = space.name_to_key
    meta: dict[str, str] = {}
    plan = EvacuationPlan(instance=instance)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split(None, 1)
            if len(parts) == 2 and parts[0] in ("instance", "mode"):
                meta[parts[0]] = parts[1]
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'name value', got {line!r}")
        name, value = parts
        key = lookup.get(name)
        if key is None:
            raise ValueError(f"line {lineno}: unknown plan variable {name!r}")
        val = float(value)
        if key[0] == "X":
            plan.x[key[1:]] = val
        elif key[0] == "T":
            plan.times[key[1:]] = val
        else:
            plan.b[key[1:]] = val
    return plan, meta
