"""Fixed-format MPS export and import for MilpProblem.

The writer emits NAME/ROWS/COLUMNS/RHS/BOUNDS/ENDATA with one coefficient per
line, integer variables wrapped in INTORG/INTEND markers, and numbers printed
with 12 significant digits.  Names longer than the field width are truncated
deterministically with a uniquifying ``~k`` suffix.  Export then import then
export is byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .milp import BINARY, CONTINUOUS, INTEGER, MilpProblem, MilpRow

NAME_WIDTH = 24

_SENSE_TO_MPS = {"LE": "L", "GE": "G", "EQ": "E"}
_MPS_TO_SENSE = {v: k for k, v in _SENSE_TO_MPS.items()}


class MpsFormatError(ValueError):
    """Malformed MPS input; message carries the offending line number."""


def _fmt(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return f"{x:.12g}"


@dataclass
class MpsWriter:
    """Serializes a MilpProblem; records any names it had to shorten."""

    name_width: int = NAME_WIDTH
    renames: dict[str, str] = field(default_factory=dict)

    def _shorten(self, name: str, taken: set[str]) -> str:
        cand = name if len(name) <= self.name_width else name[: self.name_width]
        if cand not in taken:
            taken.add(cand)
            if cand != name:
                self.renames[name] = cand
            return cand
        k = 0
        while True:
            suffix = f"~{k}"
            cand = name[: self.name_width - len(suffix)] + suffix
            if cand not in taken:
                taken.add(cand)
                self.renames[name] = cand
                return cand
            k += 1

    def write(self, problem: MilpProblem) -> str:
        bad = problem.validate()
        if bad:
            raise ValueError("cannot export invalid problem: " + "; ".join(bad))
        taken: set[str] = set()
        obj = self._shorten(problem.objective_name, taken)
        row_names = {r.name: self._shorten(r.name, taken) for r in problem.rows}
        col_taken: set[str] = set()
        col_names = {v.name: self._shorten(v.name, col_taken) for v in problem.variables}

        w = self.name_width
        out: list[str] = []
        out.append(f"NAME          {problem.metadata.get('name', 'BUSEVAC')}")
        if "instance" in problem.metadata:
            out.append(f"* INSTANCE {problem.metadata['instance']}")
        if "mode" in problem.metadata:
            out.append(f"* MODE {problem.metadata['mode']}")
        out.append("ROWS")
        out.append(f" N  {obj}")
        for r in problem.rows:
            out.append(f" {_SENSE_TO_MPS[r.sense]}  {row_names[r.name]}")

        # column-major coefficient listing: objective first, then rows in order
        by_var: dict[str, list[tuple[str, float]]] = {v.name: [] for v in problem.variables}
        for n, c in problem.objective.items():
            by_var[n].append((obj, c))
        for r in problem.rows:
            for n, c in r.coeffs.items():
                by_var[n].append((row_names[r.name], c))

        out.append("COLUMNS")
        in_int = False
        marker = 0
        for v in problem.variables:
            is_int = v.kind in (BINARY, INTEGER)
            if is_int and not in_int:
                out.append(f"    MARKER{marker:<18}'MARKER'                 'INTORG'")
                marker += 1
                in_int = True
            elif not is_int and in_int:
                out.append(f"    MARKER{marker:<18}'MARKER'                 'INTEND'")
                marker += 1
                in_int = False
            for row, coef in by_var[v.name]:
                out.append(f"    {col_names[v.name]:<{w}}  {row:<{w}}  {_fmt(coef)}")
        if in_int:
            out.append(f"    MARKER{marker:<18}'MARKER'                 'INTEND'")

        out.append("RHS")
        for r in problem.rows:
            if r.rhs != 0.0:
                out.append(f"    RHS{'':<{w - 3}}  {row_names[r.name]:<{w}}  {_fmt(r.rhs)}")

        bound_lines: list[str] = []
        for v in problem.variables:
            nm = col_names[v.name]
            if v.kind == BINARY:
                bound_lines.append(f" BV BND{'':<{w - 3}}  {nm}")
                continue
            if v.lb == v.ub:
                bound_lines.append(f" FX BND{'':<{w - 3}}  {nm:<{w}}  {_fmt(v.lb)}")
                continue
            if v.lb == -math.inf:
                bound_lines.append(f" MI BND{'':<{w - 3}}  {nm}")
            elif v.lb != 0.0:
                bound_lines.append(f" LO BND{'':<{w - 3}}  {nm:<{w}}  {_fmt(v.lb)}")
            if v.ub != math.inf:
                bound_lines.append(f" UP BND{'':<{w - 3}}  {nm:<{w}}  {_fmt(v.ub)}")
        if bound_lines:
            out.append("BOUNDS")
            out.extend(bound_lines)
        out.append("ENDATA")
        return "\n".join(out) + "\n"


def export_mps(problem: MilpProblem, name_width: int = NAME_WIDTH) -> str:
    """Serialize to fixed-format MPS text (see MpsWriter for rename reports)."""
    return MpsWriter(name_width=name_width).write(problem)


_SECTION_ORDER = ["NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"]


def import_mps(text: str) -> MilpProblem:
    """Parse MPS text back into a MilpProblem.

    Enforces section order, rejects references to unknown rows, duplicate
    coefficient entries and RANGES content; all errors carry line numbers.
    """
    prob = MilpProblem()
    prob.objective_name = ""
    section = None
    section_rank = -1
    in_int = False
    var_order: list[str] = []
    var_coeffs: dict[str, list[tuple[str, float]]] = {}
    var_kind: dict[str, str] = {}
    row_by_name: dict[str, MilpRow] = {}
    seen_pairs: set[tuple[str, str]] = set()
    bounds: dict[str, list[tuple[str, float | None]]] = {}

    def err(lineno: int, msg: str):
        raise MpsFormatError(f"line {lineno}: {msg}")

    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        if raw.startswith("*"):
            parts = raw[1:].split(None, 1)
            if len(parts) == 2 and parts[0] == "INSTANCE":
                prob.metadata["instance"] = parts[1].strip()
            elif len(parts) == 2 and parts[0] == "MODE":
                prob.metadata["mode"] = parts[1].strip()
            continue
        head = raw.split(None, 1)[0]
        if head in _SECTION_ORDER and not raw.startswith(" "):
            rank = _SECTION_ORDER.index(head)
            if rank <= section_rank:
                err(lineno, f"section {head} out of order")
            section_rank = rank
            section = head
            if head == "NAME":
                rest = raw.split(None, 1)
                prob.metadata["name"] = rest[1].strip() if len(rest) > 1 else ""
            continue
        fields = raw.split()
        if section == "ROWS":
            if len(fields) != 2:
                err(lineno, f"malformed ROWS entry: {raw.strip()}")
            code, name = fields
            if code == "N":
                if prob.objective_name:
                    err(lineno, "multiple objective rows")
                prob.objective_name = name
            elif code in _MPS_TO_SENSE:
                if name in row_by_name:
                    err(lineno, f"duplicate row {name}")
                row = MilpRow(name, _MPS_TO_SENSE[code], {}, 0.0)
                row_by_name[name] = row
                prob.rows.append(row)
            else:
                err(lineno, f"unknown row type {code}")
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[1] == "'MARKER'":
                if fields[2] == "'INTORG'":
                    in_int = True
                elif fields[2] == "'INTEND'":
                    in_int = False
                else:
                    err(lineno, f"unknown marker {fields[2]}")
                continue
            if len(fields) not in (3, 5):
                err(lineno, f"malformed COLUMNS entry: {raw.strip()}")
            col = fields[0]
            if col not in var_coeffs:
                var_coeffs[col] = []
                var_order.append(col)
                var_kind[col] = INTEGER if in_int else CONTINUOUS
            for k in range(1, len(fields), 2):
                row_name, val = fields[k], fields[k + 1]
                if row_name != prob.objective_name and row_name not in row_by_name:
                    err(lineno, f"COLUMNS references unknown row {row_name}")
                if (col, row_name) in seen_pairs:
                    err(lineno, f"duplicate entry for column {col} in row {row_name}")
                seen_pairs.add((col, row_name))
                var_coeffs[col].append((row_name, float(val)))
        elif section == "RHS":
            if len(fields) not in (3, 5):
                err(lineno, f"malformed RHS entry: {raw.strip()}")
            for k in range(1, len(fields), 2):
                row_name, val = fields[k], fields[k + 1]
                if row_name not in row_by_name:
                    err(lineno, f"RHS references unknown row {row_name}")
                row_by_name[row_name].rhs = float(val)
        elif section == "RANGES":
            err(lineno, "RANGES entries are not supported")
        elif section == "BOUNDS":
            code = fields[0]
            if code in ("BV", "MI", "PL", "FR"):
                if len(fields) != 3:
                    err(lineno, f"malformed BOUNDS entry: {raw.strip()}")
                bounds.setdefault(fields[2], []).append((code, None))
            elif code in ("UP", "LO", "FX"):
                if len(fields) != 4:
                    err(lineno, f"malformed BOUNDS entry: {raw.strip()}")
                bounds.setdefault(fields[2], []).append((code, float(fields[3])))
            else:
                err(lineno, f"unknown bound type {code}")
        elif section in ("NAME", "ENDATA"):
            err(lineno, f"unexpected data in section {section}")
        else:
            err(lineno, f"data outside any section: {raw.strip()}")

    if section_rank < _SECTION_ORDER.index("ENDATA"):
        raise MpsFormatError("missing ENDATA")
    if not prob.objective_name:
        raise MpsFormatError("no objective (type N) row declared")

    for col in var_order:
        kind = var_kind[col]
        lb, ub = 0.0, math.inf
        for code, val in bounds.get(col, []):
            if code == "BV":
                kind, lb, ub = BINARY, 0.0, 1.0
            elif code == "UP":
                ub = val
            elif code == "LO":
                lb = val
            elif code == "FX":
                lb = ub = val
            elif code == "MI":
                lb = -math.inf
            elif code == "FR":
                lb, ub = -math.inf, math.inf
            elif code == "PL":
                ub = math.inf
        prob.add_var(col, lb, ub, kind)
        for row_name, val in var_coeffs[col]:
            if row_name == prob.objective_name:
                prob.objective[col] = val
            else:
                row_by_name[row_name].coeffs[col] = val
    if not prob.metadata.get("name"):
        prob.metadata.pop("name", None)
    return prob
