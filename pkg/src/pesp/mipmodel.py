"""Backend-agnostic mixed-integer model container and MPS serialization.

The writer emits the classic column-oriented MPS layout (ROWS / COLUMNS /
RHS / BOUNDS) with an OBJSENSE section for maximization.  Variable names
longer than the historical 8-character limit are kept verbatim; every
mainstream reader accepts this.  Output is byte-deterministic for a given
model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = float("inf")
    is_integer: bool = False


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple[tuple[int, float], ...]  # (variable index, coefficient)
    sense: str  # "L" <=, "G" >=, "E" =
    rhs: float


@dataclass
class MIPModel:
    name: str
    sense: str = "max"  # "max" | "min"
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = float("inf"),
                     is_integer: bool = False, obj: float = 0.0) -> int:
        idx = len(self.variables)
        self.variables.append(Variable(name, lb, ub, is_integer))
        if obj != 0.0:
            self.objective[idx] = obj
        return idx

    def add_constraint(self, name: str, coeffs: list[tuple[int, float]],
                       sense: str, rhs: float) -> None:
        if sense not in ("L", "G", "E"):
            raise ValueError(f"constraint sense must be L/G/E, got {sense!r}")
        self.constraints.append(Constraint(name, tuple(coeffs), sense, rhs))

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def variable_index(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    # -- MPS ----------------------------------------------------------------

    def to_mps(self) -> str:
        def num(x: float) -> str:
            return repr(float(x))

        lines = [f"NAME          {self.name}"]
        lines.append("OBJSENSE")
        lines.append(f"    {'MAX' if self.sense == 'max' else 'MIN'}")
        lines.append("ROWS")
        lines.append(" N  OBJ")
        for con in self.constraints:
            lines.append(f" {con.sense}  {con.name}")

        # column-major entries: objective first, then constraints in order
        col_entries: list[list[tuple[str, float]]] = [[] for _ in self.variables]
        for idx, coef in sorted(self.objective.items()):
            col_entries[idx].append(("OBJ", coef))
        for con in self.constraints:
            for idx, coef in con.coeffs:
                col_entries[idx].append((con.name, coef))

        lines.append("COLUMNS")
        in_int = False
        marker = 0
        for var, entries in zip(self.variables, col_entries):
            if var.is_integer != in_int:
                tag = "INTORG" if var.is_integer else "INTEND"
                lines.append(f"    MARKER{marker:04d}  'MARKER'  '{tag}'")
                in_int = var.is_integer
                marker += 1
            for row, coef in entries:
                lines.append(f"    {var.name:<10} {row:<10} {num(coef)}")
        if in_int:
            lines.append(f"    MARKER{marker:04d}  'MARKER'  'INTEND'")

        lines.append("RHS")
        for con in self.constraints:
            if con.rhs != 0.0:
                lines.append(f"    RHS       {con.name:<10} {num(con.rhs)}")

        lines.append("BOUNDS")
        for var in self.variables:
            if var.is_integer and var.lb == 0.0 and var.ub == 1.0:
                lines.append(f" BV BND       {var.name}")
                continue
            if var.lb != 0.0:
                lines.append(f" LO BND       {var.name:<10} {num(var.lb)}")
            if np.isfinite(var.ub):
                lines.append(f" UP BND       {var.name:<10} {num(var.ub)}")
        lines.append("ENDATA")
        return "\n".join(lines) + "\n"


def parse_mps(text: str) -> MIPModel:
    """Parse the MPS subset produced by MIPModel.to_mps (whitespace form)."""
    model = MIPModel(name="parsed", sense="min")
    section = None
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    obj_name = None
    col_data: dict[str, list[tuple[str, float]]] = {}
    col_order: list[str] = []
    integer_cols: set[str] = set()
    rhs: dict[str, float] = {}
    bounds: dict[str, list[tuple[str, float]]] = {}
    in_int = False
    pending_objsense = False

    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        head = raw[:1].strip()
        fields = raw.split()
        if head:  # section header line
            section = fields[0]
            if section == "NAME":
                model.name = fields[1] if len(fields) > 1 else "parsed"
            pending_objsense = section == "OBJSENSE"
            if pending_objsense and len(fields) > 1:
                model.sense = "max" if fields[1].upper() == "MAX" else "min"
                pending_objsense = False
            continue
        if pending_objsense:
            model.sense = "max" if fields[0].upper() == "MAX" else "min"
            pending_objsense = False
            continue
        if section == "ROWS":
            sense, name = fields[0], fields[1]
            if sense == "N":
                obj_name = name
            else:
                row_sense[name] = sense
                row_order.append(name)
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[1] == "'MARKER'":
                in_int = fields[2] == "'INTORG'"
                continue
            name = fields[0]
            if name not in col_data:
                col_data[name] = []
                col_order.append(name)
                if in_int:
                    integer_cols.add(name)
            pairs = fields[1:]
            for pos in range(0, len(pairs) - 1, 2):
                col_data[name].append((pairs[pos], float(pairs[pos + 1])))
        elif section == "RHS":
            pairs = fields[1:]
            for pos in range(0, len(pairs) - 1, 2):
                rhs[pairs[pos]] = float(pairs[pos + 1])
        elif section == "BOUNDS":
            btype, _, name = fields[0], fields[1], fields[2]
            value = float(fields[3]) if len(fields) > 3 else 0.0
            bounds.setdefault(name, []).append((btype, value))

    var_idx: dict[str, int] = {}
    for name in col_order:
        lb, ub = 0.0, float("inf")
        for btype, value in bounds.get(name, []):
            if btype == "UP":
                ub = value
            elif btype == "LO":
                lb = value
            elif btype == "FX":
                lb = ub = value
            elif btype == "BV":
                lb, ub = 0.0, 1.0
        var_idx[name] = model.add_variable(
            name, lb=lb, ub=ub, is_integer=name in integer_cols
        )

    row_coeffs: dict[str, list[tuple[int, float]]] = {name: [] for name in row_order}
    for name in col_order:
        for row, coef in col_data[name]:
            if row == obj_name:
                model.objective[var_idx[name]] = model.objective.get(var_idx[name], 0.0) + coef
            else:
                row_coeffs[row].append((var_idx[name], coef))
    for name in row_order:
        model.add_constraint(name, row_coeffs[name], row_sense[name], rhs.get(name, 0.0))
    return model
