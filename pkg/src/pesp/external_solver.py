"""Bundled MPS solver executable.

Reads an MPS file, solves it with HiGHS, and writes a solution file with an
objective line followed by one "name value" line per variable.  Serves as a
ready-made external solver command:

    python -m pesp.external_solver {mps} {sol}
"""

from __future__ import annotations

import sys

from .mipmodel import parse_mps
from .stochprog import solve_mip_model


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m pesp.external_solver MPS_FILE SOLUTION_FILE",
              file=sys.stderr)
        return 2
    mps_path, sol_path = argv
    with open(mps_path) as f:
        model = parse_mps(f.read())
    objective, values = solve_mip_model(model)
    with open(sol_path, "w") as f:
        f.write(f"objective {objective!r}\n")
        for name, value in values.items():
            f.write(f"{name} {value!r}\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
