"""Solve the seeded instances with cvxpy/Clarabel and freeze the optimal values.

    python scripts/make_sdp_fixture.py > tests/fixtures/sdp_reference.json

cvxpy is only needed to regenerate the fixture.
"""
import json
import sys
from pathlib import Path

import cvxpy as cp
import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from sdp_instances import SEEDS, random_instance  # noqa: E402

from leoical.sdp import hmat, smat  # noqa: E402


def solve_reference(problem):
    q, A, b, cones = problem.assemble()
    x = cp.Variable(q.size)
    s = b - A @ x
    cons = []
    for kind, start, rows, side in cones:
        blk = s[start:start + rows]
        if kind == "zero":
            cons.append(blk == 0)
        elif kind == "nonneg":
            cons.append(blk >= 0)
        elif kind == "soc":
            cons.append(cp.SOC(blk[0], blk[1:]))
        elif kind == "psd":
            basis = smat(np.eye(rows))
            S = sum(blk[i] * basis[i] for i in range(rows))
            cons.append(0.5 * (S + S.T) >> 0)
        else:
            basis = hmat(np.eye(rows))
            re = sum(blk[i] * basis[i].real for i in range(rows))
            im = sum(blk[i] * basis[i].imag for i in range(rows))
            E = cp.bmat([[re, -im], [im, re]])
            cons.append(0.5 * (E + E.T) >> 0)
    val = cp.Problem(cp.Minimize(q @ x), cons).solve(solver=cp.CLARABEL)
    return float(val + problem.constant)


if __name__ == "__main__":
    out = {"solver": "cvxpy/CLARABEL", "cvxpy": cp.__version__,
           "instances": [{"seed": s, "objective": solve_reference(random_instance(s))} for s in SEEDS]}
    print(json.dumps(out, indent=1))
