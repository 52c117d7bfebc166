"""Shared test helpers: tiny network builders and independent oracles."""

from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from flexrsa.spectrum import SlotRange, SpectrumState
from flexrsa.topology import Network, load_topology


def make_net(edges, slots, speed_km_s=2.0e5) -> Network:
    """Build a network from (src, dst, length_km) undirected edges."""
    nodes = []
    for s, d, _ in edges:
        for v in (s, d):
            if v not in nodes:
                nodes.append(v)
    text = "\n".join([f"node {v}" for v in nodes] + [f"link {s} {d} {l}" for s, d, l in edges])
    return load_topology(text, slots_per_link=slots, propagation_speed_km_s=speed_km_s)


def paint(state: SpectrumState, link, bits: str):
    """Force an occupancy pattern on one arc by allocating each '1' run."""
    start = None
    for i, ch in enumerate(bits + "0"):
        if ch == "1" and start is None:
            start = i
        elif ch != "1" and start is not None:
            state.allocate((link,), SlotRange(start, i - start), 0)
            start = None


def oracle_blocks(occupied_rows: list[str], gb: int) -> list[tuple[int, int]]:
    """Brute-force reference for free_blocks: maximal runs of slots where a
    band could sit, i.e. free on every arc and more than gb slots away from
    any occupied slot."""
    slots = len(occupied_rows[0])
    taken = {
        i for row in occupied_rows for i, ch in enumerate(row) if ch == "1"
    }
    usable = [
        f not in taken and all(abs(f - q) > gb for q in taken) for f in range(slots)
    ]
    blocks = []
    start = None
    for i in range(slots + 1):
        ok = i < slots and usable[i]
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            blocks.append((start, i - start))
            start = None
    return blocks


def occupancy_rows(state: SpectrumState, arcs) -> list[str]:
    dump = state.occupancy_dump().splitlines()
    return [dump[a.id] for a in arcs]


def milp_solve(model):
    """Solve a ConstraintSystem with scipy's HiGHS MIP; (cost, x) or None."""
    names = list(model.variables)
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    c = np.zeros(n)
    for name, coef in model.objective:
        c[index[name]] += float(coef)
    rows, lbs, ubs = [], [], []
    for con in model.constraints:
        row = np.zeros(n)
        for name, coef in con.coeffs:
            row[index[name]] += float(coef)
        rows.append(row)
        rhs = float(con.rhs)
        if con.relation == "<=":
            lbs.append(-np.inf)
            ubs.append(rhs)
        elif con.relation == ">=":
            lbs.append(rhs)
            ubs.append(np.inf)
        else:
            lbs.append(rhs)
            ubs.append(rhs)
    lb = np.array([model.variables[m].lb for m in names], dtype=float)
    ub = np.array([model.variables[m].ub for m in names], dtype=float)
    res = milp(
        c=c,
        constraints=LinearConstraint(np.array(rows), np.array(lbs), np.array(ubs)),
        integrality=np.ones(n),
        bounds=Bounds(lb, ub),
    )
    if not res.success:
        return None
    values = {name: int(round(res.x[index[name]])) for name in names}
    return int(round(res.fun)), values
