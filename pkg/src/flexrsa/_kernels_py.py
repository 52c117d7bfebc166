"""Pure-Python/numpy fallback for the spectrum scan kernel.

Same contract as the compiled ``_kernels_c``: given the per-arc occupancy
matrix, report the slot ranges usable on every arc of a path after carving
the guard band out of each side that touches an occupied slot.  Spectrum
edges need no guard (the band edge is not a neighbouring path).
"""

from __future__ import annotations

import numpy as np

IMPL = "python"


def free_blocks_on_path(occ: np.ndarray, arcs: np.ndarray, gb: int) -> list[tuple[int, int]]:
    """Maximal guard-adjusted free ranges on a path.

    occ: uint8 matrix (num_arcs, slots), nonzero = occupied.
    arcs: int64 arc-row indices forming the path.
    Returns (start, length) tuples sorted by start.
    """
    slots = occ.shape[1]
    if len(arcs) == 1:
        merged = occ[arcs[0]] != 0
    else:
        merged = occ[arcs].any(axis=0)

    # Run boundaries: pad with occupied sentinels, diff flags transitions.
    padded = np.empty(slots + 2, dtype=np.int8)
    padded[0] = padded[-1] = 1
    padded[1:-1] = merged
    edges = np.flatnonzero(np.diff(padded))
    blocks: list[tuple[int, int]] = []
    for k in range(0, len(edges), 2):
        start = int(edges[k])  # first free slot of the run
        end = int(edges[k + 1]) - 1  # last free slot of the run
        if start > 0:
            start += gb
        if end < slots - 1:
            end -= gb
        if end >= start:
            blocks.append((start, end - start + 1))
    return blocks
