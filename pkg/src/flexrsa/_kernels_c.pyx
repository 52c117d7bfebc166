# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled spectrum scan kernel.

Mirrors ``_kernels_py.free_blocks_on_path``: single pass over the slots of a
path's arcs, closing a free run whenever any arc occupies the slot, then
trimming the guard band from run sides that touch occupied spectrum.
"""

IMPL = "c"


def free_blocks_on_path(const unsigned char[:, ::1] occ, const long long[::1] arcs, int gb):
    cdef Py_ssize_t slots = occ.shape[1]
    cdef Py_ssize_t narcs = arcs.shape[0]
    cdef Py_ssize_t f, j
    cdef long long a
    cdef bint occupied
    cdef Py_ssize_t run_start = -1
    cdef Py_ssize_t start, end
    blocks = []

    for f in range(slots):
        occupied = False
        for j in range(narcs):
            a = arcs[j]
            if occ[a, f]:
                occupied = True
                break
        if not occupied:
            if run_start < 0:
                run_start = f
        elif run_start >= 0:
            start = run_start
            end = f - 1
            if start > 0:
                start += gb
            end -= gb  # run closed by an occupied slot, never the spectrum edge
            if end >= start:
                blocks.append((start, end - start + 1))
            run_start = -1

    if run_start >= 0:
        start = run_start
        end = slots - 1
        if start > 0:
            start += gb
        if end >= start:
            blocks.append((start, end - start + 1))
    return blocks
