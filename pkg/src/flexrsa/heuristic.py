"""Two-phase RSA: min-delay multipath enumeration, then spectrum assignment.

Phase 1 grows loop-free paths best-first by total delay (ties broken by the
lexicographic node sequence) until K complete paths are found.  Phase 2 tries
a single band on each path in delay order first; in multipath mode it then
aggregates free fragments across paths, keeping every candidate whose path
delay exceeds the earliest candidate's by at most the differential-delay
bound M.  Dispersion skew is deliberately ignored in that check; only path
diversity counts here.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .physics import FiberParams, gvd_differential_delay_ps
from .spectrum import SlotRange, SpectrumPath, SpectrumState, ranges_clear
from .topology import Link, Network

MODE_SINGLE = "st"
MODE_PARALLEL = "pt"


@dataclass(frozen=True)
class Request:
    """Demand for ``demand_slots`` sub-carriers from source to destination."""

    source: str
    destination: str
    demand_slots: int
    arrival: float = 0.0
    holding: float = 0.0

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError(f"source equals destination: {self.source!r}")
        if self.demand_slots < 1:
            raise ValueError(f"demand_slots must be >= 1, got {self.demand_slots}")


@dataclass(frozen=True)
class PolicyParams:
    """Provisioning policy: st = one band only, pt = fragment aggregation."""

    mode: str = MODE_PARALLEL
    k: int = 30
    gb: int = 0
    max_dd_ps: int = 128_000_000_000  # 128 ms

    def __post_init__(self):
        if self.mode not in (MODE_SINGLE, MODE_PARALLEL):
            raise ValueError(f"mode must be 'st' or 'pt', got {self.mode!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.gb < 0 or self.max_dd_ps < 0:
            raise ValueError("gb and max_dd_ps must be non-negative")


@dataclass(frozen=True)
class Route:
    """A fiber-level path with its delay and cached arc-index array."""

    arcs: tuple[Link, ...]
    nodes: tuple[str, ...]
    delay_ps: int

    @cached_property
    def arc_idx(self) -> np.ndarray:
        return np.fromiter((a.id for a in self.arcs), dtype=np.int64, count=len(self.arcs))

    @cached_property
    def arc_id_set(self) -> frozenset[int]:
        return frozenset(a.id for a in self.arcs)

    @property
    def length_km(self) -> float:
        return sum(a.length_km for a in self.arcs)


@dataclass(frozen=True)
class Solution:
    """The spectrum paths serving one request; lengths sum to the demand."""

    paths: tuple[SpectrumPath, ...]

    @property
    def total_slots(self) -> int:
        return sum(p.range.length for p in self.paths)

    @property
    def delay_spread_ps(self) -> int:
        delays = [p.delay_ps for p in self.paths]
        return max(delays) - min(delays)


def compute_fiber_paths(
    net: Network,
    source: str,
    destination: str,
    k: int,
    stats: dict | None = None,
) -> list[Route]:
    """Up to ``k`` loop-free paths in nondecreasing delay order.

    Deterministic: equal-delay paths order by node sequence, then arc ids
    (parallel arcs).  Returns fewer than ``k`` only when fewer exist.
    """
    if not net.has_node(source):
        raise ValueError(f"unknown source {source!r}")
    if not net.has_node(destination):
        raise ValueError(f"unknown destination {destination!r}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")

    found: list[Route] = []
    expansions = 0
    # heap key: (delay, node sequence, arc-id sequence); payload: arcs
    frontier: list[tuple[int, tuple[str, ...], tuple[int, ...], tuple[Link, ...]]] = [
        (0, (source,), (), ())
    ]
    while frontier and len(found) < k:
        delay, nodes, _arc_ids, arcs = heapq.heappop(frontier)
        expansions += 1
        head = nodes[-1]
        if head == destination:
            found.append(Route(arcs, nodes, delay))
            continue
        visited = set(nodes)
        for link in net.outgoing(head):
            if link.dst in visited:
                continue
            heapq.heappush(
                frontier,
                (
                    delay + link.delay_ps,
                    nodes + (link.dst,),
                    _arc_ids + (link.id,),
                    arcs + (link,),
                ),
            )
    if stats is not None:
        stats["phase1_expansions"] = stats.get("phase1_expansions", 0) + expansions
    return found


def _largest(blocks: list[SlotRange]) -> SlotRange:
    return max(blocks, key=lambda b: (b.length, -b.start))


def assign_spectrum(
    state: SpectrumState,
    routes: Sequence[Route],
    req: Request,
    policy: PolicyParams,
    stats: dict | None = None,
) -> Solution | None:
    """Plan bands for the request; no allocation happens here.

    Step 1 places the whole demand first-fit inside the largest free block of
    the first path (in delay order) that can hold it.  Step 2 (pt only)
    aggregates fragments across paths under the differential-delay bound,
    trimming the last band so the total matches the demand exactly.  Returns
    None when blocked.
    """
    gb = policy.gb
    demand = req.demand_slots
    inspections = 0
    block_lists: list[list[SlotRange]] = []

    for route in routes:
        blocks = state.free_blocks(route.arc_idx, gb)
        inspections += len(route.arcs) * state.slots
        block_lists.append(blocks)
        if blocks:
            best = _largest(blocks)
            if best.length >= demand:
                if stats is not None:
                    stats["phase2_slot_inspections"] = (
                        stats.get("phase2_slot_inspections", 0) + inspections
                    )
                band = SpectrumPath(route.arcs, SlotRange(best.start, demand), route.delay_ps)
                return Solution((band,))

    if stats is not None:
        stats["phase2_slot_inspections"] = (
            stats.get("phase2_slot_inspections", 0) + inspections
        )
    if policy.mode != MODE_PARALLEL:
        return None

    # delay, then start, then path rank: deterministic candidate order
    candidates = sorted(
        (
            (route.delay_ps, block.start, rank, route, block)
            for rank, (route, blocks) in enumerate(zip(routes, block_lists))
            for block in blocks
        ),
        key=lambda c: c[:3],
    )
    if not candidates:
        return None

    anchor_delay = candidates[0][0]
    accepted: list[SpectrumPath] = []
    total = 0
    for delay, _start, _rank, route, block in candidates:
        if delay - anchor_delay > policy.max_dd_ps:
            break
        take = min(block.length, demand - total)
        band_range = SlotRange(block.start, take)
        conflict = any(
            route.arc_id_set & _arc_ids_of(acc)
            and not ranges_clear(acc.range, band_range, gb)
            for acc in accepted
        )
        if conflict:
            continue
        accepted.append(SpectrumPath(route.arcs, band_range, route.delay_ps))
        total += take
        if total == demand:
            return Solution(tuple(accepted))
    return None


def _arc_ids_of(band: SpectrumPath) -> set[int]:
    return {a.id for a in band.arcs}


def serve(
    state: SpectrumState,
    net: Network,
    req: Request,
    policy: PolicyParams,
    *,
    fiber_params: FiberParams | None = None,
    path_cache: dict | None = None,
    stats: dict | None = None,
) -> Solution | None:
    """Route, assign and atomically allocate one request; None when blocked."""
    cache_key = (req.source, req.destination, policy.k)
    if path_cache is not None and cache_key in path_cache:
        routes = path_cache[cache_key]
    else:
        routes = compute_fiber_paths(net, req.source, req.destination, policy.k, stats=stats)
        if path_cache is not None:
            path_cache[cache_key] = routes

    plan = assign_spectrum(state, routes, req, policy, stats=stats)
    if plan is None:
        return None

    allocated: list[int] = []
    final: list[SpectrumPath] = []
    try:
        for band in plan.paths:
            aid = state.allocate(band.arcs, band.range, policy.gb)
            allocated.append(aid)
            gvd = 0
            if fiber_params is not None:
                length = sum(a.length_km for a in band.arcs)
                gvd = gvd_differential_delay_ps(fiber_params, band.range.length, length)
            final.append(
                SpectrumPath(band.arcs, band.range, band.delay_ps, gvd, allocation_id=aid)
            )
    except Exception:
        for aid in allocated:
            state.release(aid)
        raise
    return Solution(tuple(final))


def release_solution(state: SpectrumState, solution: Solution) -> None:
    """Free every band of a served solution."""
    for band in solution.paths:
        if band.allocation_id is None:
            raise ValueError("solution was never allocated")
        state.release(band.allocation_id)
