"""Dynamic-traffic evaluation: Poisson arrivals, exponential holding.

Reproducibility contract: one stdlib Mersenne-Twister stream per random
purpose (arrivals, holding, pairs, demand, probe-pairs, probe-demand), each
seeded with "<seed>/<purpose>" so a run is a pure function of its inputs.
All per-request draws happen up front in request order, which keeps the
offered traffic identical across policies under the same seed.

Every time unit of mean inter-arrival at rate u with mean holding h offers
u*h Erlang of load; the CLI keeps u = 1 and varies h.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass
from itertools import permutations
from typing import Callable, Sequence

from scipy import stats as _scipy_stats

from .heuristic import PolicyParams, Request, assign_spectrum, compute_fiber_paths, serve
from .physics import FiberParams
from .spectrum import SpectrumState
from .topology import Network


class SimError(Exception):
    """Simulation invariant breach (conservation, dirty final state, ...)."""


@dataclass(frozen=True)
class TrafficConfig:
    """Offered-traffic description; load in Erlang is arrival_rate*mean_holding."""

    mean_holding: float
    requests: int
    seed: int
    arrival_rate: float = 1.0
    demand: int | tuple[int, int] = 1
    warmup_frac: float = 0.1
    sd_pairs: tuple[tuple[str, str], ...] | None = None

    def __post_init__(self):
        if self.arrival_rate <= 0 or self.mean_holding <= 0:
            raise ValueError("arrival_rate and mean_holding must be positive")
        if self.requests < 1:
            raise ValueError("requests must be >= 1")
        if not (0 <= self.warmup_frac < 1):
            raise ValueError("warmup_frac must be in [0, 1)")

    @property
    def load_erlang(self) -> float:
        return self.arrival_rate * self.mean_holding


@dataclass
class Metrics:
    offered: int = 0
    blocked: int = 0
    served: int = 0
    path_histogram: dict[int, int] = None  # served count per number of bands

    def __post_init__(self):
        if self.path_histogram is None:
            self.path_histogram = {}

    @property
    def blocking_prob(self) -> float:
        return self.blocked / self.offered if self.offered else 0.0

    @property
    def aggregation_ratio(self) -> float:
        """Fraction of served connections using two or more spectrum paths."""
        if not self.served:
            return 0.0
        return 1.0 - self.path_histogram.get(1, 0) / self.served


@dataclass(frozen=True)
class ProbeMetrics:
    probes: int
    blocked: int

    @property
    def probe_blocking(self) -> float:
        return self.blocked / self.probes if self.probes else 0.0


def _stream(seed: int, purpose: str) -> random.Random:
    return random.Random(f"{seed}/{purpose}")


def _pair_table(net: Network, traffic: TrafficConfig) -> list[tuple[str, str]]:
    if traffic.sd_pairs is not None:
        return list(traffic.sd_pairs)
    return list(permutations(net.nodes, 2))


def _draw_requests(net: Network, traffic: TrafficConfig) -> list[Request]:
    arrivals = _stream(traffic.seed, "arrivals")
    holding = _stream(traffic.seed, "holding")
    pairs_rng = _stream(traffic.seed, "pairs")
    demand_rng = _stream(traffic.seed, "demand")
    pairs = _pair_table(net, traffic)
    fixed = isinstance(traffic.demand, int)

    out: list[Request] = []
    t = 0.0
    for _ in range(traffic.requests):
        t += arrivals.expovariate(traffic.arrival_rate)
        src, dst = pairs[pairs_rng.randrange(len(pairs))]
        if fixed:
            tr = traffic.demand
        else:
            lo, hi = traffic.demand
            tr = demand_rng.randint(lo, hi)
        hold = holding.expovariate(1.0 / traffic.mean_holding)
        out.append(Request(src, dst, tr, arrival=t, holding=hold))
    return out


def run(
    net: Network,
    traffic: TrafficConfig,
    policy: PolicyParams,
    fiber_params: FiberParams | None = None,
    *,
    audit: bool = False,
) -> Metrics:
    """One seeded simulation; departures at an arrival instant release first.

    The first warmup fraction of requests is excluded from the metrics; all
    departures are drained at the end and the spectrum must come back empty.
    """
    state = SpectrumState(net)
    path_cache: dict = {}
    requests = _draw_requests(net, traffic)
    warmup = int(traffic.requests * traffic.warmup_frac)
    metrics = Metrics()
    departures: list[tuple[float, int, tuple[int, ...]]] = []

    for i, req in enumerate(requests):
        while departures and departures[0][0] <= req.arrival:
            _, _, ids = heapq.heappop(departures)
            for aid in ids:
                state.release(aid)
        solution = serve(
            state, net, req, policy, fiber_params=fiber_params, path_cache=path_cache
        )
        measured = i >= warmup
        if measured:
            metrics.offered += 1
        if solution is None:
            if measured:
                metrics.blocked += 1
        else:
            if audit:
                if solution.delay_spread_ps > policy.max_dd_ps and len(solution.paths) > 1:
                    raise SimError("admitted solution violates the delay bound")
                state.audit(policy.gb)
            ids = tuple(p.allocation_id for p in solution.paths)
            heapq.heappush(departures, (req.arrival + req.holding, i, ids))
            if measured:
                metrics.served += 1
                n = len(solution.paths)
                metrics.path_histogram[n] = metrics.path_histogram.get(n, 0) + 1

    while departures:
        _, _, ids = heapq.heappop(departures)
        for aid in ids:
            state.release(aid)
    if not state.is_all_free():
        raise SimError("spectrum not empty after draining all departures")
    if metrics.offered != metrics.served + metrics.blocked:
        raise SimError("offered != served + blocked")
    return metrics


def probe_run(
    net: Network,
    traffic: TrafficConfig,
    policy: PolicyParams,
    fiber_params: FiberParams | None = None,
    *,
    probe_demand: tuple[int, int],
    probes: int,
    spacing: int = 25,
) -> ProbeMetrics:
    """Admissibility probes against a live background, without mutating state.

    Background traffic runs as in :func:`run`; once past warm-up, every
    ``spacing``-th arrival is followed by one probe (random pair, demand
    drawn from ``probe_demand``) that is planned but never allocated.
    """
    state = SpectrumState(net)
    path_cache: dict = {}
    requests = _draw_requests(net, traffic)
    probe_pairs = _stream(traffic.seed, "probe-pairs")
    probe_demand_rng = _stream(traffic.seed, "probe-demand")
    pairs = list(permutations(net.nodes, 2))
    warmup = int(traffic.requests * traffic.warmup_frac)
    departures: list[tuple[float, int, tuple[int, ...]]] = []
    done = 0
    blocked = 0

    for i, req in enumerate(requests):
        while departures and departures[0][0] <= req.arrival:
            _, _, ids = heapq.heappop(departures)
            for aid in ids:
                state.release(aid)
        solution = serve(
            state, net, req, policy, fiber_params=fiber_params, path_cache=path_cache
        )
        if solution is not None:
            ids = tuple(p.allocation_id for p in solution.paths)
            heapq.heappush(departures, (req.arrival + req.holding, i, ids))
        if i >= warmup and done < probes and (i - warmup) % spacing == 0:
            src, dst = pairs[probe_pairs.randrange(len(pairs))]
            tr = probe_demand_rng.randint(*probe_demand)
            probe = Request(src, dst, tr)
            key = (src, dst, policy.k)
            if key not in path_cache:
                path_cache[key] = compute_fiber_paths(net, src, dst, policy.k)
            plan = assign_spectrum(state, path_cache[key], probe, policy)
            done += 1
            if plan is None:
                blocked += 1
    return ProbeMetrics(done, blocked)


@dataclass(frozen=True)
class ReplicateSummary:
    n: int
    blocking_mean: float
    blocking_halfwidth: float
    aggregation_mean: float
    aggregation_halfwidth: float
    runs: tuple[Metrics, ...]


def replicate(run_one: Callable[[int], Metrics], seeds: Sequence[int]) -> ReplicateSummary:
    """Independent runs per seed with Student-t 95% intervals."""
    if len(seeds) < 2:
        raise ValueError("replicate needs at least 2 seeds")
    runs = tuple(run_one(seed) for seed in seeds)

    def interval(values: list[float]) -> tuple[float, float]:
        n = len(values)
        mean = sum(values) / n
        var = sum((v - mean) ** 2 for v in values) / (n - 1)
        if var <= 0:
            return mean, 0.0
        half = float(_scipy_stats.t.ppf(0.975, n - 1)) * math.sqrt(var / n)
        return mean, half

    b_mean, b_half = interval([m.blocking_prob for m in runs])
    a_mean, a_half = interval([m.aggregation_ratio for m in runs])
    return ReplicateSummary(len(seeds), b_mean, b_half, a_mean, a_half, runs)


# ---------------------------------------------------------------------------
# CSV emission (consumed by external plotting, schema is the contract)


def _fmt_prob(x: float) -> str:
    return f"{x:.6f}"


def _fmt_load(x: float) -> str:
    return f"{x:g}"


def metrics_csv(entries: Sequence[tuple[dict, Metrics]]) -> str:
    """One row per grid cell: load,policy,m_us,k,gb,tr,seed + counters + histogram."""
    max_paths = 1
    for _, m in entries:
        if m.path_histogram:
            max_paths = max(max_paths, max(m.path_histogram))
    header = (
        ["load", "policy", "m_us", "k", "gb", "tr", "seed", "offered", "blocked",
         "blocking_prob", "agg_ratio"]
        + [f"hist_{i}" for i in range(1, max_paths + 1)]
    )
    lines = [",".join(header)]
    for params, m in entries:
        row = [
            _fmt_load(params["load"]),
            params["policy"],
            _fmt_load(params["m_us"]),
            str(params["k"]),
            str(params["gb"]),
            str(params["tr"]),
            str(params["seed"]),
            str(m.offered),
            str(m.blocked),
            _fmt_prob(m.blocking_prob),
            _fmt_prob(m.aggregation_ratio),
        ] + [str(m.path_histogram.get(i, 0)) for i in range(1, max_paths + 1)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def distribution_csv(entries: Sequence[tuple[dict, Metrics]]) -> str:
    """Long-form band-count distribution for multipath usage plots."""
    header = ["load", "policy", "m_us", "k", "gb", "tr", "seed", "n_paths", "count"]
    lines = [",".join(header)]
    for params, m in entries:
        for n in sorted(m.path_histogram):
            lines.append(
                ",".join(
                    [
                        _fmt_load(params["load"]),
                        params["policy"],
                        _fmt_load(params["m_us"]),
                        str(params["k"]),
                        str(params["gb"]),
                        str(params["tr"]),
                        str(params["seed"]),
                        str(n),
                        str(m.path_histogram[n]),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def probe_csv(entries: Sequence[tuple[dict, ProbeMetrics]]) -> str:
    header = ["load", "policy", "m_us", "k", "gb", "bg_tr", "probe_tr", "seed",
              "probes", "probe_blocked", "probe_blocking"]
    lines = [",".join(header)]
    for params, pm in entries:
        lines.append(
            ",".join(
                [
                    _fmt_load(params["load"]),
                    params["policy"],
                    _fmt_load(params["m_us"]),
                    str(params["k"]),
                    str(params["gb"]),
                    str(params["bg_tr"]),
                    str(params["probe_tr"]),
                    str(params["seed"]),
                    str(pm.probes),
                    str(pm.blocked),
                    _fmt_prob(pm.probe_blocking),
                ]
            )
        )
    return "\n".join(lines) + "\n"
