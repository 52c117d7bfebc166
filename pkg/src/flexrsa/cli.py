"""Command-line front end: simulation grids, probes, model export, self-check.

Scenario files are flat ``key = value`` text (comma-separated lists for grid
keys); explicit command-line flags override scenario values, which override
built-in defaults.  Grid runs write two CSVs (metrics + band-count
distribution) atomically, so a scenario plus a seed fully determines every
output byte.

Policy tokens: ``st`` (single band), ``pt`` (multipath, bound set by
--max-dd-us), ``pt1`` (multipath, 128 ms: off-chip buffering) and ``pt2``
(multipath, 250 us: on-chip framer realignment; quoted figures for such
buffers range roughly 125-256 us, so the bound actually used is echoed in
the m_us column of every output row).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

from . import crossval, ilp, sim
from .heuristic import PolicyParams, compute_fiber_paths
from .physics import FiberParams
from .topology import TopologyError, load_topology

M_US_PT1 = 128_000.0  # 128 ms in us
M_US_PT2 = 250.0

_DEFAULTS = {
    "topology": "us",
    "slots": 128,
    "mode": "pt1",
    "k": "30",
    "gb": "0",
    "tr": "10",
    "load": "75",
    "seeds": "0..4",
    "requests": 20000,
    "warmup": 0.1,
    "arrival_rate": 1.0,
    "max_dd_us": M_US_PT1,
    "dispersion": 17.0,
    "fc_thz": 193.1,
    "slot_ghz": 50.0,
    "speed_kms": 2.0e5,
    "jobs": 1,
    "out": None,
    "bg_tr": "1-4",
    "probe_tr": "4-6",
    "probes": 50,
    "spacing": 25,
}


class ConfigError(ValueError):
    pass


def _read_topology(token: str) -> str:
    if token in ("us", "us_backbone"):
        return resources.files("flexrsa").joinpath("data/us_backbone.txt").read_text()
    if token == "abilene":
        return resources.files("flexrsa").joinpath("data/abilene.txt").read_text()
    try:
        with open(token, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read topology {token!r}: {exc}") from exc


def _parse_seeds(token: str) -> list[int]:
    token = str(token).strip()
    if ".." in token:
        lo, hi = token.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    if "," in token:
        return [int(t) for t in token.split(",") if t.strip()]
    return list(range(int(token)))


def _parse_tr(token: str) -> int | tuple[int, int]:
    token = str(token).strip()
    if "-" in token:
        lo, hi = token.split("-", 1)
        lo, hi = int(lo), int(hi)
        if lo > hi:
            raise ConfigError(f"bad demand range {token!r}")
        return (lo, hi)
    return int(token)


def _tr_max(tr: int | tuple[int, int]) -> int:
    return tr if isinstance(tr, int) else tr[1]


def _tr_label(tr: int | tuple[int, int]) -> str:
    return str(tr) if isinstance(tr, int) else f"{tr[0]}-{tr[1]}"


def _parse_list(token, parse=str) -> list:
    return [parse(t.strip()) for t in str(token).split(",") if t.strip()]


def _parse_modes(token: str, max_dd_us: float) -> list[tuple[str, str, float]]:
    """Each token becomes (label, engine mode, differential-delay bound in us)."""
    out = []
    for tok in _parse_list(token):
        if tok == "st":
            out.append(("st", "st", max_dd_us))
        elif tok == "pt":
            out.append(("pt", "pt", max_dd_us))
        elif tok == "pt1":
            out.append(("pt1", "pt", M_US_PT1))
        elif tok == "pt2":
            out.append(("pt2", "pt", M_US_PT2))
        else:
            raise ConfigError(f"unknown mode {tok!r} (expected st|pt|pt1|pt2)")
    return out


def load_scenario(path: str) -> dict:
    values: dict = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = line.split("=", 1)
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path!r}: {exc}") from exc
    unknown = set(values) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    return values


def _merged(args: argparse.Namespace, scenario: dict, key: str, cast=None):
    cli_value = getattr(args, key, None)
    if cli_value is not None:
        return cli_value
    if key in scenario:
        return cast(scenario[key]) if cast else scenario[key]
    return _DEFAULTS[key]


def _fiber(cfg: dict) -> FiberParams:
    return FiberParams(
        dispersion_ps_per_nm_km=cfg["dispersion"],
        central_frequency_thz=cfg["fc_thz"],
        slot_width_ghz=cfg["slot_ghz"],
        propagation_speed_km_s=cfg["speed_kms"],
    )


def _out_dir(cfg: dict) -> str:
    out = cfg["out"] or os.environ.get("FLEXRSA_OUT") or "out"
    os.makedirs(out, exist_ok=True)
    return out


def _write_atomic(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _common_grid_config(args: argparse.Namespace) -> dict:
    scenario = load_scenario(args.scenario) if getattr(args, "scenario", None) else {}
    cfg = {}
    cfg["topology"] = _merged(args, scenario, "topology")
    cfg["slots"] = int(_merged(args, scenario, "slots", int))
    cfg["max_dd_us"] = float(_merged(args, scenario, "max_dd_us", float))
    cfg["modes"] = _parse_modes(_merged(args, scenario, "mode"), cfg["max_dd_us"])
    cfg["ks"] = _parse_list(_merged(args, scenario, "k"), int)
    cfg["gbs"] = _parse_list(_merged(args, scenario, "gb"), int)
    cfg["trs"] = _parse_list(_merged(args, scenario, "tr"), _parse_tr)
    cfg["loads"] = _parse_list(_merged(args, scenario, "load"), float)
    cfg["seeds"] = _parse_seeds(_merged(args, scenario, "seeds"))
    cfg["requests"] = int(_merged(args, scenario, "requests", int))
    cfg["warmup"] = float(_merged(args, scenario, "warmup", float))
    cfg["arrival_rate"] = float(_merged(args, scenario, "arrival_rate", float))
    for key in ("dispersion", "fc_thz", "slot_ghz", "speed_kms"):
        cfg[key] = float(_merged(args, scenario, key, float))
    cfg["jobs"] = int(_merged(args, scenario, "jobs", int))
    cfg["out"] = _merged(args, scenario, "out")
    cfg["bg_tr"] = _merged(args, scenario, "bg_tr")
    cfg["probe_tr"] = _merged(args, scenario, "probe_tr")
    cfg["probes"] = int(_merged(args, scenario, "probes", int))
    cfg["spacing"] = int(_merged(args, scenario, "spacing", int))
    for tr in cfg["trs"]:
        if _tr_max(tr) > cfg["slots"]:
            raise ConfigError(f"demand {_tr_label(tr)} exceeds {cfg['slots']} slots per link")
    return cfg


def _sim_cell(cell: dict) -> sim.Metrics:
    net = load_topology(
        cell["topology_text"],
        slots_per_link=cell["slots"],
        propagation_speed_km_s=cell["speed_kms"],
    )
    traffic = sim.TrafficConfig(
        mean_holding=cell["load"] / cell["arrival_rate"],
        requests=cell["requests"],
        seed=cell["seed"],
        arrival_rate=cell["arrival_rate"],
        demand=cell["tr"],
        warmup_frac=cell["warmup"],
    )
    policy = PolicyParams(
        mode=cell["mode"],
        k=cell["k"],
        gb=cell["gb"],
        max_dd_ps=int(round(cell["m_us"] * 1e6)),
    )
    return sim.run(net, traffic, policy, cell["fiber"])


def _probe_cell(cell: dict) -> sim.ProbeMetrics:
    net = load_topology(
        cell["topology_text"],
        slots_per_link=cell["slots"],
        propagation_speed_km_s=cell["speed_kms"],
    )
    traffic = sim.TrafficConfig(
        mean_holding=cell["load"] / cell["arrival_rate"],
        requests=cell["requests"],
        seed=cell["seed"],
        arrival_rate=cell["arrival_rate"],
        demand=cell["tr"],
        warmup_frac=cell["warmup"],
    )
    policy = PolicyParams(
        mode=cell["mode"],
        k=cell["k"],
        gb=cell["gb"],
        max_dd_ps=int(round(cell["m_us"] * 1e6)),
    )
    return sim.probe_run(
        net,
        traffic,
        policy,
        cell["fiber"],
        probe_demand=cell["probe_tr"],
        probes=cell["probes"],
        spacing=cell["spacing"],
    )


def _run_grid(cells: list[dict], worker, jobs: int) -> list:
    if jobs <= 1:
        return [worker(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, cells))


def cmd_simulate(args) -> int:
    cfg = _common_grid_config(args)
    text = _read_topology(cfg["topology"])
    fiber = _fiber(cfg)
    cells = []
    for label, mode, m_us in cfg["modes"]:
        for k in cfg["ks"]:
            for gb in cfg["gbs"]:
                for tr in cfg["trs"]:
                    for load in cfg["loads"]:
                        for seed in cfg["seeds"]:
                            cells.append(
                                {
                                    "topology_text": text,
                                    "slots": cfg["slots"],
                                    "speed_kms": cfg["speed_kms"],
                                    "fiber": fiber,
                                    "mode": mode,
                                    "policy": label,
                                    "m_us": m_us,
                                    "k": k,
                                    "gb": gb,
                                    "tr": tr,
                                    "load": load,
                                    "seed": seed,
                                    "requests": cfg["requests"],
                                    "warmup": cfg["warmup"],
                                    "arrival_rate": cfg["arrival_rate"],
                                }
                            )
    results = _run_grid(cells, _sim_cell, cfg["jobs"])
    entries = []
    for cell, metrics in zip(cells, results):
        params = {
            "load": cell["load"],
            "policy": cell["policy"],
            "m_us": cell["m_us"],
            "k": cell["k"],
            "gb": cell["gb"],
            "tr": _tr_label(cell["tr"]),
            "seed": cell["seed"],
        }
        entries.append((params, metrics))
    out = _out_dir(cfg)
    _write_atomic(os.path.join(out, "metrics.csv"), sim.metrics_csv(entries))
    _write_atomic(os.path.join(out, "path_dist.csv"), sim.distribution_csv(entries))

    print(f"{'load':>8} {'policy':>8} {'gb':>3} {'tr':>5} {'blocking':>10} {'agg':>8}")
    summary: dict[tuple, list[sim.Metrics]] = {}
    for params, metrics in entries:
        summary.setdefault(
            (params["load"], params["policy"], params["gb"], params["tr"]), []
        ).append(metrics)
    for (load, policy, gb, tr), ms in summary.items():
        blocking = sum(m.blocking_prob for m in ms) / len(ms)
        agg = sum(m.aggregation_ratio for m in ms) / len(ms)
        print(f"{load:>8g} {policy:>8} {gb:>3} {tr:>5} {blocking:>10.6f} {agg:>8.4f}")
    print(f"wrote {out}/metrics.csv and {out}/path_dist.csv")
    return 0


def cmd_probe(args) -> int:
    cfg = _common_grid_config(args)
    text = _read_topology(cfg["topology"])
    fiber = _fiber(cfg)
    bg_tr = _parse_tr(cfg["bg_tr"])
    probe_tr = _parse_tr(cfg["probe_tr"])
    if isinstance(probe_tr, int):
        probe_tr = (probe_tr, probe_tr)
    cells = []
    for label, mode, m_us in cfg["modes"]:
        for k in cfg["ks"]:
            for gb in cfg["gbs"]:
                for load in cfg["loads"]:
                    for seed in cfg["seeds"]:
                        cells.append(
                            {
                                "topology_text": text,
                                "slots": cfg["slots"],
                                "speed_kms": cfg["speed_kms"],
                                "fiber": fiber,
                                "mode": mode,
                                "policy": label,
                                "m_us": m_us,
                                "k": k,
                                "gb": gb,
                                "tr": bg_tr,
                                "load": load,
                                "seed": seed,
                                "requests": cfg["requests"],
                                "warmup": cfg["warmup"],
                                "arrival_rate": cfg["arrival_rate"],
                                "probe_tr": probe_tr,
                                "probes": cfg["probes"],
                                "spacing": cfg["spacing"],
                            }
                        )
    results = _run_grid(cells, _probe_cell, cfg["jobs"])
    entries = []
    for cell, pm in zip(cells, results):
        params = {
            "load": cell["load"],
            "policy": cell["policy"],
            "m_us": cell["m_us"],
            "k": cell["k"],
            "gb": cell["gb"],
            "bg_tr": _tr_label(cell["tr"]),
            "probe_tr": _tr_label(cell["probe_tr"]),
            "seed": cell["seed"],
        }
        entries.append((params, pm))
    out = _out_dir(cfg)
    _write_atomic(os.path.join(out, "probe.csv"), sim.probe_csv(entries))
    print(f"{'load':>8} {'policy':>8} {'k':>4} {'probe_blocking':>15}")
    summary: dict[tuple, list[sim.ProbeMetrics]] = {}
    for params, pm in entries:
        summary.setdefault((params["load"], params["policy"], params["k"]), []).append(pm)
    for (load, policy, k), pms in summary.items():
        mean = sum(p.probe_blocking for p in pms) / len(pms)
        print(f"{load:>8g} {policy:>8} {k:>4} {mean:>15.6f}")
    print(f"wrote {out}/probe.csv")
    return 0


def cmd_export_ilp(args) -> int:
    text = _read_topology(args.topology or _DEFAULTS["topology"])
    slots = args.slots if args.slots is not None else 16
    net = load_topology(text, slots_per_link=slots)
    fiber = FiberParams()
    src = args.src or net.nodes[0]
    dst = args.dst or net.nodes[-1]
    if not net.has_node(src) or not net.has_node(dst):
        raise ConfigError(f"unknown node in pair ({src}, {dst})")
    demand = args.tr if args.tr is not None else 4
    max_dd_ps = int(round((args.max_dd_us if args.max_dd_us is not None else M_US_PT1) * 1e6))

    routes = compute_fiber_paths(net, src, dst, args.paths)
    if not routes:
        raise ConfigError(f"no path from {src} to {dst}")
    model = ilp.build_model(
        net,
        src,
        dst,
        demand,
        routes,
        slots=slots,
        gb=args.gb,
        max_dd_ps=max_dd_ps,
        fiber_params=fiber,
    )
    counts = model.variable_counts()
    y_per_request = counts.get("y", 0)
    print(f"request {src} -> {dst}: |P|={len(routes)} |F|={slots}")
    print(f"y variables per request: {y_per_request}")
    print(f"total variables: {len(model.variables)}")
    print(f"total constraints: {len(model.constraints)}")
    if args.all_pairs:
        total_y = 0
        pairs = 0
        for s in net.nodes:
            for d in net.nodes:
                if s == d:
                    continue
                pairs += 1
                pr = compute_fiber_paths(net, s, d, args.paths)
                if not pr:
                    continue
                m = ilp.build_model(
                    net, s, d, demand, pr,
                    slots=slots, gb=args.gb, max_dd_ps=max_dd_ps, fiber_params=fiber,
                )
                total_y += m.variable_counts().get("y", 0)
        print(f"aggregate y variables over {pairs} node pairs: {total_y}")
    if args.out:
        _write_atomic(args.out, ilp.export_lp(model))
        print(f"wrote {args.out}")
    return 0


def cmd_oracle_check(args) -> int:
    failures = crossval.cross_validate(
        args.seed,
        args.instances,
        max_nodes=args.max_nodes,
        slots=args.slots if args.slots is not None else 8,
        max_demand=args.max_demand,
        k=args.k,
    )
    if failures:
        for f in failures:
            print(f"FAIL {f}")
        print(f"{len(failures)} cross-validation failure(s) over {args.instances} instances")
        return 1
    print(f"all {args.instances} instances passed oracle/heuristic/checker cross-validation")
    return 0


def cmd_topo_info(args) -> int:
    text = _read_topology(args.topology or _DEFAULTS["topology"])
    slots = args.slots if args.slots is not None else 128
    net = load_topology(text, slots_per_link=slots)
    degrees = [len(net.outgoing(v)) for v in net.nodes]
    print(f"nodes: {len(net.nodes)}")
    print(f"directed arcs: {net.num_arcs}")
    print(f"undirected edges: {net.num_arcs // 2}")
    print(f"slots per link: {net.slots_per_link}")
    print(f"out-degree min/mean/max: {min(degrees)}/{sum(degrees) / len(degrees):.2f}/{max(degrees)}")
    return 0


def _add_grid_flags(p: argparse.ArgumentParser):
    p.add_argument("--scenario", help="scenario file (key = value lines)")
    p.add_argument("--topology", help="file path, or builtin 'us' / 'abilene'")
    p.add_argument("--slots", type=int, help="frequency slots per link")
    p.add_argument("--mode", help="comma list of st|pt|pt1|pt2")
    p.add_argument("--k", help="max fiber-level paths (comma list)")
    p.add_argument("--gb", help="guard-band slots (comma list)")
    p.add_argument("--load", help="Erlang loads (comma list)")
    p.add_argument("--seeds", help="'N' for 0..N-1, 'a..b', or comma list")
    p.add_argument("--requests", type=int, help="connection requests per run")
    p.add_argument("--warmup", type=float, help="warm-up fraction excluded from metrics")
    p.add_argument("--arrival-rate", dest="arrival_rate", type=float)
    p.add_argument("--max-dd-us", dest="max_dd_us", type=float,
                   help="differential-delay bound for mode 'pt', in microseconds")
    p.add_argument("--dispersion", type=float, help="fiber dispersion ps/nm/km")
    p.add_argument("--fc-thz", dest="fc_thz", type=float)
    p.add_argument("--slot-ghz", dest="slot_ghz", type=float)
    p.add_argument("--speed-kms", dest="speed_kms", type=float)
    p.add_argument("--jobs", type=int, help="concurrent grid cells")
    p.add_argument("--out", help="output directory (or FLEXRSA_OUT env)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexrsa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a simulation grid and write CSV metrics")
    _add_grid_flags(p)
    p.add_argument("--tr", help="demand slots: fixed '10' or range '1-4' (comma list)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("probe", help="probe admissibility against a live background")
    _add_grid_flags(p)
    p.add_argument("--bg-tr", dest="bg_tr", help="background demand, e.g. '1-4'")
    p.add_argument("--probe-tr", dest="probe_tr", help="probe demand, e.g. '4-6'")
    p.add_argument("--probes", type=int, help="probes per run")
    p.add_argument("--spacing", type=int, help="background arrivals between probes")
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("export-ilp", help="build one request model and export LP text")
    p.add_argument("--topology")
    p.add_argument("--slots", type=int)
    p.add_argument("--paths", type=int, default=4, help="candidate paths |P|")
    p.add_argument("--gb", type=int, default=0)
    p.add_argument("--max-dd-us", dest="max_dd_us", type=float)
    p.add_argument("--tr", type=int, help="demand slots")
    p.add_argument("--src")
    p.add_argument("--dst")
    p.add_argument("--all-pairs", action="store_true", help="aggregate counts over all pairs")
    p.add_argument("--out", help="LP output file")
    p.set_defaults(fn=cmd_export_ilp)

    p = sub.add_parser("oracle-check", help="cross-validate oracle/heuristic/checker")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--max-nodes", dest="max_nodes", type=int, default=5)
    p.add_argument("--slots", type=int)
    p.add_argument("--max-demand", dest="max_demand", type=int, default=4)
    p.add_argument("--k", type=int, default=4)
    p.set_defaults(fn=cmd_oracle_check)

    p = sub.add_parser("topo-info", help="show topology facts")
    p.add_argument("--topology")
    p.add_argument("--slots", type=int)
    p.set_defaults(fn=cmd_topo_info)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, TopologyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
