import random
from importlib import resources

import pytest

from flexrsa.heuristic import PolicyParams, Request, serve
from flexrsa.sim import (
    Metrics,
    TrafficConfig,
    distribution_csv,
    metrics_csv,
    probe_csv,
    probe_run,
    replicate,
    run,
)
from flexrsa.spectrum import SpectrumState
from flexrsa.topology import load_topology

from util import make_net

US16 = load_topology(
    resources.files("flexrsa").joinpath("data/us_backbone.txt").read_text(),
    slots_per_link=16,
)


def one_link_net(slots=8):
    return make_net([("A", "B", 100)], slots=slots)


def erlang_b(servers: int, load: float) -> float:
    b = 1.0
    for m in range(1, servers + 1):
        b = load * b / (m + load * b)
    return b


class TestRun:
    def test_single_feasible_request_never_blocks(self):
        net = one_link_net()
        traffic = TrafficConfig(
            mean_holding=1.0, requests=1, seed=0, demand=4,
            warmup_frac=0.0, sd_pairs=(("A", "B"),),
        )
        m = run(net, traffic, PolicyParams(mode="st", k=1))
        assert m.offered == 1 and m.blocked == 0

    def test_erlang_b_limit(self):
        # one direction at rho = 1: loss B(1,1) = 1/2
        net = one_link_net(slots=8)
        policy = PolicyParams(mode="st", k=1, gb=0)
        probs = []
        for seed in range(3):
            traffic = TrafficConfig(
                mean_holding=1.0, requests=6000, seed=seed, demand=8,
                warmup_frac=0.1, sd_pairs=(("A", "B"),),
            )
            probs.append(run(net, traffic, policy).blocking_prob)
        mean = sum(probs) / len(probs)
        assert abs(mean - erlang_b(1, 1.0)) < 0.03

    def test_seed_determinism(self):
        traffic = TrafficConfig(mean_holding=30.0, requests=800, seed=5, demand=(1, 4))
        policy = PolicyParams(mode="pt", k=6, gb=1)
        a = run(US16, traffic, policy)
        b = run(US16, traffic, policy)
        assert (a.offered, a.blocked, a.served) == (b.offered, b.blocked, b.served)
        assert a.path_histogram == b.path_histogram

    def test_conservation_and_histogram(self):
        traffic = TrafficConfig(mean_holding=40.0, requests=1200, seed=2, demand=(2, 6))
        m = run(US16, traffic, PolicyParams(mode="pt", k=8))
        assert m.offered == m.served + m.blocked
        assert sum(m.path_histogram.values()) == m.served
        assert 0.0 <= m.blocking_prob <= 1.0
        agg = m.aggregation_ratio
        assert agg == pytest.approx(
            sum(v for k_, v in m.path_histogram.items() if k_ >= 2) / m.served
        )

    def test_audit_mode(self):
        traffic = TrafficConfig(mean_holding=25.0, requests=300, seed=3, demand=(1, 4))
        m = run(US16, traffic, PolicyParams(mode="pt", k=5, gb=1), audit=True)
        assert m.offered > 0

    def test_different_seeds_differ(self):
        t1 = TrafficConfig(mean_holding=40.0, requests=1500, seed=1, demand=(1, 6))
        t2 = TrafficConfig(mean_holding=40.0, requests=1500, seed=2, demand=(1, 6))
        policy = PolicyParams(mode="pt", k=6)
        assert run(US16, t1, policy).blocked != run(US16, t2, policy).blocked

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrafficConfig(mean_holding=0.0, requests=10, seed=0)
        with pytest.raises(ValueError):
            TrafficConfig(mean_holding=1.0, requests=0, seed=0)
        with pytest.raises(ValueError):
            TrafficConfig(mean_holding=1.0, requests=10, seed=0, warmup_frac=1.0)


class TestGuardBandMonotonicity:
    def test_placement_feasible_at_gb3_feasible_at_gb0(self):
        rng = random.Random(13)
        state = SpectrumState(US16)
        for trial in range(150):
            src, dst = rng.sample(US16.nodes, 2)
            req = Request(src, dst, rng.randint(1, 5))
            sol3 = serve(state.copy(), US16, req, PolicyParams(mode="pt", k=6, gb=3))
            if sol3 is not None:
                # the same placement must be allocatable under gb=0
                clone = state.copy()
                for band in sol3.paths:
                    clone.allocate(band.arcs, band.range, 0)
                sol0 = serve(state.copy(), US16, req, PolicyParams(mode="pt", k=6, gb=0))
                assert sol0 is not None
            serve(state, US16, req, PolicyParams(mode="pt", k=6, gb=3))


class TestReplicate:
    def test_identical_runs_zero_width(self):
        traffic = TrafficConfig(mean_holding=30.0, requests=500, seed=9, demand=(1, 4))
        policy = PolicyParams(mode="pt", k=5)
        summary = replicate(lambda seed: run(US16, traffic, policy), [1, 2, 3, 4, 5])
        assert summary.blocking_halfwidth == 0.0
        assert summary.aggregation_halfwidth == 0.0

    def test_erlang_interval_contains_half(self):
        net = one_link_net(slots=4)
        policy = PolicyParams(mode="st", k=1)

        def one(seed: int) -> Metrics:
            traffic = TrafficConfig(
                mean_holding=1.0, requests=4000, seed=seed, demand=4,
                warmup_frac=0.1, sd_pairs=(("A", "B"),),
            )
            return run(net, traffic, policy)

        summary = replicate(one, list(range(5)))
        assert summary.blocking_mean - summary.blocking_halfwidth <= 0.5
        assert summary.blocking_mean + summary.blocking_halfwidth >= 0.5

    def test_needs_two_seeds(self):
        with pytest.raises(ValueError):
            replicate(lambda s: Metrics(), [1])


class TestProbe:
    def test_probe_deterministic_and_bounded(self):
        traffic = TrafficConfig(mean_holding=30.0, requests=1500, seed=4, demand=(1, 4), warmup_frac=0.2)
        policy = PolicyParams(mode="pt", k=8, gb=1)
        pm1 = probe_run(US16, traffic, policy, probe_demand=(4, 6), probes=40, spacing=20)
        pm2 = probe_run(US16, traffic, policy, probe_demand=(4, 6), probes=40, spacing=20)
        assert pm1 == pm2
        assert pm1.probes == 40
        assert 0 <= pm1.blocked <= pm1.probes

    def test_probes_do_not_mutate_outcome(self):
        # background metrics with probes must match a plain run's admissions
        traffic = TrafficConfig(mean_holding=30.0, requests=1000, seed=6, demand=(1, 4), warmup_frac=0.0)
        policy = PolicyParams(mode="pt", k=6)
        plain = run(US16, traffic, policy)
        with_probes = probe_run(US16, traffic, policy, probe_demand=(4, 6), probes=30, spacing=10)
        plain2 = run(US16, traffic, policy)
        assert plain.blocked == plain2.blocked  # probe_run left no trace anywhere
        assert with_probes.probes == 30


class TestCsv:
    def entries(self):
        traffic = TrafficConfig(mean_holding=30.0, requests=400, seed=1, demand=(1, 4))
        policy = PolicyParams(mode="pt", k=5)
        m = run(US16, traffic, policy)
        params = {"load": 30.0, "policy": "pt1", "m_us": 128000.0, "k": 5, "gb": 0,
                  "tr": "1-4", "seed": 1}
        return [(params, m)]

    def test_metrics_csv_shape(self):
        text = metrics_csv(self.entries())
        lines = text.strip().splitlines()
        header = lines[0].split(",")
        assert header[:7] == ["load", "policy", "m_us", "k", "gb", "tr", "seed"]
        assert "blocking_prob" in header and "hist_1" in header
        assert len(lines) == 2

    def test_distribution_csv_totals(self):
        entries = self.entries()
        text = distribution_csv(entries)
        lines = text.strip().splitlines()[1:]
        total = sum(int(line.split(",")[-1]) for line in lines)
        assert total == entries[0][1].served

    def test_probe_csv_header(self):
        from flexrsa.sim import ProbeMetrics

        params = {"load": 30.0, "policy": "pt1", "m_us": 128000.0, "k": 10, "gb": 1,
                  "bg_tr": "1-4", "probe_tr": "4-6", "seed": 0}
        text = probe_csv([(params, ProbeMetrics(50, 7))])
        lines = text.strip().splitlines()
        assert lines[0].split(",")[-1] == "probe_blocking"
        assert lines[1].endswith("0.140000")

    def test_csv_byte_determinism(self):
        assert metrics_csv(self.entries()) == metrics_csv(self.entries())
