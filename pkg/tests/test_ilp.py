import random
from fractions import Fraction

import pytest

from flexrsa import ilp, oracle
from flexrsa.heuristic import PolicyParams, Request, assign_spectrum, compute_fiber_paths
from flexrsa.physics import FiberParams
from flexrsa.spectrum import SlotRange, SpectrumState

from util import make_net, milp_solve, paint

TINY_D = FiberParams(dispersion_ps_per_nm_km=1e-12)  # dispersion skew rounds to 0


def shared_path_model(npaths=2, slots=8, gb=0, occupied=None, demand=2, fiber=TINY_D):
    """npaths candidate slots over one and the same 3-arc route."""
    net = make_net([("S", "A", 100), ("A", "B", 100), ("B", "D", 100)], slots=slots)
    route = compute_fiber_paths(net, "S", "D", 1)[0]
    model = ilp.build_model(
        net, "S", "D", demand, [route] * npaths,
        slots=slots, gb=gb, max_dd_ps=10**12, fiber_params=fiber, occupied=occupied,
    )
    return net, route, model


def diamond_model(demand=4, slots=16, gb=0, occupied=None, fiber=TINY_D):
    net = make_net(
        [("S", "A", 100), ("A", "D", 100), ("S", "B", 100), ("B", "D", 100)], slots=slots
    )
    routes = compute_fiber_paths(net, "S", "D", 2)
    model = ilp.build_model(
        net, "S", "D", demand, routes,
        slots=slots, gb=gb, max_dd_ps=10**12, fiber_params=fiber, occupied=occupied,
    )
    return net, routes, model


class TestModelShape:
    def test_variable_count_formulas(self):
        _, routes, model = diamond_model()
        counts = model.variable_counts()
        npaths, slots, e_used = 2, 16, 4
        assert counts["y"] == npaths * slots
        assert counts["xei"] == npaths * e_used * slots
        assert counts["o"] == npaths * (npaths - 1) // 2
        assert counts["x"] == npaths
        assert counts["pd"] == counts["T"] == counts["gvd"] == npaths

    def test_y_count_p4_f16(self):
        net = make_net(
            [("S", "A", 100), ("A", "D", 100), ("S", "B", 100), ("B", "D", 100),
             ("S", "C", 100), ("C", "D", 100), ("S", "D", 250)],
            slots=16,
        )
        routes = compute_fiber_paths(net, "S", "D", 4)
        assert len(routes) == 4
        model = ilp.build_model(net, "S", "D", 4, routes, slots=16, fiber_params=TINY_D)
        assert model.variable_counts()["y"] == 64

    def test_gamma_vars_per_pair_equal_shared_arcs(self):
        _, _, model = shared_path_model(npaths=2)
        assert model.variable_counts()["g"] == 3  # 3 shared arcs, one pair

    def test_single_path_has_no_pair_machinery(self):
        _, _, model = shared_path_model(npaths=1)
        counts = model.variable_counts()
        assert "o" not in counts and "g" not in counts
        assert model.constraints_by_family("diff-delay") == []
        assert model.constraints_by_family("lin-gamma") == []
        assert not [c for c in model.constraints_by_family("guard-band")]

    def test_empty_candidates_rejected(self):
        net = make_net([("S", "D", 100)], slots=4)
        with pytest.raises(ilp.ModelError):
            ilp.build_model(net, "S", "D", 1, [], slots=4)
        with pytest.raises(ilp.ModelError):
            ilp.build_model(net, "S", "D", 1, compute_fiber_paths(net, "S", "D", 1), slots=0)

    def test_only_linear_families_present(self):
        _, _, model = diamond_model(gb=2)
        assert {c.family for c in model.constraints} <= set(ilp.FAMILIES)


class TestLinearizations:
    def test_gamma_forced_to_product(self):
        _, _, model = shared_path_model(npaths=2)
        cons = [
            c
            for c in model.constraints_by_family("lin-gamma")
            if any(n.startswith("g_p1_p2_e0") for n, _ in c.coeffs)
            and not any(n.startswith("o_") for n, _ in c.coeffs)
        ]
        assert len(cons) == 3
        for xp in (0, 1):
            for xq in (0, 1):
                feasible = set()
                for gval in (0, 1):
                    env = {"g_p1_p2_e0": gval, "xe_p1_e0": xp, "xe_p2_e0": xq}
                    if all(self._holds(c, env) for c in cons):
                        feasible.add(gval)
                assert feasible == {xp * xq}

    def test_z_forced_to_product(self):
        slots = 8
        _, _, model = shared_path_model(npaths=1, slots=slots)
        cons = [
            c
            for c in model.constraints_by_family("lin-z")
            if any(n == "z_p1_e0" for n, _ in c.coeffs)
        ]
        assert len(cons) == 3
        for xe in (0, 1):
            for t in range(slots + 1):
                feasible = {
                    z
                    for z in range(slots + 1)
                    if all(
                        self._holds(c, {"z_p1_e0": z, "xe_p1_e0": xe, "T_p1": t})
                        for c in cons
                    )
                }
                assert feasible == {t * xe}, (xe, t)

    @staticmethod
    def _holds(con, env):
        lhs = sum(Fraction(env[n]) * c for n, c in con.coeffs)
        if con.relation == "<=":
            return lhs <= con.rhs
        if con.relation == ">=":
            return lhs >= con.rhs
        return lhs == con.rhs


class TestCheckAssignment:
    def test_all_zero_violates_bandwidth(self):
        _, routes, model = diamond_model(demand=4)
        a = ilp.assignment_from_bands(model, [None, None])
        bad = ilp.check_assignment(model, a)
        assert bad and all(fam == "bandwidth" for fam, _ in bad)

    def test_same_slots_on_shared_arc_violates_non_overlap(self):
        _, _, model = shared_path_model(npaths=2, demand=4)
        a = ilp.assignment_from_bands(model, [SlotRange(0, 2), SlotRange(0, 2)])
        bad = ilp.check_assignment(model, a)
        assert ("non-overlap", 0) in [(f, i) for f, i in bad][:50] or any(
            f == "non-overlap" for f, _ in bad
        )

    def test_fig2_two_band_solution_feasible(self):
        net, routes, model = diamond_model(demand=4)
        a = ilp.assignment_from_bands(model, [SlotRange(0, 2), SlotRange(0, 2)])
        assert ilp.check_assignment(model, a) == []

    def test_occupied_slots_excluded_by_guard_family(self):
        net = make_net([("S", "A", 100), ("A", "D", 100)], slots=8)
        route = compute_fiber_paths(net, "S", "D", 1)[0]
        occupied = {route.arcs[0].id: (3,)}
        model = ilp.build_model(
            net, "S", "D", 2, [route], slots=8, gb=1, max_dd_ps=10**12,
            fiber_params=TINY_D, occupied=occupied,
        )
        # slots 2,3,4 are forbidden (within gb=1 of slot 3)
        ok = ilp.assignment_from_bands(model, [SlotRange(5, 2)])
        assert ilp.check_assignment(model, ok) == []
        bad = ilp.assignment_from_bands(model, [SlotRange(4, 2)])
        assert any(f == "guard-band" for f, _ in ilp.check_assignment(model, bad))

    def test_diff_delay_binds_only_used_pairs(self):
        net = make_net(
            [("S", "A", 100), ("A", "D", 100), ("S", "B", 4000), ("B", "D", 4000)], slots=8
        )
        routes = compute_fiber_paths(net, "S", "D", 2)
        model = ilp.build_model(
            net, "S", "D", 2, routes, slots=8, gb=0,
            max_dd_ps=1_000_000, fiber_params=TINY_D,
        )
        # only the short path used: the unused long path must not violate M
        a = ilp.assignment_from_bands(model, [SlotRange(0, 2), None])
        assert ilp.check_assignment(model, a) == []
        both = ilp.assignment_from_bands(model, [SlotRange(0, 1), SlotRange(0, 1)])
        assert any(f == "diff-delay" for f, _ in ilp.check_assignment(model, both))

    def test_missing_variable_raises(self):
        _, _, model = diamond_model()
        with pytest.raises(ilp.ModelError):
            ilp.check_assignment(model, {})

    def test_bounds_reported(self):
        _, _, model = diamond_model()
        a = ilp.assignment_from_bands(model, [SlotRange(0, 2), SlotRange(2, 2)])
        a["T_p1"] = 99
        assert any(f == "bounds" for f, _ in ilp.check_assignment(model, a))


class TestCost:
    def test_two_slot_band_three_arcs(self):
        _, _, model = shared_path_model(npaths=1, demand=2)
        a = ilp.assignment_from_bands(model, [SlotRange(0, 2)])
        assert ilp.solution_cost(a) == 6

    def test_two_one_slot_bands_arcs_2_and_3(self):
        net = make_net(
            [("S", "A", 100), ("A", "D", 100), ("S", "B", 100), ("B", "C", 100), ("C", "D", 100)],
            slots=8,
        )
        routes = compute_fiber_paths(net, "S", "D", 2)
        assert [len(r.arcs) for r in routes] == [2, 3]
        model = ilp.build_model(net, "S", "D", 2, routes, slots=8, fiber_params=TINY_D)
        a = ilp.assignment_from_bands(model, [SlotRange(0, 1), SlotRange(1, 1)])
        assert ilp.solution_cost(a) == 5

    def test_fig2_style_cost_eight(self):
        _, _, model = diamond_model(demand=4)
        a = ilp.assignment_from_bands(model, [SlotRange(0, 2), SlotRange(0, 2)])
        assert ilp.solution_cost(a) == 8


class TestExport:
    def test_round_trip_toy(self):
        net = make_net([("S", "D", 100)], slots=2)
        route = compute_fiber_paths(net, "S", "D", 1)[0]
        model = ilp.build_model(net, "S", "D", 1, [route], slots=2, fiber_params=TINY_D)
        again = ilp.parse_lp(ilp.export_lp(model))
        assert again == model

    def test_round_trip_with_guard_and_occupancy(self):
        _, _, model = diamond_model(gb=2, occupied={0: (1, 2)}, fiber=FiberParams())
        text = ilp.export_lp(model)
        assert ilp.parse_lp(text) == model
        assert "gb_" in text and "dd_" in text

    def test_export_bit_stable(self):
        _, _, m1 = diamond_model(gb=1, fiber=FiberParams())
        _, _, m2 = diamond_model(gb=1, fiber=FiberParams())
        assert ilp.export_lp(m1) == ilp.export_lp(m2)

    def test_objective_lists_all_xei_with_unit_coefficient(self):
        _, _, model = diamond_model()
        names = {n for n, c in model.objective}
        assert names == {n for n in model.variables if n.startswith("xei_")}
        assert all(c == 1 for _, c in model.objective)
        first_line = ilp.export_lp(model).splitlines()[1]
        assert first_line.lstrip().startswith("obj:")


class TestSolverCrossValidation:
    def test_milp_matches_oracle_on_tiny_instances(self):
        rng = random.Random(20)
        checked = 0
        for trial in range(40):
            if checked >= 20:
                break
            slots = rng.choice([4, 6])
            demand = rng.randint(1, 3)
            gb = rng.randint(0, 1)
            net = make_net(
                [
                    ("S", "A", rng.randint(100, 400)),
                    ("A", "D", rng.randint(100, 400)),
                    ("S", "B", rng.randint(100, 400)),
                    ("B", "D", rng.randint(100, 400)),
                ],
                slots=slots,
            )
            state = SpectrumState(net)
            for v in ("S", "A", "B"):
                for link in net.outgoing(v):
                    bits = "".join("1" if rng.random() < 0.3 else "0" for _ in range(slots))
                    paint(state, link, bits)
            routes = oracle.enumerate_routes(net, "S", "D", 2)
            best = oracle.exact_solve(
                net, state, "S", "D", demand,
                gb=gb, max_dd_ps=10**12, k=2, include_gvd=False,
                limits=oracle.OracleLimits(max_bands=len(routes)),
                max_bands_per_path=1,
            )
            model = ilp.build_model(
                net, "S", "D", demand, routes,
                slots=slots, gb=gb, max_dd_ps=10**12,
                fiber_params=TINY_D, occupied=state.occupied_by_arc(),
            )
            solved = milp_solve(ilp.parse_lp(ilp.export_lp(model)))
            if best is None:
                assert solved is None
            else:
                assert solved is not None
                assert solved[0] == best.cost
            checked += 1
        assert checked >= 20


class TestHeuristicSolutionsPassChecker:
    def test_translated_solutions_feasible(self):
        rng = random.Random(31)
        net = make_net(
            [("S", "A", 100), ("A", "D", 150), ("S", "B", 120), ("B", "D", 130),
             ("A", "B", 80)],
            slots=12,
        )
        for _ in range(40):
            state = SpectrumState(net)
            for v in net.nodes:
                for link in net.outgoing(v):
                    bits = "".join("1" if rng.random() < 0.35 else "0" for _ in range(12))
                    paint(state, link, bits)
            policy = PolicyParams(mode="pt", k=4, gb=rng.randint(0, 1))
            req = Request("S", "D", rng.randint(1, 5))
            routes = compute_fiber_paths(net, "S", "D", policy.k)
            plan = assign_spectrum(state, routes, req, policy)
            if plan is None:
                continue
            model = ilp.build_model(
                net, "S", "D", req.demand_slots,
                [p.arcs for p in plan.paths],
                slots=12, gb=policy.gb, max_dd_ps=policy.max_dd_ps,
                fiber_params=TINY_D, occupied=state.occupied_by_arc(),
            )
            a = ilp.assignment_from_bands(model, [p.range for p in plan.paths])
            assert ilp.check_assignment(model, a) == []

    def test_gvd_terms_with_real_dispersion(self):
        # with real dispersion the checker passes once M absorbs the skew
        net = make_net([("S", "A", 800), ("A", "D", 900), ("S", "D", 2000)], slots=8)
        state = SpectrumState(net)
        paint(state, net.outgoing("S")[0], "11100000")  # S->A: 5 free slots
        paint(state, net.outgoing("S")[1], "00001110")  # S->D: blocks of 4 and 1
        routes = compute_fiber_paths(net, "S", "D", 2)
        policy = PolicyParams(mode="pt", k=2, gb=0, max_dd_ps=10**10)
        req = Request("S", "D", 6)
        plan = assign_spectrum(state, routes, req, policy)
        assert plan is not None and len(plan.paths) >= 2
        fiber = FiberParams()
        from flexrsa.physics import gvd_differential_delay_ps

        skews = [
            gvd_differential_delay_ps(fiber, p.range.length, sum(a.length_km for a in p.arcs))
            for p in plan.paths
        ]
        model = ilp.build_model(
            net, "S", "D", req.demand_slots, [p.arcs for p in plan.paths],
            slots=8, gb=0, max_dd_ps=policy.max_dd_ps + 2 * max(skews),
            fiber_params=fiber, occupied=state.occupied_by_arc(),
        )
        a = ilp.assignment_from_bands(model, [p.range for p in plan.paths])
        assert ilp.check_assignment(model, a) == []
