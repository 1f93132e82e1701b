import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from d2drelay.analytics import SgParams, a_function
from d2drelay.channel import ChannelModel, PathlossCoeffs
from d2drelay.env import ManhattanSpec, Point, UrbanMap
from d2drelay.routing import RelayNode
from d2drelay.sim import (
    Deployment,
    OperatingPoint,
    Scenario,
    SweepSpec,
    aggregate,
    cc_baseline,
    deploy,
    hex_grid,
    run_trial,
    select_strategy,
    simulate,
    sweep,
    wilson_interval,
)

SMALL_MAP = ManhattanSpec(width=300.0, height=200.0, block_size=45.0, street_width=25.0, jitter=8.0)

SMALL = Scenario(
    map_spec=SMALL_MAP,
    map_seed=3,
    bs_rings=1,
    isd_m=200.0,
    d2d_density_km2=150.0,
    pair_distance=0.6,
    trials=4,
    master_seed=99,
    probe_positions=4,
    probe_fading=8,
    fading_samples=8,
)


class TestHexGrid:
    def test_single_ring_is_seven_sites(self):
        sites = hex_grid(Point(0.0, 0.0), 500.0, 1)
        assert len(sites) == 7
        assert sites[0] == Point(0.0, 0.0)
        for p in sites[1:]:
            assert math.hypot(p.x, p.y) == pytest.approx(500.0)

    def test_zero_rings(self):
        assert hex_grid(Point(10.0, 20.0), 500.0, 0) == [Point(10.0, 20.0)]

    def test_two_rings_count(self):
        assert len(hex_grid(Point(0, 0), 100.0, 2)) == 19


class TestDeploy:
    def test_zero_density_only_endpoints(self):
        sc = replace(SMALL, d2d_density_km2=0.0)
        dep = deploy(sc, 0)
        assert len(dep.nodes) == 2
        assert {n.role for n in dep.nodes} == {"source", "destination"}

    def test_deterministic_per_trial_index(self):
        a = deploy(SMALL, 5)
        b = deploy(SMALL, 5)
        assert a == b
        c = deploy(SMALL, 6)
        assert a.nodes != c.nodes

    def test_pair_separation_within_tolerance(self):
        target = SMALL.pair_distance * SMALL.isd_m
        for i in range(10):
            dep = deploy(SMALL, i)
            src = dep.nodes[dep.src_id].position
            dst = dep.nodes[dep.dst_id].position
            assert abs(src.distance_to(dst) - target) <= 0.02 * target + 1e-9

    def test_poisson_relay_count(self):
        from d2drelay.sim import build_scenario_map

        sc = replace(SMALL, d2d_density_km2=400.0)
        urban_map = build_scenario_map(sc)
        mean = 400.0 * urban_map.area / 1e6
        counts = [len(deploy(sc, i, urban_map).nodes) - 2 for i in range(150)]
        # Poisson mean estimate within 3 standard errors.
        se = math.sqrt(mean / len(counts))
        assert abs(np.mean(counts) - mean) < 3 * se + 0.5

    def test_all_nodes_outdoor(self):
        from d2drelay.env import is_outdoor
        from d2drelay.sim import build_scenario_map

        urban_map = build_scenario_map(SMALL)
        dep = deploy(SMALL, 3, urban_map)
        assert all(is_outdoor(n.position, urban_map) for n in dep.nodes)

    def test_one_cc_ue_per_cell(self):
        dep = deploy(SMALL, 0)
        assert len(dep.cc_ues) == len(dep.bs) == 7


class TestRunTrial:
    def test_result_fields_valid(self):
        dep = deploy(SMALL, 0)
        r = run_trial(dep, SMALL)
        assert r.outcome in ("success", "route-failure", "link-outage")
        assert 0.0 <= r.cc_outage <= 1.0
        assert 0.0 <= r.cc_baseline <= 1.0
        assert r.band == SMALL.band and r.strategy == SMALL.strategy

    def test_route_failure_is_an_outcome_not_an_error(self):
        # An absurd threshold admits no links at all.
        sc = replace(SMALL, d2d_density_km2=0.0, threshold_db=80.0)
        r = run_trial(deploy(sc, 0), sc)
        assert r.outcome == "route-failure"
        assert r.hops == 0

    def test_trial_reproducible(self):
        dep = deploy(SMALL, 1)
        assert run_trial(dep, SMALL) == run_trial(dep, SMALL)

    def test_vanishing_d2d_power_matches_baseline(self):
        # As d2d power -> 0 no link clears the threshold, no transmitter is
        # active, and the probe sample collapses onto the baseline exactly.
        sc = replace(SMALL, d2d_power_w=1e-15)
        for i in range(8):
            r = run_trial(deploy(sc, i), sc)
            assert r.outcome == "route-failure"
            assert r.cc_outage == r.cc_baseline

    def test_added_d2d_interference_never_helps_cc(self):
        for i in range(10):
            r = run_trial(deploy(SMALL, i), SMALL)
            assert r.cc_outage >= r.cc_baseline - 1e-12

    def test_interference_free_dense_network_delivers(self):
        sc = replace(
            SMALL,
            bs_power_w=1e-15,
            cc_ue_power_w=1e-15,
            d2d_density_km2=900.0,
            pair_distance=0.5,
        )
        outcomes = [run_trial(deploy(sc, i), sc).outcome for i in range(20)]
        assert outcomes.count("success") >= 14

    def test_broadcast_strategy_runs(self):
        sc = replace(SMALL, strategy="BR", d2d_density_km2=300.0)
        outcomes = {run_trial(deploy(sc, i), sc).outcome for i in range(6)}
        assert outcomes <= {"success", "route-failure", "link-outage"}

    def test_broadcast_interferes_at_least_as_much_as_spr(self):
        # Paired trials: flooding transmits from every reached node, the
        # single-path route from a handful, so its mean cc impact is >= SPR's.
        spr = replace(SMALL, d2d_density_km2=400.0, trials=120)
        br = replace(spr, strategy="BR")
        diffs = []
        for i in range(spr.trials):
            dep = deploy(spr, i)
            r_spr = run_trial(dep, spr)
            r_br = run_trial(dep, br)
            diffs.append((r_br.cc_outage - r_br.cc_baseline) - (r_spr.cc_outage - r_spr.cc_baseline))
        assert np.mean(diffs) > 0
        assert np.mean(diffs) > 3 * np.std(diffs) / math.sqrt(len(diffs))


class TestSimulateAndSweep:
    def test_simulate_returns_trials(self):
        rs = simulate(SMALL)
        assert len(rs) == SMALL.trials

    def test_worker_count_does_not_change_results(self):
        sc = replace(SMALL, trials=6)
        assert simulate(sc, workers=1) == simulate(sc, workers=2)

    def test_batched_strategies_match_solo_runs(self):
        from d2drelay.sim import simulate_strategies

        sc = replace(SMALL, trials=5, d2d_density_km2=300.0)
        batched = simulate_strategies(sc, ("SPR", "IAR", "BR"))
        for strat in ("SPR", "IAR", "BR"):
            assert batched[strat] == simulate(replace(sc, strategy=strat))

    def test_sweep_row_count_and_order(self):
        spec = SweepSpec(axis="ue_density", grid=(0.0, 200.0), strategies=("SPR", "IAR"),
                         trials_per_point=3)
        rows = sweep(spec, SMALL)
        assert len(rows) == 4
        keys = [(r.axis_value, r.strategy, r.band) for r in rows]
        assert keys == sorted(keys)

    def test_sweep_deterministic(self):
        spec = SweepSpec(axis="wall_loss", grid=(10.0,), strategies=("SPR",), trials_per_point=4)
        assert sweep(spec, SMALL) == sweep(spec, SMALL)

    def test_zero_density_point_is_single_link(self):
        spec = SweepSpec(axis="ue_density", grid=(0.0,), strategies=("SPR",), trials_per_point=6)
        rows = sweep(spec, replace(SMALL, pair_distance=0.3))
        assert len(rows) == 1
        assert rows[0].mean_hops in (1.0,) or math.isnan(rows[0].mean_hops)

    def test_cc_constraint_axis_emits_selector_rows(self):
        spec = SweepSpec(
            axis="cc_constraint", grid=(0.0, 1.0), strategies=("SPR",), trials_per_point=4
        )
        rows = sweep(spec, SMALL)
        assert len(rows) == 2
        # A zero constraint admits nothing; a constraint of 1 admits everything.
        by_axis = {r.axis_value: r for r in rows}
        assert by_axis[0.0].strategy == "none"
        assert by_axis[1.0].strategy in ("SPR",)

    def test_wilson_interval_reference_values(self):
        lo, hi = wilson_interval(50, 100)
        assert lo == pytest.approx(0.4038, abs=5e-4)
        assert hi == pytest.approx(0.5962, abs=5e-4)
        assert wilson_interval(0, 0) == (0.0, 1.0)

    def test_aggregate_counts_outcomes(self):
        rs = simulate(replace(SMALL, trials=8))
        row = aggregate(rs, axis_value=1.0)
        assert row.trials == 8
        assert 0.0 <= row.d2d_success <= 1.0
        assert row.ci_low <= row.d2d_success <= row.ci_high


PAPER_POINTS = (
    OperatingPoint("IAR", "DL", d2d_outage=0.20, cc_outage=0.10),
    OperatingPoint("IAR", "UL", d2d_outage=0.08, cc_outage=0.13),
    OperatingPoint("SPR", "UL", d2d_outage=0.03, cc_outage=0.20),
    OperatingPoint("SPR", "DL", d2d_outage=0.50, cc_outage=0.09),
)


class TestSelectStrategy:
    def test_tight_constraint_permits_nothing(self):
        choice = select_strategy(0.04, PAPER_POINTS)
        assert choice.chosen is None
        assert choice.admissible == ()

    def test_reference_operating_points(self):
        assert select_strategy(0.12, PAPER_POINTS).chosen.strategy == "IAR"
        assert select_strategy(0.12, PAPER_POINTS).chosen.band == "DL"
        assert select_strategy(0.15, PAPER_POINTS).chosen == PAPER_POINTS[1]  # IAR UL
        assert select_strategy(0.40, PAPER_POINTS).chosen == PAPER_POINTS[2]  # SPR UL

    def test_relaxing_constraint_never_increases_outage(self):
        prev = math.inf
        for c in np.linspace(0.0, 0.5, 51):
            choice = select_strategy(float(c), PAPER_POINTS)
            if choice.chosen is not None:
                assert choice.chosen.d2d_outage <= prev
                prev = choice.chosen.d2d_outage

    @given(
        st.lists(
            st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0)), min_size=1, max_size=8
        ),
        st.floats(0.0, 1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_filter(self, pairs, constraint):
        points = tuple(
            OperatingPoint(f"S{i}", "DL", d2d_outage=d, cc_outage=c)
            for i, (d, c) in enumerate(pairs)
        )
        choice = select_strategy(constraint, points)
        feasible = [p for p in points if p.cc_outage <= constraint]
        if not feasible:
            assert choice.chosen is None
        else:
            assert choice.chosen.d2d_outage == min(p.d2d_outage for p in feasible)

    def test_empty_evaluation_rejected(self):
        with pytest.raises(ValueError):
            select_strategy(0.5, ())


POWER_LAW = ChannelModel(
    carrier_ghz=1.0,
    los=PathlossCoeffs(slope=40.0, intercept=0.0, freq_slope=0.0),
    nlos=PathlossCoeffs(slope=40.0, intercept=0.0, freq_slope=0.0),
    shadow_sigma_db=0.0,
    noise_w=0.0,
)


class TestCcBaseline:
    def test_interference_free_probe_rarely_fails(self):
        sc = replace(SMALL, bs_rings=0)
        dep = deploy(sc, 0)
        out = cc_baseline(dep, sc, trials=2000, seed=5)
        assert out < 0.02

    def test_cell_edge_worse_than_center(self):
        dep = deploy(SMALL, 0)
        n = 4000
        near_center = Point(dep.bs[0].x + 10.0, dep.bs[0].y)
        center = cc_baseline(dep, SMALL, n, probe=near_center, seed=1)
        edge_point = Point(dep.bs[0].x + SMALL.isd_m / 2, dep.bs[0].y)
        edge = cc_baseline(dep, SMALL, n, probe=edge_point, seed=2)
        sigma = math.sqrt(0.25 / n) * 2
        assert edge - center > 3 * sigma

    def test_matches_poisson_field_closed_form(self):
        # PPP of sites around a pinned probe, quartic power law, no noise:
        # success should track exp(-density * pi * r^2 * A).
        rng = np.random.default_rng(31)
        lam = 3e-6
        r = 200.0
        field = 3000.0
        urban_map = UrbanMap(width=2 * field, height=2 * field, buildings=())
        probe = Point(field, field)
        sc = replace(
            SMALL,
            channel=POWER_LAW,
            bs_power_w=40.0,
            band="DL",
            isd_m=2 * field,  # keep the probe cell irrelevantly large
        )
        outs = []
        for k in range(150):
            n_int = rng.poisson(lam * math.pi * (field**2 - r**2))
            u = rng.uniform(0.0, 1.0, n_int)
            d = np.sqrt(r**2 + (field**2 - r**2) * u)
            ang = rng.uniform(0, 2 * math.pi, n_int)
            bs = [Point(probe.x + r, probe.y)] + [
                Point(probe.x + di * math.cos(a), probe.y + di * math.sin(a))
                for di, a in zip(d, ang)
            ]
            dep = Deployment(
                trial_index=0, bs=tuple(bs), cc_ues=(), nodes=(), src_id=0, dst_id=1
            )
            outs.append(
                cc_baseline(dep, sc, trials=400, urban_map=urban_map, probe=probe, seed=1000 + k)
            )
        params = SgParams(bs_density=lam, alpha=4.0, threshold=sc.threshold_linear)
        want_out = 1.0 - math.exp(-lam * math.pi * r**2 * a_function(params.threshold, 4.0))
        assert abs(np.mean(outs) - want_out) < 0.03


class TestScenarioValidation:
    def test_rejects_bad_band(self):
        with pytest.raises(ValueError):
            replace(SMALL, band="XX")

    def test_rejects_bad_strategy(self):
        with pytest.raises(ValueError):
            replace(SMALL, strategy="FLOOD")

    def test_rejects_nonpositive_power(self):
        with pytest.raises(ValueError):
            replace(SMALL, d2d_power_w=0.0)

    def test_rejects_pair_distance_out_of_range(self):
        with pytest.raises(ValueError):
            replace(SMALL, pair_distance=1.5)

    def test_threshold_conversion(self):
        assert SMALL.threshold_linear == pytest.approx(10 ** (-0.6))
