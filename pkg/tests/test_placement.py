import math

import numpy as np
import pytest

from relayline import (
    NodeLayout,
    PlacementProblem,
    attenuation_H,
    grid_oracle_placement,
    optimize_placement,
    single_relay_optimum,
    uniform_rate_factor,
)

LOG3 = math.log(3.0)


class TestSingleRelayClosedForm:
    def test_branch_boundary_continuity(self):
        at = single_relay_optimum(LOG3)
        assert at.y1_over_L == 0.0
        # the interior branch formula also lands on zero there
        assert math.log(math.sqrt(math.exp(LOG3) + 1.0) - 1.0) / LOG3 == pytest.approx(
            0.0, abs=1e-15
        )
        just_above = single_relay_optimum(LOG3 + 1e-9)
        assert just_above.y1_over_L == pytest.approx(0.0, abs=1e-6)

    def test_low_attenuation_pins_relay_to_source(self):
        s = single_relay_optimum(0.5)
        el = math.exp(0.5)
        assert s.y1_over_L == 0.0
        assert s.p01_frac == pytest.approx(2.0 / (el + 1.0), rel=1e-12)
        assert s.p02_frac == s.p12_frac
        assert s.rate_factor == pytest.approx(s.p01_frac, rel=1e-12)

    def test_interior_branch_values(self):
        s = single_relay_optimum(2.0)
        root = math.sqrt(math.exp(2.0) + 1.0)
        assert s.y1_over_L == pytest.approx(0.3199752, abs=1e-6)
        assert s.p01_frac == 0.5
        assert s.p02_frac == pytest.approx(0.5 / root, rel=1e-12)
        assert s.p12_frac == pytest.approx((root - 1.0) / (2 * root), rel=1e-12)
        assert s.rate_factor == pytest.approx(1.0 / (2.0 * (root - 1.0)), rel=1e-12)

    def test_fractions_always_sum_to_one(self):
        for lam in (0.1, 0.9, LOG3, 1.5, 4.0, 30.0):
            s = single_relay_optimum(lam)
            assert s.p01_frac + s.p02_frac + s.p12_frac == pytest.approx(1.0, rel=1e-12)

    def test_high_attenuation_limit_is_midpoint(self):
        assert abs(single_relay_optimum(50.0).y1_over_L - 0.5) < 1e-3

    def test_rate_factor_matches_attenuation(self):
        # C(factor * P_T/sigma2) must equal C((P_T/sigma2)/H) at the optimum
        for lam in (0.4, 2.0, 6.0):
            s = single_relay_optimum(lam)
            layout = NodeLayout(length=1.0, positions=(s.y1_over_L,))
            h = attenuation_H(layout, lam)
            assert s.rate_factor == pytest.approx(1.0 / h, rel=1e-12)


class TestOptimizePlacement:
    def test_matches_single_relay_closed_form(self):
        for lam in (0.2, LOG3, 2.0, 5.0, 20.0, 50.0):
            sol = optimize_placement(PlacementProblem(1, lam))
            want = single_relay_optimum(lam).y1_over_L
            assert abs(sol.normalized_positions[0] - want) < 1e-6

    def test_low_attenuation_clusters_at_source(self):
        sol = optimize_placement(PlacementProblem(2, 0.1))
        assert all(w < 0.2 for w in sol.normalized_positions)

    def test_high_attenuation_goes_uniform(self):
        sol = optimize_placement(PlacementProblem(2, 15.0))
        assert sol.normalized_positions[0] == pytest.approx(1.0 / 3.0, abs=0.05)
        assert sol.normalized_positions[1] == pytest.approx(2.0 / 3.0, abs=0.05)

    def test_objective_reaches_grid_oracle(self):
        for n, lam, step in ((1, 2.0, 1e-3), (2, 2.0, 2e-3), (3, 2.0, 0.01), (2, 0.3, 2e-3)):
            sol = optimize_placement(PlacementProblem(n, lam))
            oracle = grid_oracle_placement(PlacementProblem(n, lam), step)
            assert sol.objective <= oracle.objective + 1e-12
            assert sol.objective == pytest.approx(oracle.objective, abs=1e-3)

    def test_strict_improvement_with_more_relays(self):
        for lam in (0.5, 2.0):
            objectives = [
                optimize_placement(PlacementProblem(n, lam)).objective for n in range(1, 5)
            ]
            assert all(b < a for a, b in zip(objectives, objectives[1:]))

    def test_gain_grows_with_attenuation(self):
        for n in (1, 2):
            gains = [
                optimize_placement(PlacementProblem(n, lam)).gain for lam in (0.5, 1.0, 2.0, 5.0)
            ]
            assert all(b >= a - 1e-9 for a, b in zip(gains, gains[1:]))

    def test_fast_effort_agrees_with_full(self):
        for n, lam in ((5, 3.0), (12, 12.0), (9, 0.7)):
            fast = optimize_placement(PlacementProblem(n, lam), effort="fast")
            full = optimize_placement(PlacementProblem(n, lam))
            assert fast.objective == pytest.approx(full.objective, rel=1e-7)

    def test_warm_start_is_never_worse(self):
        lam = 4.0
        warm = np.exp(lam * np.array([0.1, 0.2, 0.9]))
        sol = optimize_placement(PlacementProblem(3, lam), extra_starts=(warm,))
        plain = optimize_placement(PlacementProblem(3, lam))
        assert sol.objective <= plain.objective * (1 + 1e-10)

    def test_rejects_bad_problems(self):
        with pytest.raises(ValueError):
            PlacementProblem(0, 1.0)
        with pytest.raises(ValueError):
            PlacementProblem(1, 0.0)
        with pytest.raises(ValueError):
            PlacementProblem(1, 1e6)


class TestGridOracle:
    def test_single_relay_examples(self):
        sol = grid_oracle_placement(PlacementProblem(1, 2.0), 1e-3)
        assert sol.normalized_positions[0] == pytest.approx(0.320, abs=1e-3)
        sol = grid_oracle_placement(PlacementProblem(1, 0.5), 1e-3)
        assert sol.normalized_positions[0] == 0.0

    def test_refinement_is_monotone(self):
        for n, lam in ((1, 2.0), (2, 1.0), (3, 4.0)):
            coarse = grid_oracle_placement(PlacementProblem(n, lam), 0.02).objective
            fine = grid_oracle_placement(PlacementProblem(n, lam), 0.01).objective
            assert fine <= coarse + 1e-15

    def test_rejects_large_n(self):
        with pytest.raises(ValueError):
            grid_oracle_placement(PlacementProblem(4, 1.0), 0.1)


class TestUniformFactor:
    def test_hand_value(self):
        e = math.e
        want = e + (e * e - e) / (1.0 + e)
        assert uniform_rate_factor(1, 2.0) == pytest.approx(want, rel=1e-12)

    def test_matches_layout_attenuation(self):
        for n, lam in ((1, 2.0), (4, 5.0), (7, 0.6)):
            pos = tuple((k + 1.0) / (n + 1.0) for k in range(n))
            h = attenuation_H(NodeLayout(length=1.0, positions=pos), lam)
            assert uniform_rate_factor(n, lam) == pytest.approx(h, rel=1e-10)

    def test_exceeds_single_hop_attenuation(self):
        for n in (1, 2, 5, 20, 100):
            for lam in (0.3, 2.0, 10.0):
                assert uniform_rate_factor(n, lam) > math.exp(lam / (n + 1.0))

    def test_limit_is_one(self):
        assert uniform_rate_factor(10_000, 2.0) - 1.0 < 0.01
        tail = [uniform_rate_factor(n, 2.0) for n in (100, 300, 1000, 3000)]
        assert all(f >= 1.0 for f in tail)
        assert all(b < a for a, b in zip(tail, tail[1:]))


class TestNormalization:
    def test_positions_depend_only_on_lambda(self):
        # (rho, L) enters the layout-level H only through rho*L and y/L
        pos = (0.25, 0.75)
        h1 = attenuation_H(NodeLayout(length=1.0, positions=pos), 3.0)
        h2 = attenuation_H(
            NodeLayout(length=0.5, positions=tuple(p / 2 for p in pos)), 6.0
        )
        assert h1 == pytest.approx(h2, rel=1e-12)
