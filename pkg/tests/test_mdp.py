import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings, strategies as st

from relayline import (
    MdpConfig,
    MdpSolution,
    analytic_bounds,
    bellman_update,
    solve,
    stage_value,
    state_transition,
)

# coarse grids keep unit tests quick; acceptance runs the full defaults
FAST = dict(state_step=0.02, action_step=0.01)


class TestConfig:
    def test_rejects_nonpositive(self):
        for kw in ({"beta": 0.0}, {"rho": -1.0}, {"xi": 0.0}, {"state_step": 0.0}):
            with pytest.raises(ValueError):
                MdpConfig(**kw)

    def test_state_step_must_divide_one(self):
        with pytest.raises(ValueError):
            MdpConfig(state_step=0.03)
        MdpConfig(state_step=0.02)  # fine

    def test_action_truncation_default(self):
        assert MdpConfig(rho=2.0).resolved_action_max() == 30.0
        assert MdpConfig(rho=0.01).resolved_action_max() == pytest.approx(1200.0)
        with pytest.raises(ValueError):
            MdpConfig(action_max=0.5)

    def test_theta_only_below_critical_attenuation(self):
        assert MdpConfig(beta=2.0, rho=1.0).theta == pytest.approx(1.0)
        assert MdpConfig(beta=1.0, rho=2.0).theta is None


class TestStateTransition:
    def test_printed_sequence_values(self):
        assert state_transition(1.0, 0.0, 0.01) == pytest.approx(0.5, abs=0)
        assert state_transition(0.5, 0.0, 0.01, state_step=0.01) == pytest.approx(0.34)
        assert state_transition(0.34, 8.418, 0.01, state_step=0.01) == pytest.approx(0.27)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            state_transition(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            state_transition(0.5, -0.1, 1.0)

    @given(
        s=st.floats(1e-6, 1.0),
        r=st.floats(0.0, 50.0),
        rho=st.floats(0.01, 20.0),
    )
    @settings(max_examples=80, deadline=None)
    def test_stays_in_unit_interval(self, s, r, rho):
        # w < 1 mathematically, but doubles saturate to 1.0 for huge rho*r
        w = state_transition(s, r, rho)
        assert 0.0 < w <= 1.0
        rounded = state_transition(s, r, rho, state_step=0.01)
        assert w <= rounded <= 1.0


class TestStageValue:
    def test_zero_distance_is_immediate_placement(self):
        cfg = MdpConfig(beta=1.0, rho=2.0, xi=0.3, **FAST)
        values = np.linspace(0.0, 1.0, cfg.n_states)
        s = 0.5
        nxt = state_transition(s, 0.0, cfg.rho, cfg.state_step)
        want = cfg.xi + values[round(nxt / cfg.state_step) - 1]
        assert stage_value(s, 0.0, values, cfg) == pytest.approx(want, rel=1e-12)

    def test_closed_form_integral_vs_quadrature(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            beta = float(rng.uniform(0.2, 3.0))
            rho = float(rng.uniform(0.2, 3.0))
            s = float(rng.uniform(0.05, 1.0))
            a = float(rng.uniform(0.0, 4.0))
            cfg = MdpConfig(beta=beta, rho=rho, xi=0.1, **FAST)
            values = np.zeros(cfg.n_states)
            got = stage_value(s, a, values, cfg)
            integral, _ = scipy.integrate.quad(
                lambda z: beta * math.exp(-beta * z) * s * (math.exp(rho * z) - 1.0), 0.0, a
            )
            want = integral + math.exp(-beta * a) * (
                s * (math.exp(rho * a) - 1.0) + cfg.xi + 0.0
            )
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)

    def test_equal_rates_branch(self):
        cfg = MdpConfig(beta=1.5, rho=1.5, xi=0.1, **FAST)
        values = np.zeros(cfg.n_states)
        s, a = 0.8, 1.2
        integral, _ = scipy.integrate.quad(
            lambda z: 1.5 * math.exp(-1.5 * z) * s * (math.exp(1.5 * z) - 1.0), 0.0, a
        )
        want = integral + math.exp(-1.5 * a) * (s * (math.exp(1.5 * a) - 1.0) + cfg.xi)
        assert stage_value(s, a, values, cfg) == pytest.approx(want, rel=1e-10)

    def test_known_integral_value(self):
        # beta=1, rho=2, s=1, a=1 with zero continuation: the expected
        # line-end cost alone integrates to (e-1) - (1-1/e)
        cfg = MdpConfig(beta=1.0, rho=2.0, xi=0.5, **FAST)
        values = np.zeros(cfg.n_states)
        got = stage_value(1.0, 1.0, values, cfg)
        i_want = (math.e - 1.0) - (1.0 - math.exp(-1.0))
        want = i_want + math.exp(-1.0) * ((math.e**2 - 1.0) + 0.5)
        assert got == pytest.approx(want, rel=1e-12)
        assert i_want == pytest.approx(1.0862, abs=1e-4)

    def test_large_distance_approaches_never_place_cost(self):
        cfg = MdpConfig(beta=2.0, rho=1.0, xi=0.05, **FAST)
        theta = cfg.theta
        values = np.full(cfg.n_states, 0.2)
        s = 0.6
        vals = [stage_value(s, a, values, cfg) for a in (5.0, 10.0, 14.0)]
        for v in vals:
            assert v < theta * s
        assert abs(vals[-1] - theta * s) < 1e-7


class TestBellman:
    def test_first_sweep_from_zero_is_nonnegative(self):
        cfg = MdpConfig(beta=1.0, rho=2.0, xi=0.05, **FAST)
        j1, policy = bellman_update(np.zeros(cfg.n_states), cfg)
        assert np.all(j1 >= 0.0)
        assert np.all(policy >= 0.0)

    def test_sweeps_increase_monotonically(self):
        cfg = MdpConfig(beta=1.0, rho=2.0, xi=0.05, **FAST)
        j = np.zeros(cfg.n_states)
        for _ in range(30):
            j_next, _ = bellman_update(j, cfg)
            assert np.all(j_next >= j - 1e-15)
            j = j_next

    def test_never_place_bound_preserved(self):
        cfg = MdpConfig(beta=1.0, rho=0.5, xi=0.05, **FAST)
        theta_s = cfg.theta * cfg.state_grid()
        j = np.zeros(cfg.n_states)
        for _ in range(40):
            j, _ = bellman_update(j, cfg)
            assert np.all(j <= theta_s)

    def test_rejects_bad_table(self):
        cfg = MdpConfig(**FAST)
        with pytest.raises(ValueError):
            bellman_update(np.zeros(cfg.n_states + 1), cfg)
        bad = np.zeros(cfg.n_states)
        bad[0] = np.nan
        with pytest.raises(ValueError):
            bellman_update(bad, cfg)


class TestSolve:
    def test_converges_and_solution_shape(self):
        cfg = MdpConfig(beta=1.0, rho=2.0, xi=0.1, **FAST)
        sol = solve(cfg)
        assert sol.converged
        assert sol.residual < cfg.vi_tolerance
        assert len(sol.values) == cfg.n_states
        assert len(sol.policy) == cfg.n_states
        assert np.all(np.diff(sol.values) >= -1e-12)

    def test_policy_decreases_with_state(self):
        sol = solve(MdpConfig(beta=1.0, rho=2.0, xi=0.01, **FAST))
        diffs = np.diff(sol.policy)
        assert np.all(diffs <= 1e-12)

    def test_policy_increases_with_price(self):
        a_small = solve(MdpConfig(beta=1.0, rho=2.0, xi=0.01, **FAST)).policy
        a_large = solve(MdpConfig(beta=1.0, rho=2.0, xi=0.5, **FAST)).policy
        assert np.all(a_large >= a_small - 1e-12)
        assert a_large.mean() > a_small.mean()

    def test_policy_decreases_with_attenuation(self):
        a_lo = solve(MdpConfig(beta=1.0, rho=2.0, xi=0.01, **FAST)).policy
        a_hi = solve(MdpConfig(beta=1.0, rho=5.0, xi=0.01, **FAST)).policy
        assert a_hi.mean() < a_lo.mean()

    def test_value_increases_with_price(self):
        j1 = solve(MdpConfig(beta=1.0, rho=2.0, xi=0.02, **FAST)).values
        j2 = solve(MdpConfig(beta=1.0, rho=2.0, xi=0.2, **FAST)).values
        assert np.all(j2 >= j1 - 1e-12)

    def test_normalization_scales_distances(self):
        base = solve(MdpConfig(beta=1.0, rho=2.0, xi=0.1, **FAST))
        scaled = solve(MdpConfig(beta=2.0, rho=4.0, xi=0.1, **FAST))
        assert scaled.values == pytest.approx(base.values.tolist(), rel=1e-12)
        assert scaled.policy == pytest.approx((base.policy / 2.0).tolist(), rel=1e-12)

    def test_nonconvergence_is_reported_not_raised(self):
        cfg = MdpConfig(beta=1.0, rho=2.0, xi=0.1, max_sweeps=3, **FAST)
        sol = solve(cfg)
        assert not sol.converged
        assert sol.sweeps_used == 3

    def test_roundtrip_serialization(self):
        sol = solve(MdpConfig(beta=1.0, rho=2.0, xi=0.1, **FAST))
        doc = sol.to_dict()
        back = MdpSolution.from_dict(doc)
        assert np.array_equal(back.values, sol.values)
        assert np.array_equal(back.policy, sol.policy)
        assert back.config == replace(sol.config, action_max=sol.config.resolved_action_max())
        with pytest.raises(ValueError):
            MdpSolution.from_dict({"schema_version": 99})


class TestAnalyticBounds:
    def test_theta_bound_example(self):
        cfg = MdpConfig(beta=2.0, rho=1.0, xi=0.1, **FAST)
        theta_bound, _ = analytic_bounds(cfg, 1.0)
        assert theta_bound == pytest.approx(1.0, rel=1e-12)

    def test_fixed_spacing_bound_value(self):
        cfg = MdpConfig(beta=1.0, rho=2.0, xi=0.3, **FAST)
        want = (0.3 + math.expm1(2.0)) / 1.0 + math.expm1(2.0)
        _, fixed = analytic_bounds(cfg, 0.5)
        assert fixed <= want + 1e-12

    def test_solution_respects_bounds(self):
        for beta, rho in ((1.0, 0.5), (1.0, 2.0)):
            cfg = MdpConfig(beta=beta, rho=rho, xi=0.05, **FAST)
            sol = solve(cfg)
            for i, s in enumerate(cfg.state_grid()):
                theta_bound, fixed = analytic_bounds(cfg, s)
                assert sol.values[i] < fixed
                if theta_bound is not None:
                    assert sol.values[i] < theta_bound
