"""
Tests for the (a, b) recursion and its diagnostics.
Run with: pytest tests/
"""
import math

import numpy as np
import pytest

from app.core.errors import NumericBlowUpError, UndefinedQuantityError
from app.core.objectives import ModelPair
from app.core.scalar_recursion import (
    ScalarParams,
    ScalarState,
    basin_interval,
    basin_start,
    check_assumption,
    envelopes,
    helper_G,
    interval_nonempty,
    interval_nonempty_sufficient,
    lower_threshold,
    lyapunov,
    scalar_run,
    scalar_step,
    upper_envelope,
)


def _sigma(x):
    return 1.0 / (1.0 + math.exp(-x))


class TestParams:
    def test_from_axis_pair(self, axis_pair):
        p = ScalarParams.from_model(axis_pair, 0.1)
        assert p.eta == pytest.approx(0.1)
        assert p.r == pytest.approx(1.0)
        assert p.c == 5.0
        assert p.eta_tilde == pytest.approx(0.1 * 2.2)

    def test_requires_orthogonal_pair(self):
        m = ModelPair(theta_star=np.array([1.0, 1.0, 0.0]), theta0=np.array([1.0, 1.0, 1.0]))
        with pytest.raises(ValueError, match="orthogonal"):
            ScalarParams.from_model(m, 0.1)

    @pytest.mark.parametrize("kwargs", [{"eta": -0.1, "r": 1.0}, {"eta": 0.1, "r": 0.0}, {"eta": math.nan, "r": 1.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ScalarParams(**kwargs)


class TestStep:
    def test_matches_formula(self):
        p = ScalarParams(eta=0.5, r=2.0)
        a, b = 1.0, -2.0
        z = a + b
        slope = _sigma(z) * (1.0 - _sigma(z))
        out = scalar_step(ScalarState(a, b, p))
        assert out.a == pytest.approx(a - 0.5 * slope * a + 0.5 * (_sigma(a) - _sigma(z)), rel=1e-12)
        assert out.b == pytest.approx(b - 0.5 * 2.0 * slope * a, rel=1e-12)
        assert out.t == 1

    def test_non_finite_state(self):
        with pytest.raises(NumericBlowUpError):
            ScalarState(math.inf, 0.0, ScalarParams(eta=0.1, r=1.0))


class TestDiagnostics:
    """Lyapunov ratio, envelopes and the basin check."""

    def test_lyapunov_undefined_at_zero_b(self):
        with pytest.raises(UndefinedQuantityError):
            lyapunov(3.0, 0.0)

    def test_lyapunov_between_envelopes(self):
        a = 10.0
        for b in np.linspace(-19.5, -10.5, 19):
            env = envelopes(a, b)
            L = lyapunov(a, b)
            assert env.env_l <= L <= env.env_u

    def test_upper_envelope_undefined_for_non_negative_sum(self):
        env = envelopes(2.0, -1.0)
        assert math.isnan(env.env_u)
        assert env.env_l == pytest.approx(2.0 * _sigma(1.0))
        with pytest.raises(UndefinedQuantityError):
            upper_envelope(2.0, -2.0)

    def test_lower_threshold(self):
        assert lower_threshold(10.0, 1.0) == pytest.approx(1.1 / 2.1)

    def test_basin_interval(self):
        low, high = basin_interval(10.0, 1.0)
        assert low == pytest.approx(10.099, abs=1e-3)
        assert high == pytest.approx(18.091, abs=1e-3)

    def test_basin_interval_empty(self):
        assert basin_interval(0.5, 0.1) is None
        assert not interval_nonempty(0.5, 0.1)
        assert basin_interval(-1.0, 1.0) is None

    def test_sufficient_criterion_implies_nonempty(self):
        for a in np.geomspace(0.1, 100.0, 40):
            for r in np.geomspace(0.01, 10.0, 40):
                if interval_nonempty_sufficient(a, r):
                    assert interval_nonempty(a, r)

    def test_check_assumption_inside_basin(self):
        check = check_assumption(10.0, -12.6, 1.0, 5.0)
        assert check.ok
        assert check.via_interval

    def test_check_assumption_wrong_side(self):
        for a, b in [(3.0, -5.0), (10.0, -9.0)]:
            check = check_assumption(a, b, 1.0, 5.0)
            assert not check.ok
            assert not check.via_interval
            assert not check.holds

    def test_via_interval_ignores_side_conditions(self):
        """a = 3 with e^{−(a+b)} = 3.75 sits inside (3.303, 4.25) but fails a > c for c = 5."""
        b = -3.0 - math.log(3.75)
        check = check_assumption(3.0, b, 1.0, 5.0)
        assert check.via_interval
        assert not check.side
        assert not check.ok
        assert not check.holds
        relaxed = check_assumption(3.0, b, 1.0, 1.0)
        assert relaxed.ok
        assert relaxed.holds

    def test_basin_start(self):
        b = basin_start(10.0, 1.0)
        low, high = basin_interval(10.0, 1.0)
        assert math.exp(-(10.0 + b)) == pytest.approx(math.sqrt(low * high))
        assert check_assumption(10.0, b, 1.0, 5.0).ok
        assert basin_start(0.5, 0.1) is None

    def test_helper_g(self):
        assert helper_G(0.0, 0.0, 0.0) == 0.0
        # x = z > 0: only the −(1+δ)σ'(z)x term survives
        values = helper_G(0.5, np.array([1.0, 4.0]), np.array([1.0, 4.0]))
        assert np.all(values < 0)


class TestScalarRun:
    def test_short_run_stays_in_basin(self, axis_pair):
        p = ScalarParams.from_model(axis_pair, 0.1)
        result = scalar_run(ScalarState(10.0, -12.6, p), 2000)
        assert len(result.rows) == 2001
        assert result.summary.t0_found == 0
        assert all(row.assumption_ok for row in result.rows)
        # a rises while L < 1; b and a+b fall strictly while L > 1/(1+r)
        a = np.array([row.a for row in result.rows])
        b = np.array([row.b for row in result.rows])
        s = np.array([row.s for row in result.rows])
        assert np.all(np.diff(a) >= 0)
        assert np.all(np.diff(b) < 0)
        assert np.all(np.diff(s) < 0)

    def test_envelope_bounds_carry_over_along_run(self, axis_pair):
        p = ScalarParams.from_model(axis_pair, 0.1)
        target = 1.0 / (1.0 + p.r)
        rows = scalar_run(ScalarState(10.0, -12.6, p), 2000).rows
        for row in rows:
            # L equals env_L once σ(a) rounds to 1
            assert row.env_l <= row.L * (1.0 + 1e-12)
            assert row.L <= row.env_u
            if row.env_u < 1.0:
                assert row.L < 1.0
            if row.env_l > target:
                assert row.L > target
        assert all(row.env_u < 1.0 and row.env_l > target for row in rows)

    def test_rejects_empty_run(self):
        with pytest.raises(ValueError):
            scalar_run(ScalarState(10.0, -12.6, ScalarParams(eta=0.1, r=1.0)), 0)

    @pytest.mark.slow
    def test_long_run_orders(self, axis_pair):
        """(r·a − b)/T approaches η·r and |a+b| grows at most like log t."""
        p = ScalarParams.from_model(axis_pair, 0.1)
        summary = scalar_run(ScalarState(10.0, -12.6, p), 100_000).summary
        assert summary.basin_reached
        assert summary.limit_ra_minus_b_over_t == pytest.approx(p.eta * p.r, rel=0.05)
        assert math.isfinite(summary.bound_abs_s_over_logt)
        assert summary.bound_abs_s_over_logt > 0
        assert math.isfinite(summary.final_L)


def _random_basin_states(count, seed=11):
    """States with e^{−(a+b)} inside the basin interval, a in [5, 100], η(1+r+1/c) = 0.4."""
    rng = np.random.default_rng(seed)
    states = []
    while len(states) < count:
        r = float(rng.choice([0.5, 1.0, 2.0]))
        a = float(rng.uniform(5.0, 100.0))
        low, high = basin_interval(a, r)
        u = math.exp(math.log(low) + rng.uniform(0.05, 0.95) * (math.log(high) - math.log(low)))
        state = ScalarState(a, -math.log(u) - a, ScalarParams(eta=0.4 / (1.0 + r + 0.2), r=r, c=5.0))
        if check_assumption(state.a, state.b, r, 5.0).ok:
            states.append(state)
    return states


class TestBasinStep:
    """One recursion step from random states inside the basin."""

    STATES = _random_basin_states(2000)

    def test_identity_for_r_a_minus_b(self):
        for state in self.STATES:
            p = state.params
            nxt = scalar_step(state)
            expected = p.r * state.a - state.b + p.eta * p.r * (_sigma(state.a) - _sigma(state.s))
            assert p.r * nxt.a - nxt.b == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_monotone_coordinates(self):
        for state in self.STATES:
            nxt = scalar_step(state)
            assert nxt.a > state.a
            assert nxt.b < state.b
            assert nxt.s < state.s

    def test_upper_envelope_decreases(self):
        for state in self.STATES:
            nxt = scalar_step(state)
            assert upper_envelope(nxt.a, nxt.b) < upper_envelope(state.a, state.b)
            assert envelopes(nxt.a, nxt.b).env_l >= lower_threshold(nxt.a, state.params.r)

    def test_basin_preserved(self):
        for state in self.STATES:
            nxt = scalar_step(state)
            assert check_assumption(nxt.a, nxt.b, state.params.r, state.params.c).ok
