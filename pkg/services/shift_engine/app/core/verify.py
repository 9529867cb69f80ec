"""
Property suites behind `verify`.

Each suite is a function of the seed returning PropertyResults. A failing
property keeps the first counterexample's inputs so they can be replayed.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Optional

import numpy as np

from . import objectives
from .errors import ConfigError
from .linalg import haar_subspace
from .objectives import ModelPair, Setting, sigmoid
from .rng import Stream, stream
from .scalar_recursion import (
    ScalarParams,
    ScalarState,
    basin_interval,
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
from .shift_dynamics import ParticleEnsemble, regression_reconstruct, simulate

logger = logging.getLogger(__name__)

GRADIENT_CASES = 1000
GRADIENT_DIM = 8
FD_STEP = 1e-5
FD_TOL = 1e-6
# below this gradient norm the finite-difference check is absolute
GRADIENT_FLOOR = 1e-3
CLOSED_FORM_CASES = 100
CLOSED_FORM_TOL = 1e-9
BRACKET_RUNS = 50
BRACKET_STEPS = 2000
BRACKET_SLACK = 1e-12
PRESERVATION_STATES = 10_000
IDENTITY_TOL = 1e-12
IMPLICATION_RUNS = 20
CHECKER_TRIPLES = 100_000
BOUNDARY_EXCLUSION = 1e-9
BASIN_R_VALUES = (0.5, 1.0, 2.0)
BASIN_C = 5.0


@dataclass
class PropertyResult:
    name: str
    checked: int = 0
    failures: int = 0
    counterexample: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.checked > 0

    def fail(self, **inputs) -> None:
        self.failures += 1
        if self.counterexample is None:
            self.counterexample = {k: _plain(v) for k, v in inputs.items()}

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: {self.checked - self.failures}/{self.checked}"
        if self.counterexample is not None:
            text += f" counterexample={self.counterexample}"
        return text


def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def _basin_eta(r: float) -> float:
    # keeps η(1 + r + 1/c) at 0.4
    return 0.4 / (1.0 + r + 1.0 / BASIN_C)


def _basin_state(rng: np.random.Generator, a: float, r: float) -> Optional[ScalarState]:
    """State with e^{−(a+b)} strictly inside the basin interval."""
    interval = basin_interval(a, r)
    if interval is None:
        return None
    low, high = interval
    frac = rng.uniform(0.05, 0.95)
    u = math.exp(math.log(low) + frac * (math.log(high) - math.log(low)))
    s = -math.log(u)
    return ScalarState(a, s - a, ScalarParams(eta=_basin_eta(r), r=r, c=BASIN_C))


# --- gradients -------------------------------------------------------------


def _random_pair(rng: np.random.Generator, dim: int) -> ModelPair:
    return ModelPair(theta_star=rng.standard_normal(dim), theta0=rng.standard_normal(dim))


def _gradient_property(setting: Setting, seed: int) -> PropertyResult:
    result = PropertyResult(f"gradient {setting.value} vs central differences")
    rng = stream(seed, Stream.VERIFY, 1 if setting is Setting.REGRESSION else 2)
    eye = np.eye(GRADIENT_DIM)
    for case in range(GRADIENT_CASES):
        m = _random_pair(rng, GRADIENT_DIM)
        x = rng.standard_normal(GRADIENT_DIM) * rng.uniform(0.1, 3.0)
        analytic = objectives.pointwise_gradient(m, setting, x)
        plus = objectives.utility_rows(m, setting, x + FD_STEP * eye)
        minus = objectives.utility_rows(m, setting, x - FD_STEP * eye)
        numeric = (plus - minus) / (2.0 * FD_STEP)
        scale = max(float(np.linalg.norm(analytic)), GRADIENT_FLOOR)
        result.checked += 1
        if float(np.linalg.norm(analytic - numeric)) > FD_TOL * scale:
            result.fail(case=case, x=x, theta_star=m.theta_star, theta0=m.theta0, analytic=analytic, numeric=numeric)
    return result


def gradient_suite(seed: int) -> List[PropertyResult]:
    return [_gradient_property(Setting.REGRESSION, seed), _gradient_property(Setting.CLASSIFICATION, seed)]


# --- closed form -----------------------------------------------------------


def _regression_closed_form(seed: int) -> PropertyResult:
    result = PropertyResult("regression x_T matches the closed form")
    rng = stream(seed, Stream.VERIFY, 3)
    for case in range(CLOSED_FORM_CASES):
        d = int(rng.integers(3, 9))
        subspace = haar_subspace(d, int(rng.integers(1, d)), int(rng.integers(0, 2**31)))
        m = ModelPair.from_best_response(rng.standard_normal(d), subspace)
        gamma = rng.uniform(0.05, 0.3) / (2.0 * m.residual_norm**2)
        T = int(rng.integers(1, 61))
        x0 = rng.standard_normal(d)
        sim = simulate(ParticleEnsemble(x0[None, :], gamma), m, Setting.REGRESSION, [T]).final.particles[0]
        expected = regression_reconstruct(x0, m, T, gamma=gamma)
        result.checked += 1
        scale = float(np.max(np.abs(expected)))
        if float(np.max(np.abs(sim - expected))) > CLOSED_FORM_TOL * scale:
            result.fail(case=case, d=d, T=T, gamma=gamma, x0=x0)
    return result


def _orthogonal_conservation(setting: Setting, seed: int) -> PropertyResult:
    """Regression keeps Π⊥x; classification keeps the part outside span{θ⁽⁰⁾, θ*}."""
    result = PropertyResult(f"{setting.value} conserves the orthogonal component")
    rng = stream(seed, Stream.VERIFY, 4 if setting is Setting.REGRESSION else 5)
    for case in range(CLOSED_FORM_CASES):
        d = int(rng.integers(4, 9))
        m = ModelPair.from_best_response(rng.standard_normal(d), haar_subspace(d, 2, int(rng.integers(0, 2**31))))
        if setting is Setting.REGRESSION:
            kept = np.linalg.qr(m.residual[:, None])[0]
            gamma, T = rng.uniform(0.05, 0.3) / (2.0 * m.residual_norm**2), 20
        else:
            kept = np.linalg.qr(np.column_stack([m.theta0, m.theta_star]))[0]
            gamma, T = 0.25, 100
        x0 = rng.standard_normal(d)
        xT = simulate(ParticleEnsemble(x0[None, :], gamma), m, setting, [T]).final.particles[0]
        perp0 = x0 - kept @ (kept.T @ x0)
        perpT = xT - kept @ (kept.T @ xT)
        result.checked += 1
        if float(np.max(np.abs(perpT - perp0))) > CLOSED_FORM_TOL * max(1.0, float(np.max(np.abs(xT)))):
            result.fail(case=case, d=d, gamma=gamma, T=T, x0=x0)
    return result


def closed_form_suite(seed: int) -> List[PropertyResult]:
    return [
        _regression_closed_form(seed),
        _orthogonal_conservation(Setting.REGRESSION, seed),
        _orthogonal_conservation(Setting.CLASSIFICATION, seed),
    ]


# --- lemmas ----------------------------------------------------------------

Z_GRID = (-0.01, -0.1, -0.5, -1.0, -2.0, -5.0, -10.0, -20.0, -30.0)


def _helper_negative() -> PropertyResult:
    result = PropertyResult("G < 0 above (e^-z + 1)/(1+delta)")
    factors = np.geomspace(1.01, 100.0, 25)
    for z in Z_GRID:
        for delta in (0.0, 0.25, 0.5, 1.0, 2.0, 5.0):
            xs = (math.exp(-z) + 1.0) / (1.0 + delta) * factors
            values = helper_G(delta, xs, z)
            result.checked += xs.size
            for x, g in zip(xs, values):
                if not g < 0.0:
                    result.fail(delta=delta, x=x, z=z, G=g)
    return result


def _helper_positive() -> PropertyResult:
    result = PropertyResult("G > 0 below (e^-z - e^z)/(1+delta)")
    fractions = np.array([0.0, 0.01, 0.25, 0.5, 0.75, 0.99])
    for z in Z_GRID:
        for delta in (0.0, 0.25, 0.5, 1.0):
            xs = (math.exp(-z) - math.exp(z)) / (1.0 + delta) * fractions
            values = helper_G(delta, xs, z)
            result.checked += xs.size
            for x, g in zip(xs, values):
                if not g > 0.0:
                    result.fail(delta=delta, x=x, z=z, G=g)
    return result


def _helper_concave() -> PropertyResult:
    result = PropertyResult("G concave in x >= 0")
    h = 1e-3
    xs = np.linspace(h, 50.0, 200)
    for z in Z_GRID:
        for delta in (0.0, 0.5, 1.0):
            second = helper_G(delta, xs + h, z) - 2.0 * helper_G(delta, xs, z) + helper_G(delta, xs - h, z)
            result.checked += xs.size
            bad = np.flatnonzero(second > 1e-12)
            for i in bad:
                result.fail(delta=delta, x=xs[i], z=z, second_difference=second[i])
    return result


def _lyapunov_bracket(seed: int) -> PropertyResult:
    result = PropertyResult("L_t in [(1+1/a)/(1+r+1/a), 1) after t0")
    rng = stream(seed, Stream.VERIFY, 6)
    for run in range(BRACKET_RUNS):
        r = float(rng.choice(BASIN_R_VALUES))
        state = _basin_state(rng, float(rng.uniform(6.0, 50.0)), r)
        if state is None:
            continue
        out = scalar_run(state, BRACKET_STEPS)
        t0 = out.summary.t0_found
        if t0 is None:
            result.checked += 1
            result.fail(run=run, a=state.a, b=state.b, r=r, reason="basin never reached")
            continue
        for row in out.rows:
            if row.t < t0:
                continue
            result.checked += 1
            low = lower_threshold(row.a, r)
            if not (low - BRACKET_SLACK <= row.L < 1.0):
                result.fail(run=run, a0=state.a, b0=state.b, r=r, t=row.t, L=row.L, lower=low)
    return result


def _basin_states(seed: int, index: int, count: int) -> Iterator[ScalarState]:
    """Random states passing the direct basin check, a in [5, 100]."""
    rng = stream(seed, Stream.VERIFY, index)
    for _ in range(count):
        r = float(rng.choice(BASIN_R_VALUES))
        state = _basin_state(rng, float(rng.uniform(5.0, 100.0)), r)
        if state is not None and check_assumption(state.a, state.b, r, BASIN_C).ok:
            yield state


def _one_step_preservation(seed: int) -> PropertyResult:
    result = PropertyResult("basin preserved by one step")
    for state in _basin_states(seed, 7, PRESERVATION_STATES):
        r = state.params.r
        nxt = scalar_step(state)
        result.checked += 1
        if not check_assumption(nxt.a, nxt.b, r, BASIN_C).ok:
            result.fail(a=state.a, b=state.b, r=r, eta=state.params.eta)
    return result


def _upper_envelope_decreases(seed: int) -> PropertyResult:
    result = PropertyResult("env_U decreases and env_L stays above the threshold over one basin step")
    for state in _basin_states(seed, 11, PRESERVATION_STATES):
        nxt = scalar_step(state)
        before = upper_envelope(state.a, state.b)
        after = upper_envelope(nxt.a, nxt.b)
        lower = envelopes(nxt.a, nxt.b).env_l
        result.checked += 1
        if not (after < before and lower >= lower_threshold(nxt.a, state.params.r)):
            result.fail(a=state.a, b=state.b, r=state.params.r, env_u=before, env_u_next=after, env_l_next=lower)
    return result


def _one_step_identity(seed: int) -> PropertyResult:
    """r·a′ − b′ = r·a − b + ηr(σ(a) − σ(a+b)), with a rising and b, a+b falling."""
    result = PropertyResult("one-step identity and monotone a, b, a+b in the basin")
    for state in _basin_states(seed, 12, PRESERVATION_STATES):
        p = state.params
        nxt = scalar_step(state)
        lhs = p.r * nxt.a - nxt.b
        rhs = p.r * state.a - state.b + p.eta * p.r * (float(sigmoid(state.a)) - float(sigmoid(state.s)))
        tol = IDENTITY_TOL * max(1.0, abs(p.r * state.a) + abs(state.b))
        result.checked += 1
        if not (abs(lhs - rhs) <= tol and nxt.a > state.a and nxt.b < state.b and nxt.s < state.s):
            result.fail(a=state.a, b=state.b, r=p.r, eta=p.eta, lhs=lhs, rhs=rhs, a_next=nxt.a, b_next=nxt.b)
    return result


def lemma_suite(seed: int) -> List[PropertyResult]:
    return [
        _helper_negative(),
        _helper_positive(),
        _helper_concave(),
        _lyapunov_bracket(seed),
        _one_step_preservation(seed),
        _upper_envelope_decreases(seed),
        _one_step_identity(seed),
    ]


# --- envelopes -------------------------------------------------------------


def _checker_equivalence(seed: int) -> PropertyResult:
    result = PropertyResult("direct basin check agrees with the interval form")
    rng = stream(seed, Stream.VERIFY, 8)
    a = rng.uniform(0.5, 50.0, CHECKER_TRIPLES)
    r = rng.uniform(0.1, 5.0, CHECKER_TRIPLES)
    s = rng.uniform(-8.0, 1.0, CHECKER_TRIPLES)
    c = 0.1
    for ai, ri, si in zip(a.tolist(), r.tolist(), s.tolist()):
        interval = basin_interval(ai, ri)
        if interval is not None:
            u = math.exp(-si)
            if min(abs(u - interval[0]), abs(u - interval[1])) <= BOUNDARY_EXCLUSION * u:
                continue
        check = check_assumption(ai, si - ai, ri, c)
        result.checked += 1
        if check.ok != check.holds:
            result.fail(a=ai, b=si - ai, r=ri, direct=check.ok, interval=check.holds)
    return result


def _envelope_order(seed: int) -> PropertyResult:
    result = PropertyResult("env_L <= L <= env_U for -2a <= b < -a")
    rng = stream(seed, Stream.VERIFY, 9)
    for _ in range(10_000):
        a = float(rng.uniform(0.1, 30.0))
        b = float(rng.uniform(-2.0 * a, -a))
        L = lyapunov(a, b)
        env = envelopes(a, b)
        result.checked += 1
        tol = 1e-12 * max(1.0, abs(L))
        if not (env.env_l - tol <= L <= env.env_u + tol):
            result.fail(a=a, b=b, L=L, env_l=env.env_l, env_u=env.env_u)
    return result


def _envelope_implications(seed: int) -> PropertyResult:
    """env_U < 1 implies L < 1 and env_L > 1/(1+r) implies L > 1/(1+r), along runs and at random points."""
    result = PropertyResult("envelope bounds carry over to L along runs")
    rng = stream(seed, Stream.VERIFY, 13)

    def check(a: float, b: float, r: float, L: float, env_u: float, env_l: float, **where) -> None:
        target = 1.0 / (1.0 + r)
        result.checked += 1
        if (env_u < 1.0 and not L < 1.0) or (env_l > target and not L > target):
            result.fail(a=a, b=b, r=r, L=L, env_u=env_u, env_l=env_l, **where)

    for run in range(IMPLICATION_RUNS):
        r = float(rng.choice(BASIN_R_VALUES))
        state = _basin_state(rng, float(rng.uniform(6.0, 50.0)), r)
        if state is None:
            continue
        for row in scalar_run(state, BRACKET_STEPS).rows:
            check(row.a, row.b, r, row.L, row.env_u, row.env_l, run=run, t=row.t)
    for _ in range(10_000):
        a = float(rng.uniform(0.1, 30.0))
        b = float(rng.uniform(-3.0 * a, -a))
        r = float(rng.uniform(0.1, 5.0))
        env = envelopes(a, b)
        check(a, b, r, lyapunov(a, b), env.env_u, env.env_l)
    return result


def _nonempty_criterion(seed: int) -> PropertyResult:
    result = PropertyResult("closed nonemptiness criterion implies a nonempty interval")
    rng = stream(seed, Stream.VERIFY, 10)
    for _ in range(10_000):
        a = float(rng.uniform(0.1, 100.0))
        r = float(rng.uniform(0.01, 5.0))
        if not interval_nonempty_sufficient(a, r):
            continue
        result.checked += 1
        if not interval_nonempty(a, r):
            result.fail(a=a, r=r)
    return result


def envelope_suite(seed: int) -> List[PropertyResult]:
    return [
        _checker_equivalence(seed),
        _envelope_order(seed),
        _envelope_implications(seed),
        _nonempty_criterion(seed),
    ]


SUITES: Dict[str, Callable[[int], List[PropertyResult]]] = {
    "lemmas": lemma_suite,
    "gradients": gradient_suite,
    "closed-form": closed_form_suite,
    "envelopes": envelope_suite,
}


def run_suite(name: str, seed: int = 0) -> List[PropertyResult]:
    if name not in SUITES:
        raise ConfigError("suite", f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    results = SUITES[name](seed)
    for res in results:
        level = logging.INFO if res.passed else logging.WARNING
        logger.log(level, res.line())
    return results
