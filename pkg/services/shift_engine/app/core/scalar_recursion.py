"""
Two-dimensional summary of the classification dynamic.

With a_t = ⟨x_t, θ⁽⁰⁾⟩, b_t = ⟨x_t, θ*−θ⁽⁰⁾⟩, η = γ‖θ⁽⁰⁾‖² and
r = ‖θ*−θ⁽⁰⁾‖²/‖θ⁽⁰⁾‖², the full-space dynamic (with θ⁽⁰⁾ ⟂ θ*−θ⁽⁰⁾) reduces to

    a' = a − η·σ'(a+b)·a + η·(σ(a) − σ(a+b))
    b' = b − η·r·σ'(a+b)·a

This module holds that recursion together with the Lyapunov ratio, its two
envelopes, the basin check and the run diagnostics.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import NumericBlowUpError, UndefinedQuantityError
from .objectives import ModelPair, sigmoid, sigmoid_prime

logger = logging.getLogger(__name__)

DEFAULT_BASIN_CONSTANT = 5.0
ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True)
class ScalarParams:
    eta: float
    r: float
    c: float = DEFAULT_BASIN_CONSTANT

    def __post_init__(self):
        for name in ("eta", "r", "c"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.r <= 0 or self.c <= 0:
            raise ValueError("r and c must be positive")

    @classmethod
    def from_model(cls, m: ModelPair, gamma: float, c: float = DEFAULT_BASIN_CONSTANT) -> "ScalarParams":
        """Scalar parameters of a model pair; the reduction needs θ⁽⁰⁾ ⟂ θ*−θ⁽⁰⁾."""
        if abs(m.q) > ORTHOGONALITY_TOL * max(1.0, m.theta0_norm * m.residual_norm):
            raise ValueError(f"scalar recursion requires theta0 orthogonal to theta_star - theta0 (q={m.q:.3e})")
        return cls(eta=m.eta(gamma), r=m.r, c=c)

    @property
    def eta_tilde(self) -> float:
        """η(1 + r + 1/c); the one-step preservation argument needs this below 1/2."""
        return self.eta * (1.0 + self.r + 1.0 / self.c)


@dataclass(frozen=True)
class ScalarState:
    a: float
    b: float
    params: ScalarParams
    t: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise NumericBlowUpError(step=self.t, detail=f"a={self.a}, b={self.b}")

    @property
    def s(self) -> float:
        return self.a + self.b


class Envelopes(NamedTuple):
    env_u: float
    env_l: float

    @property
    def upper_defined(self) -> bool:
        return not math.isnan(self.env_u)


class AssumptionCheck(NamedTuple):
    """
    ok: the envelope inequalities with a > c and a+b < 0.
    via_interval: e^{−(a+b)} strictly inside basin_interval(a, r), nothing else.
    side: a > c and a+b < 0.
    """

    ok: bool
    via_interval: bool
    side: bool

    @property
    def holds(self) -> bool:
        """Interval form combined with the side conditions; agrees with ok off the boundary."""
        return self.side and self.via_interval


@dataclass
class DiagnosticRow:
    t: int
    a: float
    b: float
    s: float
    L: float
    env_u: float
    env_l: float
    assumption_ok: bool


@dataclass
class ScalarRunSummary:
    t0_found: Optional[int]
    slope_a: float
    limit_ra_minus_b_over_t: float
    bound_abs_s_over_logt: float
    final_L: float
    params: ScalarParams = field(repr=False, default=None)

    @property
    def basin_reached(self) -> bool:
        return self.t0_found is not None


class ScalarRun(NamedTuple):
    rows: List[DiagnosticRow]
    summary: ScalarRunSummary


def scalar_step(state: ScalarState) -> ScalarState:
    """One step of the (a, b) recursion."""
    p = state.params
    a, b = state.a, state.b
    z = a + b
    slope = float(sigmoid_prime(z))
    gap = float(sigmoid(a)) - float(sigmoid(z))
    a_next = a - p.eta * slope * a + p.eta * gap
    b_next = b - p.eta * p.r * slope * a
    if not (math.isfinite(a_next) and math.isfinite(b_next)):
        raise NumericBlowUpError(step=state.t + 1, detail=f"a={a_next}, b={b_next}")
    return replace(state, a=a_next, b=b_next, t=state.t + 1)


def lyapunov(a: float, b: float) -> float:
    """L = σ'(a+b)·a / (σ(a) − σ(a+b)); undefined when the denominator vanishes."""
    if b == 0:
        raise UndefinedQuantityError("Lyapunov ratio undefined at b = 0")
    denom = float(sigmoid(a)) - float(sigmoid(a + b))
    if denom == 0.0:
        raise UndefinedQuantityError(f"Lyapunov ratio undefined: sigma(a) == sigma(a+b) at a={a}, b={b}")
    return float(sigmoid_prime(a + b)) * a / denom


def envelopes(a: float, b: float) -> Envelopes:
    """Upper and lower envelopes of L. env_u is NaN when a+b >= 0."""
    s = a + b
    env_l = a * float(sigmoid(s))
    if s >= 0:
        return Envelopes(env_u=math.nan, env_l=env_l)
    env_u = math.exp(s) * a / -math.expm1(2.0 * s)
    return Envelopes(env_u=env_u, env_l=env_l)


def upper_envelope(a: float, b: float) -> float:
    env = envelopes(a, b)
    if not env.upper_defined:
        raise UndefinedQuantityError("upper envelope undefined for a + b >= 0")
    return env.env_u


def lower_threshold(a: float, r: float) -> float:
    """(1 + 1/a)/(1 + r + 1/a)."""
    return (1.0 + 1.0 / a) / (1.0 + r + 1.0 / a)


def basin_interval(a: float, r: float) -> Optional[Tuple[float, float]]:
    """
    Open interval for e^{−(a+b)} on which the basin inequalities hold, or None.

    Lower end a(1+√(1+4a⁻²))/2, upper end a(1+r+a⁻¹)/(1+a⁻¹) − 1.
    """
    if not (a > 0 and r > 0):
        return None
    inv = 1.0 / a
    low = a * (1.0 + math.sqrt(1.0 + 4.0 * inv * inv)) / 2.0
    high = a * (1.0 + r + inv) / (1.0 + inv) - 1.0
    if not low < high:
        return None
    return low, high


def interval_nonempty(a: float, r: float) -> bool:
    return basin_interval(a, r) is not None


def interval_nonempty_sufficient(a: float, r: float) -> bool:
    """(1 + r/(1+a⁻¹) − a⁻¹)² − 1 − 4a⁻² > 0; implies interval_nonempty, not conversely."""
    if not (a > 0 and r > 0):
        return False
    inv = 1.0 / a
    return (1.0 + r / (1.0 + inv) - inv) ** 2 - 1.0 - 4.0 * inv * inv > 0.0


def basin_start(a: float, r: float) -> Optional[float]:
    """b placing e^{−(a+b)} at the geometric middle of the basin interval."""
    interval = basin_interval(a, r)
    if interval is None:
        return None
    low, high = interval
    s = -0.5 * (math.log(low) + math.log(high))
    return s - a


def check_assumption(a: float, b: float, r: float, c: float) -> AssumptionCheck:
    """Evaluate the basin conditions directly and through the interval form."""
    if not all(math.isfinite(v) for v in (a, b, r, c)) or a <= 0 or r <= 0:
        return AssumptionCheck(False, False, False)
    s = a + b
    side = a > c and s < 0
    ok = False
    if side:
        env = envelopes(a, b)
        ok = env.env_u < 1.0 and env.env_l >= lower_threshold(a, r)
    interval = basin_interval(a, r)
    u = math.exp(-s) if -s < 700 else math.inf
    via_interval = interval is not None and interval[0] < u < interval[1]
    return AssumptionCheck(ok, via_interval, side)


def helper_G(delta, x, z):
    """G_δ(x, z) = −(1+δ)σ'(z)x + σ(x) − σ(z); accepts scalars or arrays."""
    return -(1.0 + delta) * sigmoid_prime(z) * x + sigmoid(x) - sigmoid(z)


def diagnose(state: ScalarState) -> DiagnosticRow:
    try:
        L = lyapunov(state.a, state.b)
    except UndefinedQuantityError:
        L = math.nan
    env = envelopes(state.a, state.b)
    ok = check_assumption(state.a, state.b, state.params.r, state.params.c).ok
    return DiagnosticRow(
        t=state.t, a=state.a, b=state.b, s=state.s, L=L, env_u=env.env_u, env_l=env.env_l, assumption_ok=ok
    )


def scalar_run(s0: ScalarState, T: int) -> ScalarRun:
    """
    Iterate T steps and summarize the asymptotic-order diagnostics.

    slope_a: least-squares slope of a_t over the last half of the run.
    limit_ra_minus_b_over_t: (r·a_T − b_T)/T.
    bound_abs_s_over_logt: max |a_t+b_t|/log t over the last half (t >= 2).
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    state = s0
    rows = [diagnose(state)]
    for _ in range(T):
        state = scalar_step(state)
        rows.append(diagnose(state))

    t = np.array([row.t for row in rows], dtype=np.float64)
    a = np.array([row.a for row in rows])
    s = np.array([row.s for row in rows])
    t0 = next((row.t for row in rows if row.assumption_ok), None)
    if t0 is None:
        logger.info("Assumption basin not reached within %d steps", T)

    start = s0.t + T // 2
    half = t >= start
    slope_a = float(np.polyfit(t[half], a[half], 1)[0]) if half.sum() >= 2 else math.nan
    elapsed = state.t - s0.t
    limit = (s0.params.r * state.a - state.b) / elapsed
    tail = half & (t >= 2)
    bound = float(np.max(np.abs(s[tail]) / np.log(t[tail]))) if tail.any() else math.nan
    summary = ScalarRunSummary(
        t0_found=t0,
        slope_a=slope_a,
        limit_ra_minus_b_over_t=limit,
        bound_abs_s_over_logt=bound,
        final_L=rows[-1].L,
        params=s0.params,
    )
    return ScalarRun(rows=rows, summary=summary)
