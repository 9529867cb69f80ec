"""
Sequential game stage: the learner answers the adversary's shift.

Protocol for one round:
1. n particles from the initial measure are moved by the shift dynamic for T steps
2. shifted particles are renormalized to the unit sphere
3. responses are drawn from the fixed conditional at every particle
4. the learner takes `steps` gradient steps on the empirical loss from θ⁽⁰⁾

Regression rounds move θ toward θ* along the blessing direction; classification
rounds leave the component of θ*−θ along θ* untouched.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateError
from .linalg import Vector, as_vector, norm, row_inner, row_norms
from .objectives import ModelPair, Setting, expected_responses, sample_responses, sigmoid
from .shift_dynamics import ParticleEnsemble, simulate

logger = logging.getLogger(__name__)

UNIT_NORM_TOL = 1e-12
ORTHOGONAL_TOL = 1e-10


@dataclass(frozen=True)
class GameStage:
    """Renormalized shifted ensemble handed to the learner."""

    ensemble_hat: ParticleEnsemble
    eta_learner: float
    steps: int
    n_degenerate: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("the learner takes at least one step")
        norms = row_norms(self.ensemble_hat.particles)
        if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise ValueError("game stage particles must have unit norm")

    @property
    def n(self) -> int:
        return self.ensemble_hat.n


@dataclass(frozen=True)
class LearnerOutcome:
    theta1: Vector
    err_norm: float
    curse_ratio: Optional[float]
    n_used: int
    n_degenerate: int
    steps: int
    eta: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta1": self.theta1.tolist(),
            "err_norm": self.err_norm,
            "curse_ratio": self.curse_ratio,
            "n_used": self.n_used,
            "n_degenerate": self.n_degenerate,
            "steps": self.steps,
            "eta": self.eta,
        }


class ErrorDecomposition(NamedTuple):
    along_star: float
    along_b: float
    residual: float
    orthogonal: bool


def descend(theta: Vector, rows: NDArray[np.float64], y: NDArray[np.float64], setting: Setting, eta: float) -> Vector:
    """θ − η·mean ∂_θ ℓ(⟨x,θ⟩, y) over the rows."""
    if rows.shape[0] == 0:
        raise ValueError("learner step needs a non-empty sample set")
    f = row_inner(rows, theta)
    if setting is Setting.REGRESSION:
        resid = 2.0 * (f - y)
    else:
        resid = sigmoid(f) - y
    grad = (resid[:, None] * rows).mean(axis=0)
    return theta - eta * grad


def learner_step(theta: ArrayLike, samples: Sequence[Tuple[ArrayLike, float]], setting: Setting, eta: float) -> Vector:
    """One gradient step of the learner on (x, y) pairs."""
    if len(samples) == 0:
        raise ValueError("learner step needs a non-empty sample set")
    theta = as_vector(theta)
    rows = np.vstack([as_vector(x) for x, _ in samples])
    y = np.array([float(label) for _, label in samples])
    return descend(theta, rows, y, setting, eta)


def renormalize(ensemble: ParticleEnsemble, eta: float, steps: int) -> GameStage:
    """Project shifted particles to the unit sphere, dropping zero-norm ones."""
    norms = row_norms(ensemble.particles)
    keep = norms > 0.0
    dropped = int((~keep).sum())
    if not keep.any():
        raise DegenerateError("all particles are degenerate (zero norm)")
    if dropped:
        logger.warning("excluded %d degenerate particle(s) from the learner sample", dropped)
    unit = ensemble.particles[keep] / norms[keep][:, None]
    hat = ParticleEnsemble(unit, step_size=ensemble.step_size, t=ensemble.t)
    return GameStage(ensemble_hat=hat, eta_learner=eta, steps=steps, n_degenerate=dropped)


def outcome(m: ModelPair, theta1: Vector, stage: GameStage) -> LearnerOutcome:
    err = m.theta_star - theta1
    denom = float(np.dot(m.residual, m.theta_star))
    ratio = float(np.dot(err, m.theta_star)) / denom if denom != 0.0 else None
    return LearnerOutcome(
        theta1=theta1,
        err_norm=norm(err),
        curse_ratio=ratio,
        n_used=stage.n,
        n_degenerate=stage.n_degenerate,
        steps=stage.steps,
        eta=stage.eta_learner,
    )


def play_round(
    m: ModelPair,
    setting: Setting,
    ensemble0: ParticleEnsemble,
    T: int,
    n: int,
    eta: float,
    steps: int,
    rng: np.random.Generator,
    noise_free: bool = False,
) -> LearnerOutcome:
    """Shift the first n particles for T steps, then let the learner respond."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if T < 0:
        raise ValueError("T must be non-negative")
    if ensemble0.n < n:
        raise ValueError(f"ensemble holds {ensemble0.n} particles, {n} requested")
    start = ensemble0
    if ensemble0.n > n:
        start = ensemble0.replace(particles=ensemble0.particles[:n], log_scale=ensemble0.log_scale[:n])
    shifted = simulate(start, m, setting, [start.t + T]).final
    stage = renormalize(shifted, eta, steps)
    rows = stage.ensemble_hat.particles
    if noise_free:
        y = expected_responses(setting, m.theta_star, rows)
    else:
        y = sample_responses(setting, m.theta_star, rows, rng)
    theta = m.theta0.copy()
    for _ in range(steps):
        theta = descend(theta, rows, y, setting, eta)
    return outcome(m, theta, stage)


def err_decomposition(theta: ArrayLike, m: ModelPair) -> ErrorDecomposition:
    """
    Split θ* − θ along θ*/‖θ*‖ and Δ_b plus an orthogonal remainder.

    Coefficients are least-squares coordinates in the two-direction basis, so
    they recombine to θ* − θ exactly; they are inner products when the
    directions are orthogonal.
    """
    theta = as_vector(theta)
    err = m.theta_star - theta
    basis = np.column_stack([m.star_direction, m.delta_b])
    coeffs, *_ = np.linalg.lstsq(basis, err, rcond=None)
    remainder = err - basis @ coeffs
    orthogonal = abs(float(np.dot(m.star_direction, m.delta_b))) <= ORTHOGONAL_TOL
    return ErrorDecomposition(
        along_star=float(coeffs[0]),
        along_b=float(coeffs[1]),
        residual=norm(remainder),
        orthogonal=orthogonal,
    )
