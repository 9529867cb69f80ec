"""
Conditional data models and the adversary's pointwise objective.

Two settings share one interface:
- Regression:     y | x ~ Normal(⟨x, θ*⟩, 1), squared loss
- Classification: y | x ~ Bernoulli(σ(⟨x, θ*⟩)), logistic loss, y ∈ {0, 1}

The adversary's utility at a point mass δ_x is the expected loss of the current
model θ⁽⁰⁾ under the true conditional. Gradients are analytic; the row-wise
variants take a particle matrix of shape (n, d).
"""
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit

from .errors import DegenerateError, DimensionMismatchError
from .linalg import Subspace, Vector, as_vector, norm, project, row_inner

Real = Union[float, NDArray[np.float64]]


class Setting(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            for member in cls:
                if member.value == value.strip().lower():
                    return member
        return None


def sigmoid(z: Real) -> Real:
    """Logistic function; stable over the full double range."""
    return expit(z)


def sigmoid_prime(z: Real) -> Real:
    s = expit(z)
    return s * (1.0 - s)


def softplus(z: Real) -> Real:
    """log(1 + e^z) as max(z, 0) + log1p(e^{-|z|})."""
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


@dataclass(frozen=True)
class ModelPair:
    """
    Bayes-optimal θ* and the current model θ⁽⁰⁾.

    Derived directions are computed lazily. Accessing one that is undefined for
    this pair (e.g. Δ_b when θ⁽⁰⁾ = θ*) raises DegenerateError.
    """

    theta_star: Vector
    theta0: Vector

    def __post_init__(self):
        star = as_vector(self.theta_star)
        current = as_vector(self.theta0)
        if star.shape != current.shape:
            raise DimensionMismatchError(star.size, current.size, "theta_star and theta0")
        object.__setattr__(self, "theta_star", star)
        object.__setattr__(self, "theta0", current)

    @classmethod
    def from_best_response(cls, theta_star: ArrayLike, s: Subspace) -> "ModelPair":
        star = as_vector(theta_star)
        return cls(theta_star=star, theta0=best_response(star, s))

    @property
    def dim(self) -> int:
        return self.theta_star.size

    @cached_property
    def residual(self) -> Vector:
        """θ* − θ⁽⁰⁾."""
        return self.theta_star - self.theta0

    @cached_property
    def residual_norm(self) -> float:
        return norm(self.residual)

    @cached_property
    def theta0_norm(self) -> float:
        return norm(self.theta0)

    @cached_property
    def theta_star_norm(self) -> float:
        return norm(self.theta_star)

    @cached_property
    def q(self) -> float:
        """⟨θ⁽⁰⁾, θ* − θ⁽⁰⁾⟩; zero for a best response."""
        return float(np.dot(self.theta0, self.residual))

    @cached_property
    def delta_b(self) -> Vector:
        """Blessing direction (θ* − θ⁽⁰⁾)/‖θ* − θ⁽⁰⁾‖."""
        if self.residual_norm == 0.0:
            raise DegenerateError("blessing direction undefined: theta0 equals theta_star")
        return self.residual / self.residual_norm

    @cached_property
    def star_direction(self) -> Vector:
        if self.theta_star_norm == 0.0:
            raise DegenerateError("theta_star is the zero vector")
        return self.theta_star / self.theta_star_norm

    @cached_property
    def delta_c(self) -> Vector:
        """Curse direction −(‖θ⁽⁰⁾‖/‖θ*‖)Δ_b + (‖θ*−θ⁽⁰⁾‖/‖θ*‖)·θ⁽⁰⁾/‖θ⁽⁰⁾‖."""
        if self.theta0_norm == 0.0:
            raise DegenerateError("curse direction undefined: theta0 is the zero vector")
        if self.theta_star_norm == 0.0:
            raise DegenerateError("curse direction undefined: theta_star is the zero vector")
        return (
            -(self.theta0_norm / self.theta_star_norm) * self.delta_b
            + (self.residual_norm / self.theta_star_norm) * (self.theta0 / self.theta0_norm)
        )

    @cached_property
    def r(self) -> float:
        """‖θ*−θ⁽⁰⁾‖² / ‖θ⁽⁰⁾‖²."""
        if self.theta0_norm == 0.0:
            raise DegenerateError("r undefined: theta0 is the zero vector")
        return self.residual_norm**2 / self.theta0_norm**2

    def gamma_tilde(self, gamma: float) -> float:
        """Regression growth factor 2γ‖θ*−θ⁽⁰⁾‖²."""
        return 2.0 * gamma * self.residual_norm**2

    def eta(self, gamma: float) -> float:
        """Classification scalar step γ‖θ⁽⁰⁾‖²."""
        return gamma * self.theta0_norm**2

    def has_direction(self, name: str) -> bool:
        try:
            getattr(self, name)
        except DegenerateError:
            return False
        return True


def _as_rows(x: ArrayLike, dim: int) -> NDArray[np.float64]:
    rows = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if rows.shape[1] != dim:
        raise DimensionMismatchError(rows.shape[1], dim, "particle and model")
    return rows


def utility_rows(m: ModelPair, setting: Setting, rows: NDArray[np.float64]) -> NDArray[np.float64]:
    rows = _as_rows(rows, m.dim)
    if setting is Setting.REGRESSION:
        return row_inner(rows, m.residual) ** 2 + 1.0
    a = row_inner(rows, m.theta0)
    p = sigmoid(row_inner(rows, m.theta_star))
    return p * softplus(-a) + (1.0 - p) * softplus(a)


def gradient_rows(m: ModelPair, setting: Setting, rows: NDArray[np.float64]) -> NDArray[np.float64]:
    """∂_x U for every row of a particle matrix."""
    rows = _as_rows(rows, m.dim)
    if setting is Setting.REGRESSION:
        proj = row_inner(rows, m.residual)
        return 2.0 * proj[:, None] * m.residual[None, :]
    a = row_inner(rows, m.theta0)
    s = row_inner(rows, m.theta_star)
    coef_star = -sigmoid_prime(s) * a
    coef_current = sigmoid(a) - sigmoid(s)
    return coef_star[:, None] * m.theta_star[None, :] + coef_current[:, None] * m.theta0[None, :]


def pointwise_utility(m: ModelPair, setting: Setting, x: ArrayLike) -> float:
    return float(utility_rows(m, setting, x)[0])


def pointwise_gradient(m: ModelPair, setting: Setting, x: ArrayLike) -> Vector:
    return gradient_rows(m, setting, x)[0]


def expected_responses(setting: Setting, theta_star: Vector, rows: NDArray[np.float64]) -> NDArray[np.float64]:
    """Noise-free responses: the conditional mean E[y | x]."""
    theta_star = as_vector(theta_star)
    rows = _as_rows(rows, theta_star.size)
    f = row_inner(rows, theta_star)
    if setting is Setting.REGRESSION:
        return f
    return sigmoid(f)


def sample_responses(
    setting: Setting, theta_star: Vector, rows: NDArray[np.float64], rng: np.random.Generator
) -> NDArray[np.float64]:
    """Draw y for every row from the fixed conditional."""
    mean = expected_responses(setting, theta_star, rows)
    if setting is Setting.REGRESSION:
        return rng.normal(loc=mean, scale=1.0)
    return rng.binomial(1, mean).astype(np.float64)


def sample_response(setting: Setting, theta_star: Vector, x: ArrayLike, rng: np.random.Generator) -> float:
    return float(sample_responses(setting, theta_star, x, rng)[0])


def best_response(theta_star: ArrayLike, s: Subspace) -> Vector:
    """Minimum-norm risk minimizer on the support: Π_s θ*."""
    return project(as_vector(theta_star), s)
