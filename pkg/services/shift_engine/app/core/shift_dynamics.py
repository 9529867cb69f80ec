"""
Discrete adversarial covariate-shift dynamic over a particle ensemble.

Each particle performs explicit gradient ascent on the pointwise utility:

    x_{t+1} = x_t + γ · ∂_x U(θ⁽⁰⁾, δ_{x_t})

Particles never interact, so the ensemble is updated as one (n, d) matrix with
row-wise operations. Regression particles grow like (1+γ̃)^t; rows that pass
LOG_RESCALE_THRESHOLD are rescaled and the factor is kept as a per-row log, which
is exact because the regression update is linear in x.
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateError, NumericBlowUpError
from .linalg import Vector, as_vector, norm, row_inner, row_norms
from .objectives import ModelPair, Setting, gradient_rows

logger = logging.getLogger(__name__)

LOG_RESCALE_THRESHOLD = 1e150
STATIONARY_TOL = 1e-12
LN10 = np.log(10.0)


@dataclass(frozen=True)
class ParticleEnsemble:
    """Empirical covariate measure: n particles, one per row."""

    particles: NDArray[np.float64]
    step_size: float
    t: int = 0
    log_scale: Optional[NDArray[np.float64]] = field(default=None, compare=False)

    def __post_init__(self):
        rows = np.array(self.particles, dtype=np.float64, ndmin=2)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError(f"particles must be an (n, d) matrix, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("particles must be finite")
        if not np.isfinite(self.step_size) or self.step_size < 0:
            raise ValueError("step size must be non-negative and finite")
        if self.t < 0:
            raise ValueError("step counter must be non-negative")
        scale = np.zeros(rows.shape[0]) if self.log_scale is None else np.asarray(self.log_scale, dtype=np.float64)
        if scale.shape != (rows.shape[0],):
            raise ValueError("log_scale must hold one entry per particle")
        object.__setattr__(self, "particles", rows)
        object.__setattr__(self, "log_scale", scale)

    @classmethod
    def from_vectors(cls, vectors: Iterable[ArrayLike], step_size: float) -> "ParticleEnsemble":
        return cls(np.vstack([as_vector(v) for v in vectors]), step_size)

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    @property
    def rescaled(self) -> bool:
        return bool(np.any(self.log_scale != 0.0))

    def true_particles(self) -> NDArray[np.float64]:
        """Particles with the carried scale applied (may overflow to inf)."""
        if not self.rescaled:
            return self.particles.copy()
        with np.errstate(over="ignore"):
            return self.particles * np.exp(self.log_scale)[:, None]

    def directions(self) -> NDArray[np.float64]:
        """Unit-norm particles; zero rows stay zero."""
        norms = row_norms(self.particles)
        safe = np.where(norms > 0.0, norms, 1.0)
        return self.particles / safe[:, None]

    def replace(self, **changes) -> "ParticleEnsemble":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class AlignmentRecord:
    """
    Per-particle diagnostics at one time.

    log_misalign_* hold log(1 − align) computed from the orthogonal residual,
    so they stay accurate when align rounds to 1. Directions that are undefined
    for the model pair are reported as NaN.
    """

    t: int
    align_b: NDArray[np.float64]
    align_c: NDArray[np.float64]
    log_misalign_b: NDArray[np.float64]
    log_misalign_c: NDArray[np.float64]
    norm_log10: NDArray[np.float64]
    a: NDArray[np.float64]
    b: NDArray[np.float64]

    @property
    def n(self) -> int:
        return self.align_b.size

    @classmethod
    def from_misalignment(
        cls,
        t: int,
        misalign_b: Optional[ArrayLike] = None,
        misalign_c: Optional[ArrayLike] = None,
        log_misalign_b: Optional[ArrayLike] = None,
        log_misalign_c: Optional[ArrayLike] = None,
    ) -> "AlignmentRecord":
        """Build a record from 1 − align values (or their logs) alone."""

        def _pair(mis, log_mis):
            if log_mis is None and mis is None:
                return None, None
            if log_mis is None:
                log_mis = np.log(np.atleast_1d(np.asarray(mis, dtype=np.float64)))
            log_mis = np.atleast_1d(np.asarray(log_mis, dtype=np.float64))
            return -np.expm1(log_mis), log_mis

        align_b, lmb = _pair(misalign_b, log_misalign_b)
        align_c, lmc = _pair(misalign_c, log_misalign_c)
        size = (align_b if align_b is not None else align_c).size
        nan = np.full(size, np.nan)
        return cls(
            t=t,
            align_b=nan if align_b is None else align_b,
            align_c=nan if align_c is None else align_c,
            log_misalign_b=nan if lmb is None else lmb,
            log_misalign_c=nan if lmc is None else lmc,
            norm_log10=nan,
            a=nan,
            b=nan,
        )


class Trajectory(NamedTuple):
    records: List[AlignmentRecord]
    final: ParticleEnsemble
    stationary: NDArray[np.bool_]


class ClosedFormAlignment(NamedTuple):
    align_b: float
    log_coeff: float
    log_misalign_sq: float


def _direction_stats(rows: NDArray[np.float64], norms: NDArray[np.float64], direction: Vector):
    proj = row_inner(rows, direction)
    residual = rows - proj[:, None] * direction[None, :]
    res_sq = (residual * residual).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        align = np.clip(np.abs(proj) / norms, 0.0, 1.0)
        log_one_minus_sq = np.log(res_sq) - 2.0 * np.log(norms)
        log_misalign = log_one_minus_sq - np.log1p(align)
    zero = norms == 0.0
    align[zero] = np.nan
    log_misalign[zero] = np.nan
    return align, log_misalign


def record(ensemble: ParticleEnsemble, m: ModelPair) -> AlignmentRecord:
    """Alignment, misalignment, norm and (a, b) coordinates for every particle."""
    rows = ensemble.particles
    norms = row_norms(rows)
    nan = np.full(ensemble.n, np.nan)
    if m.has_direction("delta_b"):
        align_b, log_mis_b = _direction_stats(rows, norms, m.delta_b)
    else:
        align_b, log_mis_b = nan, nan
    if m.has_direction("delta_c"):
        align_c, log_mis_c = _direction_stats(rows, norms, m.delta_c)
    else:
        align_c, log_mis_c = nan, nan
    scale = np.exp(ensemble.log_scale) if ensemble.rescaled else 1.0
    with np.errstate(divide="ignore", over="ignore"):
        norm_log10 = np.log10(norms) + ensemble.log_scale / LN10
        a = row_inner(rows, m.theta0) * scale
        b = row_inner(rows, m.residual) * scale
    return AlignmentRecord(
        t=ensemble.t,
        align_b=align_b,
        align_c=align_c,
        log_misalign_b=log_mis_b,
        log_misalign_c=log_mis_c,
        norm_log10=norm_log10,
        a=a,
        b=b,
    )


def stationary_mask(particles: NDArray[np.float64], m: ModelPair, setting: Setting) -> NDArray[np.bool_]:
    """Particles whose gradient vanishes at t=0 and therefore forever."""
    rows = np.atleast_2d(particles)
    norms = row_norms(rows)
    if setting is Setting.REGRESSION:
        proj = np.abs(row_inner(rows, m.residual))
        return (norms == 0.0) | (proj <= STATIONARY_TOL * norms * m.residual_norm)
    a = np.abs(row_inner(rows, m.theta0))
    s = np.abs(row_inner(rows, m.theta_star))
    return (norms == 0.0) | (
        (a <= STATIONARY_TOL * norms * m.theta0_norm) & (s <= STATIONARY_TOL * norms * m.theta_star_norm)
    )


def step(ensemble: ParticleEnsemble, m: ModelPair, setting: Setting) -> ParticleEnsemble:
    """One explicit Euler step of the ascent dynamic for every particle."""
    if setting is Setting.CLASSIFICATION and ensemble.rescaled:
        raise ValueError("rescaled particles are only valid for the linear regression dynamic")
    grad = gradient_rows(m, setting, ensemble.particles)
    with np.errstate(over="ignore", invalid="ignore"):
        updated = ensemble.particles + ensemble.step_size * grad
    finite = np.all(np.isfinite(updated), axis=1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise NumericBlowUpError(step=ensemble.t + 1, particle=bad)
    return ensemble.replace(particles=updated, t=ensemble.t + 1)


def rescale(ensemble: ParticleEnsemble) -> ParticleEnsemble:
    """Move the magnitude of oversized rows into log_scale."""
    norms = row_norms(ensemble.particles)
    big = norms > LOG_RESCALE_THRESHOLD
    if not big.any():
        return ensemble
    particles = ensemble.particles.copy()
    particles[big] = particles[big] / norms[big][:, None]
    log_scale = ensemble.log_scale.copy()
    log_scale[big] += np.log(norms[big])
    logger.debug("rescaled %d particle(s) at t=%d", int(big.sum()), ensemble.t)
    return ensemble.replace(particles=particles, log_scale=log_scale)


def schedule_times(T: int, record_every: int) -> List[int]:
    """0, k, 2k, ..., and T itself."""
    if T < 0:
        raise ValueError("T must be non-negative")
    if record_every < 1:
        raise ValueError("record_every must be at least 1")
    times = list(range(0, T + 1, record_every))
    if times[-1] != T:
        times.append(T)
    return times


def simulate(ensemble0: ParticleEnsemble, m: ModelPair, setting: Setting, times: Sequence[int]) -> Trajectory:
    """Run to max(times), recording at every listed time (absolute step counts)."""
    wanted = sorted(set(int(t) for t in times))
    if not wanted or wanted[0] < ensemble0.t:
        raise ValueError("record times must be non-empty and not precede the ensemble's step counter")
    stationary = stationary_mask(ensemble0.true_particles(), m, setting)
    if stationary.any():
        logger.info("%d of %d particle(s) are stationary", int(stationary.sum()), ensemble0.n)
    records = []
    ensemble = ensemble0
    for target in wanted:
        while ensemble.t < target:
            ensemble = step(ensemble, m, setting)
            if setting is Setting.REGRESSION and np.max(np.abs(ensemble.particles)) > LOG_RESCALE_THRESHOLD / np.sqrt(
                ensemble.dim
            ):
                ensemble = rescale(ensemble)
        records.append(record(ensemble, m))
    return Trajectory(records=records, final=ensemble, stationary=stationary)


def run(ensemble0: ParticleEnsemble, m: ModelPair, setting: Setting, T: int, record_every: int) -> List[AlignmentRecord]:
    """Iterate T steps, recording at t = 0, record_every, 2·record_every, ..., T."""
    times = [ensemble0.t + k for k in schedule_times(T, record_every)]
    return simulate(ensemble0, m, setting, times).records


def alignment(x: ArrayLike, direction: ArrayLike) -> float:
    """|⟨x, direction⟩| / ‖x‖ for a unit direction."""
    x = as_vector(x)
    direction = as_vector(direction)
    x_norm = norm(x)
    if x_norm == 0.0:
        raise DegenerateError("degenerate particle: alignment of the zero vector is undefined")
    if abs(norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must have unit norm")
    return min(1.0, abs(float(np.dot(x, direction))) / x_norm)


def regression_closed_form(x0: ArrayLike, m: ModelPair, T: int, *, gamma: float) -> ClosedFormAlignment:
    """
    Exact blessing alignment after T regression steps, in log-domain.

    x_T = (1+γ̃)^T ⟨x₀,Δ_b⟩ Δ_b + Π⊥x₀, so
    1 − align_b² = P / (C² + P) with C = (1+γ̃)^T ⟨x₀,Δ_b⟩ and P = ‖Π⊥x₀‖².
    """
    x0 = as_vector(x0)
    coeff0 = float(np.dot(x0, m.delta_b))
    if coeff0 == 0.0:
        raise DegenerateError("degenerate initialization: alignment undefined")
    perp = x0 - coeff0 * m.delta_b
    perp_sq = float(np.dot(perp, perp))
    log_coeff = T * np.log1p(m.gamma_tilde(gamma)) + np.log(abs(coeff0))
    with np.errstate(divide="ignore"):
        log_perp_sq = np.log(perp_sq)
    ratio = log_perp_sq - 2.0 * log_coeff
    align_b = float(np.exp(-0.5 * np.logaddexp(0.0, ratio)))
    log_misalign_sq = float(log_perp_sq - np.logaddexp(2.0 * log_coeff, log_perp_sq))
    return ClosedFormAlignment(align_b=align_b, log_coeff=float(log_coeff), log_misalign_sq=log_misalign_sq)


def regression_reconstruct(x0: ArrayLike, m: ModelPair, T: int, *, gamma: float) -> Vector:
    """x_T from the closed form (finite only while (1+γ̃)^T fits in a double)."""
    x0 = as_vector(x0)
    coeff0 = float(np.dot(x0, m.delta_b))
    perp = x0 - coeff0 * m.delta_b
    return (1.0 + m.gamma_tilde(gamma)) ** T * coeff0 * m.delta_b + perp
