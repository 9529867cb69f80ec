"""
Experiment drivers: figure snapshots, rate measurements, learner rounds and sweeps.

Every driver takes a validated ExperimentConfig. The subspace is drawn from
cfg.subspace_seed and the particles from the Philox streams of cfg.seed, so
Monte Carlo replicates can share one model pair while redrawing particles.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from ..config.presets import RATE_SCHEDULE_POINTS
from ..schemas import ExperimentConfig, InitialLaw, RateFit, SweepRow, ThetaStarRule
from ..worker import JobStatus, run_jobs, values
from .errors import RateFitError
from .learner_game import ErrorDecomposition, LearnerOutcome, err_decomposition, play_round
from .linalg import Subspace, Vector, haar_subspace, orthonormalize, row_norms
from .objectives import ModelPair, Setting
from .rate_fits import fit_classification_rate, fit_regression_rate, least_squares, rate_schedule
from .rng import Stream, particle_draws, stream
from .scalar_recursion import ScalarParams, ScalarRun, ScalarState, basin_start, scalar_run
from .shift_dynamics import ParticleEnsemble, Trajectory, simulate

logger = logging.getLogger(__name__)

# a used for the sweep plateau start; large enough for a wide basin interval
PLATEAU_START_A = 20.0
MAX_SAFE_ETA_TILDE = 0.5


def theta_star_for(cfg: ExperimentConfig) -> Vector:
    if cfg.theta_star_rule is ThetaStarRule.HARMONIC:
        return 1.0 / np.arange(1, cfg.d + 1, dtype=np.float64)
    return np.asarray(cfg.theta_star_custom, dtype=np.float64)


def eta_tilde_for(m: ModelPair, cfg: ExperimentConfig) -> float:
    """η(1 + r + 1/c) of a classification config."""
    return m.eta(cfg.gamma) * (1.0 + m.r + 1.0 / cfg.basin_c)


def build_model(cfg: ExperimentConfig) -> Tuple[Subspace, ModelPair]:
    """Haar subspace of cfg.subspace_rank and the best response on it."""
    subspace = haar_subspace(cfg.d, cfg.subspace_rank, cfg.subspace_seed)
    m = ModelPair.from_best_response(theta_star_for(cfg), subspace)
    if cfg.setting is Setting.CLASSIFICATION and m.theta0_norm > 0.0:
        eta_tilde = eta_tilde_for(m, cfg)
        if eta_tilde >= MAX_SAFE_ETA_TILDE:
            logger.warning(
                "eta_tilde=%.3f is not below 1/2 (gamma=%g, basin_c=%g); basin preservation is not guaranteed",
                eta_tilde,
                cfg.gamma,
                cfg.basin_c,
            )
    return subspace, m


def initial_particles(cfg: ExperimentConfig, subspace: Subspace, n: Optional[int] = None) -> NDArray[np.float64]:
    """Unit-norm initial particles drawn from the configured law."""
    n = cfg.n_particles if n is None else n
    if cfg.initial_law is InitialLaw.SUBSPACE:
        rows = subspace.lift(particle_draws(cfg.seed, n, subspace.rank))
    else:
        rows = particle_draws(cfg.seed, n, cfg.d)
    return rows / row_norms(rows)[:, None]


@dataclass(frozen=True)
class ExperimentRun:
    config: ExperimentConfig
    subspace: Subspace
    model: ModelPair
    initial: NDArray[np.float64]
    trajectory: Trajectory


def simulate_config(cfg: ExperimentConfig, times: Optional[Sequence[int]] = None) -> ExperimentRun:
    """Run the shift dynamic of cfg, recording at `times` (default cfg.snapshots)."""
    subspace, m = build_model(cfg)
    initial = initial_particles(cfg, subspace)
    ensemble = ParticleEnsemble(initial, step_size=cfg.gamma)
    logger.info(
        "simulating %s: d=%d rank=%d n=%d T=%d gamma=%g",
        cfg.setting.value,
        cfg.d,
        cfg.subspace_rank,
        cfg.n_particles,
        cfg.T,
        cfg.gamma,
    )
    trajectory = simulate(ensemble, m, cfg.setting, times if times is not None else cfg.snapshots)
    return ExperimentRun(config=cfg, subspace=subspace, model=m, initial=initial, trajectory=trajectory)


@dataclass(frozen=True)
class Snapshot:
    t: int
    coords: NDArray[np.float64]
    align_b: NDArray[np.float64]
    align_c: NDArray[np.float64]
    stationary: NDArray[np.bool_]


@dataclass(frozen=True)
class FigureData:
    run: ExperimentRun
    plane: Subspace
    snapshots: List[Snapshot]
    markers: Dict[str, List[float]]

    def snapshot(self, t: int) -> Snapshot:
        for snap in self.snapshots:
            if snap.t == t:
                return snap
        raise KeyError(f"no snapshot at t={t}")

    def derived(self) -> Dict[str, float]:
        m = self.run.model
        gamma = self.run.config.gamma
        return {
            "r": m.r,
            "q": m.q,
            "gamma_tilde": m.gamma_tilde(gamma),
            "eta": m.eta(gamma),
            "theta0_norm": m.theta0_norm,
            "residual_norm": m.residual_norm,
            "predicted_c": 2.0 * math.log1p(m.gamma_tilde(gamma)),
        }


def plane_for(m: ModelPair) -> Subspace:
    """Orthonormalized plane spanned by θ*/‖θ*‖ and (θ*−θ⁽⁰⁾)/‖θ*−θ⁽⁰⁾‖."""
    return orthonormalize([m.star_direction, m.delta_b])


def _markers(m: ModelPair, plane: Subspace) -> Dict[str, List[float]]:
    markers = {
        "theta_star": plane.coordinates(m.star_direction).tolist(),
        "theta0": plane.coordinates(m.theta0 / m.theta0_norm).tolist(),
        "delta_b": plane.coordinates(m.delta_b).tolist(),
    }
    if m.has_direction("delta_c"):
        markers["delta_c"] = plane.coordinates(m.delta_c).tolist()
    return markers


def reproduce_figure(cfg: ExperimentConfig) -> FigureData:
    """
    Snapshot table of normalized particles in the θ*/Δ_b plane.

    Full-space align_b and align_c are reported next to the 2D coordinates;
    alignment inside the plane alone says nothing about directional convergence.
    """
    subspace, m = build_model(cfg)
    plane = plane_for(m)
    initial = initial_particles(cfg, subspace)
    ensemble = ParticleEnsemble(initial, step_size=cfg.gamma)
    stationary = None
    records = []
    snaps = []
    for t in cfg.snapshots:
        segment = simulate(ensemble, m, cfg.setting, [t])
        if stationary is None:
            stationary = segment.stationary
        ensemble = segment.final
        rec = segment.records[0]
        records.append(rec)
        snaps.append(
            Snapshot(
                t=t,
                coords=plane.coordinates(ensemble.directions()),
                align_b=rec.align_b,
                align_c=rec.align_c,
                stationary=stationary,
            )
        )
    if stationary.any():
        logger.info("stationary particles: %s", np.flatnonzero(stationary).tolist())
    run = ExperimentRun(
        config=cfg,
        subspace=subspace,
        model=m,
        initial=initial,
        trajectory=Trajectory(records=records, final=ensemble, stationary=stationary),
    )
    return FigureData(run=run, plane=plane, snapshots=snaps, markers=_markers(m, plane))


class ClassificationRate(NamedTuple):
    fit: RateFit
    scalar: Optional[ScalarRun]
    run: ExperimentRun


def regression_rate(cfg: ExperimentConfig) -> Tuple[RateFit, ExperimentRun]:
    run = simulate_config(cfg)
    fit = fit_regression_rate(run.trajectory.records, run.model, gamma=cfg.gamma, initial=run.initial)
    return fit, run


def classification_rate(cfg: ExperimentConfig) -> ClassificationRate:
    """Geometric record schedule up to T; t0 taken from particle 0's scalar recursion."""
    run = simulate_config(cfg, rate_schedule(cfg.T, RATE_SCHEDULE_POINTS))
    scalar = None
    t0 = None
    if cfg.T >= 1:
        first = run.trajectory.records[0]
        params = ScalarParams.from_model(run.model, cfg.gamma, cfg.basin_c)
        scalar = scalar_run(ScalarState(float(first.a[0]), float(first.b[0]), params), cfg.T)
        t0 = scalar.summary.t0_found
    fit = fit_classification_rate(run.trajectory.records, t0=t0)
    return ClassificationRate(fit=fit, scalar=scalar, run=run)


class LearnerRound(NamedTuple):
    outcome: LearnerOutcome
    decomposition: ErrorDecomposition
    model: ModelPair


def learner_round(cfg: ExperimentConfig, n: Optional[int] = None, T: Optional[int] = None) -> LearnerRound:
    """One sequential game round for cfg (defaults: cfg.learner_samples particles, cfg.T steps)."""
    n = cfg.learner_samples if n is None else n
    T = cfg.T if T is None else T
    subspace, m = build_model(cfg)
    ensemble = ParticleEnsemble(initial_particles(cfg, subspace, n), step_size=cfg.gamma)
    result = play_round(
        m,
        cfg.setting,
        ensemble,
        T=T,
        n=n,
        eta=cfg.learner_eta,
        steps=cfg.learner_steps,
        rng=stream(cfg.seed, Stream.RESPONSES),
        noise_free=cfg.learner_noise_free,
    )
    return LearnerRound(outcome=result, decomposition=err_decomposition(result.theta1, m), model=m)


def _replicate_err(cfg: ExperimentConfig) -> float:
    return learner_round(cfg).outcome.err_norm


class SampleScaling(NamedTuple):
    n_values: List[int]
    rms_err: List[float]
    exponent: float
    intercept: float
    r2: float


def measure_sample_scaling(
    cfg: ExperimentConfig, n_values: Sequence[int], seeds: int, threads: int = 1
) -> SampleScaling:
    """
    Root-mean-square err_norm over `seeds` replicates per n, and its log-log slope.

    Replicate k redraws particles and responses from seed cfg.seed + k while the
    subspace stays fixed at cfg.subspace_seed.
    """
    if seeds < 1:
        raise ValueError("seeds must be at least 1")
    if len(n_values) < 2:
        raise ValueError("need at least two sample sizes")
    payloads = []
    for n in n_values:
        for k in range(seeds):
            payloads.append(
                cfg.model_copy(update={"seed": cfg.seed + k, "n_particles": n, "learner_samples": n})
            )
    errs = np.array(values(run_jobs(_replicate_err, payloads, threads))).reshape(len(n_values), seeds)
    rms = np.sqrt(np.mean(errs**2, axis=1))
    slope, intercept, r2 = least_squares(np.log(np.asarray(n_values, dtype=np.float64)), np.log(rms))
    return SampleScaling(
        n_values=[int(n) for n in n_values], rms_err=rms.tolist(), exponent=slope, intercept=intercept, r2=r2
    )


def learner_grid(cfg: ExperimentConfig, T_values: Sequence[int], n_values: Sequence[int]) -> List[Dict[str, float]]:
    """Learner outcome for every (T, n) pair."""
    rows = []
    for T in T_values:
        for n in n_values:
            local = cfg.model_copy(update={"n_particles": max(n, cfg.n_particles), "learner_samples": n, "T": T})
            result = learner_round(local, n=n, T=T)
            rows.append(
                {
                    "T": T,
                    "n": n,
                    "err_norm": result.outcome.err_norm,
                    "curse_ratio": result.outcome.curse_ratio,
                    "along_star": result.decomposition.along_star,
                    "along_b": result.decomposition.along_b,
                }
            )
    return rows


def _plateau(m: ModelPair, cfg: ExperimentConfig) -> Tuple[Optional[float], float]:
    params = ScalarParams.from_model(m, cfg.gamma, cfg.basin_c)
    target = 1.0 / (1.0 + params.r)
    b0 = basin_start(PLATEAU_START_A, params.r)
    if b0 is None:
        return None, target
    summary = scalar_run(ScalarState(PLATEAU_START_A, b0, params), cfg.plateau_steps).summary
    return summary.final_L, target


def sweep_one(job: Tuple[int, ExperimentConfig]) -> SweepRow:
    """Summary row for one config of a sweep."""
    index, cfg = job
    run = simulate_config(cfg)
    m = run.model
    final = run.trajectory.records[-1]
    row = SweepRow(
        index=index,
        status=JobStatus.COMPLETED,
        setting=cfg.setting,
        gamma=cfg.gamma,
        subspace_rank=cfg.subspace_rank,
        seed=cfg.seed,
        r=m.r if m.has_direction("delta_b") else None,
        gamma_tilde=m.gamma_tilde(cfg.gamma),
        eta=m.eta(cfg.gamma),
        final_align_b_mean=_nanmean(final.align_b),
        final_align_c_mean=_nanmean(final.align_c),
    )
    if cfg.setting is Setting.REGRESSION:
        try:
            fit = fit_regression_rate(run.trajectory.records, m, gamma=cfg.gamma, initial=run.initial)
            row.rate_slope, row.rate_predicted = fit.slope, fit.predicted_c_or_exponent
        except RateFitError as e:
            logger.info("config %d: no rate fit (%s)", index, e)
    else:
        row.plateau_L, row.plateau_target = _plateau(m, cfg)
    if cfg.with_learner:
        result = learner_round(cfg)
        row.learner_err_norm = result.outcome.err_norm
        row.learner_curse_ratio = result.outcome.curse_ratio
    return row


def _nanmean(values: NDArray[np.float64]) -> Optional[float]:
    finite = values[np.isfinite(values)]
    return float(finite.mean()) if finite.size else None


def sweep(configs: Sequence[ExperimentConfig], threads: int = 1) -> List[SweepRow]:
    """One summary row per config, in grid order; failing configs get a FAILED row."""
    if not configs:
        raise ValueError("sweep needs at least one config")
    results = run_jobs(sweep_one, list(enumerate(configs)), threads)
    rows = []
    for job, cfg in zip(results, configs):
        if job.ok:
            rows.append(job.value)
            continue
        rows.append(
            SweepRow(
                index=job.index,
                status=JobStatus.FAILED,
                error=job.error,
                setting=cfg.setting,
                gamma=cfg.gamma,
                subspace_rank=cfg.subspace_rank,
                seed=cfg.seed,
            )
        )
    failed = sum(1 for row in rows if row.status is JobStatus.FAILED)
    if failed:
        logger.warning("%d of %d sweep config(s) failed", failed, len(rows))
    return rows
