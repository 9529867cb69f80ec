"""
Least-squares rate fits for directional convergence.

Regression: the log-odds of misalignment, log((1 − align_b²)/align_b²), is exactly
linear in t with slope −2·log(1+γ̃) for the closed form, and equals
log(1 − align_b²) once particles are aligned. Points whose misalignment has
dropped below MISALIGN_FLOOR are replaced by the closed form in log-domain.

Classification: log(1 − align_c) against log t over the final decade.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from ..schemas import RateFit, RateModel
from .errors import DegenerateError, RateFitError
from .objectives import ModelPair
from .shift_dynamics import AlignmentRecord, regression_closed_form

logger = logging.getLogger(__name__)

MIN_REGRESSION_POINTS = 5
MIN_CLASSIFICATION_POINTS = 3
MISALIGN_FLOOR = math.log(1e-20)
CLASSIFICATION_EXPONENT = -2.0


def least_squares(x: NDArray[np.float64], y: NDArray[np.float64]) -> Tuple[float, float, float]:
    """Slope, intercept and r² of the ordinary least-squares line."""
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot == 0.0:
        raise RateFitError("alignment does not change over the records; nothing to fit")
    r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(slope), float(intercept), r2


def _log_odds(record: AlignmentRecord) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Per-particle log(1 − align²) and log((1 − align²)/align²)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        log_one_minus_sq = record.log_misalign_b + np.log1p(record.align_b)
        return log_one_minus_sq, log_one_minus_sq - 2.0 * np.log(record.align_b)


def fit_regression_rate(
    records: Sequence[AlignmentRecord],
    m: ModelPair,
    *,
    gamma: float,
    initial: Optional[NDArray[np.float64]] = None,
) -> RateFit:
    """
    Fit the exponential decay of blessing misalignment.

    Args:
        records: alignment records, one per time
        m: model pair of the run
        gamma: adversary step size (sets the predicted rate 2·log(1+γ̃))
        initial: t=0 particles; enables the closed-form fallback for saturated points

    Returns:
        RateFit with model exp_decay.
    """
    records = sorted(records, key=lambda rec: rec.t)
    times = np.array([rec.t for rec in records], dtype=np.float64)
    if len(set(times.tolist())) < MIN_REGRESSION_POINTS:
        raise RateFitError(f"need at least {MIN_REGRESSION_POINTS} record times, got {len(set(times.tolist()))}")
    n = records[0].n
    values = np.empty((len(records), n))
    replaced = 0
    for i, rec in enumerate(records):
        log_sq, odds = _log_odds(rec)
        saturated = ~np.isfinite(log_sq) | (log_sq < MISALIGN_FLOOR)
        if initial is not None and saturated.any():
            for p in np.flatnonzero(saturated):
                try:
                    cf = regression_closed_form(initial[p], m, rec.t, gamma=gamma)
                except DegenerateError:
                    continue
                odds[p] = cf.log_misalign_sq - 2.0 * math.log(cf.align_b)
                replaced += 1
        elif saturated.any():
            odds[saturated] = np.nan
        values[i] = odds
    usable = np.all(np.isfinite(values), axis=0)
    if not usable.any():
        raise RateFitError("no particle has a resolvable blessing alignment at every record time")
    if replaced:
        logger.info("replaced %d saturated point(s) with the closed form", replaced)
    y = values[:, usable].mean(axis=1)
    slope, intercept, r2 = least_squares(times, y)
    return RateFit(
        model=RateModel.EXP_DECAY,
        slope=slope,
        intercept=intercept,
        r2=r2,
        predicted_c_or_exponent=2.0 * math.log1p(m.gamma_tilde(gamma)),
        n_points=len(records),
        t_min=int(times[0]),
        t_max=int(times[-1]),
        closed_form_points=replaced,
    )


def fit_classification_rate(records: Sequence[AlignmentRecord], t0: Optional[int] = None) -> RateFit:
    """Fit log(1 − align_c) against log t over the final decade (and after t0)."""
    records = sorted((rec for rec in records if rec.t > 0), key=lambda rec: rec.t)
    if not records:
        raise RateFitError("no records with t > 0")
    t_first, t_last = records[0].t, records[-1].t
    if t_last < 100 * t_first:
        raise RateFitError(f"records must span at least two decades of T, got [{t_first}, {t_last}]")
    start = max(t_last / 10.0, float(t0 or 0))
    window = [rec for rec in records if rec.t >= start]
    if len(window) < MIN_CLASSIFICATION_POINTS:
        raise RateFitError(f"need at least {MIN_CLASSIFICATION_POINTS} records in the final decade after t0")
    values = np.vstack([rec.log_misalign_c for rec in window])
    usable = np.all(np.isfinite(values), axis=0)
    if not usable.any():
        raise RateFitError("no particle has a resolvable curse alignment in the fit window")
    x = np.log(np.array([rec.t for rec in window], dtype=np.float64))
    y = values[:, usable].mean(axis=1)
    slope, intercept, r2 = least_squares(x, y)
    return RateFit(
        model=RateModel.POLY_LOG,
        slope=slope,
        intercept=intercept,
        r2=r2,
        predicted_c_or_exponent=CLASSIFICATION_EXPONENT,
        n_points=len(window),
        t_min=window[0].t,
        t_max=window[-1].t,
    )


def rate_schedule(T: int, points: int) -> List[int]:
    """0 plus roughly `points` geometrically spaced integer times ending at T."""
    if T < 1:
        return [0]
    grid = np.unique(np.round(np.geomspace(1, T, num=points)).astype(int))
    return [0] + [int(t) for t in grid]
