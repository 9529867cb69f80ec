"""
Job runner for independent simulation jobs (sweep configs, Monte Carlo seeds).

Jobs run inline for a single worker and on a process pool otherwise. Results are
always returned in submission order, so every aggregate is independent of the
worker count. A failing job is recorded as FAILED and the others keep running.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Generic, List, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

P = TypeVar("P")
R = TypeVar("R")


class JobStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


ALLOWED_TRANSITIONS = {
    JobStatus.PENDING: {JobStatus.RUNNING, JobStatus.FAILED},
    JobStatus.RUNNING: {JobStatus.COMPLETED, JobStatus.FAILED},
    JobStatus.COMPLETED: set(),
    JobStatus.FAILED: set(),
}


@dataclass
class JobResult(Generic[R]):
    index: int
    status: JobStatus = JobStatus.PENDING
    value: Optional[R] = None
    error: Optional[str] = None

    def transition(self, status: JobStatus) -> None:
        if status not in ALLOWED_TRANSITIONS[self.status]:
            raise ValueError(f"Invalid transition {self.status.value} -> {status.value}")
        self.status = status

    @property
    def ok(self) -> bool:
        return self.status is JobStatus.COMPLETED


def _execute(fn: Callable[[P], R], index: int, payload: P) -> JobResult:
    job: JobResult = JobResult(index=index)
    job.transition(JobStatus.RUNNING)
    try:
        job.value = fn(payload)
        job.transition(JobStatus.COMPLETED)
    except Exception as e:
        job.error = f"{type(e).__name__}: {e}"
        job.transition(JobStatus.FAILED)
        logger.warning("job %d failed: %s", index, job.error)
    return job


def run_jobs(fn: Callable[[P], R], payloads: Sequence[P], threads: int = 1) -> List[JobResult]:
    """
    Run fn over payloads.

    Args:
        fn: module-level callable (must be picklable for threads > 1)
        payloads: one payload per job
        threads: worker processes; 1 runs inline

    Returns:
        JobResults in payload order.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    if threads == 1 or len(payloads) <= 1:
        return [_execute(fn, i, p) for i, p in enumerate(payloads)]
    logger.info("running %d jobs on %d workers", len(payloads), threads)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_execute, fn, i, p) for i, p in enumerate(payloads)]
        return [f.result() for f in futures]


def values(results: Sequence[JobResult]) -> List[Any]:
    """Values of completed jobs; raises on the first failure."""
    out = []
    for job in results:
        if not job.ok:
            raise RuntimeError(f"job {job.index} failed: {job.error}")
        out.append(job.value)
    return out
