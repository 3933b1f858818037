"""
Background job pool.

Jobs are submitted with an integer index and processed by worker threads.
Results are collected per index and handed back in index order, so the output
never depends on scheduling or on the number of workers.
"""
from __future__ import annotations

import logging
import os
import queue
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, Generic, List, Optional, TypeVar

logger = logging.getLogger(__name__)

THREADS_ENV = "RCMLAB_THREADS"

T = TypeVar("T")


def resolve_workers(requested: Optional[int] = None) -> int:
    """Worker count: explicit request, else RCMLAB_THREADS, else CPU count (0 = auto)."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError:
            logger.warning(f"[jobs] Ignoring invalid {THREADS_ENV}={raw!r}")
            requested = 0
    if requested <= 0:
        requested = os.cpu_count() or 1
    return max(1, int(requested))


@dataclass
class Job:
    index: int
    payload: Any
    submitted: float


@dataclass
class JobResult(Generic[T]):
    index: int
    value: Optional[T]
    error: Optional[BaseException]
    processing_time_ms: float


class JobPool(Generic[T]):
    """
    Runs `fn(payload)` for each submitted job on a small thread pool.

    Usage:
        pool = JobPool(fn, workers=4)
        pool.start()
        for i, payload in enumerate(payloads):
            pool.submit(i, payload)
        pool.stop()                 # waits for pending jobs
        values = pool.values()      # in index order, re-raises the first error
    """

    def __init__(
        self,
        fn: Callable[[Any], T],
        workers: Optional[int] = None,
        name: str = "jobs",
        on_job_done: Optional[Callable[[JobResult], None]] = None,
    ):
        self.fn = fn
        self.name = name
        self.n_workers = resolve_workers(workers)
        self.on_job_done = on_job_done

        self._queue: queue.Queue[Optional[Job]] = queue.Queue()
        self._results: Dict[int, JobResult] = {}
        self._results_lock = threading.Lock()
        self._workers: List[threading.Thread] = []
        self._is_running = False

    def start(self) -> None:
        if self._is_running:
            return
        self._results.clear()
        self._is_running = True
        for k in range(self.n_workers):
            worker = threading.Thread(
                target=self._worker_loop,
                name=f"{self.name}-worker-{k}",
                daemon=True,
            )
            worker.start()
            self._workers.append(worker)
        logger.debug(f"[{self.name}] {self.n_workers} workers started")

    def stop(self, timeout: Optional[float] = None) -> None:
        """Wait for pending jobs, then shut the workers down."""
        if not self._is_running:
            return
        for _ in self._workers:
            self._queue.put(None)  # Sentinel
        for worker in self._workers:
            worker.join(timeout=timeout)
            if worker.is_alive():
                logger.warning(f"[{self.name}] {worker.name} didn't stop in time")
        self._workers.clear()
        self._is_running = False
        logger.debug(f"[{self.name}] Stopped with {len(self._results)} results")

    def submit(self, index: int, payload: Any) -> None:
        if not self._is_running:
            raise RuntimeError(f"[{self.name}] pool is not running")
        self._queue.put(Job(index=index, payload=payload, submitted=time.time()))

    def get_results(self) -> List[JobResult]:
        with self._results_lock:
            return [self._results[i] for i in sorted(self._results)]

    def values(self) -> List[T]:
        out = []
        for result in self.get_results():
            if result.error is not None:
                raise result.error
            out.append(result.value)
        return out

    def _worker_loop(self) -> None:
        while True:
            job = self._queue.get()
            if job is None:
                break
            started = time.perf_counter()
            try:
                value, error = self.fn(job.payload), None
            except Exception as e:
                logger.error(f"[{self.name}] Job {job.index} failed: {e}")
                value, error = None, e
            result = JobResult(
                index=job.index,
                value=value,
                error=error,
                processing_time_ms=(time.perf_counter() - started) * 1000.0,
            )
            with self._results_lock:
                self._results[job.index] = result
            if self.on_job_done:
                try:
                    self.on_job_done(result)
                except Exception as e:
                    logger.debug(f"[{self.name}] on_job_done callback failed: {e}")


def run_jobs(fn: Callable[[Any], T], payloads: List[Any], workers: Optional[int] = None,
             name: str = "jobs") -> List[T]:
    """Run every payload through fn and return the values in payload order."""
    if not payloads:
        return []
    pool: JobPool[T] = JobPool(fn, workers=min(resolve_workers(workers), len(payloads)), name=name)
    pool.start()
    try:
        for i, payload in enumerate(payloads):
            pool.submit(i, payload)
    finally:
        pool.stop()
    return pool.values()
