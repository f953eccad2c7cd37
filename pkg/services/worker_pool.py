from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

from config import get_logger
from utils.errors import InvalidParameterError

logger = get_logger("workers")


def run_parallel(job, count: int, threads: int = 1, label: str = "jobs") -> list:
    """
    Run job(0) ... job(count - 1) and return the results in index order.

    Results are placed by job index, so the output never depends on how the
    threads were scheduled. The ray kernels release the GIL.

    Args:
        job: Callable taking the job index
        count: Number of jobs
        threads: Worker threads (1 runs inline)
        label: Name used in log lines

    Returns:
        List of results
    """
    if threads < 1:
        raise InvalidParameterError(f"--threads must be >= 1, got {threads}")

    started = time.perf_counter()
    if threads == 1 or count <= 1:
        results = [job(index) for index in range(count)]
    else:
        results = [None] * count
        with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="vqf") as pool:
            futures = {pool.submit(job, index): index for index in range(count)}
            for future, index in futures.items():
                # re-raises the first failing job's exception
                results[index] = future.result()

    logger.debug(
        f"WORKERS: Finished {count} {label} on {threads} thread(s) in {time.perf_counter() - started:.2f}s"
    )
    return results
