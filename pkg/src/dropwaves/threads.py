"""Thread budget control.

The dense linear algebra in this package runs on small matrices (a few
hundred rows), where BLAS thread pools cost far more in contention than
they gain; measured on a 2-core box, multi-threaded OpenBLAS was ~13x
slower per Dirichlet solve.  BLAS pools are therefore pinned to one thread
and coarse-grained parallelism (independent multi-start solves) is managed
at the Python level instead.

DROPWAVES_THREADS caps the number of concurrent workers used by the
multi-start drivers; it defaults to the CPU count.
"""

from __future__ import annotations

import os

from threadpoolctl import threadpool_limits

_LIMITER = threadpool_limits(limits=1, user_api="blas")


def max_workers() -> int:
    """Worker cap for concurrent multi-start solves."""
    env = os.environ.get("DROPWAVES_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"DROPWAVES_THREADS must be an integer, got {env!r}")
    return max(1, os.cpu_count() or 1)
