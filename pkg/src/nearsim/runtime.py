"""Process-wide runtime knobs (worker threads for grid sweeps)."""

from __future__ import annotations

import os

ENV_THREADS = "NEARSIM_THREADS"

_override = None


def set_worker_count(n):
    """Cap parallel workers for grid sweeps; None restores the default."""
    global _override
    if n is not None:
        n = int(n)
        if n < 1:
            raise ValueError("worker count must be >= 1")
    _override = n


def worker_count():
    """Workers for embarrassingly parallel sweeps.

    Resolution order: explicit :func:`set_worker_count`, then the
    NEARSIM_THREADS environment variable, then 1.  Results never depend on
    the worker count; it only changes wall time.
    """
    if _override is not None:
        return _override
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return 1
