"""Worker-pool sizing."""

import os


def worker_count(n_jobs=None) -> int:
    """Resolve a worker count: explicit value, else ``ROTPB_THREADS``, else CPU count."""
    if n_jobs is not None:
        return max(int(n_jobs), 1)
    env = os.environ.get("ROTPB_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            pass
    return os.cpu_count() or 1
