"""Process-wide settings read from the environment."""

import os

THREADS_ENV_VAR = "WINDXAI_THREADS"


def thread_count() -> int:
    """Return the number of worker threads internal pools may use.

    ``WINDXAI_THREADS`` caps parallelism; ``0`` or an unset variable means
    one thread per available CPU.

    Returns
    -------
        int: A positive number of threads.

    """
    raw = os.environ.get(THREADS_ENV_VAR, "0").strip() or "0"
    try:
        requested = int(raw)
    except ValueError:
        requested = 0
    if requested <= 0:
        return os.cpu_count() or 1
    return requested
