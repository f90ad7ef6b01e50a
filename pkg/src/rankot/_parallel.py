import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Worker cap from RANKOT_THREADS, defaulting to the logical CPU count."""
    raw = os.environ.get("RANKOT_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def parallel_map(func, items):
    """Ordered map; runs on a thread pool when more than one worker is allowed."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
