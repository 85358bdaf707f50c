from concurrent.futures import ThreadPoolExecutor

from django.conf import settings


def resolve_workers(workers=None):
    if workers is None:
        workers = settings.WAVE_LAB['WORKERS']
    return max(1, int(workers))


def chunked(count, chunk_size=None):
    """Fixed index chunks; the chunking never depends on the worker count."""
    if chunk_size is None:
        chunk_size = settings.WAVE_LAB['CHUNK_SIZE']
    return [range(start, min(start + chunk_size, count)) for start in range(0, count, chunk_size)]


def ordered_map(func, items, workers=None):
    """Map func over items on a bounded thread pool; results keep submission order."""
    items = list(items)
    workers = resolve_workers(workers)
    if workers == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        futures = [pool.submit(func, item) for item in items]
        return [future.result() for future in futures]
