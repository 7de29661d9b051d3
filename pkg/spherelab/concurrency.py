from concurrent.futures import ThreadPoolExecutor
import logging

from django.conf import settings

logger = logging.getLogger(__name__)


def map_ordered(fn, items, workers=None):
    """``map`` over a thread pool sized by ``LAB['WORKERS']``; results keep input order."""
    workers = settings.LAB['WORKERS'] if workers is None else workers
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug(f"dispatching {len(items)} tasks to {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
