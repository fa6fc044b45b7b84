import logging
import tracemalloc
from collections import namedtuple
from functools import wraps
from time import perf_counter

from .engine import FitnessTrace, single_cluster
from .exceptions import DegeneratePartitionError

logger = logging.getLogger(__name__)

Evolution = namedtuple('Evolution', ['state', 'trace', 'iterations', 'notes'])
Measurement = namedtuple('Measurement', ['result', 'wall_time_ms', 'peak_live_bytes'])


def degenerate_fallback(func):
    """Catches a DegeneratePartitionError while evolving and returns a single
    cluster holding every row instead"""

    @wraps(func)
    def fallback_wrapper(self, data, *args, **kwargs):
        try:
            return func(self, data, *args, **kwargs)
        except DegeneratePartitionError as e:
            note = f'degenerate partition ({e}), fell back to a single cluster'
            logger.warning(note)
            return Evolution(single_cluster(data), FitnessTrace(), 0, [note])

    return fallback_wrapper


def measured(func):
    """Times the call with a monotonic clock and records the high-water mark
    of live Python heap bytes allocated during it"""

    @wraps(func)
    def measured_wrapper(*args, **kwargs):
        owner = not tracemalloc.is_tracing()
        if owner:
            tracemalloc.start()
        tracemalloc.reset_peak()
        baseline = tracemalloc.get_traced_memory()[0]
        start = perf_counter()
        try:
            result = func(*args, **kwargs)
        finally:
            elapsed = (perf_counter() - start) * 1000
            peak = tracemalloc.get_traced_memory()[1] - baseline
            if owner:
                tracemalloc.stop()
        logger.debug(f'{func.__name__} took {elapsed:.1f} ms, peak {peak} bytes')
        return Measurement(result, elapsed, max(peak, 0))

    return measured_wrapper
