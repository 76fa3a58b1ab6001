"""Replica suites on the L=64, h=1.05 setup, computed once per session."""

import functools
import time

from critqfi import estimate
from critqfi.model import ModelParams

PARAMS = ModelParams(1.0, 1.0, 1.05, 64)
M, N_REPLICAS, SEED = 10**4, 500, 2024


@functools.lru_cache(maxsize=None)
def suite(reference_J0=None, initial_guess=None):
    """(runs, crb report, seconds) for optimal runs at reference_J0 or two-stage runs from initial_guess."""
    t0 = time.perf_counter()
    runs = estimate.replica_suite(PARAMS, M, N_REPLICAS, SEED, reference_J0=reference_J0, initial_guess=initial_guess)
    return runs, estimate.crb_report(runs), time.perf_counter() - t0
