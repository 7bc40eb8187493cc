#!/usr/bin/env python3
"""
Batch driver for the standard error-scaling sweeps.
Runs the binary-tree and sparse-vector grids on max-degree-8 graphs, writes
one CSV (and workbook) per grid under sweeps/, logs the ln(n)^2 fit, and exits 3
when the sparse-vector medians are not below the binary-tree medians.
"""

import os
import fcntl
import logging
import sys

import pandas as pd

from ldp_core.config import setup_global_logging
from ldp_core.errors import EXIT_DIVERGENCE, EXIT_OK, LdpCoreError, exit_code_for
from ldp_core.sweep import ExperimentSpec, cmd_sweep, compare_counters, fit_log2_scaling

# Set up logging using global configuration
setup_global_logging()
logger = logging.getLogger(__name__)

# Two concurrent runs would write the same CSVs; the lock is released when the process exits.
BATCH_LOCK_PATH = "/tmp/ldp_core_sweep.lock"

OUTPUT_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'sweeps')

SCALING_SIZES = (2 ** 8, 2 ** 10, 2 ** 12, 2 ** 14)
SCALING_TRIALS = 20

GRIDS = {
    'binary-tree': ExperimentSpec(
        sizes=SCALING_SIZES,
        family='regular',
        d=8,
        counter='binary_tree',
        trials=SCALING_TRIALS,
        seed=2024,
        out=os.path.join(OUTPUT_DIR, 'scaling_binary_tree.csv'),
        timing=False,
    ),
    'sparse-vector': ExperimentSpec(
        sizes=SCALING_SIZES,
        family='regular',
        d=8,
        counter='sparse_vector',
        trials=SCALING_TRIALS,
        seed=2024,
        out=os.path.join(OUTPUT_DIR, 'scaling_sparse_vector.csv'),
        timing=False,
    ),
}


def acquire_batch_lock():
    """Acquire a non-blocking exclusive lock on BATCH_LOCK_PATH.

    Returns the open file descriptor (caller keeps it alive for the run).
    If another batch_sweep.py is already running, logs an error and exits 1.
    """
    # read the holder's PID before "w" truncates the file
    prior_pid = None
    try:
        with open(BATCH_LOCK_PATH) as f:
            prior_pid = f.read().strip() or None
    except FileNotFoundError:
        pass

    lock_fd = open(BATCH_LOCK_PATH, "w")
    try:
        fcntl.flock(lock_fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
    except BlockingIOError:
        lock_fd.close()
        pid_str = f" (PID {prior_pid})" if prior_pid else ""
        logger.error(f"Another batch_sweep.py is already running{pid_str}. Exiting.")
        sys.exit(1)
    lock_fd.write(f"{os.getpid()}\n")
    lock_fd.flush()
    return lock_fd


def run_grid(name: str):
    """
    Run one named grid and log its scaling fit.

    Parameters:
        name (str): key of GRIDS

    Returns:
        tuple: (rows DataFrame, ScalingFit of median max_err against ln(n)^2)
    """
    spec = GRIDS[name]
    os.makedirs(OUTPUT_DIR, exist_ok=True)
    xlsx = os.path.splitext(spec.out)[0] + '.xlsx'
    logger.info(f"Starting grid {name}: sizes={list(spec.sizes)}, trials={spec.trials}")
    df = cmd_sweep(spec, xlsx=xlsx)
    fit = fit_log2_scaling(df, protocol='exact')
    logger.info(f"Grid {name}: slope={fit.slope:.4f}, intercept={fit.intercept:.4f}, R^2={fit.r_squared:.3f}")
    for row in fit.medians.itertuples(index=False):
        logger.info(f"  n={row.n}: median max_err={row.max_err:.3f}")
    return df, fit


def compare_grids(frames):
    """
    Compare the sparse-vector grid against the binary-tree grid at the largest
    shared size, on median max_err and median alpha_obs.

    Returns:
        list[CounterComparison]: one entry per metric
    """
    combined = pd.concat([frames['binary-tree'], frames['sparse-vector']], ignore_index=True)
    comparisons = [compare_counters(combined, metric=metric) for metric in ('max_err', 'alpha_obs')]
    for c in comparisons:
        verdict = "below" if c.sparse_vector_wins else "NOT below"
        log = logger.info if c.sparse_vector_wins else logger.error
        log(f"Median {c.metric} at n={c.n}: sparse-vector={c.sparse_vector:.3f} is {verdict} "
            f"binary-tree={c.binary_tree:.3f}")
    return comparisons


def batch_sweep_main(names):
    """
    Run the named grids; with both counters present, also compare them.

    Returns:
        int: EXIT_OK, or EXIT_DIVERGENCE when the sparse-vector counter does not beat the binary tree
    """
    frames = {}
    for name in names:
        frames[name], _ = run_grid(name)
    if 'binary-tree' in frames and 'sparse-vector' in frames:
        if not all(c.sparse_vector_wins for c in compare_grids(frames)):
            return EXIT_DIVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    _batch_lock_fd = acquire_batch_lock()

    names = sys.argv[1:] or list(GRIDS)
    unknown = [n for n in names if n not in GRIDS]
    if unknown:
        logger.error(f"Unknown grid(s) {unknown}; available: {', '.join(GRIDS)}")
        sys.exit(2)
    try:
        status = batch_sweep_main(names)
    except (LdpCoreError, OSError) as e:
        logger.error(f"Batch sweep failed: {e}")
        sys.exit(exit_code_for(e))
    sys.exit(status)
