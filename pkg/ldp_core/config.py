"""
Configuration module for shared constants and settings.
"""

import logging
import os


# Brute-force oracles enumerate all nonempty subsets; keep them at desk scale
BRUTE_FORCE_MAX_N = 20
BRUTE_FORCE_CORENESS_MAX_N = 12

# Regular-graph sampling gives up after this many attempts at a simple d-regular outcome
REGULAR_MAX_RETRIES = 10_000

# Failure probability used when a bound is reported without an explicit beta
DEFAULT_BETA = 0.01

# Above-threshold trigger of the sparse-vector counter, in units of ln(2T/beta)/epsilon_svt
SPARSE_THRESHOLD_FACTOR = 6.0

# Additive slack of the approximate sandwich is C*alpha + C with C = 2 + eta
def approx_sandwich_c(eta: float) -> float:
    return 2.0 + eta


# Output columns
ESTIMATE_CSV_FIELDS = ['vertex', 'k_true', 'k_est', 'round']
SWEEP_CSV_FIELDS = [
    'family', 'n', 'eps', 'eta', 'counter', 'memory', 'trial',
    'protocol', 'max_err', 'rounds', 'alpha_obs', 'ms',
]

COUNTER_KINDS = ('binary_tree', 'sparse_vector', 'exact_debug')
MEMORY_MODES = ('memoryless', 'memoryful')
NOISE_MODES = ('laplace', 'disabled')


def get_thread_cap() -> int:
    """
    Read LDP_CORE_THREADS; anything unparsable or below 1 falls back to 1.
    """
    raw = os.environ.get('LDP_CORE_THREADS', '').strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"Ignoring LDP_CORE_THREADS={raw!r}: not an integer")
        return 1
    if value < 1:
        logging.getLogger(__name__).warning(f"Ignoring LDP_CORE_THREADS={raw!r}: must be >= 1")
        return 1
    return value


def _default_log_file():
    if 'LDP_CORE_LOG_FILE' in os.environ:
        return os.environ['LDP_CORE_LOG_FILE'] or None
    current_dir = os.path.dirname(os.path.abspath(__file__))
    project_root = os.path.dirname(current_dir)
    return os.path.join(project_root, 'log_ldp_core.txt')


# Global logging configuration
def setup_global_logging(log_file=None, level=logging.INFO):
    """
    Set up global logging configuration for all entry points.
    This ensures consistent logging behavior across cli.py, batch_sweep.py
    and the sweep workers.

    Parameters:
        log_file (str | None): Log file path; defaults to log_ldp_core.txt at the
            project root (override or disable with LDP_CORE_LOG_FILE)
        level (int): Root logger level

    Returns:
        logging.Logger: the configured root logger
    """
    if log_file is None:
        log_file = _default_log_file()

    # Configure root logger
    root_logger = logging.getLogger()

    # Clear any existing handlers to avoid conflicts
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(formatter)
    root_logger.addHandler(stream_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file, mode='a', encoding='utf-8')
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    root_logger.setLevel(level)

    return root_logger
