import os

# Environment variables that override the defaults below
CACHE_DIR_ENV = "TORUS_DISC_CACHE_DIR"
LOG_DIR_ENV = "TORUS_DISC_LOG_DIR"
MAX_BYTES_ENV = "TORUS_DISC_MAX_BYTES"
Q_LIMIT_ENV = "TORUS_DISC_Q_LIMIT"
SLOW_TESTS_ENV = "TORUS_DISC_SLOW_TESTS"

# Largest cell count accepted by make_grid unless told otherwise
DEFAULT_Q_LIMIT = int(os.environ.get(Q_LIMIT_ENV, 2**32))

# Memory budget (in bytes) for materialized tables and peel buffers
DEFAULT_MAX_BYTES = int(os.environ.get(MAX_BYTES_ENV, 6 * 2**30))

# Number of cells evaluated per numpy batch when filling a table
CHUNK_CELLS = 2**20

# Side of the density images, as in the published figures
DEFAULT_PX = 128

# Clamped value range of the log10 density when rendering
RENDER_LOG_MIN = -9.0
RENDER_LOG_MAX = 0.0


def cache_dir():
    """
    Gets the directory holding the result cache.

    Returns:
        str: the cache directory, taken from the environment if set.
    """
    default = os.path.join(os.path.expanduser("~"), ".cache", "torus_discretization")
    return os.environ.get(CACHE_DIR_ENV, default)


def log_dir():
    """
    Gets the directory that rotating log files are written to.

    Returns:
        str: the log directory, taken from the environment if set.
    """
    default = os.path.join(os.path.dirname(os.path.realpath(__file__)), "logs")
    return os.environ.get(LOG_DIR_ENV, default)
