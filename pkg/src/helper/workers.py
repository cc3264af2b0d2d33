import os

from src.config import get_config


def fft_workers() -> int:
    """Worker count for scipy.fft calls, capped by ORIENT3D_THREADS."""
    threads = get_config().threads
    if threads is None:
        return os.cpu_count() or 1
    return threads
