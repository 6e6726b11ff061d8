"""Process-level tuning for the numpy training loop."""

from __future__ import annotations

import ctypes
import ctypes.util

M_TRIM_THRESHOLD = -1
M_MMAP_THRESHOLD = -3


def tune_allocator() -> bool:
    """Keep large temporaries on glibc's heap instead of fresh mmaps.

    Training allocates and frees multi-megabyte arrays every step; with the
    default thresholds each one is a page-faulting mmap. Returns False where
    glibc is unavailable.
    """
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        ok = libc.mallopt(M_MMAP_THRESHOLD, 1 << 30) == 1
        ok = libc.mallopt(M_TRIM_THRESHOLD, 1 << 31) == 1 and ok
        return ok
    except (OSError, AttributeError):
        return False
