"""Small shared helpers: worker caps, atomic file writes, hashing."""
from __future__ import annotations

import hashlib
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor

__all__ = ["worker_count", "parallel_map", "atomic_write_bytes", "atomic_write_text", "sha256_file"]


def worker_count():
    """Worker parallelism cap from VDM_THREADS (default 1, fully deterministic)."""
    try:
        return max(1, int(os.environ.get("VDM_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map over items, fanned out to at most VDM_THREADS workers.

    Each item must carry its own rng state so results are identical at any
    worker count.
    """
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def atomic_write_bytes(path, payload):
    """Write via a sibling temp file and rename, so readers never see partial files."""
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
