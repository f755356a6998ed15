"""Small shared helpers: compensated sums, named RNG streams, atomic writes."""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path

import numpy as np

#: purpose tags for deriving independent RNG streams from one config seed
_STREAM_IDS = {
    "sampler": 1,
    "jackknife": 2,
    "queries": 3,
    "perturb": 4,
    "audit": 5,
}


def fsum(values) -> float:
    """Exactly rounded sum (Shewchuk) of an array or iterable of floats."""
    arr = np.asarray(values, dtype=np.float64)
    return math.fsum(arr.tolist())


def rng_stream(seed: int, purpose: str) -> np.random.Generator:
    """Deterministic per-purpose generator derived from the single config seed."""
    try:
        key = _STREAM_IDS[purpose]
    except KeyError:
        raise ValueError(f"unknown rng purpose {purpose!r}") from None
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via temp file + rename so readers never see partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def format_float(x: float) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    return repr(float(x))
