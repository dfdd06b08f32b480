"""Shared plumbing: optional numba jit, keyed RNG streams, report I/O."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    numba = None
    HAVE_NUMBA = False


def jit_kernel(func):
    """Compile an event-loop kernel with numba when available.

    Kernels are written in plain array-style Python so that the uncompiled
    function is a valid (slow) fallback.  nogil lets replicas run in threads.
    """
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def replica_rng(base_seed: int, replica_index: int) -> np.random.Generator:
    """Independent PCG64 stream keyed by (base_seed, replica_index).

    Stream keying (not sequential splitting) keeps replicas reproducible
    under any parallel schedule.
    """
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(replica_index,))
    return np.random.Generator(np.random.PCG64(ss))


def poisson_event_times(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    """Ordered event times of a rate-`rate` Poisson process on [0, horizon].

    Built from cumulative exponential gaps (no sort needed); draws are
    topped up in the rare case the first batch falls short.
    """
    if rate <= 0.0 or horizon <= 0.0:
        return np.empty(0, dtype=np.float64)
    mean = rate * horizon
    n_guess = int(mean + 8.0 * math.sqrt(mean + 1.0) + 16.0)
    times = np.cumsum(rng.exponential(1.0 / rate, size=n_guess))
    while times.size == 0 or times[-1] <= horizon:
        extra = np.cumsum(rng.exponential(1.0 / rate, size=n_guess)) + (
            times[-1] if times.size else 0.0
        )
        times = np.concatenate([times, extra])
    return times[: int(np.searchsorted(times, horizon, side="right"))]


def fmt_float(x: float) -> str:
    """17-significant-digit decimal form used in all CSV output."""
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [fmt_float(c) if isinstance(c, float) else str(c) for c in row]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path: Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def sample_mean_se(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error (ddof=1); SE is 0 for a single value."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean()) if values.size else math.nan
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))
