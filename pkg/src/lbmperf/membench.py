"""STREAM-style copy bandwidth benchmarks used to calibrate the model.

The copy C = A mirrors the load-to-store ratio of the grid update.  Work is
split into ``chunks`` block-cyclic pieces of ``quantum`` elements, statically
assigned round-robin to the worker threads; once chunks * quantum exceeds the
vector length the trailing chunks own no blocks and run empty, which is where
throughput drops off in a granularity sweep.

``measured_gbs`` counts user-visible traffic (one load + one store per
element).  On write-allocate architectures every store miss first loads the
line, so the actual bus traffic is higher by a configurable factor
(default 1.5 for the copy); machines with non-temporal stores can set 1.0.
GB/s means 1e9 bytes per second throughout.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

DEFAULT_QUANTUM = 256
DEFAULT_MIN_SECONDS = 0.05
WRITE_ALLOCATE_COPY_FACTOR = 1.5

CSV_COLUMNS = ("run_id", "n", "value_bytes", "workers", "chunks",
               "measured_gbs", "actual_gbs", "reps")


class CopyVerificationError(RuntimeError):
    """The copied vector did not match its source elementwise."""


@dataclass(frozen=True)
class BandwidthSample:
    vector_elements: int
    value_bytes: int
    granularity: int          # number of chunks
    workers: int
    measured_gbs: float
    actual_gbs: float
    repetitions: int
    passes: int
    best_seconds: float
    empty_chunks: int
    quantum: int

    @property
    def precision(self) -> str:
        return "SP" if self.value_bytes == 4 else "DP"

    def __post_init__(self):
        assert self.actual_gbs >= self.measured_gbs


def _chunk_blocks(n: int, chunks: int, quantum: int) -> list[list[tuple[int, int]]]:
    """Block-cyclic [start, stop) element blocks owned by each chunk."""
    blocks = [[] for _ in range(chunks)]
    stride = chunks * quantum
    for c in range(chunks):
        start = c * quantum
        while start < n:
            blocks[c].append((start, min(start + quantum, n)))
            start += stride
    return blocks


def _copy_blocks(dst, src, block_list) -> None:
    for a, b in block_list:
        dst[a:b] = src[a:b]


def _run_pass(dst, src, worker_blocks, pool) -> None:
    if pool is None:
        for blocks in worker_blocks:
            _copy_blocks(dst, src, blocks)
        return
    futures = [pool.submit(_copy_blocks, dst, src, blocks)
               for blocks in worker_blocks]
    for fut in futures:
        fut.result()


def stream_copy(n: int, value_bytes: int = 8, workers: int = 1,
                chunks: int | None = None, repetitions: int = 5,
                min_seconds: float = DEFAULT_MIN_SECONDS,
                write_allocate_factor: float = WRITE_ALLOCATE_COPY_FACTOR,
                quantum: int = DEFAULT_QUANTUM, auto_size: bool = True,
                max_elements: int = 1 << 24) -> BandwidthSample:
    """Best-of-k timed copy C = A with elementwise verification.

    The vector is doubled while a single pass finishes under ``min_seconds``
    (up to ``max_elements``); if the cap still leaves a pass short, several
    passes are timed together so every timed run spans at least
    ``min_seconds`` and timer resolution stays negligible.
    """
    if n < 1:
        raise ValueError("vector must hold at least one element")
    if write_allocate_factor < 1.0:
        raise ValueError("write_allocate_factor must be >= 1.0")
    workers = max(1, workers)
    chunks = workers if chunks is None else max(1, chunks)
    dtype = np.float32 if value_bytes == 4 else np.float64

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while True:
            src = (np.arange(n, dtype=np.int64) % 8191 + 1).astype(dtype)
            dst = np.zeros(n, dtype)
            blocks = _chunk_blocks(n, chunks, quantum)
            worker_blocks = [
                [blk for c in range(w, chunks, workers) for blk in blocks[c]]
                for w in range(workers)
            ]
            t0 = time.perf_counter()
            _run_pass(dst, src, worker_blocks, pool)
            single = time.perf_counter() - t0
            if auto_size and single < min_seconds and 2 * n <= max_elements:
                n *= 2
                continue
            break

        passes = max(1, math.ceil(min_seconds / max(single, 1e-9)))
        while True:
            best = math.inf
            for _ in range(max(1, repetitions)):
                t0 = time.perf_counter()
                for _ in range(passes):
                    _run_pass(dst, src, worker_blocks, pool)
                best = min(best, time.perf_counter() - t0)
            if best >= min_seconds:
                break
            # warm passes outpaced the cold calibration pass; scale up
            passes = max(passes + 1, math.ceil(passes * min_seconds / best))
    finally:
        if pool is not None:
            pool.shutdown()

    if not np.array_equal(dst, src):
        bad = int(np.flatnonzero(dst != src)[0])
        raise CopyVerificationError(
            f"copy mismatch at element {bad} (n={n}, chunks={chunks})")

    measured = 2.0 * n * value_bytes * passes / best / 1e9
    return BandwidthSample(
        vector_elements=n,
        value_bytes=value_bytes,
        granularity=chunks,
        workers=workers,
        measured_gbs=measured,
        actual_gbs=measured * write_allocate_factor,
        repetitions=max(1, repetitions),
        passes=passes,
        best_seconds=best,
        empty_chunks=sum(1 for b in blocks if not b),
        quantum=quantum,
    )


def granularity_sweep(n: int, chunk_counts, **kwargs) -> list[BandwidthSample]:
    """One verified sample per chunk count, at fixed vector length."""
    counts = list(chunk_counts)
    if not counts:
        raise ValueError("chunk_counts must be non-empty")
    kwargs.setdefault("auto_size", False)
    return [stream_copy(n, chunks=c, **kwargs) for c in counts]


def write_samples_csv(samples, path, run_id: int = 0, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if not append:
            writer.writerow(CSV_COLUMNS)
        for s in samples:
            writer.writerow([run_id, s.vector_elements, s.value_bytes, s.workers,
                             s.granularity, repr(s.measured_gbs),
                             repr(s.actual_gbs), s.repetitions])


def next_run_id(path) -> int:
    """0 for a fresh file, otherwise one past the largest recorded run id."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        return 0
    ids = [int(r["run_id"]) for r in rows if r.get("run_id")]
    return max(ids) + 1 if ids else 0
