"""Exact simulation of the observed Poisson processes.

A path with stream ``(seed, i)`` uses uniform index 0 for its event count
``N ~ Poisson(Lambda(T))`` and indices ``1..N`` for the event positions,
which are mapped through the inverse cumulative intensity.  Paths of a batch
are independent of one another and of the order in which they are drawn.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import FingerprintMismatch, ValidationError
from .model import fingerprint, inverse_cumulative, total_intensity
from .rng import poisson_inverse, uniforms

__all__ = [
    "EventPath",
    "SampleBatch",
    "sample_path",
    "sample_batch",
    "draw_paths",
    "batch_to_text",
    "batch_from_text",
]


@dataclass(frozen=True)
class EventPath:
    times: np.ndarray

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """n independent paths, stored as pooled times plus per-path counts."""

    times: np.ndarray
    counts: np.ndarray
    model_fingerprint: str
    seed: int

    @property
    def n(self):
        return len(self.counts)

    @property
    def paths(self):
        ends = np.cumsum(self.counts)
        return [EventPath(self.times[e - c:e]) for c, e in zip(self.counts, ends)]

    def mirrored(self, T):
        """The batch under t -> T - t, paths kept in order."""
        parts = [T - path.times[::-1] for path in self.paths]
        times = np.concatenate(parts) if parts else np.empty(0)
        return SampleBatch(times, self.counts.copy(), self.model_fingerprint, self.seed)

    def __eq__(self, other):
        return (
            isinstance(other, SampleBatch)
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.times, other.times)
            and self.model_fingerprint == other.model_fingerprint
            and self.seed == other.seed
        )


@njit(cache=True)
def _sort_segments(values, counts):
    start = 0
    for c in counts:
        if c > 1:
            values[start:start + c] = np.sort(values[start:start + c])
        start += c


@njit(cache=True)
def _has_bad_segment(values, counts, upper):
    bad = np.zeros(counts.size, dtype=np.bool_)
    start = 0
    for j in range(counts.size):
        c = counts[j]
        for k in range(start, start + c):
            if values[k] <= 0.0 or values[k] >= upper or (k > start and values[k] <= values[k - 1]):
                bad[j] = True
                break
        start += c
    return bad


def _single_path(model, seed, stream, total):
    n_events = int(poisson_inverse(uniforms(seed, stream, 0), total))
    idx = np.arange(1, n_events + 1, dtype=np.uint64)
    times = np.atleast_1d(inverse_cumulative(model, uniforms(seed, stream, idx) * total))
    for extra in range(1, 18):
        times = np.sort(times)
        ok = (times > 0) & (times < model.T)
        if times.size > 1:
            ok &= np.concatenate([[True], np.diff(times) > 0])
        if ok.all():
            return times
        # probability-zero collisions: redraw the offending positions further along the stream
        bad = np.nonzero(~ok)[0]
        u_new = uniforms(seed, stream, np.uint64(n_events) + np.uint64(extra) * np.uint64(1 << 32) + bad.astype(np.uint64))
        times[bad] = inverse_cumulative(model, u_new * total)
    raise RuntimeError("could not draw distinct event times")


def draw_paths(model, seeds, streams):
    """Draw one path per ``(seeds[k], streams[k])``; returns pooled times and counts."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    streams = np.asarray(streams, dtype=np.uint64)
    seeds, streams = (np.ascontiguousarray(v).reshape(-1) for v in np.broadcast_arrays(seeds, streams))
    total = total_intensity(model)
    counts = poisson_inverse(uniforms(seeds, streams, 0), total).astype(np.int64)
    m = int(counts.sum())
    owner = np.repeat(np.arange(counts.size), counts)
    starts = np.cumsum(counts) - counts
    index = (np.arange(m) - np.repeat(starts, counts) + 1).astype(np.uint64)
    u = uniforms(seeds[owner], streams[owner], index)
    _sort_segments(u, counts)
    times = np.asarray(inverse_cumulative(model, u * total), dtype=float).reshape(-1)
    bad = _has_bad_segment(times, counts, model.T)
    if bad.any():
        ends = np.cumsum(counts)
        for j in np.nonzero(bad)[0]:
            times[ends[j] - counts[j]:ends[j]] = _single_path(model, seeds[j], streams[j], total)
    return times, counts


def sample_path(model, rng):
    times, _ = draw_paths(model, rng.seed, rng.stream_index)
    return EventPath(times)


def sample_batch(model, n, seed):
    if n < 1:
        raise ValidationError(f"n must be positive, got {n}")
    times, counts = draw_paths(model, np.full(n, seed, dtype=np.uint64), np.arange(n, dtype=np.uint64))
    return SampleBatch(times, counts, fingerprint(model), int(seed))


def batch_to_text(batch):
    lines = [f"n={batch.n} seed={batch.seed} model={batch.model_fingerprint}"]
    lines += [",".join(f"{t:.17g}" for t in path.times) for path in batch.paths]
    return "\n".join(lines) + "\n"


def batch_from_text(text, model=None):
    lines = text.split("\n")
    try:
        header = dict(field.split("=", 1) for field in lines[0].split())
        n = int(header["n"])
        seed = int(header["seed"])
        fp = header["model"]
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad batch header {lines[0]!r}") from exc
    if model is not None and fingerprint(model) != fp:
        raise FingerprintMismatch(f"batch was drawn from model {fp}, not {fingerprint(model)}")
    body = lines[1:1 + n]
    if len(body) != n:
        raise ValidationError(f"batch declares {n} paths but has {len(body)}")
    try:
        paths = [np.array([float(v) for v in line.split(",")]) if line.strip() else np.empty(0) for line in body]
    except ValueError as exc:
        raise ValidationError(f"bad event time in batch body: {exc}") from exc
    counts = np.array([len(p) for p in paths], dtype=np.int64)
    times = np.concatenate(paths) if paths else np.empty(0)
    return SampleBatch(times, counts, fp, seed)
