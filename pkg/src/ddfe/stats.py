"""Streaming density statistics and soft clipping.

Channel-wise percentiles of the training-domain density distribution are
estimated on the fly with reservoir sampling (Vitter's Algorithm R, one
reservoir per density channel).  The resulting 10th/90th percentiles define
a tanh soft clip that confines densities to the spectrum seen in training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RESERVOIR_CAPACITY = 1000
HALF_SPAN_FLOOR = 1e-8  # guards the division when P90 == P10


class DensityReservoir:
    """Fixed-capacity uniform sample of each density channel's stream.

    Every stream element ends up in its channel's reservoir with probability
    capacity/n after n elements.  Deterministic for a fixed seed and update
    sequence.
    """

    def __init__(self, num_channels: int = 4, capacity: int = RESERVOIR_CAPACITY,
                 seed: int = 0):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.seed = seed
        self.samples = [np.empty(capacity, dtype=np.float64) for _ in range(num_channels)]
        self.seen = [0] * num_channels
        seqs = np.random.SeedSequence(seed).spawn(num_channels)
        self._rngs = [np.random.default_rng(s) for s in seqs]

    @property
    def num_channels(self) -> int:
        return len(self.samples)

    def size(self, channel: int) -> int:
        return min(self.seen[channel], self.capacity)

    def update(self, embedding: np.ndarray) -> None:
        """Stream an (N, C) density embedding through the reservoirs."""
        values = np.asarray(embedding, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != self.num_channels:
            raise ValueError(
                f"expected (N, {self.num_channels}) embedding, got shape {values.shape}"
            )
        if not np.isfinite(values).all():
            raise ValueError("non-finite density")
        for c in range(self.num_channels):
            self._update_channel(c, values[:, c])

    def _update_channel(self, c: int, stream: np.ndarray) -> None:
        n, cap = self.seen[c], self.capacity
        fill = min(max(cap - n, 0), stream.size)
        if fill:
            self.samples[c][n : n + fill] = stream[:fill]
            n += fill
            stream = stream[fill:]
        if stream.size:
            # Algorithm R: element at stream position t replaces a uniform
            # slot with probability cap/t.
            positions = np.arange(n + 1, n + stream.size + 1)
            slots = self._rngs[c].integers(0, positions)
            for i in np.flatnonzero(slots < cap):
                self.samples[c][slots[i]] = stream[i]
            n += stream.size
        self.seen[c] = n

    def percentile(self, p: float) -> np.ndarray:
        """Nearest-rank percentile per channel: sorted sample [ceil(p/100*n)-1]."""
        if not 0.0 <= p <= 100.0:
            raise ValueError(f"percentile must be in [0, 100], got {p}")
        out = np.empty(self.num_channels, dtype=np.float64)
        for c in range(self.num_channels):
            n = self.size(c)
            if n == 0:
                raise ValueError("no density statistics")
            rank = max(math.ceil(p / 100.0 * n) - 1, 0)
            out[c] = np.sort(self.samples[c][:n])[rank]
        return out


@dataclass(frozen=True)
class ClipParams:
    """Per-channel midpoint and half span of the training density spectrum."""

    mid: np.ndarray
    half_span: np.ndarray
    p10: np.ndarray
    p90: np.ndarray

    def __post_init__(self):
        if np.any(self.half_span < 0):
            raise ValueError("half_span must be non-negative")

    @classmethod
    def from_mid_span(cls, mid: np.ndarray, half_span: np.ndarray) -> "ClipParams":
        mid = np.asarray(mid, dtype=np.float64)
        half_span = np.asarray(half_span, dtype=np.float64)
        return cls(mid, half_span, mid - half_span, mid + half_span)


def fit_clip(reservoir: DensityReservoir) -> ClipParams:
    """Freeze clip parameters from the reservoir's 10th/90th percentiles."""
    p10 = reservoir.percentile(10.0)
    p90 = reservoir.percentile(90.0)
    mid = 0.5 * (p90 + p10)
    half_span = np.maximum(0.5 * (p90 - p10), HALF_SPAN_FLOOR)
    return ClipParams(mid, half_span, p10, p90)


def soft_clip(embedding: np.ndarray, clip: ClipParams) -> np.ndarray:
    """Confine densities to (mid - span, mid + span) with a tanh squash.

    Identity (slope 1) at the midpoint; saturates smoothly at the 10th/90th
    percentile band edges.  Inputs many spans beyond the band can round to
    the bound itself in floating point.
    """
    values = np.asarray(embedding, dtype=np.float64)
    return np.tanh((values - clip.mid) / clip.half_span) * clip.half_span + clip.mid
