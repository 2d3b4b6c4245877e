"""Distance-driven erasure channel for 1090ES broadcasts.

Loss follows the worst-case ADS-B packet-loss fit
``PLR[%] = 65.366 + 0.020319 * distance_km``, clamped to [65 %, 95 %].
Each frame is lost independently; the loss pattern is a pure function of
``(seed, stream_id, frame position)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import derive_seed, stream_uniform
from .errors import AdsbAuthError

PLR_INTERCEPT_PCT = 65.366
PLR_SLOPE_PCT_PER_KM = 0.020319
PLR_MIN = 0.65
PLR_MAX = 0.95


class NegativeDistance(AdsbAuthError, ValueError):
    pass


def plr_at(distance_km: float) -> float:
    if distance_km < 0:
        raise NegativeDistance(f"distance must be >= 0 km, got {distance_km}")
    raw = (PLR_INTERCEPT_PCT + PLR_SLOPE_PCT_PER_KM * distance_km) / 100.0
    return min(PLR_MAX, max(PLR_MIN, raw))


@dataclass(frozen=True)
class ChannelModel:
    distance_km: float = 0.0
    seed: int = 0
    plr_override: float | None = None

    def __post_init__(self) -> None:
        if self.distance_km < 0:
            raise NegativeDistance(f"distance must be >= 0 km, got {self.distance_km}")
        if self.plr_override is not None and not 0.0 <= self.plr_override <= 1.0:
            raise ValueError("plr_override must lie in [0, 1]")

    @classmethod
    def with_plr(cls, plr: float, seed: int = 0) -> ChannelModel:
        """A channel with a fixed loss rate (any value in [0, 1]), ignoring distance."""
        return cls(0.0, seed, plr)

    @property
    def plr(self) -> float:
        return plr_at(self.distance_km) if self.plr_override is None else self.plr_override


def transmit(frame_count: int, model: ChannelModel, stream_id: int, start: int = 0) -> np.ndarray:
    """Delivery flags for frames ``start .. start+frame_count-1`` of one stream.

    A frame is delivered when its uniform draw is at least ``plr``, so
    ``plr = 0`` delivers everything and ``plr = 1`` nothing.
    """
    if frame_count < 0:
        raise ValueError("frame_count must be >= 0")
    u = stream_uniform(derive_seed(model.seed, stream_id), start, frame_count)
    return u >= model.plr


class Transmission:
    """Walks one stream's delivery flags, generated in vectorised chunks."""

    def __init__(self, model: ChannelModel, stream_id: int, chunk: int = 512) -> None:
        self.model = model
        self.stream_id = stream_id
        self.chunk = chunk
        self.sent = 0
        self._window_end = 0
        self._hits: list[int] = []

    def next_delivery(self, limit: int) -> int | None:
        """Frames sent up to and including the next delivered one.

        Returns None, with ``limit`` frames counted as sent, when no frame in
        the remaining budget gets through.
        """
        start = self.sent
        while True:
            if self._hits:
                pos = self._hits.pop()
                if pos >= limit:
                    self._hits.append(pos)
                    break
                self.sent = pos + 1
                return self.sent - start
            if self._window_end >= limit:
                break
            flags = transmit(self.chunk, self.model, self.stream_id, self._window_end)
            self._hits = (np.flatnonzero(flags)[::-1] + self._window_end).tolist()
            self._window_end += self.chunk
        self.sent = max(self.sent, limit)
        return None
