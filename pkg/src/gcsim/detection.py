"""Detector model: efficiency, Gaussian timing jitter, dark counts and
non-paralyzable dead time. Time tags are ``(channel, timestamp_ps)``."""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numba
import numpy as np

from . import rng as _rng
from .errors import DataError, ParameterError


@dataclass(frozen=True)
class DetectorParams:
    efficiency: float = 0.6
    jitter_sigma: float = 252e-12
    dark_rate: float = 100.0
    dead_time: float = 0.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ParameterError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.jitter_sigma < 0:
            raise ParameterError("jitter_sigma must be non-negative")
        if self.dark_rate < 0:
            raise ParameterError("dark_rate must be non-negative")
        if self.dead_time < 0:
            raise ParameterError("dead_time must be non-negative")


class TimeTag(NamedTuple):
    channel: int
    timestamp: int


@dataclass
class TagStream:
    """Columnar time tags, sorted by timestamp then channel."""

    channel: np.ndarray
    timestamp: np.ndarray

    def __len__(self):
        return len(self.timestamp)

    def __getitem__(self, i):
        return TimeTag(int(self.channel[i]), int(self.timestamp[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        return (
            isinstance(other, TagStream)
            and np.array_equal(self.channel, other.channel)
            and np.array_equal(self.timestamp, other.timestamp)
        )

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.uint8), np.zeros(0, np.int64))

    @classmethod
    def from_times(cls, timestamps, channel):
        ts = np.asarray(timestamps, dtype=np.int64)
        return cls(np.full(len(ts), channel, dtype=np.uint8), ts)

    def on(self, channel):
        """Timestamps of one channel (sorted)."""
        return self.timestamp[self.channel == channel]


@numba.njit(cache=True)
def _dead_time_mask(ts, dead):
    keep = np.ones(len(ts), dtype=np.bool_)
    last = 0
    have = False
    for i in range(len(ts)):
        if have and ts[i] - last < dead:
            keep[i] = False
        else:
            last = ts[i]
            have = True
    return keep


def apply_dead_time(timestamps, dead_time_ps):
    """Drop clicks within ``dead_time_ps`` of the last accepted click."""
    timestamps = np.asarray(timestamps, dtype=np.int64)
    if dead_time_ps <= 0 or len(timestamps) == 0:
        return timestamps
    return timestamps[_dead_time_mask(timestamps, np.int64(dead_time_ps))]


def detect_many(arrival_ps, d: DetectorParams, rng, apply_dead=True):
    """Detect an array of photon arrivals on one detector; returns sorted ps tags."""
    arrival_ps = np.asarray(arrival_ps, dtype=np.int64)
    hit = rng.random(len(arrival_ps)) < d.efficiency
    t = arrival_ps[hit]
    if d.jitter_sigma > 0:
        jitter = rng.normal(0.0, d.jitter_sigma * _rng.PS_PER_S, len(t))
        t = t + np.rint(jitter).astype(np.int64)
    t = np.sort(t, kind="stable")
    if apply_dead:
        t = apply_dead_time(t, _rng.to_ps(d.dead_time))
    return t


def detect(arrival_time, d: DetectorParams, rng, last_click=None) -> Optional[int]:
    """Detect a single arrival (ps). Returns the tag timestamp or None.

    ``last_click`` is the previous accepted click on this detector, used for
    the dead-time check.
    """
    t = detect_many([arrival_time], d, rng, apply_dead=False)
    if len(t) == 0:
        return None
    t = int(t[0])
    if last_click is not None and t - last_click < int(_rng.to_ps(d.dead_time)):
        return None
    return t


def dark_count_stream(rate, duration, rng, channel=0):
    """Homogeneous Poisson clicks on ``[0, duration)`` as a sorted TagStream."""
    if rate < 0:
        raise ParameterError("dark rate must be non-negative")
    if rate == 0 or duration <= 0:
        return TagStream.empty() if channel == 0 else TagStream.from_times([], channel)
    n = rng.poisson(rate * duration)
    t = np.sort(_rng.to_ps(rng.random(n) * duration))
    return TagStream.from_times(t, channel)


def is_sorted(ts):
    ts = np.asarray(ts)
    return len(ts) < 2 or bool(np.all(ts[1:] >= ts[:-1]))


def merge_sorted(streams):
    """Stable merge of sorted TagStreams; ties broken by channel id."""
    streams = list(streams)
    for k, s in enumerate(streams):
        if not is_sorted(s.timestamp):
            raise DataError(f"input stream {k} is not sorted by timestamp")
    if not streams:
        return TagStream.empty()
    ch = np.concatenate([np.asarray(s.channel, dtype=np.uint8) for s in streams])
    ts = np.concatenate([np.asarray(s.timestamp, dtype=np.int64) for s in streams])
    order = np.lexsort((ch, ts))
    return TagStream(ch[order], ts[order])


def detect_channels(arrivals, detectors, seed, duration=None, base_channel=0):
    """Detect per-channel arrivals and add dark counts; returns a merged TagStream.

    ``arrivals`` is a list of ps arrays, one per channel, and ``detectors``
    the matching DetectorParams. Each channel draws from its own substream.
    Dead time acts on the combined photon + dark click train.
    """
    out = []
    for k, (arr, d) in enumerate(zip(arrivals, detectors)):
        ch = base_channel + k
        g = _rng.substream(seed, _rng.DETECTION, ch)
        t = detect_many(arr, d, g, apply_dead=False)
        if duration is not None and d.dark_rate > 0:
            dark = dark_count_stream(d.dark_rate, duration, _rng.substream(seed, _rng.DARK, ch), ch)
            t = np.sort(np.concatenate([t, dark.timestamp]), kind="stable")
        t = apply_dead_time(t, _rng.to_ps(d.dead_time))
        out.append(TagStream.from_times(t, ch))
    return merge_sorted(out)
