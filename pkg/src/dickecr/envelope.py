"""Envelope, revival and dip detectors for sampled observables.

The Rabi envelope is the amplitude max|v - mean(v)| over a window of one
atomic period. Long runs are sampled in short bursts ("windows") of a few
points spread over one atomic period, taken at regularly spaced anchor
times, which resolves the envelope without sampling every atomic
oscillation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter1d

WINDOW_SAMPLES = 16


def window_times(anchors, period: float, n: int = WINDOW_SAMPLES) -> np.ndarray:
    """Sample times anchor + period*k/n for k < n, shape (len(anchors), n)."""
    anchors = np.asarray(anchors, dtype=float)
    if anchors.size > 1 and np.min(np.diff(anchors)) <= period * (n - 1) / n:
        raise ValueError("anchor spacing must exceed one window")
    return anchors[:, None] + period * np.arange(n)[None, :] / n


def window_stats(values) -> tuple[np.ndarray, np.ndarray]:
    """Envelope and mean of each window row of ``values`` (shape (anchors, n))."""
    v = np.asarray(values, dtype=float)
    mean = v.mean(axis=1)
    return np.max(np.abs(v - mean[:, None]), axis=1), mean


def running_envelope(values, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Sliding-window envelope and mean for a uniformly sampled series.

    Entry i describes samples i .. i+window-1.
    """
    v = np.asarray(values, dtype=float)
    if window < 2 or window > v.size:
        raise ValueError("window must be between 2 and the number of samples")
    w = np.lib.stride_tricks.sliding_window_view(v, window)
    mean = w.mean(axis=1)
    return np.max(np.abs(w - mean[:, None]), axis=1), mean


def envelope_near(times, values, t: float, period: float) -> float:
    """Envelope over the samples in [t, t + period) of a densely sampled series."""
    times = np.asarray(times)
    mask = (times >= t) & (times < t + period)
    if mask.sum() < 4:
        raise ValueError(f"fewer than 4 samples in the window at t={t}")
    v = np.asarray(values)[mask]
    return float(np.max(np.abs(v - v.mean())))


def binned_max(times, env, width: float) -> tuple[np.ndarray, np.ndarray]:
    """Maximum of ``env`` within consecutive bins [k width, (k+1) width); returns bin centres."""
    times = np.asarray(times, dtype=float)
    idx = np.floor(times / width + 1e-9).astype(int)
    n = idx.max() + 1
    out = np.full(n, -np.inf)
    np.maximum.at(out, idx, np.asarray(env, dtype=float))
    keep = np.isfinite(out)
    centres = (np.arange(n) + 0.5) * width
    return centres[keep], out[keep]


@dataclass(frozen=True)
class Revival:
    time: float  # centroid of the revival peak
    collapse_time: float  # first bin below the collapse threshold
    peak_ratio: float  # revived amplitude / initial amplitude


def detect_revival(times, env, field_period: float, collapse_frac: float = 0.2,
                   half_frac: float = 0.5) -> Revival | None:
    """First collapse and the strongest subsequent reappearance of the envelope.

    The envelope is reduced to its maximum per field period. After the first
    bin below ``collapse_frac`` of the initial amplitude, the revival is the
    amplitude-weighted centroid of the contiguous bins around the largest
    later maximum that stay above ``half_frac`` of it.
    """
    tc, f = binned_max(times, env, field_period)
    e0 = f[0]
    if e0 <= 0:
        return None
    below = np.flatnonzero(f < collapse_frac * e0)
    if below.size == 0:
        return None
    kc = int(below[0])
    rest = f[kc:]
    k = kc + int(np.argmax(rest))
    if f[k] < collapse_frac * e0:
        return None
    lo = k
    while lo > kc and f[lo - 1] >= half_frac * f[k]:
        lo -= 1
    hi = k
    while hi < f.size - 1 and f[hi + 1] >= half_frac * f[k]:
        hi += 1
    w = f[lo:hi + 1]
    return Revival(float(np.dot(tc[lo:hi + 1], w) / w.sum()), float(tc[kc]), float(f[k] / e0))


@dataclass(frozen=True)
class Dip:
    index: int
    time: float
    value: float
    plateau: float  # smaller of the two neighbouring maxima


def entropy_dips(times, values, half_width: int, depth: float = 0.05, core: int | None = None) -> list[Dip]:
    """Local minima lying at least ``depth`` (relative) below both neighbouring plateaus.

    A sample is a candidate if it is the minimum over +-``core`` samples
    (default half_width // 4); the plateaus are the maxima over the
    ``half_width`` samples on either side. Candidates whose window would
    leave the series are dropped, as are candidates closer than
    ``half_width`` to a deeper one.
    """
    v = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    core = max(1, half_width // 4) if core is None else core
    is_min = v <= minimum_filter1d(v, 2 * core + 1, mode="nearest")
    dips = []
    for i in np.flatnonzero(is_min):
        if i < half_width or i + half_width >= v.size:
            continue
        lmax = v[i - half_width:i + 1].max()
        rmax = v[i:i + half_width + 1].max()
        plateau = min(lmax, rmax)
        if plateau > 0 and v[i] <= (1 - depth) * plateau:
            dips.append(Dip(int(i), float(times[i]), float(v[i]), float(plateau)))
    dips.sort(key=lambda d: d.value)
    kept: list[Dip] = []
    for d in dips:
        if all(abs(d.index - k.index) > half_width for k in kept):
            kept.append(d)
    return sorted(kept, key=lambda d: d.index)
