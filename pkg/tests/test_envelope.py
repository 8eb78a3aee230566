import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dickecr.envelope import (
    binned_max, detect_revival, entropy_dips, envelope_near, running_envelope, window_stats,
    window_times,
)


def test_window_times_layout():
    w = window_times([0.0, 10.0], 2.0, 4)
    assert w.shape == (2, 4)
    assert np.allclose(w[1], [10.0, 10.5, 11.0, 11.5])
    with pytest.raises(ValueError):
        window_times([0.0, 1.0], 2.0, 4)


@given(st.floats(0.1, 5), st.floats(-3, 3), st.floats(0, 2 * math.pi))
def test_window_envelope_of_sinusoid(amp, offset, phase):
    t = window_times(np.arange(5) * 10.0, 2 * math.pi, 64)
    env, mean = window_stats(offset + amp * np.cos(t + phase))
    assert np.allclose(env, amp, rtol=2e-3)
    assert np.allclose(mean, offset, atol=1e-12)


def test_running_envelope():
    t = np.linspace(0, 100, 2001)
    v = np.exp(-t / 50) * np.sin(2 * math.pi * t)
    env, mean = running_envelope(v, 20)
    assert env.size == v.size - 19
    assert env[0] == pytest.approx(1.0, abs=0.02)
    assert envelope_near(t, v, 50.0, 1.0) == pytest.approx(math.exp(-1), rel=0.03)
    with pytest.raises(ValueError):
        running_envelope(v, 1)


def test_binned_max():
    c, m = binned_max([0.1, 0.5, 1.2, 3.7], [1.0, 3.0, 2.0, 5.0], 1.0)
    assert list(c) == [0.5, 1.5, 3.5]
    assert list(m) == [3.0, 2.0, 5.0]


def _collapse_revival(t, t_rev, width):
    return np.exp(-(t / width) ** 2) + 0.8 * np.exp(-((t - t_rev) / width) ** 2)


def test_revival_detection():
    t = np.arange(0, 150, 0.25)
    rev = detect_revival(t, _collapse_revival(t, 100.0, 5.0), 1.0)
    # resolution is one bin (one field period)
    assert rev.time == pytest.approx(100.0, abs=0.5)
    assert rev.peak_ratio == pytest.approx(0.8, abs=0.01)
    assert 5.0 < rev.collapse_time < 10.0
    # no collapse, no revival
    assert detect_revival(t, np.ones_like(t), 1.0) is None


def test_entropy_dips():
    t = np.linspace(0, 1, 1001)
    s = np.ones_like(t)
    for c in (0.25, 0.5, 0.75):
        s -= 0.4 * np.exp(-((t - c) / 0.01) ** 2)
    s -= 0.02 * np.exp(-((t - 0.6) / 0.01) ** 2)  # too shallow
    dips = entropy_dips(t, s, half_width=40)
    assert [round(d.time, 3) for d in dips] == [0.25, 0.5, 0.75]
    assert all(d.value < 0.95 * d.plateau for d in dips)
