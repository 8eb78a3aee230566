"""Sampled observables and their delimited-text serialization."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.16e"  # 17 significant digits


def fmt(x: float) -> str:
    return FLOAT_FMT % x


@dataclass
class TimeSeries:
    """Observables sampled at strictly increasing times.

    ``channels`` maps a channel name (``jz``, ``entropy``, ...) to a real array
    of the same length as ``times``.
    """

    times: np.ndarray
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict[str, str] = field(default_factory=dict)
    final: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        for name, values in self.channels.items():
            if values.shape != self.times.shape:
                raise ValueError(f"channel {name!r} has {values.shape}, times have {self.times.shape}")

    def __len__(self):
        return self.times.size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @classmethod
    def from_records(cls, times, records: list[dict[str, float]], meta=None) -> "TimeSeries":
        names = list(records[0]) if records else []
        channels = {n: np.array([r[n] for r in records], dtype=float) for n in names}
        return cls(np.asarray(times, dtype=float), channels, dict(meta or {}))

    def window(self, t_lo: float, t_hi: float) -> "TimeSeries":
        mask = (self.times >= t_lo) & (self.times <= t_hi)
        return TimeSeries(self.times[mask], {k: v[mask] for k, v in self.channels.items()}, dict(self.meta))

    def to_text(self, names=None, omega: float | None = None, delta: float | None = None) -> str:
        """Delimited text: ``#`` header lines, then one row per sample.

        When ``omega``/``delta`` are given, the time axis is also written in
        field periods t/(2 pi/omega) and atomic periods t/(2 pi/delta).
        """
        names = list(self.channels) if names is None else list(names)
        cols = [self.times]
        heads = ["t"]
        if omega:
            cols.append(self.times * omega / (2 * np.pi))
            heads.append("t_field_periods")
        if delta:
            cols.append(self.times * abs(delta) / (2 * np.pi))
            heads.append("t_atomic_periods")
        cols += [self.channels[n] for n in names]
        heads += names
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k} = {v}\n")
        buf.write("# columns: " + " ".join(heads) + "\n")
        for row in zip(*cols):
            buf.write(" ".join(fmt(x) for x in row) + "\n")
        return buf.getvalue()

    def save(self, path, names=None, omega=None, delta=None):
        Path(path).write_text(self.to_text(names, omega, delta), newline="\n")

    @classmethod
    def load(cls, path) -> "TimeSeries":
        meta, heads, rows = {}, None, []
        for line in Path(path).read_text().splitlines():
            if line.startswith("# columns:"):
                heads = line.split(":", 1)[1].split()
            elif line.startswith("#"):
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = val.strip()
            elif line.strip():
                rows.append([float(x) for x in line.split()])
        data = np.array(rows, dtype=float).reshape(len(rows), len(heads))
        skip = {"t", "t_field_periods", "t_atomic_periods"}
        channels = {h: data[:, i] for i, h in enumerate(heads) if h not in skip}
        return cls(data[:, 0], channels, meta)
