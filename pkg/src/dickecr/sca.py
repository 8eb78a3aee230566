"""Semi-classical (mean-field) dynamics and the driven-atom limit.

Both equation sets share the precession form dJ/dt = B x J with
B = (2 lam Re(alpha), 0, -delta). In the semi-classical approximation the
field obeys i d(alpha)/dt = omega alpha + lam Jx; in the driven limit the
field is the free solution alpha0 exp(-i omega t).

The state is packed as y = (Jx, Jy, Jz, Re alpha, Im alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .model import ModelParams
from .timeseries import TimeSeries

STEPS_PER_PERIOD = 200


class IntegrationError(RuntimeError):
    """Non-finite values appeared during integration."""


@dataclass(frozen=True)
class ClassicalState:
    J: tuple[float, float, float]
    alpha: complex

    def __post_init__(self):
        object.__setattr__(self, "J", tuple(float(x) for x in self.J))
        object.__setattr__(self, "alpha", complex(self.alpha))

    def to_array(self) -> np.ndarray:
        return np.array([*self.J, self.alpha.real, self.alpha.imag])

    @classmethod
    def from_array(cls, y) -> "ClassicalState":
        return cls((y[0], y[1], y[2]), complex(y[3], y[4]))

    @classmethod
    def coherent(cls, j: float, theta: float, alpha: complex, phi: float = 0.0) -> "ClassicalState":
        """Expectation values of |theta, phi> (x) |alpha>."""
        st = math.sin(theta)
        return cls((j * st * math.cos(phi), j * st * math.sin(phi), j * math.cos(theta)), alpha)

    @property
    def spin_length(self) -> float:
        return math.sqrt(sum(x * x for x in self.J))


def _precess(bx: float, delta: float, J) -> np.ndarray:
    jx, jy, jz = J
    # B x J with B = (bx, 0, -delta)
    return np.array([delta * jy, -delta * jx - bx * jz, bx * jy])


def driven_rhs(t: float, J, p: ModelParams, alpha0: complex) -> np.ndarray:
    """dJ/dt for the atom driven by the free field alpha0 exp(-i omega t)."""
    alpha0 = complex(alpha0)
    field = alpha0.real * math.cos(p.omega * t) + alpha0.imag * math.sin(p.omega * t)
    return _precess(2 * p.lam * field, p.delta, J)


def sca_rhs(state: ClassicalState, p: ModelParams) -> ClassicalState:
    """Time derivative of a semi-classical state (returned in the same container)."""
    dj = _precess(2 * p.lam * state.alpha.real, p.delta, state.J)
    dalpha = -1j * (p.omega * state.alpha + p.lam * state.J[0])
    return ClassicalState(tuple(dj), dalpha)


def default_dt(p: ModelParams) -> float:
    return min(2 * math.pi / abs(p.delta) if p.delta else math.inf, 2 * math.pi / p.omega) / STEPS_PER_PERIOD


def _record(times, ys, j0: float, meta) -> TimeSeries:
    ys = np.asarray(ys)
    norm = np.sqrt(np.sum(ys[:, :3] ** 2, axis=1))
    channels = {
        "jx": ys[:, 0], "jy": ys[:, 1], "jz": ys[:, 2],
        "alpha_re": ys[:, 3], "alpha_im": ys[:, 4],
        "spin_drift": norm - j0,
    }
    return TimeSeries(times, channels, meta)


def _steps(t_max: float, dt: float) -> tuple[int, float]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    n = max(1, int(math.ceil(t_max / dt - 1e-9)))
    return n, t_max / n


def integrate(rhs: Callable[[float, ClassicalState], ClassicalState], state0: ClassicalState,
              t_max: float, dt: float, stride: int = 1) -> TimeSeries:
    """Classic RK4 with fixed step (adjusted down so that t_max is hit exactly).

    ``rhs(t, state)`` returns the derivative as a :class:`ClassicalState`. Every
    ``stride``-th step is recorded; the drift of |J| is recorded as ``spin_drift``.
    """
    n, h = _steps(t_max, dt)

    def f(t, y):
        return rhs(t, ClassicalState.from_array(y)).to_array()

    y = state0.to_array()
    times, ys = [0.0], [y]
    for k in range(n):
        t = k * h
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t={t + h}")
        if (k + 1) % stride == 0 or k + 1 == n:
            times.append((k + 1) * h)
            ys.append(y)
    return _record(times, ys, state0.spin_length, {"integrator": "rk4", "dt": repr(h)})


def driven_system(p: ModelParams, alpha0: complex):
    """Adapter turning :func:`driven_rhs` into an :func:`integrate` right-hand side."""

    def rhs(t, state):
        dj = driven_rhs(t, state.J, p, alpha0)
        return ClassicalState(tuple(dj), -1j * p.omega * state.alpha)

    return rhs


def sca_system(p: ModelParams):
    return lambda t, state: sca_rhs(state, p)


def trajectory(p: ModelParams, state0: ClassicalState, t_max: float, method: str = "sca",
               dt: float | None = None, stride: int = 1) -> TimeSeries:
    """Kernel-backed RK4 trajectory for ``method`` in {"sca", "driven"}.

    Same stepping as :func:`integrate`, with the loop run by the compiled
    kernel when available. The driven field is evaluated analytically at the
    RK4 stage times and the alpha channels carry the free field.
    """
    if method not in ("sca", "driven"):
        raise ValueError(f"unknown classical method {method!r}")
    n, h = _steps(t_max, default_dt(p) if dt is None else dt)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    a0 = state0.alpha
    ys = kernels.rk4_spin_field(
        state0.to_array(), float(p.delta), float(p.omega), float(p.lam),
        a0.real, a0.imag, method == "driven", h, n, stride,
    )
    if not np.all(np.isfinite(ys)):
        raise IntegrationError("non-finite state in classical trajectory")
    times = np.arange(ys.shape[0]) * (stride * h)
    meta = {"integrator": "rk4", "dt": repr(h), "kernel_backend": kernels.BACKEND, "method": method}
    return _record(times, ys, state0.spin_length, meta)


def sample(p: ModelParams, state0: ClassicalState, times, method: str = "sca",
           dt: float | None = None) -> TimeSeries:
    """RK4 trajectory recorded exactly at ascending ``times`` (starting at t=0).

    Each gap between consecutive sample times is covered by the smallest
    number of equal steps not exceeding ``dt``.
    """
    if method not in ("sca", "driven"):
        raise ValueError(f"unknown classical method {method!r}")
    times = np.asarray(times, dtype=float)
    if times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be non-negative and strictly increasing")
    h_max = default_dt(p) if dt is None else dt
    a0 = state0.alpha
    y = state0.to_array()
    out = np.empty((times.size, 5))
    t_cur = 0.0
    for i, t in enumerate(times):
        gap = t - t_cur
        if gap > 0:
            n, h = _steps(gap, h_max)
            if method == "driven":
                # the compiled loop starts its clock at zero: shift the drive phase instead
                shifted = a0 * np.exp(-1j * p.omega * t_cur)
                ar, ai = shifted.real, shifted.imag
            else:
                ar, ai = a0.real, a0.imag
            ys = kernels.rk4_spin_field(y, float(p.delta), float(p.omega), float(p.lam),
                                        ar, ai, method == "driven", h, n, n)
            y = ys[-1]
            if not np.all(np.isfinite(y)):
                raise IntegrationError(f"non-finite state before t={t}")
        out[i] = y
        t_cur = t
    meta = {"integrator": "rk4", "dt_max": repr(h_max), "kernel_backend": kernels.BACKEND, "method": method}
    return _record(times, out, state0.spin_length, meta)
