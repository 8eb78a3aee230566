"""Chebyshev expansion of exp(-i H dt) for sparse Hermitian H.

With the spectrum of H enclosed in [e_min, e_max], write H = s Ht + c where
s = (e_max - e_min)/2, c = (e_max + e_min)/2 and Ht has spectrum in [-1, 1].
Then

    exp(-i H dt) = exp(-i c dt) * sum_k (2 - delta_k0) (-i)^k J_k(s dt) T_k(Ht)

and the series is cut where every remaining |c_k| is below the tolerance.
The recurrence itself runs in :mod:`dickecr.kernels`.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from . import kernels
from .states import Ket
from .timeseries import TimeSeries

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_MARGIN = 0.05
#: Largest s*dt per step; keeps the expansion order near 30..500.
MAX_STEP_ARG = 400.0
MAX_TERMS = 5000
NORM_GUARD = 1e-8
THREADS = 1


class PropagationError(RuntimeError):
    """The Chebyshev step could not reach its tolerance."""


class PropagationAborted(RuntimeError):
    """Observer raised; ``partial`` holds the samples recorded before the failure."""

    def __init__(self, msg, partial: TimeSeries):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class SpectralBounds:
    e_min: float
    e_max: float
    margin: float = 0.0

    def __post_init__(self):
        if not self.e_min < self.e_max:
            raise ValueError(f"empty spectral interval [{self.e_min}, {self.e_max}]")

    @property
    def half_width(self) -> float:
        return 0.5 * (self.e_max - self.e_min)

    @property
    def center(self) -> float:
        return 0.5 * (self.e_max + self.e_min)

    @classmethod
    def from_eigenvalues(cls, evals, margin: float = DEFAULT_MARGIN) -> "SpectralBounds":
        lo, hi = float(np.min(evals)), float(np.max(evals))
        if hi <= lo:  # flat spectrum still needs a nonempty interval
            pad = max(abs(lo), 1.0) * 1e-3
            lo, hi = lo - pad, hi + pad
        w = hi - lo
        return cls(lo - margin * w, hi + margin * w, margin)

    def contains(self, evals) -> bool:
        return bool(np.min(evals) >= self.e_min and np.max(evals) <= self.e_max)


@dataclass(frozen=True)
class PropagationPlan:
    dt: float
    n_terms: int
    tol: float


def gershgorin_bounds(h) -> SpectralBounds:
    """Always-valid (possibly loose) enclosure of the spectrum of Hermitian ``h``."""
    h = sp.csr_matrix(h)
    diag = h.diagonal().real
    radius = np.asarray(abs(h).sum(axis=1)).ravel() - np.abs(diag)
    lo, hi = float(np.min(diag - radius)), float(np.max(diag + radius))
    if hi <= lo:
        lo, hi = lo - 1e-3, hi + 1e-3
    return SpectralBounds(lo, hi, 0.0)


def _lanczos_extremes(h, n_iter: int):
    n = h.shape[0]
    k = np.arange(n)
    v = 1.0 + 0.5 * np.sin(1.3 * k + 0.7)  # deterministic start vector
    v = v.astype(complex)
    v /= np.linalg.norm(v)
    basis = np.zeros((n_iter, n), dtype=complex)
    alphas, betas = [], []
    beta, v_old = 0.0, np.zeros(n, dtype=complex)
    for i in range(n_iter):
        basis[i] = v
        w = h @ v
        a = float(np.vdot(v, w).real)
        w = w - a * v - beta * v_old
        # full reorthogonalization against the Krylov basis
        w -= basis[: i + 1].T @ (basis[: i + 1].conj() @ w)
        alphas.append(a)
        beta = float(np.linalg.norm(w))
        if beta < 1e-10 or i == n_iter - 1:
            break
        betas.append(beta)
        v_old, v = v, w / beta
    t = np.diag(alphas)
    if betas:
        off = np.array(betas[: len(alphas) - 1])
        t += np.diag(off, 1) + np.diag(off, -1)
    theta = np.linalg.eigvalsh(t)
    return float(theta[0]), float(theta[-1])


def spectral_bounds(h, margin: float = DEFAULT_MARGIN, n_iter: int = 200) -> SpectralBounds:
    """Padded spectral interval from Lanczos extreme Ritz values, capped by Gershgorin.

    Falls back to the Gershgorin interval if the Krylov iteration misbehaves.
    """
    gers = gershgorin_bounds(h)
    n = h.shape[0]
    try:
        lo, hi = _lanczos_extremes(h, min(n, n_iter))
    except (np.linalg.LinAlgError, FloatingPointError):
        return gers
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return gers
    if hi <= lo:
        pad = max(abs(lo), 1.0) * 1e-3
        lo, hi = lo - pad, hi + pad
    w = hi - lo
    lo = max(lo - margin * w, gers.e_min)
    hi = min(hi + margin * w, gers.e_max)
    if hi <= lo:
        return gers
    return SpectralBounds(lo, hi, margin)


def bessel_terms(x: float, tol: float, max_terms: int = MAX_TERMS) -> np.ndarray:
    """Bessel values J_0(x) .. J_{K-1}(x) with 2|J_k(x)| < tol for every k >= K."""
    n = int(x + 30 + 10 * max(x, 1.0) ** (1 / 3))
    while True:
        jk = kernels.bessel_j_sequence(x, n)
        # the tail decays monotonically once k exceeds x; insist it is well below tol
        if 2 * abs(jk[-1]) < 1e-3 * tol and 2 * abs(jk[-2]) < 1e-3 * tol:
            break
        n = int(1.5 * n) + 10
        if n > 4 * max_terms:
            break
    big = np.flatnonzero(2 * np.abs(jk) >= tol)
    k_cut = int(big[-1]) + 1 if big.size else 1
    if k_cut > max_terms:
        raise PropagationError(
            f"Chebyshev order {k_cut} exceeds max_terms={max_terms}; use a smaller time step"
        )
    return jk[:k_cut]


def chebyshev_coefficients(dt: float, bounds: SpectralBounds, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Expansion coefficients including the global phase exp(-i c dt)."""
    x = bounds.half_width * dt
    jk = bessel_terms(x, tol)
    k = np.arange(jk.size)
    c = (2.0 - (k == 0)) * (-1j) ** k * jk
    return c * np.exp(-1j * bounds.center * dt)


def plan_step(dt: float, bounds: SpectralBounds, tol: float = DEFAULT_TOL) -> PropagationPlan:
    return PropagationPlan(dt, chebyshev_coefficients(dt, bounds, tol).size, tol)


class ChebyshevPropagator:
    """Stateful stepper for one Hamiltonian.

    Holds the CSR arrays in the dtypes the kernels expect, the spectral
    interval, and a small cache of coefficient arrays keyed by step size.
    """

    def __init__(self, h, tol: float = DEFAULT_TOL, bounds: SpectralBounds | None = None,
                 max_step_arg: float = MAX_STEP_ARG):
        h = sp.csr_matrix(h, dtype=complex)
        h.sort_indices()
        self.h = h
        self.indptr = np.ascontiguousarray(h.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(h.indices, dtype=np.int32)
        data = np.ascontiguousarray(h.data, dtype=np.complex128)
        # real Hamiltonians take the cheaper real-data kernel loop
        self.data = np.ascontiguousarray(data.real) if not np.any(data.imag) else data
        self.tol = tol
        self.bounds = bounds if bounds is not None else spectral_bounds(h)
        self.max_step_arg = max_step_arg
        self.rebounds = 0
        self.n_matvec = 0
        self._cache: OrderedDict[float, np.ndarray] = OrderedDict()

    @property
    def max_dt(self) -> float:
        return self.max_step_arg / self.bounds.half_width

    def coefficients(self, dt: float) -> np.ndarray:
        c = self._cache.get(dt)
        if c is None:
            c = chebyshev_coefficients(dt, self.bounds, self.tol)
            self._cache[dt] = c
            if len(self._cache) > 64:
                self._cache.popitem(last=False)
        return c

    def _series(self, psi, coeffs):
        self.n_matvec += max(coeffs.size - 1, 0)
        return kernels.chebyshev_series(
            self.indptr, self.indices, self.data, psi, coeffs,
            self.bounds.half_width, self.bounds.center,
        )

    def step(self, psi: np.ndarray, dt: float) -> np.ndarray:
        """exp(-i H dt) psi for a single step (no subdivision)."""
        psi = np.ascontiguousarray(psi, dtype=np.complex128)
        if dt == 0:
            return psi.copy()
        n0 = np.linalg.norm(psi)
        out = self._series(psi, self.coefficients(dt))
        if abs(np.linalg.norm(out) - n0) > NORM_GUARD * max(n0, 1.0):
            # spectrum leaked outside the interval: widen to Gershgorin and retry once
            log.warning("norm drift in Chebyshev step, re-bounding spectrum")
            self.rebounds += 1
            self.bounds = gershgorin_bounds(self.h)
            self._cache.clear()
            out = self._series(psi, self.coefficients(dt))
            if abs(np.linalg.norm(out) - n0) > NORM_GUARD * max(n0, 1.0):
                raise PropagationError("Chebyshev step not norm preserving after re-bounding")
        return out

    def evolve(self, psi: np.ndarray, t: float) -> np.ndarray:
        """exp(-i H t) psi, subdivided into equal steps no longer than ``max_dt``."""
        if t < 0:
            raise ValueError("negative propagation time")
        n_sub = max(1, int(np.ceil(t / self.max_dt - 1e-12)))
        dt = t / n_sub
        for _ in range(n_sub):
            psi = self.step(psi, dt)
        return psi


def chebyshev_step(h, psi: Ket, dt: float, tol: float = DEFAULT_TOL,
                   bounds: SpectralBounds | None = None) -> Ket:
    """Return exp(-i H dt) psi, subdividing dt when s*dt exceeds the per-step limit."""
    prop = ChebyshevPropagator(h, tol=tol, bounds=bounds)
    return psi.with_amps(prop.evolve(psi.amps, dt))


Observer = Callable[[float, Ket], "Mapping[str, float] | None"]


def propagate(h, psi0: Ket, times, observer: Observer | None = None, *, t0: float = 0.0,
              tol: float = DEFAULT_TOL, bounds: SpectralBounds | None = None,
              energy: bool = False, propagator: ChebyshevPropagator | None = None) -> TimeSeries:
    """Evolve ``psi0`` (given at ``t0``) and sample it at ascending ``times``.

    The observer is called with ``(t, ket)`` at every requested time and may
    return a mapping of channel values. ``norm`` (and ``energy`` when asked)
    channels are always added.
    """
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < t0 or np.any(np.diff(times) <= 0)):
        raise ValueError("sample times must be strictly increasing and not before t0")
    prop = propagator or ChebyshevPropagator(h, tol=tol, bounds=bounds)
    psi = np.ascontiguousarray(psi0.amps, dtype=np.complex128)
    t_cur = t0
    records, done = [], []
    for t in times:
        psi = prop.evolve(psi, t - t_cur)
        t_cur = t
        ket = psi0.with_amps(psi)
        rec = {"norm": float(np.linalg.norm(psi))}
        if energy:
            rec["energy"] = float(np.vdot(psi, prop.h @ psi).real)
        if observer is not None:
            try:
                extra = observer(t, ket)
            except Exception as exc:
                partial = TimeSeries.from_records(done, records, _meta(prop))
                raise PropagationAborted(f"observer failed at t={t}: {exc}", partial) from exc
            if extra:
                rec.update(extra)
        records.append(rec)
        done.append(t)
    ts = TimeSeries.from_records(done, records, _meta(prop))
    ts.final = psi0.with_amps(psi)
    return ts


def _meta(prop: ChebyshevPropagator) -> dict[str, str]:
    return {
        "propagator": "chebyshev",
        "kernel_backend": kernels.BACKEND,
        "threads": str(THREADS),
        "tol": repr(prop.tol),
        "e_min": repr(prop.bounds.e_min),
        "e_max": repr(prop.bounds.e_max),
        "rebounds": str(prop.rebounds),
    }
