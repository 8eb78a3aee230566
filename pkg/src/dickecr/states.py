"""Atomic and field coherent states, spin rotations and product kets."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .model import BasisIndex, build_spin_operators, two_j_of

#: Fock tail beyond mean + 8 sqrt(mean) carries less than 1e-12 weight.
TAIL_SIGMAS = 8.0


class CutoffError(ValueError):
    """Fock cutoff too small for the requested field state."""


@dataclass(frozen=True)
class Ket:
    """Pure state on the product basis, amplitudes in m-major / n-minor order."""

    basis: BasisIndex
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise ValueError(f"amplitude vector has shape {amps.shape}, basis needs ({self.basis.dim},)")
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitudes")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def matrix(self) -> np.ndarray:
        """Amplitudes as a (2j+1, n_max+1) array, rows indexed by m (descending)."""
        return self.amps.reshape(self.basis.spin_dim, self.basis.fock_dim)

    def with_amps(self, amps) -> "Ket":
        return Ket(self.basis, amps)


def _binomial_sqrt(two_j: int) -> np.ndarray:
    k = np.arange(two_j + 1)  # k = j - m
    return np.exp(0.5 * (gammaln(two_j + 1) - gammaln(k + 1) - gammaln(two_j - k + 1)))


def atomic_coherent(j: float, theta: float) -> np.ndarray:
    """Coefficients C(2j, j+m)^(1/2) cos(theta/2)^(j+m) sin(theta/2)^(j-m), m descending."""
    two_j = two_j_of(j)
    up = np.arange(two_j, -1, -1)  # j + m
    down = two_j - up  # j - m
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    with np.errstate(invalid="ignore"):
        vec = _binomial_sqrt(two_j) * np.power(c, up) * np.power(s, down)
    return vec.astype(complex)


def atomic_coherent_angles(j: float, theta, phi) -> np.ndarray:
    """Closed form of |theta, phi>: phase e^{i(j-m)phi} on the |theta> coefficients.

    Broadcasts over array-valued ``theta``/``phi``; the spin index is the last axis.
    This equals ``R(theta sin phi, theta cos phi)|j,j>`` exactly, which is what
    :func:`atomic_coherent_general` computes by exponentiation.
    """
    two_j = two_j_of(j)
    theta = np.asarray(theta, dtype=float)[..., None]
    phi = np.asarray(phi, dtype=float)[..., None]
    up = np.arange(two_j, -1, -1)
    down = two_j - up
    mag = _binomial_sqrt(two_j) * np.cos(theta / 2) ** up * np.sin(theta / 2) ** down
    return mag * np.exp(1j * down * phi)


@lru_cache(maxsize=32)
def _dense_jx_jy(two_j: int):
    s = build_spin_operators(two_j / 2)
    jx, jy = s["Jx"].toarray(), s["Jy"].toarray()
    jx.flags.writeable = False
    jy.flags.writeable = False
    return jx, jy


def spin_generator(j: float, a: float, b: float) -> np.ndarray:
    """Dense Hermitian generator ``a Jx - b Jy``."""
    jx, jy = _dense_jx_jy(two_j_of(j))
    return a * jx - b * jy


def rotation_operator(j: float, a: float, b: float) -> np.ndarray:
    """Dense unitary R(a, b) = exp[i (a Jx - b Jy)] on the spin space."""
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("rotation angles must be finite")
    w, v = np.linalg.eigh(spin_generator(j, a, b))
    return (v * np.exp(1j * w)) @ v.conj().T


def atomic_coherent_general(j: float, theta: float, phi: float) -> np.ndarray:
    """|theta, phi> = R(theta sin phi, theta cos phi) |j, j>."""
    two_j = two_j_of(j)
    top = np.zeros(two_j + 1, dtype=complex)
    top[0] = 1.0
    return rotation_operator(j, theta * np.sin(phi), theta * np.cos(phi)) @ top


def cutoff_ok(alpha: complex, n_max: int) -> bool:
    r = abs(alpha)
    return r * r + TAIL_SIGMAS * r <= n_max


def coherent_amplitudes(alpha, n_max: int) -> np.ndarray:
    """Normalized truncated coherent-state amplitudes, vectorized over ``alpha``.

    No cutoff check; the Fock index is the last axis.
    """
    alpha = np.asarray(alpha, dtype=complex)[..., None]
    n = np.arange(n_max + 1)
    r = np.abs(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(r)
        logmag = np.where(n == 0, 0.0, n * logr) - 0.5 * gammaln(n + 1)
    # shift by the largest log-magnitude before exponentiating
    logmag = logmag - np.max(logmag, axis=-1, keepdims=True)
    vec = np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
    return vec / np.linalg.norm(vec, axis=-1, keepdims=True)


def field_coherent(alpha: complex, n_max: int) -> np.ndarray:
    """Coherent state |alpha> on Fock levels 0..n_max, renormalized after truncation.

    Raises :class:`CutoffError` unless ``|alpha|^2 + 8|alpha| <= n_max``.
    """
    if not cutoff_ok(alpha, n_max):
        raise CutoffError(
            f"n_max={n_max} too small for alpha={alpha}: need |alpha|^2 + 8|alpha| <= n_max"
        )
    return coherent_amplitudes(alpha, n_max)


def product_state(spinvec, fockvec, basis: BasisIndex) -> Ket:
    spinvec = np.asarray(spinvec, dtype=complex)
    fockvec = np.asarray(fockvec, dtype=complex)
    if spinvec.shape != (basis.spin_dim,) or fockvec.shape != (basis.fock_dim,):
        raise ValueError(
            f"factor shapes {spinvec.shape}, {fockvec.shape} do not match basis "
            f"({basis.spin_dim},), ({basis.fock_dim},)"
        )
    return Ket(basis, np.kron(spinvec, fockvec))


def initial_state(basis: BasisIndex, theta0: float, alpha0: complex, phi0: float = 0.0) -> Ket:
    """Product of an atomic coherent state |theta0, phi0> and a field coherent state |alpha0>."""
    spin = atomic_coherent(basis.j, theta0) if phi0 == 0 else atomic_coherent_angles(basis.j, theta0, phi0)
    return product_state(spin, field_coherent(alpha0, basis.n_max), basis)


def align_phase(vec: np.ndarray) -> np.ndarray:
    """Copy of ``vec`` with the first non-negligible amplitude made real and positive."""
    vec = np.asarray(vec, dtype=complex)
    idx = np.flatnonzero(np.abs(vec) > 1e-12 * max(np.max(np.abs(vec)), 1e-300))
    if idx.size == 0:
        return vec.copy()
    z = vec[idx[0]]
    return vec * (abs(z) / z)


def fidelity(u, v) -> float:
    """|<u|v>|^2 for unit vectors."""
    return float(abs(np.vdot(u, v)) ** 2)
