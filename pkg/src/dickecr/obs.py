"""Observables of product-basis kets.

Everything here works on the (2j+1) x (n_max+1) amplitude matrix
``M[m, n]`` of a :class:`~dickecr.states.Ket`: reductions, entropy, field
moments, Schmidt decomposition and the two Husimi distributions. The peak and
envelope detectors used to make figure-level statements checkable live here
as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter

from .states import Ket, atomic_coherent_angles, coherent_amplitudes, cutoff_ok
from .timeseries import TimeSeries, fmt

__all__ = [
    "TimeSeries", "SchmidtDecomposition", "HusimiGrid", "expval", "reduced_atomic_density",
    "reduced_field_density", "entanglement_entropy", "field_variance", "field_moments", "schmidt",
    "field_husimi", "atomic_husimi", "find_peaks", "window_envelope", "truncation_weight",
]

EIG_FLOOR = 1e-14


class GridError(ValueError):
    """Husimi grid reaches outside the region the Fock cutoff can represent."""


def expval(op, psi: Ket, hermitian: bool = True):
    """<psi|op|psi>; for Hermitian ``op`` the (checked) real part is returned."""
    if op.shape != (psi.basis.dim, psi.basis.dim):
        raise ValueError(f"operator shape {op.shape} does not match ket dimension {psi.basis.dim}")
    val = complex(np.vdot(psi.amps, op @ psi.amps))
    if not hermitian:
        return val
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ValueError(f"expectation value of Hermitian operator has imaginary part {val.imag}")
    return val.real


def spin_expectations(psi: Ket) -> dict[str, float]:
    """<Jx>, <Jy>, <Jz> directly from the amplitude matrix."""
    mat = psi.matrix()
    j = psi.basis.j
    m = psi.basis.m_values()
    w = np.sum(np.abs(mat) ** 2, axis=1)
    jz = float(np.dot(m, w))
    # <J+> = sum_m sqrt(j(j+1) - m(m+1)) conj(M[m+1]) M[m]; row i-1 holds m+1
    lad = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jp = complex(np.sum(lad * np.sum(mat[:-1].conj() * mat[1:], axis=1)))
    return {"jx": jp.real, "jy": jp.imag, "jz": jz}


def reduced_atomic_density(psi: Ket) -> np.ndarray:
    mat = psi.matrix()
    return mat @ mat.conj().T


def reduced_field_density(psi: Ket) -> np.ndarray:
    mat = psi.matrix()
    return mat.T @ mat.conj()


def _entropy_of(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > EIG_FLOOR]
    return float(-np.sum(p * np.log(p)))


def entanglement_entropy(psi: Ket, side: str = "atom") -> float:
    """Von Neumann entropy of the reduced atomic (default) or field density matrix."""
    if side == "atom":
        rho = reduced_atomic_density(psi)
    elif side == "field":
        rho = reduced_field_density(psi)
    else:
        raise ValueError("side must be 'atom' or 'field'")
    return _entropy_of(np.linalg.eigvalsh(rho))


def field_moments(psi: Ket) -> dict[str, complex | float]:
    """<a>, <a^2> and <a^+ a> of the field."""
    mat = psi.matrix()
    n = np.arange(psi.basis.fock_dim)
    s1 = np.sqrt(n[1:])
    a1 = np.sum(mat[:, :-1].conj() * mat[:, 1:] * s1)
    s2 = np.sqrt(n[2:] * (n[2:] - 1))
    a2 = np.sum(mat[:, :-2].conj() * mat[:, 2:] * s2) if n.size > 2 else 0.0
    num = float(np.sum(np.abs(mat) ** 2 * n))
    return {"a": complex(a1), "a2": complex(a2), "num": num}


def field_variance(psi: Ket) -> float:
    """Delta_f = 1/2 (Var[a^+ + a] Var[i(a^+ - a)])^(1/2), Var A = <A^2> - <A>^2.

    Uses the untruncated commutator a a^+ = a^+ a + 1, valid while the Fock tail
    is empty.
    """
    mo = field_moments(psi)
    a, a2, num = mo["a"], mo["a2"], mo["num"]
    var_x = 2 * a2.real + 2 * num + 1 - (2 * a.real) ** 2
    var_p = -2 * a2.real + 2 * num + 1 - (2 * a.imag) ** 2
    return 0.5 * float(np.sqrt(max(var_x, 0.0) * max(var_p, 0.0)))


def truncation_weight(psi: Ket, fraction: float = 0.05) -> float:
    """Amplitude weight on the top ``fraction`` of Fock levels."""
    mat = psi.matrix()
    k = max(1, int(np.ceil(fraction * psi.basis.fock_dim)))
    return float(np.sum(np.abs(mat[:, -k:]) ** 2))


@dataclass
class SchmidtDecomposition:
    coefficients: np.ndarray  # descending weights p_k
    atomic_vectors: np.ndarray  # (K, 2j+1)
    field_vectors: np.ndarray  # (K, n_max+1)

    def reconstruct(self, basis) -> Ket:
        amps = sum(
            np.sqrt(p) * np.kron(a, f)
            for p, a, f in zip(self.coefficients, self.atomic_vectors, self.field_vectors)
        )
        return Ket(basis, amps)


def schmidt(psi: Ket, k_max: int | None = None) -> SchmidtDecomposition:
    """Schmidt decomposition via the (2j+1)-dimensional reduced atomic matrix.

    Field vectors are projections of the ket on the atomic eigenvectors. Each
    atomic vector is phased so its largest entry (first one on ties) is real
    positive.
    """
    mat = psi.matrix()
    w, v = np.linalg.eigh(mat @ mat.conj().T)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    keep = w > EIG_FLOOR
    w, v = w[keep], v[:, keep]
    if k_max is not None:
        w, v = w[:k_max], v[:, :k_max]
    atoms, fields = [], []
    for p, u in zip(w, v.T):
        lead = u[np.argmax(np.abs(u) > (1 - 1e-9) * np.max(np.abs(u)))]
        u = u * (abs(lead) / lead)
        atoms.append(u)
        fields.append((u.conj() @ mat) / np.sqrt(p))
    d_s, d_f = psi.basis.spin_dim, psi.basis.fock_dim
    return SchmidtDecomposition(
        np.asarray(w, dtype=float),
        np.asarray(atoms, dtype=complex).reshape(-1, d_s),
        np.asarray(fields, dtype=complex).reshape(-1, d_f),
    )


@dataclass
class HusimiGrid:
    """Q values on a rectangular grid; ``x`` indexes rows and ``y`` columns of ``values``.

    Field grids use x = Re alpha, y = Im alpha; atomic grids x = theta, y = phi.
    """

    kind: str
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    meta: dict[str, str] = field(default_factory=dict)

    def to_text(self) -> str:
        names = ("re_alpha", "im_alpha") if self.kind == "field" else ("theta", "phi")
        lines = [f"# kind = {self.kind}"]
        lines += [f"# {k} = {v}" for k, v in self.meta.items()]
        lines.append(f"# {names[0]}: {fmt(self.x[0])} {fmt(self.x[-1])} {self.x.size}")
        lines.append(f"# {names[1]}: {fmt(self.y[0])} {fmt(self.y[-1])} {self.y.size}")
        lines.append(f"# columns: {names[0]} {names[1]} q")
        for i, xv in enumerate(self.x):
            for k, yv in enumerate(self.y):
                lines.append(f"{fmt(xv)} {fmt(yv)} {fmt(self.values[i, k])}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_text())

    def peaks(self, rel_threshold: float = 0.2, min_sep: int = 3):
        periodic = self.kind == "atom" and _covers_circle(self.y)
        return find_peaks(self.values, rel_threshold, min_sep, wrap_cols=periodic)


def _covers_circle(phi) -> bool:
    if phi.size < 2:
        return False
    step = phi[1] - phi[0]
    return abs(phi[-1] + step - phi[0] - 2 * np.pi) < 1e-9


def field_grid(re_range=(-7.0, 7.0), im_range=(-7.0, 7.0), n_re: int = 141, n_im: int = 141):
    return np.linspace(*re_range, n_re), np.linspace(*im_range, n_im)


def atomic_grid(theta_max: float = np.pi / 2, n_theta: int = 91, n_phi: int = 180):
    """theta in [0, theta_max] (inclusive), phi in [0, 2 pi) (periodic)."""
    return np.linspace(0.0, theta_max, n_theta), np.arange(n_phi) * (2 * np.pi / n_phi)


def field_husimi(psi: Ket, re_axis, im_axis, meta=None) -> HusimiGrid:
    """Q_f(alpha) = sum_m |sum_n conj(<n|alpha>) M[m, n]|^2 over the grid."""
    re_axis, im_axis = np.asarray(re_axis, float), np.asarray(im_axis, float)
    n_max = psi.basis.n_max
    for r in (re_axis[0], re_axis[-1]):
        for i in (im_axis[0], im_axis[-1]):
            if not cutoff_ok(complex(r, i), n_max):
                raise GridError(f"grid corner {complex(r, i)} outside cutoff-valid region for n_max={n_max}")
    mat = psi.matrix()
    values = np.empty((re_axis.size, im_axis.size))
    for row, r in enumerate(re_axis):
        coh = coherent_amplitudes(r + 1j * im_axis, n_max)  # (n_im, n_max+1)
        proj = coh.conj() @ mat.T  # (n_im, 2j+1)
        values[row] = np.sum(np.abs(proj) ** 2, axis=1)
    return HusimiGrid("field", re_axis, im_axis, values, dict(meta or {}))


def atomic_husimi(psi: Ket, theta_axis, phi_axis, meta=None) -> HusimiGrid:
    """Q_a(theta, phi) = sum_n |sum_m conj(<m|theta,phi>) M[m, n]|^2 over the grid."""
    theta_axis, phi_axis = np.asarray(theta_axis, float), np.asarray(phi_axis, float)
    mat = psi.matrix()
    values = np.empty((theta_axis.size, phi_axis.size))
    for row, th in enumerate(theta_axis):
        coh = atomic_coherent_angles(psi.basis.j, np.full(phi_axis.size, th), phi_axis)
        proj = coh.conj() @ mat  # (n_phi, n_max+1)
        values[row] = np.sum(np.abs(proj) ** 2, axis=1)
    return HusimiGrid("atom", theta_axis, phi_axis, values, dict(meta or {}))


def find_peaks(values, rel_threshold: float = 0.2, min_sep: int = 3, wrap_cols: bool = False):
    """Local maxima above ``rel_threshold * max`` separated by more than ``min_sep`` cells.

    Returns a list of (row, col) index pairs sorted by descending value. With
    ``wrap_cols`` the column axis is treated as periodic.
    """
    values = np.asarray(values, dtype=float)
    size = 2 * min_sep + 1
    mode = ("nearest", "wrap") if wrap_cols else "nearest"
    local = maximum_filter(values, size=size, mode=mode)
    cand = np.argwhere((values >= local) & (values >= rel_threshold * values.max()))
    cand = sorted(map(tuple, cand), key=lambda rc: -values[rc])
    kept: list[tuple[int, int]] = []
    n_cols = values.shape[1]
    for r, c in cand:
        ok = True
        for kr, kc in kept:
            dc = abs(c - kc)
            if wrap_cols:
                dc = min(dc, n_cols - dc)
            if abs(r - kr) <= min_sep and dc <= min_sep:
                ok = False
                break
        if ok:
            kept.append((int(r), int(c)))
    return kept


def sphere_peaks(grid: HusimiGrid, rel_threshold: float = 0.2, min_sep: int = 3):
    """Peaks of an atomic Husimi grid with the poles treated as single points.

    A row at theta = 0 (or pi) is one point on the sphere, so a pole maximum
    only counts if it dominates every grid value within ``min_sep`` rows of
    the pole, across all phi; at most one peak is kept per pole.
    """
    raw = grid.peaks(rel_threshold, min_sep)
    th = grid.x
    dtheta = th[1] - th[0] if th.size > 1 else 0.0
    tol = 1e-9 + 0.5 * dtheta
    out, seen = [], set()
    for r, c in raw:
        pole = None
        if abs(th[r]) < tol:
            pole, rows = "north", slice(0, min_sep + 1)
        elif abs(th[r] - np.pi) < tol:
            pole, rows = "south", slice(th.size - min_sep - 1, th.size)
        if pole is not None:
            if pole in seen or grid.values[r, c] < grid.values[rows].max():
                continue
            seen.add(pole)
        out.append((r, c))
    return out


def window_envelope(values, window: int) -> float:
    """Amplitude max|v - mean(v)| of one window of samples."""
    v = np.asarray(values, dtype=float)
    if v.size != window:
        raise ValueError("sample count does not match window")
    return float(np.max(np.abs(v - v.mean())))
