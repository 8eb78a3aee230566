"""Hilbert-space basis, spin/boson operators and Dicke-type Hamiltonians.

The product basis is |j,m> (x) |n> with the spin index outermost ("m-major")
and the Fock index innermost. Within the spin factor the states are ordered by
descending m, so flat index ``(j - m) * (n_max + 1) + n``. Every operator in the
package follows this layout.

Operators are ``scipy.sparse.csr_matrix`` objects in canonical form: duplicate
triplets summed, column indices sorted within each row, and data arrays marked
read-only so they can be shared between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

SparseOperator = sp.csr_matrix

#: Largest product-space dimension the builders accept.
MAX_DIM = 2_000_000


class ModelError(ValueError):
    """Invalid model parameters."""


def two_j_of(j: float) -> int:
    """Return 2j as an integer, rejecting non half-integer spin lengths."""
    twice = 2 * Fraction(j).limit_denominator(64)
    if twice.denominator != 1 or twice < 0 or abs(float(twice) - 2 * j) > 1e-12:
        raise ModelError(f"spin length j={j!r} is not a non-negative half-integer")
    return int(twice)


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the Dicke Hamiltonian ``-delta Jz + lam (a^+ + a) Jx + omega a^+ a``."""

    delta: float
    omega: float
    lam: float
    j: float
    n_max: int

    def __post_init__(self):
        two_j_of(self.j)
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ModelError(f"n_max must be a non-negative integer, got {self.n_max!r}")
        if self.omega <= 0:
            raise ModelError("field frequency omega must be positive")
        if self.lam < 0:
            raise ModelError("coupling lam must be non-negative")

    @property
    def two_j(self) -> int:
        return two_j_of(self.j)

    @property
    def basis(self) -> "BasisIndex":
        return BasisIndex(self.two_j, int(self.n_max))


@dataclass(frozen=True)
class GeneralizedParams:
    """Parameters of ``omega_z Jz + omega a^+ a + g (a J+ + a^+ J-) + g_bar (a^+ J+ + a J-)``."""

    omega_z: float
    omega: float
    g: float
    g_bar: float

    @classmethod
    def from_dicke(cls, p: ModelParams) -> "GeneralizedParams":
        """Generalized parameters that reproduce the Dicke Hamiltonian of ``p``."""
        return cls(omega_z=-p.delta, omega=p.omega, g=p.lam / 2, g_bar=p.lam / 2)


@dataclass(frozen=True)
class BasisIndex:
    """Bijection between (m, n) pairs and flat indices of the product basis.

    ``m`` is handled as the integer ``two_m = 2m`` so half-integer spins never
    go through floating point comparisons.
    """

    two_j: int
    n_max: int

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def spin_dim(self) -> int:
        return self.two_j + 1

    @property
    def fock_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.spin_dim * self.fock_dim

    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in basis order (j, j-1, ..., -j)."""
        return (self.two_j - 2 * np.arange(self.spin_dim)) / 2

    def spin_position(self, two_m: int) -> int:
        if (self.two_j - two_m) % 2 or abs(two_m) > self.two_j:
            raise IndexError(f"2m={two_m} not in spin-{self.j} multiplet")
        return (self.two_j - two_m) // 2

    def index(self, two_m: int, n: int) -> int:
        if not 0 <= n <= self.n_max:
            raise IndexError(f"Fock level {n} outside 0..{self.n_max}")
        return self.spin_position(two_m) * self.fock_dim + n

    def unravel(self, k: int) -> tuple[int, int]:
        """Inverse of :meth:`index`: flat index to (2m, n)."""
        if not 0 <= k < self.dim:
            raise IndexError(k)
        i, n = divmod(k, self.fock_dim)
        return self.two_j - 2 * i, n


def assemble(rows, cols, vals, dim: int) -> SparseOperator:
    """Canonical CSR matrix from (row, col, value) triplets; coincident triplets are summed."""
    op = sp.coo_matrix(
        (np.asarray(vals, dtype=complex), (np.asarray(rows), np.asarray(cols))),
        shape=(dim, dim),
    ).tocsr()
    return freeze(op)


def freeze(op) -> SparseOperator:
    """Canonicalize a sparse matrix (summed duplicates, sorted indices, no explicit zeros)."""
    op = sp.csr_matrix(op, dtype=complex, copy=True)
    op.sum_duplicates()
    op.eliminate_zeros()
    op.sort_indices()
    for arr in (op.data, op.indices, op.indptr):
        arr.flags.writeable = False
    return op


def entries(op: SparseOperator) -> list[tuple[int, int, complex]]:
    """Triplet view of an operator in (row, col) order."""
    coo = op.tocoo()
    order = np.lexsort((coo.col, coo.row))
    return [(int(coo.row[k]), int(coo.col[k]), complex(coo.data[k])) for k in order]


def is_hermitian(op, atol: float = 1e-12) -> bool:
    diff = op - op.conj().T
    return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= atol


def _check_dim(dim: int):
    if dim > MAX_DIM:
        raise ModelError(f"Hilbert-space dimension {dim} exceeds MAX_DIM={MAX_DIM}")


def build_spin_operators(j: float) -> dict[str, SparseOperator]:
    """Angular-momentum matrices for spin ``j`` in the basis m = j, j-1, ..., -j.

    Returns a dict with keys ``Jx, Jy, Jz, Jplus, Jminus``.
    """
    two_j = two_j_of(j)
    d = two_j + 1
    m = (two_j - 2 * np.arange(d)) / 2
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1)); row i-1 holds m+1 when column i holds m
    cols = np.arange(1, d)
    rows = cols - 1
    jj = two_j / 2
    vals = np.sqrt(jj * (jj + 1) - m[cols] * (m[cols] + 1))
    jplus = assemble(rows, cols, vals, d)
    jminus = freeze(jplus.conj().T)
    return {
        "Jx": freeze((jplus + jminus) * 0.5),
        "Jy": freeze((jplus - jminus) * (-0.5j)),
        "Jz": assemble(np.arange(d), np.arange(d), m, d),
        "Jplus": jplus,
        "Jminus": jminus,
    }


def build_boson_operators(n_max: int) -> dict[str, SparseOperator]:
    """Truncated ladder operators ``a``, ``adag`` and ``num = adag a`` on levels 0..n_max."""
    if int(n_max) != n_max or n_max < 0:
        raise ModelError(f"n_max must be a non-negative integer, got {n_max!r}")
    n_max = int(n_max)
    d = n_max + 1
    n = np.arange(1, d)
    a = assemble(n - 1, n, np.sqrt(n), d)
    adag = freeze(a.conj().T)
    return {"a": a, "adag": adag, "num": freeze(adag @ a)}


def kron(spin_op, fock_op) -> SparseOperator:
    return freeze(sp.kron(spin_op, fock_op, format="csr"))


def product_operators(basis: BasisIndex) -> dict[str, SparseOperator]:
    """Spin and boson operators lifted to the product space."""
    _check_dim(basis.dim)
    s = build_spin_operators(basis.j)
    b = build_boson_operators(basis.n_max)
    i_s = sp.identity(basis.spin_dim, format="csr")
    i_f = sp.identity(basis.fock_dim, format="csr")
    out = {name: kron(op, i_f) for name, op in s.items()}
    out.update({name: kron(i_s, op) for name, op in b.items()})
    return out


def build_dicke_hamiltonian(p: ModelParams) -> SparseOperator:
    basis = p.basis
    _check_dim(basis.dim)
    s = build_spin_operators(p.j)
    b = build_boson_operators(p.n_max)
    i_s = sp.identity(basis.spin_dim, format="csr")
    i_f = sp.identity(basis.fock_dim, format="csr")
    h = (
        -p.delta * sp.kron(s["Jz"], i_f)
        + p.lam * sp.kron(s["Jx"], b["a"] + b["adag"])
        + p.omega * sp.kron(i_s, b["num"])
    )
    return freeze(h)


def build_generalized_hamiltonian(gp: GeneralizedParams, j: float, n_max: int) -> SparseOperator:
    basis = BasisIndex(two_j_of(j), int(n_max))
    _check_dim(basis.dim)
    s = build_spin_operators(j)
    b = build_boson_operators(n_max)
    i_s = sp.identity(basis.spin_dim, format="csr")
    i_f = sp.identity(basis.fock_dim, format="csr")
    k = sp.kron
    h = (
        gp.omega_z * k(s["Jz"], i_f)
        + gp.omega * k(i_s, b["num"])
        + gp.g * (k(s["Jplus"], b["a"]) + k(s["Jminus"], b["adag"]))
        + gp.g_bar * (k(s["Jplus"], b["adag"]) + k(s["Jminus"], b["a"]))
    )
    return freeze(h)


def unperturbed_energies(p: ModelParams) -> np.ndarray:
    """E0_mn = -m delta + n omega in basis order."""
    basis = p.basis
    m = basis.m_values()
    n = np.arange(basis.fock_dim)
    return (-p.delta * m[:, None] + p.omega * n[None, :]).ravel()
