"""Second-order non-resonant perturbation theory for the Dicke model.

The coupled dynamics is approximated by U^+ exp(-i Heff t) U with a diagonal
effective Hamiltonian

    Heff = -delta Jz + omega a^+a - omega_E (2 a^+a + 1) Jz - omega_S Jz^2

and a unitary U generated by -(2 omega_S/lam)(a^+ - a) Jx - i (2 omega_E/lam)(a^+ + a) Jy.
Replacing field quadratures by their coherent-state values turns U into a spin
rotation, and the state becomes a sum over m of branches
psi_m(t) |sigma_m(t)> (x) |alpha_m(t)>.

All ratios such as 2 omega_S / lam are evaluated in the form lam*omega/(delta^2-omega^2)
so that lam = 0 is regular.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.special import ellipeinc

from .cheby import ChebyshevPropagator, SpectralBounds, gershgorin_bounds
from .model import (
    BasisIndex,
    GeneralizedParams,
    ModelParams,
    build_boson_operators,
    build_generalized_hamiltonian,
    build_spin_operators,
    freeze,
    two_j_of,
)
from .states import Ket, atomic_coherent, coherent_amplitudes, cutoff_ok, CutoffError, rotation_operator

VALIDITY_WARN = 0.1
VALIDITY_FAIL = 1.0


class ResonanceError(ValueError):
    """Perturbation theory requested at (or too close to) resonance."""


class ValidityError(ValueError):
    """Coupling too strong for the perturbative wave function."""


class ValidityWarning(UserWarning):
    pass


def _detuning(p: ModelParams) -> float:
    den = p.delta ** 2 - p.omega ** 2
    if den == 0 or abs(den) < 1e-14 * max(p.delta ** 2, p.omega ** 2):
        raise ResonanceError(f"resonant parameters delta={p.delta}, omega={p.omega}")
    return den


@dataclass(frozen=True)
class EffectiveFrequencies:
    omega_E: float
    omega_S: float
    T_E: float
    T_S: float
    delta_theta: float | None
    validity_ratio: float


def effective_frequencies(p: ModelParams, alpha0: complex = 0.0, theta0: float = 0.0) -> EffectiveFrequencies:
    """Entangling/squeezing frequencies and times, initial rotation angle and validity ratio.

    ``delta_theta`` is only defined for real ``alpha0`` (``None`` otherwise).
    ``theta0`` is accepted for interface symmetry; none of these quantities depend on it.
    """
    den = _detuning(p)
    w_e = p.lam ** 2 * p.delta / (2 * den)
    w_s = p.lam ** 2 * p.omega / (2 * den)
    t_e = math.pi / abs(w_e) if w_e else math.inf
    t_s = math.pi / abs(w_s) if w_s else math.inf
    alpha0 = complex(alpha0)
    dth = 2 * p.lam * p.delta * alpha0.real / den if alpha0.imag == 0 else None
    return EffectiveFrequencies(w_e, w_s, t_e, t_s, dth, p.lam * abs(alpha0) / abs(den))


def rotation_coefficients(p: ModelParams) -> tuple[float, float]:
    """(2 omega_S/lam, 2 omega_E/lam) = (lam omega, lam delta) / (delta^2 - omega^2)."""
    den = _detuning(p)
    return p.lam * p.omega / den, p.lam * p.delta / den


def second_order_energy(m: float, n: int, p: ModelParams) -> float:
    """E2_mn = lam^2/8 sum_{mu,nu=+-1} (j - mu m)(j + mu m + 1)(2n + nu + 1)/(mu delta - nu omega)."""
    _detuning(p)
    j = p.j
    if abs(m) > j + 1e-12 or n < 0:
        raise ValueError(f"(m, n) = ({m}, {n}) outside the basis")
    total = 0.0
    for mu in (1, -1):
        for nu in (1, -1):
            total += (j - mu * m) * (j + mu * m + 1) * (2 * n + nu + 1) / (mu * p.delta - nu * p.omega)
    return p.lam ** 2 / 8 * total


def unperturbed_energy(m: float, n: int, p: ModelParams) -> float:
    return -m * p.delta + n * p.omega


def effective_hamiltonian(p: ModelParams):
    """Diagonal Heff on the product basis (the constant term dropped)."""
    f = effective_frequencies(p)
    basis = p.basis
    m = basis.m_values()[:, None]
    n = np.arange(basis.fock_dim)[None, :]
    diag = -p.delta * m + p.omega * n - f.omega_E * (2 * n + 1) * m - f.omega_S * m ** 2
    return freeze(sp.diags(diag.ravel(), format="csr"))


def u_generator(p: ModelParams):
    """Hermitian K with U = exp(-i K).

    U = exp(G), G = -c_S (a^+ - a) Jx - i c_E (a^+ + a) Jy, so K = i G.
    """
    c_s, c_e = rotation_coefficients(p)
    s = build_spin_operators(p.j)
    b = build_boson_operators(p.n_max)
    g = -c_s * sp.kron(s["Jx"], b["adag"] - b["a"]) - 1j * c_e * sp.kron(s["Jy"], b["adag"] + b["a"])
    return freeze(1j * g)


def unitary_U_exact(p: ModelParams, psi: Ket, inverse: bool = False) -> Ket:
    """Apply U (or U^+) to ``psi`` via Chebyshev expansion of its Hermitian generator."""
    k = u_generator(p)
    if k.nnz == 0:
        return psi.with_amps(psi.amps.copy())
    gers = gershgorin_bounds(k)
    prop = ChebyshevPropagator(k, bounds=SpectralBounds(gers.e_min, gers.e_max))
    return psi.with_amps(prop.evolve(psi.amps, 1.0) if not inverse else _evolve_back(prop, psi.amps))


def _evolve_back(prop: ChebyshevPropagator, amps):
    # exp(+i K) = exp(-i (-K))
    neg = ChebyshevPropagator(-prop.h, bounds=SpectralBounds(-prop.bounds.e_max, -prop.bounds.e_min))
    return neg.evolve(amps, 1.0)


@dataclass
class PerturbativeBranch:
    m: float
    psi_m: complex
    alpha_m: complex
    sigma_m: np.ndarray


def check_validity(p: ModelParams, alpha0: complex) -> float:
    ratio = effective_frequencies(p, alpha0).validity_ratio
    if ratio > VALIDITY_FAIL:
        raise ValidityError(f"lam|alpha0|/|delta^2-omega^2| = {ratio:.3g} > {VALIDITY_FAIL}")
    if ratio > VALIDITY_WARN * (1 + 1e-9):
        warnings.warn(f"perturbative validity ratio {ratio:.3g} exceeds {VALIDITY_WARN}", ValidityWarning)
    if abs(alpha0) < 3:
        warnings.warn(f"|alpha0| = {abs(alpha0):.3g} < 3: scalar replacement of the field is poor",
                      ValidityWarning)
    return ratio


def initial_rotated_spin(p: ModelParams, theta0: float, alpha0: complex, phi0: float = 0.0) -> np.ndarray:
    """Spin factor of U[|theta0, phi0> (x) |alpha0>] in the scalar-replacement approximation.

    For real ``alpha0`` and phi0 = 0 this is |theta0 + delta_theta>.
    """
    from .states import atomic_coherent_angles

    c_s, c_e = rotation_coefficients(p)
    alpha0 = complex(alpha0)
    spin0 = atomic_coherent(p.j, theta0) if phi0 == 0 else atomic_coherent_angles(p.j, theta0, phi0)
    if alpha0.imag == 0 and phi0 == 0:
        return atomic_coherent(p.j, theta0 + 2 * c_e * alpha0.real)
    return rotation_operator(p.j, 2 * c_s * alpha0.imag, 2 * c_e * alpha0.real) @ spin0


def perturbative_branches(t: float, p: ModelParams, theta0: float, alpha0: complex,
                          phi0: float = 0.0, check: bool = True) -> list[PerturbativeBranch]:
    if check:
        check_validity(p, alpha0)
    f = effective_frequencies(p)
    c_s, c_e = rotation_coefficients(p)
    chi = initial_rotated_spin(p, theta0, alpha0, phi0)
    two_j = p.two_j
    d = two_j + 1
    out = []
    for i in range(d):
        m = (two_j - 2 * i) / 2
        alpha_m = complex(alpha0) * np.exp(-1j * t * (p.omega - 2 * m * f.omega_E))
        e_m = np.zeros(d, dtype=complex)
        e_m[i] = 1.0
        sigma = rotation_operator(p.j, -2 * c_s * alpha_m.imag, -2 * c_e * alpha_m.real) @ e_m
        phase = np.exp(1j * t * (m * (p.delta + f.omega_E) + m * m * f.omega_S))
        out.append(PerturbativeBranch(m, complex(phase * chi[i]), alpha_m, sigma))
    return out


def assemble_branches(branches: list[PerturbativeBranch], basis: BasisIndex) -> Ket:
    """Sum_m psi_m sigma_m (x) |alpha_m>, field states materialized on ``basis``'s Fock grid."""
    for br in branches:
        if not cutoff_ok(br.alpha_m, basis.n_max):
            raise CutoffError(f"alpha_m={br.alpha_m} too large for n_max={basis.n_max}")
    amps = np.zeros(basis.dim, dtype=complex)
    alphas = np.array([br.alpha_m for br in branches])
    fock = coherent_amplitudes(alphas, basis.n_max)
    for br, f in zip(branches, fock):
        amps += br.psi_m * np.kron(br.sigma_m, f)
    return Ket(basis, amps)


def perturbative_state(t: float, p: ModelParams, theta0: float, alpha0: complex, phi0: float = 0.0,
                       check: bool = True):
    """Branches of the perturbative wave function at time ``t`` and the assembled ket."""
    branches = perturbative_branches(t, p, theta0, alpha0, phi0, check=check)
    return branches, assemble_branches(branches, p.basis)


def coherent_overlap_angle(alpha0: complex, m: float, m_prime: float, t: float,
                           freqs: EffectiveFrequencies) -> float:
    """|<alpha_m|alpha_m'>| = exp(-|alpha0|^2 (1 - cos(2 pi (m - m') t/T_E)))."""
    if math.isinf(freqs.T_E):
        return 1.0
    d_alpha = 2 * math.pi * (m - m_prime) * t / freqs.T_E
    return math.exp(-abs(alpha0) ** 2 * (1 - math.cos(d_alpha)))


RABI_CARRIERS = ("dressed", "drive", "bare")


def _carrier_phase(t, p: ModelParams, alpha0: float, carrier: str):
    if carrier == "bare":
        return p.delta * t
    if carrier == "dressed":
        f = effective_frequencies(p)
        return (p.delta + f.omega_E * (2 * abs(alpha0) ** 2 + 1)) * t
    if carrier == "drive":
        # integral of |B(t)| = sqrt(delta^2 + (2 lam alpha0 cos omega t)^2)
        b2 = (2 * p.lam * abs(alpha0)) ** 2
        top = p.delta ** 2 + b2
        return math.copysign(math.sqrt(top), p.delta) / p.omega * ellipeinc(p.omega * t, b2 / top)
    raise ValueError(f"carrier must be one of {RABI_CARRIERS}")


def rabi_closed_form(t, p: ModelParams, theta0: float, alpha0: float,
                     carrier: str = "dressed") -> dict[str, np.ndarray]:
    """Short-time <Jz>, <Jx> of the product-form perturbative state (real alpha0).

    ``carrier`` sets the phase of the fast atomic precession:

    * ``"dressed"``: delta + omega_E (2|alpha0|^2 + 1), the precession frequency
      of the effective Hamiltonian at the mean photon number (quantum field);
    * ``"drive"``: the instantaneous field magnitude |B(t)| of the classical
      drive 2 lam alpha0 cos(omega t), integrated in closed form;
    * ``"bare"``: delta alone.

    The bare carrier drifts out of phase after t ~ 1/(omega_E |alpha0|^2),
    well inside one field period for the small-omega presets.
    """
    f = effective_frequencies(p, alpha0)
    t = np.asarray(t, dtype=float)
    dth = f.delta_theta
    th = theta0 + dth
    arg = dth * np.cos(p.omega * t)
    cdt = np.cos(_carrier_phase(t, p, alpha0, carrier))
    jz = p.j * (cdt * np.sin(arg) * np.sin(th) + np.cos(arg) * np.cos(th))
    jx = p.j * (cdt * np.cos(arg) * np.sin(th) - np.sin(arg) * np.cos(th))
    return {"jz": jz, "jx": jx}


def collapse_phase_expvals(t, p: ModelParams, theta0: float, alpha0: float) -> dict[str, np.ndarray]:
    """<Jz>, <Jx> deep in the collapse, where branch interference has died out."""
    f = effective_frequencies(p, alpha0)
    t = np.asarray(t, dtype=float)
    dth = f.delta_theta
    coeff = np.abs(atomic_coherent(p.j, theta0 + dth)) ** 2
    m = p.basis.m_values()
    xi = dth * np.cos(np.multiply.outer(t, p.omega - 2 * f.omega_E * m))
    return {"jz": np.sum(m * coeff * np.cos(xi), axis=-1), "jx": np.sum(m * coeff * np.sin(xi), axis=-1)}


def collapse_plateau(p: ModelParams, theta0: float, alpha0: float) -> float:
    """j cos(theta0 + delta_theta)."""
    return p.j * math.cos(theta0 + effective_frequencies(p, alpha0).delta_theta)


def cat_split_state(j: int, theta: float, check: bool = True) -> np.ndarray:
    """exp[-i (pi/2) Jz^2] |theta> for even integer j.

    With ``check`` the result is compared against (1/(1+i))|theta> + (1/(1-i))|-theta>
    and an AssertionError raised if the fidelity falls below 1 - 1e-10.
    """
    two_j = two_j_of(j)
    if two_j % 4:
        raise ValueError(f"cat splitting identity needs an even integer j, got j={j}")
    m = (two_j - 2 * np.arange(two_j + 1)) / 2
    theta_vec = atomic_coherent(j, theta)
    out = np.exp(-0.5j * np.pi * m ** 2) * theta_vec
    if check:
        ref = cat_superposition(j, theta)
        fid = abs(np.vdot(ref, out)) ** 2 / (np.vdot(ref, ref).real * np.vdot(out, out).real)
        if fid < 1 - 1e-10:
            raise AssertionError(f"cat splitting identity violated, fidelity {fid}")
    return out


def cat_superposition(j: int, theta: float) -> np.ndarray:
    return atomic_coherent(j, theta) / (1 + 1j) + atomic_coherent(j, -theta) / (1 - 1j)


@dataclass
class GeneralizedSecondOrder:
    T1: sp.csr_matrix
    T2: sp.csr_matrix
    H_eff: sp.csr_matrix
    entangling_coeff: float  # prefactor of (2 a^+a + 1) Jz
    squeezing_coeff: float  # prefactor of (J^2 - Jz^2)


def _check_generalized(gp: GeneralizedParams):
    if abs(gp.omega_z) == abs(gp.omega):
        raise ResonanceError("resonant generalized parameters |omega_z| = omega")
    if gp.omega_z == 0:
        raise ResonanceError("omega_z = 0 makes the second-order generator singular")
    if gp.omega == 0:
        raise ResonanceError("omega = 0 makes the second-order generator singular")


def generalized_second_order(gp: GeneralizedParams, j: float, n_max: int) -> GeneralizedSecondOrder:
    """Generators T1, T2 and the diagonal effective Hamiltonian for Dicke-type couplings."""
    _check_generalized(gp)
    w, big = gp.omega_z, gp.omega
    g, gb = gp.g, gp.g_bar
    s = build_spin_operators(j)
    b = build_boson_operators(n_max)
    k = sp.kron
    jp, jm, jz = s["Jplus"], s["Jminus"], s["Jz"]
    a, ad, num = b["a"], b["adag"], b["num"]
    i_s = sp.identity(jp.shape[0], format="csr")
    i_f = sp.identity(a.shape[0], format="csr")
    t1 = g / (w - big) * (k(jp, a) - k(jm, ad)) + gb / (w + big) * (k(jp, ad) - k(jm, a))
    pref = g * gb / (w * w - big * big)
    t2 = pref * ((big / (2 * w)) * k(jp @ jp - jm @ jm, i_f) + (w / big) * k(jz, ad @ ad - a @ a))
    den = w * w - big * big
    c_ent = (g * g * (w + big) + gb * gb * (w - big)) / den
    c_sq = (g * g * (w + big) - gb * gb * (w - big)) / den
    jj = j * (j + 1)
    h = (
        w * k(jz, i_f)
        + big * k(i_s, num)
        + c_ent * k(jz, 2 * num + i_f)
        + c_sq * k(jj * i_s - jz @ jz, i_f)
    )
    return GeneralizedSecondOrder(freeze(t1), freeze(t2), freeze(h), c_ent, c_sq)


#: Extra Fock levels used by :func:`residual_check` so the cutoff does not leak into the residual.
RESIDUAL_PAD = 8


def residual_check(gp: GeneralizedParams, j: float, n_max: int, pad: int = RESIDUAL_PAD) -> float:
    """||U^+ Heff U - H||_F / ||H||_F with U = exp(T1 + T2), on Fock levels 0..n_max.

    The operators are built with ``pad`` extra Fock levels and the residual is
    restricted to the physical block, so truncation of the ladder operators
    at the top level does not masquerade as a second-order error.
    """
    big_n = n_max + pad
    so = generalized_second_order(gp, j, big_n)
    h = build_generalized_hamiltonian(gp, j, big_n).toarray()
    u = sla.expm((so.T1 + so.T2).toarray())
    res = u.conj().T @ so.H_eff.toarray() @ u - h
    d_s = two_j_of(j) + 1
    keep = (np.arange(d_s)[:, None] * (big_n + 1) + np.arange(n_max + 1)[None, :]).ravel()
    res = res[np.ix_(keep, keep)]
    h = h[np.ix_(keep, keep)]
    return float(np.linalg.norm(res) / np.linalg.norm(h))
