import numpy as np
import pytest
from hypothesis import given, strategies as st

from dickecr.model import BasisIndex, build_spin_operators
from dickecr.obs import field_moments, spin_expectations
from dickecr.states import (
    CutoffError, Ket, align_phase, atomic_coherent, atomic_coherent_angles, atomic_coherent_general,
    field_coherent, fidelity, initial_state, product_state, rotation_operator,
)

spins = st.integers(min_value=1, max_value=16).map(lambda k: k / 2)
angles = st.floats(min_value=0.0, max_value=np.pi)


def test_poles():
    assert np.allclose(atomic_coherent(1.5, 0.0), [1, 0, 0, 0])
    assert np.allclose(atomic_coherent(1.5, np.pi), [0, 0, 0, 1], atol=1e-15)


@given(spins, angles)
def test_atomic_coherent_moments(j, theta):
    v = atomic_coherent(j, theta)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    s = build_spin_operators(j)
    jz = np.vdot(v, s["Jz"] @ v).real
    jx = np.vdot(v, s["Jx"] @ v).real
    assert jz == pytest.approx(j * np.cos(theta), abs=1e-10)
    assert jx == pytest.approx(j * np.sin(theta), abs=1e-10)


@given(spins, angles, st.floats(-np.pi, np.pi))
def test_general_state_moments(j, theta, phi):
    v = atomic_coherent_general(j, theta, phi)
    s = build_spin_operators(j)
    assert np.vdot(v, s["Jx"] @ v).real == pytest.approx(j * np.sin(theta) * np.cos(phi), abs=1e-9)
    assert np.vdot(v, s["Jy"] @ v).real == pytest.approx(j * np.sin(theta) * np.sin(phi), abs=1e-9)
    assert np.vdot(v, s["Jz"] @ v).real == pytest.approx(j * np.cos(theta), abs=1e-9)
    # closed form equals the exponentiated rotation, phase included
    assert np.allclose(atomic_coherent_angles(j, theta, phi), v, atol=1e-10)


@given(spins, angles)
def test_general_matches_real_state_at_zero_phi(j, theta):
    u = atomic_coherent_general(j, theta, 0.0)
    assert fidelity(u, atomic_coherent(j, theta)) == pytest.approx(1.0, abs=1e-10)


def test_align_phase():
    v = align_phase(np.array([0.0, 1j, 1.0]))
    assert v[1] == 1.0 and v[2] == -1j


@given(spins, st.floats(0, np.pi / 2), st.floats(0, np.pi / 2))
def test_rotation_composes_polar_angle(j, t1, t2):
    r = rotation_operator(j, 0.0, t2)
    assert fidelity(r @ atomic_coherent(j, t1), atomic_coherent(j, t1 + t2)) == pytest.approx(1.0, abs=1e-10)


@given(spins, st.floats(-3, 3), st.floats(-3, 3))
def test_rotation_unitary(j, a, b):
    r = rotation_operator(j, a, b)
    assert np.allclose(r @ r.conj().T, np.eye(r.shape[0]), atol=1e-12)


def test_rotation_rejects_nan():
    with pytest.raises(ValueError):
        rotation_operator(1, np.nan, 0.0)


def test_field_coherent_moments():
    v = field_coherent(5.0, 150)
    n = np.arange(151)
    assert np.sum(np.abs(v) ** 2 * n) == pytest.approx(25.0, abs=1e-9)
    a = np.sum(v[:-1].conj() * v[1:] * np.sqrt(n[1:]))
    assert a == pytest.approx(5.0, abs=1e-9)


def test_coherent_overlap():
    # |<alpha|beta>|^2 = exp(-|alpha - beta|^2)
    u, v = field_coherent(1.0, 60), field_coherent(-0.0 + 1.0j * 0 + 1.0 - np.sqrt(2), 60)
    assert fidelity(u, v) == pytest.approx(np.exp(-2.0), rel=1e-9)
    assert np.exp(-2.0) == pytest.approx(0.13534, abs=1e-5)


@given(st.complex_numbers(max_magnitude=4.0, allow_nan=False, allow_infinity=False))
def test_coherent_state_is_annihilation_eigenstate(alpha):
    v = field_coherent(alpha, 80)
    av = v[1:] * np.sqrt(np.arange(1, 81))
    assert np.allclose(av, alpha * v[:-1], atol=1e-9)


def test_cutoff_error():
    with pytest.raises(CutoffError):
        field_coherent(5.0, 50)


def test_initial_state_expectations():
    basis = BasisIndex(3, 200)
    psi = initial_state(basis, np.pi / 2, 5.0)
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    s = spin_expectations(psi)
    assert s["jx"] == pytest.approx(1.5, abs=1e-12)
    assert s["jz"] == pytest.approx(0.0, abs=1e-12)
    assert field_moments(psi)["a"] == pytest.approx(5.0, abs=1e-10)


def test_product_state_shape_check():
    basis = BasisIndex(1, 4)
    with pytest.raises(ValueError):
        product_state(np.ones(3), np.ones(5), basis)
    with pytest.raises(ValueError):
        Ket(basis, np.ones(3))


def test_ket_is_immutable():
    psi = initial_state(BasisIndex(1, 20), 0.3, 1.0)
    with pytest.raises(ValueError):
        psi.amps[0] = 0
