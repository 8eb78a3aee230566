import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dickecr.cheby import propagate
from dickecr.model import ModelParams, build_dicke_hamiltonian
from dickecr.obs import field_moments, spin_expectations
from dickecr.pert import rabi_closed_form
from dickecr.sca import (
    ClassicalState, IntegrationError, default_dt, driven_rhs, driven_system, integrate, sample,
    sca_rhs, sca_system, trajectory,
)
from dickecr.states import initial_state

FIG9 = ModelParams(1.0, 0.01, 0.02, 0.5, 100)
vec3 = st.tuples(*[st.floats(-2, 2)] * 3)


@given(vec3, st.floats(0, 50))
def test_free_precession(J, t):
    p = ModelParams(1.3, 0.1, 0.0, 1, 10)
    s0 = ClassicalState(J, 0.0)
    ts = trajectory(p, s0, max(t, 1e-3), "driven", dt=0.005)
    tt = ts.times[-1]
    jx = J[0] * math.cos(p.delta * tt) + J[1] * math.sin(p.delta * tt)
    assert ts["jx"][-1] == pytest.approx(jx, abs=1e-8)
    assert ts["jz"][-1] == pytest.approx(J[2], abs=1e-12)


def test_parallel_field_gives_zero_derivative():
    p = ModelParams(1.0, 0.1, 0.3, 1, 10)
    # B(0) = (2 lam alpha0, 0, -delta)
    b = np.array([2 * p.lam * 1.5, 0.0, -p.delta])
    assert np.allclose(driven_rhs(0.0, 0.7 * b, p, 1.5), 0.0)
    d = sca_rhs(ClassicalState(tuple(0.7 * b), 1.5), p)
    assert np.allclose(d.J, 0.0)


def test_precession_sense_matches_quantum():
    p = ModelParams(1.0, 0.1, 0.0, 0.5, 12)
    times = np.linspace(0.3, 6.0, 20)
    h = build_dicke_hamiltonian(p)
    psi = initial_state(p.basis, 1.1, 0.5)
    q = propagate(h, psi, times, lambda t, k: spin_expectations(k))
    c = sample(p, ClassicalState.coherent(0.5, 1.1, 0.5), times, "sca")
    for k in ("jx", "jy", "jz"):
        assert np.allclose(q[k], c[k], atol=1e-9)


def test_sca_field_matches_quantum_when_decoupled():
    p = ModelParams(1.0, 0.1, 0.0, 0.5, 40)
    ts = trajectory(p, ClassicalState.coherent(0.5, 1.0, 2.0), 1000 * 2 * math.pi / p.omega, "sca")
    amp = np.hypot(ts["alpha_re"], ts["alpha_im"])
    assert np.max(np.abs(amp - 2.0)) < 1e-10


def test_spin_length_drift_fig9():
    s0 = ClassicalState.coherent(0.5, math.pi / 2, 5.0)
    t_max = 20 * 2 * math.pi / FIG9.omega
    for method in ("sca", "driven"):
        ts = trajectory(FIG9, s0, t_max, method, stride=100)
        assert np.max(np.abs(ts["spin_drift"])) / t_max < 1e-9


def test_rk4_fourth_order():
    s0 = ClassicalState.coherent(0.5, math.pi / 2, 5.0)
    t_max = 20.0
    ends = [trajectory(FIG9, s0, t_max, "sca", dt=h)["jz"][-1] for h in (0.05, 0.025, 0.0125)]
    ratio = (ends[0] - ends[1]) / (ends[1] - ends[2])
    assert ratio == pytest.approx(16, rel=0.15)
    assert abs(ends[1] - ends[2]) < 1e-8


@pytest.mark.parametrize("method", ["sca", "driven"])
def test_kernel_matches_generic_integrator(method):
    s0 = ClassicalState.coherent(0.5, 1.0, 3.0 + 1.0j)
    rhs = sca_system(FIG9) if method == "sca" else driven_system(FIG9, s0.alpha)
    a = integrate(rhs, s0, 50.0, 0.05, stride=10)
    b = trajectory(FIG9, s0, 50.0, method, dt=0.05, stride=10)
    assert np.allclose(a.times, b.times)
    for k in ("jx", "jy", "jz", "alpha_re", "alpha_im"):
        assert np.allclose(a[k], b[k], atol=1e-12)


def test_sample_matches_trajectory():
    s0 = ClassicalState.coherent(0.5, 1.0, 3.0)
    for method in ("sca", "driven"):
        traj = trajectory(FIG9, s0, 100.0, method, dt=0.05, stride=100)
        smp = sample(FIG9, s0, traj.times, method, dt=0.05)
        assert np.allclose(smp["jz"], traj["jz"], atol=1e-11)
        assert np.allclose(smp["alpha_re"], traj["alpha_re"], atol=1e-11)


def test_classical_field_limit():
    s0 = ClassicalState.coherent(0.5, math.pi / 2, 5.0)
    t_max = 300.0
    drv = trajectory(FIG9, s0, t_max, "driven", stride=50)
    errs = []
    for k in (4, 8):
        pk = ModelParams(FIG9.delta, FIG9.omega, FIG9.lam / k, FIG9.j, FIG9.n_max)
        sca = trajectory(pk, ClassicalState.coherent(0.5, math.pi / 2, 5.0 * k), t_max, "sca", stride=50)
        errs.append(max(np.max(np.abs(sca[c] - drv[c])) for c in ("jx", "jy", "jz")))
    assert errs[0] < 1e-3 * FIG9.j
    # the back-reaction error falls off as 1/k^2
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)


def test_driven_matches_rabi_form_short_times():
    tf = 2 * math.pi / FIG9.omega
    times = np.linspace(0, 2 * tf, 4001)
    drv = sample(FIG9, ClassicalState.coherent(0.5, math.pi / 2, 5.0), times, "driven")
    cf = rabi_closed_form(times, FIG9, math.pi / 2, 5.0, carrier="drive")["jz"]
    assert np.max(np.abs(drv["jz"] - cf)) < 0.02 * FIG9.j


def test_nan_detection():
    def bad(t, s):
        return ClassicalState((math.nan, 0.0, 0.0), 0.0)

    with pytest.raises(IntegrationError):
        integrate(bad, ClassicalState((1, 0, 0), 0.0), 1.0, 0.1)


def test_argument_checks():
    s0 = ClassicalState((1, 0, 0), 0.0)
    with pytest.raises(ValueError):
        integrate(sca_system(FIG9), s0, 1.0, 0.0)
    with pytest.raises(ValueError):
        trajectory(FIG9, s0, 1.0, "quantum")
    with pytest.raises(ValueError):
        sample(FIG9, s0, [0.0, 2.0, 1.0])


def test_default_step():
    assert default_dt(FIG9) == pytest.approx(2 * math.pi / 200)
    assert default_dt(ModelParams(1.0, 20.0, 0.5, 1, 10)) == pytest.approx(2 * math.pi / 20 / 200)


def test_sca_conserves_classical_energy():
    # H = omega |alpha|^2 + 2 lam Re(alpha) Jx - delta Jz generates the SCA flow
    p = FIG9
    ts = trajectory(p, ClassicalState.coherent(0.5, math.pi / 2, 5.0), 5000.0, "sca", stride=100)
    e = p.omega * (ts["alpha_re"] ** 2 + ts["alpha_im"] ** 2) + 2 * p.lam * ts["alpha_re"] * ts["jx"] - p.delta * ts["jz"]
    assert np.ptp(e) < 1e-10
