"""Pure-Python/NumPy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and same arithmetic order, so the two backends agree to
rounding. Used whenever the extension module is missing or
``DICKECR_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp


def chebyshev_series(indptr, indices, data, psi, coeffs, scale, shift):
    """Return sum_k coeffs[k] T_k((H - shift)/scale) psi for H given in CSR arrays."""
    n = psi.shape[0]
    h = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    inv = 1.0 / scale
    prev = np.array(psi, dtype=complex)
    out = coeffs[0] * prev
    if len(coeffs) == 1:
        return out
    cur = (h @ prev - shift * prev) * inv
    out += coeffs[1] * cur
    for c in coeffs[2:]:
        nxt = (h @ cur - shift * cur) * (2.0 * inv) - prev
        out += c * nxt
        prev, cur = cur, nxt
    return out


SMALL_ARG = 1e-5


def _start_order(x: float, n: int) -> int:
    top = max(x, float(n))
    s = int(top + 40.0 + 12.0 * top ** (1.0 / 3.0))
    return s + (s % 2)


def bessel_j_sequence(x: float, n: int) -> np.ndarray:
    """J_0(x) .. J_n(x) by downward (Miller) recurrence normalized with J_0 + 2 sum J_2k = 1."""
    ax = abs(float(x))
    res = np.zeros(n + 1)
    if ax < SMALL_ARG:
        # two-term power series; the recurrence would overflow at tiny x
        q, term = 0.25 * ax * ax, 1.0
        for k in range(n + 1):
            res[k] = term * (1.0 - q / (k + 1))
            term *= 0.5 * ax / (k + 1)
        return res
    big = 1e250
    bjp, bj, norm = 0.0, 1e-300, 0.0
    for k in range(_start_order(ax, n), 0, -1):
        bjm = (2.0 * k / ax) * bj - bjp
        bjp, bj = bj, bjm
        if k - 1 <= n:
            res[k - 1] = bj
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * bj
        if abs(bj) > big:
            bj /= big
            bjp /= big
            norm /= big
            res[min(n, k - 1):] /= big
    norm += bj
    return res / norm


def _spin_field_rhs(t, y, delta, omega, lam, a0r, a0i, driven):
    jx, jy, jz, ar, ai = y
    if driven:
        c, s = math.cos(omega * t), math.sin(omega * t)
        fr = a0r * c + a0i * s
        dar, dai = omega * ai, -omega * ar
    else:
        fr = ar
        dar, dai = omega * ai, -(omega * ar + lam * jx)
    bx = 2.0 * lam * fr
    return (delta * jy, -delta * jx - bx * jz, bx * jy, dar, dai)


def rk4_spin_field(y0, delta, omega, lam, a0r, a0i, driven, dt, n_steps, stride):
    """Fixed-step RK4 of the SCA or driven-atom equations; see the compiled version."""
    f = _spin_field_rhs
    y = tuple(float(v) for v in y0)
    out = np.empty((n_steps // stride + 1, 5))
    out[0] = y
    r = 1
    h2 = 0.5 * dt
    args = (delta, omega, lam, a0r, a0i, driven)
    for step in range(n_steps):
        t = step * dt
        k1 = f(t, y, *args)
        k2 = f(t + h2, tuple(a + h2 * b for a, b in zip(y, k1)), *args)
        k3 = f(t + h2, tuple(a + h2 * b for a, b in zip(y, k2)), *args)
        k4 = f(t + dt, tuple(a + dt * b for a, b in zip(y, k3)), *args)
        y = tuple(
            a + dt / 6.0 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)
        )
        if (step + 1) % stride == 0:
            out[r] = y
            r += 1
    return out
