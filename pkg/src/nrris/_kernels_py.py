"""Pure numpy implementation of the quartic beampattern kernels.

The response toward grid angle ``l`` is ``y_l = sum_n z_l^n u_n phi_n``:
``z_l`` is the per-element phasor of the observation steering vector and
``u`` the incident-side weights.  This backend materialises the dense
``L x N`` matrix ``C[l, n] = z_l^n u_n`` once and uses BLAS products.
"""

import numpy as np

NAME = "python"


def prepare(z, u):
    z = np.asarray(z, dtype=np.complex128)
    u = np.asarray(u, dtype=np.complex128)
    # exact phasors from the angle avoid drift in high powers
    C = np.exp(1j * np.outer(np.angle(z), np.arange(u.size))) * u
    return C


def form_values(C, phi):
    y = C @ phi
    return y.real * y.real + y.imag * y.imag


def _finish(C, y, q, P, alpha, grad, w):
    r = q - alpha * P
    wr = r if w is None else w * r
    if grad is not None:
        grad += ((wr * y).conj() @ C).conj()
    return float(wr @ r)


def residual_terms(C, P, phi, alpha, grad=None, w=None):
    """Weighted sum of squared residuals ``r_l = |y_l|^2 - alpha P_l``.

    ``w`` defaults to all ones.  When ``grad`` is given, ``C^H (w r y)`` is
    added to it in place.
    """
    y = C @ phi
    q = y.real * y.real + y.imag * y.imag
    return _finish(C, y, q, P, alpha, grad, w)


def profiled_terms(C, P, phi, grad=None, w=None):
    """As :func:`residual_terms` with ``alpha`` at its closed-form optimum."""
    y = C @ phi
    q = y.real * y.real + y.imag * y.imag
    wP = P if w is None else w * P
    alpha = float(wP @ q) / float(wP @ P)
    return _finish(C, y, q, P, alpha, grad, w), alpha
