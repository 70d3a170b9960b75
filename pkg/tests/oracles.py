"""Reference computations written independently of the package internals."""

import numpy as np


def wave_network(elements, S_dev):
    """Group scattering from a full linear solve over every wave in the network.

    Unknowns per column: ``b_ext (n), b_int (n), a_int (n)`` with

        b_ext = A a_ext + B a_int
        b_int = B a_ext + D a_int
        a_int = S_dev b_int
    """
    n = len(elements)
    A = np.diag([e.matrix[0, 0] for e in elements])
    B = np.diag([e.matrix[0, 1] for e in elements])
    D = np.diag([e.matrix[1, 1] for e in elements])
    I, Z = np.eye(n), np.zeros((n, n))
    S_dev = np.asarray(S_dev, dtype=complex)
    lhs = np.block([
        [I, Z, -B],
        [Z, I, -D],
        [Z, -S_dev, I],
    ]).astype(complex)
    rhs = np.vstack([A, B, np.zeros((n, n))]).astype(complex)
    x = np.linalg.solve(lhs, rhs)
    return x[:n]


def z_to_s_reference(Z, Z0):
    """``S = (Z + Z0 I)^{-1} (Z - Z0 I)``; equal to the right-division form for symmetric Z."""
    Z = np.asarray(Z, dtype=complex)
    I = np.eye(Z.shape[0])
    return np.linalg.inv(Z + Z0 * I) @ (Z - Z0 * I)


def dirichlet_power(N, d, theta0, grid):
    """Closed-form |sum_m exp(j m psi)|^2 for a uniform array steered to ``theta0``."""
    psi = 2 * np.pi * d * (np.sin(grid) - np.sin(theta0))
    half = psi / 2
    num = np.sin(N * half)
    den = np.sin(half)
    out = np.empty_like(psi)
    small = np.abs(den) < 1e-12
    out[~small] = (num[~small] / den[~small]) ** 2
    out[small] = float(N) ** 2
    return out


def islr_direct(power, lo, hi):
    """Sidelobe / mainlobe sum for inclusive index bounds, by explicit loops."""
    main = 0.0
    side = 0.0
    for i, p in enumerate(power):
        if lo <= i <= hi:
            main += p
        else:
            side += p
    return 10 * np.log10(side / main)


def dense_response(S, d, theta_in, theta_out):
    """``v(theta_out)^T S v(theta_in)`` by explicit double sum."""
    N = S.shape[0]
    total = 0.0 + 0.0j
    for m in range(N):
        vm = np.exp(-1j * m * 2 * np.pi * d * np.sin(theta_out))
        for n in range(N):
            if S[m, n] != 0:
                total += vm * S[m, n] * np.exp(-1j * n * 2 * np.pi * d * np.sin(theta_in))
    return total
