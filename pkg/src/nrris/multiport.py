"""Two-port element algebra and non-reciprocal group composition.

Every RIS element is a reciprocal two-port: port 1 faces free space, port 2
is wired into a non-reciprocal device shared by the elements of a group.
Wave convention at the element/device boundary::

            a_ext -->  +---------+  b_int -->  +--------+
    free    b_ext <--  | element |  <-- a_int  | device |
    space              |  A B D  |             | S_dev  |
                       +---------+             +--------+

    b_ext = A a_ext + B a_int
    b_int = B a_ext + D a_int
    a_int = S_dev b_int

so the element's internal outgoing wave is the device's incident wave.
Eliminating the internal waves gives the group scattering matrix

    Phi = A + B (I - S_dev D)^{-1} S_dev B

with A, B, D diagonal over the group members.  The closed forms below are
special cases of this and are checked against it in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ResonantLoopError, SingularNetworkError

__all__ = [
    "TwoPortElement",
    "ImpedanceTwoPort",
    "DeviceScattering",
    "GroupScattering",
    "ISOLATOR",
    "GYRATOR",
    "CIRCULATOR",
    "z_to_s",
    "transmission_line_element",
    "compose_group_oracle",
    "compose_isolator_group",
    "compose_gyrator_group",
    "compose_circulator_group",
    "reactive_reflection",
    "terminated_circulator_group",
    "reactance_for_phase_difference",
    "passivity_margin",
    "is_unitary",
    "random_lossless_element",
    "random_passive_element",
]

# relative threshold on loop determinants
SINGULAR_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TwoPortElement:
    """Reciprocal element with scattering matrix ``[[A, B], [B, D]]``."""

    A: complex
    B: complex
    D: complex

    def __post_init__(self):
        for name in ("A", "B", "D"):
            object.__setattr__(self, name, complex(getattr(self, name)))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.A, self.B], [self.B, self.D]])

    @classmethod
    def from_matrix(cls, S) -> "TwoPortElement":
        S = np.asarray(S, dtype=complex)
        if S.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {S.shape}")
        if abs(S[0, 1] - S[1, 0]) > 1e-12 * max(1.0, abs(S[0, 1])):
            raise ValueError("element scattering matrix must be symmetric")
        return cls(S[0, 0], 0.5 * (S[0, 1] + S[1, 0]), S[1, 1])


@dataclass(frozen=True)
class ImpedanceTwoPort:
    """Symmetric 2x2 impedance matrix of one element, referenced to ``Z0``."""

    Z11: complex
    Z12: complex
    Z22: complex
    Z0: float = 376.730313668

    def __post_init__(self):
        if not self.Z0 > 0:
            raise ValueError(f"reference impedance must be positive, got {self.Z0}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.Z11, self.Z12], [self.Z12, self.Z22]], dtype=complex)


@dataclass(frozen=True)
class DeviceScattering:
    """Ideal non-reciprocal device used to interconnect a group."""

    kind: str
    S: np.ndarray

    @property
    def ports(self) -> int:
        return self.S.shape[0]


ISOLATOR = DeviceScattering("isolator", _frozen([[0, 0], [1, 0]]))
GYRATOR = DeviceScattering("gyrator", _frozen([[0, -1], [1, 0]]))
# circulation 3 -> 1 -> 2 -> 3; the reversed device is CIRCULATOR.S.T
CIRCULATOR = DeviceScattering("circulator", _frozen([[0, 0, 1], [1, 0, 0], [0, 1, 0]]))


@dataclass(frozen=True)
class GroupScattering:
    """Scattering matrix of one interconnected group, seen from free space."""

    S: np.ndarray
    group_kind: str = "custom"

    def __post_init__(self):
        S = np.asarray(self.S, dtype=complex)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError(f"group matrix must be square, got shape {S.shape}")
        object.__setattr__(self, "S", _frozen(S))

    @property
    def size(self) -> int:
        return self.S.shape[0]

    def is_reciprocal(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.S - self.S.T), initial=0.0) <= tol)


def z_to_s(Z: ImpedanceTwoPort, index: int | None = None) -> TwoPortElement:
    """Convert an element impedance matrix to scattering parameters.

    Computes ``(Z - I Z0)(Z + I Z0)^{-1}``.  ``index`` only labels the
    element in the error raised when ``Z + I Z0`` is singular.
    """
    Zm = Z.matrix
    eye = np.eye(2) * Z.Z0
    den = Zm + eye
    det = den[0, 0] * den[1, 1] - den[0, 1] * den[1, 0]
    scale = max(np.abs(den).max(), Z.Z0)
    if abs(det) <= SINGULAR_TOL * scale**2:
        where = "element" if index is None else f"element {index}"
        raise SingularNetworkError(f"{where}: Z + I*Z0 is singular (det={det:.3g})")
    # X Y^{-1} == solve(Y^T, X^T)^T; Y is symmetric here
    S = np.linalg.solve(den.T, (Zm - eye).T).T
    return TwoPortElement(S[0, 0], 0.5 * (S[0, 1] + S[1, 0]), S[1, 1])


def transmission_line_element(half_phase: float) -> TwoPortElement:
    """Matched lossless line with transmission coefficient ``exp(j*half_phase)``."""
    if not math.isfinite(half_phase):
        raise ValueError("line phase must be finite")
    return TwoPortElement(0.0, complex(math.cos(half_phase), math.sin(half_phase)), 0.0)


def _element_diagonals(elements: Sequence[TwoPortElement]):
    A = np.array([e.A for e in elements], dtype=complex)
    B = np.array([e.B for e in elements], dtype=complex)
    D = np.array([e.D for e in elements], dtype=complex)
    return A, B, D


def compose_group_oracle(elements: Sequence[TwoPortElement], device) -> GroupScattering:
    """General interconnection of ``elements`` through an arbitrary device.

    ``device`` is a :class:`DeviceScattering` or any square matrix whose
    size equals the number of elements.
    """
    if isinstance(device, DeviceScattering):
        S_dev, kind = np.asarray(device.S, dtype=complex), device.kind
    else:
        S_dev, kind = np.asarray(device, dtype=complex), "custom"
    n = len(elements)
    if S_dev.ndim != 2 or S_dev.shape != (n, n):
        raise ValueError(f"{n} elements cannot be wired to a device of shape {S_dev.shape}")
    A, B, D = _element_diagonals(elements)
    loop = np.eye(n) - S_dev * D[np.newaxis, :]
    if np.linalg.cond(loop) > 1.0 / SINGULAR_TOL:
        raise ResonantLoopError("I - S_dev D is singular: resonant internal loop")
    # rows scaled by B on the left, columns by B on the right
    inner = np.linalg.solve(loop, S_dev * B[np.newaxis, :])
    Phi = np.diag(A) + B[:, np.newaxis] * inner
    return GroupScattering(Phi, f"{kind}-oracle")


def compose_isolator_group(e1: TwoPortElement, e2: TwoPortElement) -> GroupScattering:
    return GroupScattering(
        np.array([[e1.A, 0.0], [e1.B * e2.B, e2.A]], dtype=complex), "isolator-pair"
    )


def _check_loop(delta: complex):
    if abs(delta) <= SINGULAR_TOL:
        raise ResonantLoopError(f"loop determinant {delta:.3g} is numerically zero")


def compose_gyrator_group(e1: TwoPortElement, e2: TwoPortElement) -> GroupScattering:
    delta = 1.0 + e1.D * e2.D
    _check_loop(delta)
    t = e1.B * e2.B / delta
    S = np.array(
        [
            [e1.A - e1.B**2 * e2.D / delta, -t],
            [t, e2.A - e2.B**2 * e1.D / delta],
        ]
    )
    return GroupScattering(S, "gyrator-pair")


def compose_circulator_group(
    e1: TwoPortElement, e2: TwoPortElement, e3: TwoPortElement
) -> GroupScattering:
    A1, B1, D1 = e1.A, e1.B, e1.D
    A2, B2, D2 = e2.A, e2.B, e2.D
    A3, B3, D3 = e3.A, e3.B, e3.D
    delta = 1.0 - D1 * D2 * D3
    _check_loop(delta)
    S = np.array(
        [
            [A1 + B1**2 * D2 * D3 / delta, B1 * B2 * D3 / delta, B1 * B3 / delta],
            [B1 * B2 / delta, A2 + B2**2 * D1 * D3 / delta, B2 * B3 * D1 / delta],
            [B1 * B3 * D2 / delta, B2 * B3 / delta, A3 + B3**2 * D1 * D2 / delta],
        ]
    )
    return GroupScattering(S, "circulator-triple")


def reactive_reflection(X3: float, Z0: float) -> complex:
    """Reflection coefficient ``(jX3 - Z0)/(jX3 + Z0)`` of a reactive load.

    ``X3 = +-inf`` is the open circuit (reflection 1).
    """
    if not Z0 > 0:
        raise ValueError(f"reference impedance must be positive, got {Z0}")
    if math.isinf(X3):
        return 1.0 + 0.0j
    if math.isnan(X3):
        raise ValueError("reactance must not be NaN")
    return (1j * X3 - Z0) / (1j * X3 + Z0)


def terminated_circulator_group(psi: float, X3: float, Z0: float = 376.730313668) -> GroupScattering:
    """Two-element group: circulator with port 3 ended in reactance ``X3``.

    Elements 1 and 2 are matched lines of half phase ``psi``; the result is
    ``[[0, D3 e^{j 2 psi}], [e^{j 2 psi}, 0]]``.
    """
    D3 = reactive_reflection(X3, Z0)
    b = transmission_line_element(psi).B
    t = b * b
    return GroupScattering(
        np.array([[0.0, D3 * t], [t, 0.0]], dtype=complex), "terminated-circulator-pair"
    )


def _wrap(x: float) -> float:
    return math.remainder(x, 2.0 * math.pi)


def reactance_for_phase_difference(target: float, Z0: float = 376.730313668) -> float:
    """Reactance ``X3`` giving ``arg(Phi12) - arg(Phi21) == target`` (mod 2 pi).

    The phase of the termination is ``pi - 2 atan(X3/Z0)``, which sweeps
    every angle except 0 as ``X3`` runs over the reals; a zero target maps
    to the open circuit, ``inf``.  The closed form seeds a bracketed root
    search on the exact complex reflection coefficient.
    """
    from scipy.optimize import brentq

    t = _wrap(float(target))
    if abs(t) < 1e-15:
        return math.inf
    # u = atan(X3/Z0) in (-pi/2, pi/2); termination phase = pi - 2u
    u0 = 0.5 * (math.pi - (t % (2.0 * math.pi)))
    rot = complex(math.cos(t), -math.sin(t))

    def err(u):
        return np.angle(reactive_reflection(Z0 * math.tan(u), Z0) * rot)

    half = math.pi / 2
    lo = max(u0 - 0.25, math.nextafter(-half, 0.0))
    hi = min(u0 + 0.25, math.nextafter(half, 0.0))
    f_lo, f_hi = err(lo), err(hi)
    if f_lo * f_hi < 0:
        u = brentq(err, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        # root within rounding of a clipped bracket end
        u = min((lo, u0, hi), key=lambda x: abs(err(x)))
    return Z0 * math.tan(u)


def passivity_margin(S) -> float:
    """Smallest eigenvalue of ``I - S^H S``; negative means power gain."""
    if isinstance(S, GroupScattering):
        S = S.S
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    G = np.eye(S.shape[0]) - S.conj().T @ S
    return float(np.linalg.eigvalsh(0.5 * (G + G.conj().T))[0])


def is_unitary(S, tol: float = 1e-10) -> bool:
    if isinstance(S, GroupScattering):
        S = S.S
    S = np.asarray(S, dtype=complex)
    return bool(np.max(np.abs(S.conj().T @ S - np.eye(S.shape[0]))) <= tol)


def _haar_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def random_lossless_element(rng: np.random.Generator) -> TwoPortElement:
    """Random element with symmetric unitary S (``Q Q^T`` for Haar ``Q``)."""
    Q = _haar_unitary(rng, 2)
    return TwoPortElement.from_matrix(Q @ Q.T)


def random_passive_element(rng: np.random.Generator) -> TwoPortElement:
    """Random lossy element: symmetric with spectral norm drawn in (0, 1)."""
    M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    M = M + M.T
    M *= rng.uniform(0.05, 0.999) / np.linalg.norm(M, 2)
    return TwoPortElement.from_matrix(M)
