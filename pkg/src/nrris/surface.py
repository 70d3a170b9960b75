"""Whole-surface scattering matrices and array responses.

Angles are radians, element spacing is in wavelengths, and the steering
vector of an ``M``-element ULA has entries ``exp(-j m 2 pi d sin(theta))``.

Reflect mode evaluates ``v(theta_out)^T Phi v(theta_in)``.  STAR mode feeds
the incident side with ``v(theta_in)`` and combines the exit side with
``v(theta_out)^H``, so an all-ones transmission profile passes a beam
straight through with its direction unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import ModeError
from .multiport import GroupScattering

__all__ = [
    "SurfaceScattering",
    "group_layout",
    "assemble_surface",
    "steering_vector",
    "steering_matrix",
    "reflect_response",
    "reflect_pattern",
    "star_closed_form",
    "star_response",
    "star_pattern",
]

MODES = ("reflect", "star")
PLACEMENTS = ("consecutive", "interleaved")


def group_layout(sizes: Sequence[int], placement: str = "consecutive") -> list[np.ndarray]:
    """ULA positions owned by each group.

    ``consecutive`` gives group k the next ``N_k`` positions; ``interleaved``
    (equal sizes only) gives group k positions ``k, k + K, k + 2K, ...``.
    """
    sizes = [int(s) for s in sizes]
    if placement == "consecutive":
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int)
        return [np.arange(s, s + n) for s, n in zip(starts, sizes)]
    if placement == "interleaved":
        if len(set(sizes)) > 1:
            raise ValueError("interleaved placement needs equal group sizes")
        K = len(sizes)
        return [k + K * np.arange(sizes[0]) for k in range(K)]
    raise ValueError(f"unknown placement {placement!r}; expected one of {PLACEMENTS}")


@dataclass(frozen=True)
class SurfaceScattering:
    """Overall N x N scattering matrix of a surface made of groups."""

    S: np.ndarray
    blocks: tuple = field(repr=False)
    mode: str = "reflect"
    spacing: float = 0.5
    placement: str = "consecutive"

    @property
    def N(self) -> int:
        return self.S.shape[0]

    def is_reciprocal(self, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.S - self.S.T)) <= tol)

    def layout(self) -> list[np.ndarray]:
        return group_layout([b.size for b in self.blocks], self.placement)


def _as_group(b) -> GroupScattering:
    return b if isinstance(b, GroupScattering) else GroupScattering(np.asarray(b))


def assemble_surface(
    blocks: Sequence,
    mode: str = "reflect",
    spacing: float = 0.5,
    placement: str = "consecutive",
) -> SurfaceScattering:
    """Place group matrices on the block diagonal of the surface matrix.

    In STAR mode every block must be 2x2: port 1 faces side 1, port 2 side 2,
    and block n is the n-th element pair.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    groups = tuple(_as_group(b) for b in blocks)
    if not groups:
        raise ValueError("a surface needs at least one group")
    if mode == "star":
        bad = [k for k, g in enumerate(groups) if g.size != 2]
        if bad:
            raise ModeError(f"star mode needs 2x2 blocks; blocks {bad} are not 2x2")
        placement = "consecutive"
    S = block_diag(*[g.S for g in groups]).astype(complex)
    if placement != "consecutive":
        order = np.concatenate(group_layout([g.size for g in groups], placement))
        P = np.empty_like(S)
        P[np.ix_(order, order)] = S
        S = P
    S.setflags(write=False)
    return SurfaceScattering(S, groups, mode, float(spacing), placement)


def _check_angle(theta):
    if np.any(np.abs(theta) > np.pi / 2 + 1e-12):
        raise ValueError("angles must lie in [-pi/2, pi/2]")


def steering_vector(M: int, d: float, theta: float) -> np.ndarray:
    if M < 1:
        raise ValueError("array needs at least one element")
    _check_angle(theta)
    return np.exp(-1j * np.arange(M) * (2 * np.pi * d * np.sin(theta)))


def steering_matrix(M: int, d: float, thetas) -> np.ndarray:
    """Rows are steering vectors for each angle in ``thetas`` (shape L x M)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    _check_angle(thetas)
    omega = 2 * np.pi * d * np.sin(thetas)
    return np.exp(-1j * np.outer(omega, np.arange(M)))


def _require(surface: SurfaceScattering, mode: str):
    if surface.mode != mode:
        raise ModeError(f"operation needs a {mode}-mode surface, got {surface.mode}")


def reflect_response(surface: SurfaceScattering, theta_in: float, theta_out: float) -> complex:
    _require(surface, "reflect")
    N, d = surface.N, surface.spacing
    return complex(
        steering_vector(N, d, theta_out) @ surface.S @ steering_vector(N, d, theta_in)
    )


def reflect_pattern(surface: SurfaceScattering, theta_in: float, grid) -> np.ndarray:
    """Complex reflect response toward every angle of ``grid``."""
    _require(surface, "reflect")
    N, d = surface.N, surface.spacing
    return steering_matrix(N, d, grid) @ (surface.S @ steering_vector(N, d, theta_in))


def star_closed_form(
    theta_i: float, theta_t: float, theta_i_ul: float, pairs: int, d: float = 0.5
) -> SurfaceScattering:
    """Decoupled STAR phase design.

    Side 1 -> 2 refracts a beam from ``theta_i`` toward ``theta_t``; side
    2 -> 1 refracts the uplink arriving from ``theta_t`` toward
    ``theta_i_ul``.  Pair ``n`` (0-based) carries
    ``Phi21 = exp(j 2 pi (sin theta_i - sin theta_t) n d)`` and
    ``Phi12 = exp(j 2 pi (sin theta_t - sin theta_i_ul) n d)``.
    """
    if pairs < 1:
        raise ValueError("need at least one element pair")
    for a in (theta_i, theta_t, theta_i_ul):
        if not abs(a) < np.pi / 2:
            raise ValueError("STAR angles must lie in (-pi/2, pi/2)")
    n = np.arange(pairs)
    dl = np.exp(1j * 2 * np.pi * (np.sin(theta_i) - np.sin(theta_t)) * n * d)
    ul = np.exp(1j * 2 * np.pi * (np.sin(theta_t) - np.sin(theta_i_ul)) * n * d)
    blocks = [np.array([[0.0, u], [t, 0.0]]) for t, u in zip(dl, ul)]
    return assemble_surface(blocks, "star", d)


def _star_coefficients(surface: SurfaceScattering, side: str) -> np.ndarray:
    _require(surface, "star")
    if side == "1->2":
        return surface.S[1::2, 0::2].diagonal().copy()
    if side == "2->1":
        return surface.S[0::2, 1::2].diagonal().copy()
    raise ValueError(f"side must be '1->2' or '2->1', got {side!r}")


def star_response(surface: SurfaceScattering, side: str, theta_in: float, theta_out: float) -> complex:
    t = _star_coefficients(surface, side)
    M, d = t.size, surface.spacing
    return complex(
        steering_vector(M, d, theta_out).conj() @ (t * steering_vector(M, d, theta_in))
    )


def star_pattern(surface: SurfaceScattering, side: str, theta_in: float, grid) -> np.ndarray:
    t = _star_coefficients(surface, side)
    M, d = t.size, surface.spacing
    return steering_matrix(M, d, grid).conj() @ (t * steering_vector(M, d, theta_in))
