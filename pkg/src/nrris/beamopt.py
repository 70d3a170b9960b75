"""Beampattern-matching design of non-reciprocal reflect-mode surfaces.

Every surface considered here has exactly one unit-modulus entry per row,
``Phi[i, sigma(i)] = phi_i``, so ``Phi = diag(phi) Lambda`` with ``Lambda``
a permutation fixed by the group structure:

* ``two-element``: anti-diagonal 2x2 blocks ``[[0, A_k], [B_k, 0]]``
  (circulator pairs with a reactive third port), ``phi = [A_1, B_1, ...]``;
* ``three-element``: circulator triples with matched lines, block entries
  at (1,3), (2,1), (3,2) in that row order.

The response toward ``theta_l`` for incidence ``theta_in`` is linear in
``phi``, ``x_l = c_l^T phi`` with ``c_l = v(theta_l) * (Lambda v(theta_in))``,
so ``|x_l|^2 = phi^H A_l phi`` with the rank-one ``A_l = w_l w_l^H`` and
``w_l = conj(c_l)``.  The design minimises the quartic mismatch between
those powers and scaled target patterns over the torus ``|phi_i| = 1``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend
from .multiport import (
    GroupScattering,
    compose_circulator_group,
    reactance_for_phase_difference,
    terminated_circulator_group,
    transmission_line_element,
)
from .surface import SurfaceScattering, assemble_surface, group_layout, steering_vector

__all__ = [
    "STRUCTURES",
    "BeamSpec",
    "FormSide",
    "QuadraticFormSet",
    "OptimizerTrace",
    "row_permutation",
    "build_quadratic_forms",
    "surface_from_phases",
    "optimal_scaling",
    "objective",
    "riemannian_gradient",
    "optimize",
    "phases_to_group_params",
    "realize_groups",
    "TerminatedPair",
    "CirculatorTriple",
]

# column of the nonzero entry in each row of one block
STRUCTURES = {
    "two-element": (1, 0),
    "three-element": (2, 0, 1),
}


def _group_size(structure: str) -> int:
    try:
        return len(STRUCTURES[structure])
    except KeyError:
        raise ValueError(
            f"unknown group structure {structure!r}; expected one of {sorted(STRUCTURES)}"
        ) from None


def _check_N(N: int, structure: str):
    g = _group_size(structure)
    if N < g or N % g:
        raise ValueError(f"N={N} is not a positive multiple of {g} for {structure} groups")


def row_permutation(N: int, structure: str, placement: str = "consecutive") -> np.ndarray:
    """``sigma`` with ``Phi[i, sigma[i]]`` the only nonzero entry of row ``i``."""
    _check_N(N, structure)
    local = STRUCTURES[structure]
    g = len(local)
    sigma = np.empty(N, dtype=int)
    for pos in group_layout([g] * (N // g), placement):
        sigma[pos] = pos[list(local)]
    return sigma


@dataclass(frozen=True)
class BeamSpec:
    """Desired downlink and uplink power patterns on an angle grid.

    Downlink arrives from ``theta_b``, uplink from ``theta_u``; ``p_dl`` and
    ``p_ul`` are linear-power targets at each ``grid`` angle.  ``w_dl`` and
    ``w_ul`` weight the squared mismatch per angle and default to ones,
    which gives the plain unweighted objective.
    """

    theta_b: float
    theta_u: float
    grid: np.ndarray
    p_dl: np.ndarray
    p_ul: np.ndarray
    structure: str = "three-element"
    w_dl: np.ndarray | None = None
    w_ul: np.ndarray | None = None

    def __post_init__(self):
        grid = np.atleast_1d(np.asarray(self.grid, dtype=float))
        p_dl = np.atleast_1d(np.asarray(self.p_dl, dtype=float))
        p_ul = np.atleast_1d(np.asarray(self.p_ul, dtype=float))
        if grid.size < 1:
            raise ValueError("angle grid is empty")
        if p_dl.shape != grid.shape or p_ul.shape != grid.shape:
            raise ValueError("target patterns must match the grid length")
        for name, p in (("p_dl", p_dl), ("p_ul", p_ul)):
            if np.any(p < 0) or not np.any(p > 0):
                raise ValueError(f"{name} must be nonnegative and not all zero")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("angle grid must be strictly increasing")
        weights = []
        for name, w in (("w_dl", self.w_dl), ("w_ul", self.w_ul)):
            w = np.ones(grid.size) if w is None else np.atleast_1d(np.asarray(w, dtype=float))
            if w.shape != grid.shape or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError(f"{name} must be finite, nonnegative and match the grid")
            weights.append(w)
        for name, p, w in (("p_dl", p_dl, weights[0]), ("p_ul", p_ul, weights[1])):
            if not np.any(w * p > 0):
                raise ValueError(f"{name} has no weighted support")
        _group_size(self.structure)
        object.__setattr__(self, "w_dl", weights[0])
        object.__setattr__(self, "w_ul", weights[1])
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "p_dl", p_dl)
        object.__setattr__(self, "p_ul", p_ul)

    @property
    def L(self) -> int:
        return self.grid.size

    @classmethod
    def box(
        cls,
        theta_b: float,
        theta_u: float,
        dl_target: float,
        ul_target: float,
        grid=None,
        halfwidth: float = math.radians(2.0),
        structure: str = "three-element",
        sidelobe_weight=1.0,
        null_weight: float = 1.0,
        null_halfwidth: float = math.radians(1.0),
    ) -> "BeamSpec":
        """Unit targets within ``halfwidth`` of each steering angle, zero elsewhere.

        Parameters
        ----------
        sidelobe_weight : float or (float, float)
            Weight on zero-target angles of the downlink and uplink patterns.
        null_weight : float
            Uplink weight within ``null_halfwidth`` of ``theta_b``, where a
            reciprocal surface would send the uplink back.  Overrides the
            sidelobe weight there.
        """
        if grid is None:
            grid = np.radians(np.round(np.arange(-900, 901) * 0.1, 10))
        grid = np.asarray(grid, dtype=float)
        tol = 1e-9
        p_dl = (np.abs(grid - dl_target) <= halfwidth + tol).astype(float)
        p_ul = (np.abs(grid - ul_target) <= halfwidth + tol).astype(float)
        if not p_dl.any():
            p_dl[np.argmin(np.abs(grid - dl_target))] = 1.0
        if not p_ul.any():
            p_ul[np.argmin(np.abs(grid - ul_target))] = 1.0
        sl_dl, sl_ul = np.broadcast_to(np.asarray(sidelobe_weight, dtype=float), (2,))
        w_dl = np.where(p_dl > 0, 1.0, sl_dl)
        w_ul = np.where(p_ul > 0, 1.0, sl_ul)
        near = (np.abs(grid - theta_b) <= null_halfwidth + tol) & (p_ul == 0)
        w_ul[near] = null_weight
        return cls(theta_b, theta_u, grid, p_dl, p_ul, structure, w_dl, w_ul)


class FormSide:
    """Rank-one quadratic forms for one incidence direction.

    Stores the grid phasors ``z_l = exp(-j 2 pi d sin(theta_l))`` and the
    incident-side weights ``u = Lambda v(theta_in)``; ``c_l[n] = z_l^n u_n``.
    """

    def __init__(self, z: np.ndarray, u: np.ndarray, backend=None):
        self.z = np.asarray(z, dtype=complex)
        self.u = np.asarray(u, dtype=complex)
        self.kernels = _backend.load(backend) if isinstance(backend, str) or backend is None else backend
        self._handle = None

    @property
    def L(self) -> int:
        return self.z.size

    @property
    def N(self) -> int:
        return self.u.size

    @property
    def handle(self):
        if self._handle is None:
            self._handle = self.kernels.prepare(self.z, self.u)
        return self._handle

    @property
    def C(self) -> np.ndarray:
        n = np.arange(self.N)
        return np.exp(1j * np.outer(np.angle(self.z), n)) * self.u

    @property
    def W(self) -> np.ndarray:
        """Generating vectors ``w_l`` as rows (``A_l = w_l w_l^H``)."""
        return self.C.conj()

    def matrix(self, l: int) -> np.ndarray:
        w = self.W[l]
        return np.outer(w, w.conj())

    def matrices(self) -> np.ndarray:
        W = self.W
        return W[:, :, None] * W.conj()[:, None, :]

    def values(self, phi) -> np.ndarray:
        return self.kernels.form_values(self.handle, np.asarray(phi, dtype=complex))


@dataclass
class QuadraticFormSet:
    dl: FormSide
    ul: FormSide
    sigma: np.ndarray
    structure: str
    spacing: float
    placement: str = "consecutive"

    @property
    def N(self) -> int:
        return self.sigma.size

    @property
    def L(self) -> int:
        return self.dl.L

    @property
    def A_B(self) -> np.ndarray:
        return self.dl.matrices()

    @property
    def A_U(self) -> np.ndarray:
        return self.ul.matrices()

    @property
    def w_B(self) -> np.ndarray:
        return self.dl.W

    @property
    def w_U(self) -> np.ndarray:
        return self.ul.W


def build_quadratic_forms(
    spec: BeamSpec,
    N: int,
    d: float = 0.5,
    placement: str = "consecutive",
    backend=None,
) -> QuadraticFormSet:
    sigma = row_permutation(N, spec.structure, placement)
    z = np.exp(-1j * 2 * np.pi * d * np.sin(spec.grid))
    u_b = steering_vector(N, d, spec.theta_b)[sigma]
    u_u = steering_vector(N, d, spec.theta_u)[sigma]
    return QuadraticFormSet(
        FormSide(z, u_b, backend), FormSide(z, u_u, backend), sigma, spec.structure, d, placement
    )


def surface_from_phases(
    phi, structure: str, d: float = 0.5, placement: str = "consecutive"
) -> SurfaceScattering:
    """Reflect-mode surface ``diag(phi) Lambda`` for the given group structure."""
    phi = np.asarray(phi, dtype=complex)
    N = phi.size
    local = STRUCTURES[structure]
    g = len(local)
    _check_N(N, structure)
    blocks = []
    for pos in group_layout([g] * (N // g), placement):
        B = np.zeros((g, g), dtype=complex)
        B[np.arange(g), list(local)] = phi[pos]
        blocks.append(GroupScattering(B, structure))
    return assemble_surface(blocks, "reflect", d, placement)


def _form_values(forms, phi) -> np.ndarray:
    if isinstance(forms, FormSide):
        return forms.values(phi)
    A = np.asarray(forms, dtype=complex)
    return np.einsum("i,lij,j->l", phi.conj(), A, phi).real


def optimal_scaling(phi, forms, P, w=None) -> float:
    """Closed-form ``alpha`` minimising ``sum_l w_l (phi^H A_l phi - alpha P_l)^2``.

    ``forms`` is a :class:`FormSide` or a stack of ``L`` matrices.
    """
    P = np.asarray(P, dtype=float)
    wP = P if w is None else np.asarray(w, dtype=float) * P
    den = float(wP @ P)
    if den == 0.0:
        raise ZeroDivisionError("target pattern is identically zero")
    return float(wP @ _form_values(forms, np.asarray(phi, dtype=complex))) / den


def _weights(w):
    return None if w is None else np.asarray(w, dtype=float)


def objective(
    phi, forms: QuadraticFormSet, P, P_ul, alpha: float, alpha_ul: float, w=None, w_ul=None
) -> float:
    """``(1/L) sum_l [w_l r_l^2 + w'_l r'_l^2]`` with ``r_l = phi^H A_l phi - alpha P_l``."""
    phi = np.asarray(phi, dtype=complex)
    k = forms.dl.kernels
    s = k.residual_terms(forms.dl.handle, np.asarray(P, float), phi, alpha, None, _weights(w))
    s += k.residual_terms(
        forms.ul.handle, np.asarray(P_ul, float), phi, alpha_ul, None, _weights(w_ul)
    )
    return s / forms.L


def _project(g: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return g - (g * phi.conj()).real * phi


def riemannian_gradient(
    phi, forms: QuadraticFormSet, P, P_ul, alpha: float, alpha_ul: float, w=None, w_ul=None
) -> np.ndarray:
    """Tangent-space gradient at ``phi``.

    Uses the conjugate (Wirtinger) convention, ``g = df/d conj(phi)``, so
    the derivative of the objective along a tangent ``xi`` is
    ``2 Re(g^H xi)``.
    """
    phi = np.asarray(phi, dtype=complex)
    k = forms.dl.kernels
    g = np.zeros(phi.size, dtype=complex)
    k.residual_terms(forms.dl.handle, np.asarray(P, float), phi, alpha, g, _weights(w))
    k.residual_terms(forms.ul.handle, np.asarray(P_ul, float), phi, alpha_ul, g, _weights(w_ul))
    g *= 2.0 / forms.L
    return _project(g, phi)


def _retract(x: np.ndarray) -> np.ndarray:
    return x / np.abs(x)


@dataclass
class OptimizerTrace:
    objective: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    alpha_ul: list = field(default_factory=list)
    phi: np.ndarray | None = None
    converged: bool = False
    iterations: int = 0
    seed: int | None = None
    restart: int = 0
    restart_objectives: list = field(default_factory=list)

    @property
    def final_objective(self) -> float:
        return self.objective[-1]

    @property
    def final_alpha(self) -> float:
        return self.alpha[-1]

    @property
    def final_alpha_ul(self) -> float:
        return self.alpha_ul[-1]

    def rows(self):
        """(iter, objective, alpha, alpha_prime) rows for CSV output."""
        return [
            (k, f, a, b)
            for k, (f, a, b) in enumerate(zip(self.objective, self.alpha, self.alpha_ul))
        ]


class _Profiled:
    """Objective with both scaling factors at their closed-form optimum."""

    def __init__(self, forms: QuadraticFormSet, spec: BeamSpec):
        self.forms = forms
        self.P = spec.p_dl
        self.Pu = spec.p_ul
        self.w = spec.w_dl
        self.wu = spec.w_ul
        self.k = forms.dl.kernels
        self.scale = 1.0 / forms.L
        self.evaluations = 0

    def __call__(self, phi, grad=None):
        self.evaluations += 1
        s1, a1 = self.k.profiled_terms(self.forms.dl.handle, self.P, phi, grad, self.w)
        s2, a2 = self.k.profiled_terms(self.forms.ul.handle, self.Pu, phi, grad, self.wu)
        return (s1 + s2) * self.scale, a1, a2


def _run(
    fun: _Profiled,
    phi: np.ndarray,
    max_iters: int,
    tol: float,
    window: int,
    method: str,
    c1: float = 1e-4,
    shrink: float = 0.5,
    callback=None,
) -> OptimizerTrace:
    trace = OptimizerTrace()
    N = phi.size
    g = np.zeros(N, dtype=complex)
    f, a, au = fun(phi, g)
    g *= 2.0 * fun.scale
    g = _project(g, phi)
    trace.objective.append(f)
    trace.alpha.append(a)
    trace.alpha_ul.append(au)
    if callback is not None:
        callback(0, phi, f)
    step = 1.0
    direction = -g
    g_prev = None
    for it in range(1, max_iters + 1):
        if g_prev is not None and method == "cg":
            # Polak-Ribiere+ with projection transport, restart on non-descent
            gp = _project(g_prev, phi)
            beta = max(0.0, float(np.vdot(g, g - gp).real) / float(np.vdot(g_prev, g_prev).real))
            direction = -g + beta * _project(direction, phi)
            if np.vdot(g, direction).real >= 0:
                direction = -g
        else:
            direction = -g
        slope = 2.0 * float(np.vdot(g, direction).real)
        if not slope < 0.0 or f == 0.0:
            trace.converged = True
            break
        t = step
        while True:
            cand = _retract(phi + t * direction)
            fc, ac, auc = fun(cand)
            if fc <= f + c1 * t * slope:
                break
            t *= shrink
            if t < 1e-300:
                cand = None
                break
        if cand is None:
            trace.converged = True
            break
        step = 2.0 * t
        phi = cand
        g_prev = g
        g = np.zeros(N, dtype=complex)
        f, a, au = fun(phi, g)
        g *= 2.0 * fun.scale
        g = _project(g, phi)
        trace.objective.append(f)
        trace.alpha.append(a)
        trace.alpha_ul.append(au)
        trace.iterations = it
        if callback is not None:
            callback(it, phi, f)
        if it >= window:
            old = trace.objective[-1 - window]
            if old - f <= tol * old:
                trace.converged = True
                break
    trace.phi = phi
    return trace


def _initial_phases(N: int, init, seed: int, restart: int) -> np.ndarray:
    if isinstance(init, str):
        if init == "uniform":
            return np.ones(N, dtype=complex)
        if init == "random":
            rng = np.random.default_rng([seed, restart])
            return np.exp(2j * np.pi * rng.random(N))
        raise ValueError(f"unknown init {init!r}; expected 'random' or 'uniform'")
    phi = np.asarray(init, dtype=complex)
    if phi.shape != (N,):
        raise ValueError(f"initial phases must have shape ({N},)")
    return _retract(phi)


def optimize(
    spec: BeamSpec,
    N: int,
    d: float = 0.5,
    init="random",
    max_iters: int = 1000,
    tol: float = 1e-8,
    seed: int = 0,
    restarts: int = 8,
    window: int = 20,
    method: str = "gd",
    placement: str = "consecutive",
    threads: int = 1,
    backend=None,
    callback=None,
) -> OptimizerTrace:
    """Design unit-modulus phases matching ``spec``; best of ``restarts`` runs.

    Each iteration refreshes both scaling factors in closed form, then takes
    an Armijo-backtracked Riemannian step (``method="gd"`` steepest descent,
    ``"cg"`` Polak-Ribiere conjugate directions) retracted by elementwise
    normalisation.  A run stops once the objective fell by less than
    ``tol`` (relative) over the last ``window`` iterations.

    ``callback(restart, iteration, phi, objective)``, if given, sees every
    accepted iterate.  Restarts run on ``threads`` workers; the result does
    not depend on the thread count.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if method not in ("gd", "cg"):
        raise ValueError(f"unknown method {method!r}")
    forms = build_quadratic_forms(spec, N, d, placement, backend)
    if isinstance(init, str) and init == "uniform" or not isinstance(init, str):
        restarts = 1

    def one(r):
        phi0 = _initial_phases(N, init, seed, r)
        cb = None if callback is None else (lambda it, phi, f: callback(r, it, phi, f))
        tr = _run(_Profiled(forms, spec), phi0, max_iters, tol, window, method, callback=cb)
        tr.seed, tr.restart = seed, r
        return tr

    if threads > 1 and restarts > 1:
        with ThreadPoolExecutor(threads) as pool:
            traces = list(pool.map(one, range(restarts)))
    else:
        traces = [one(r) for r in range(restarts)]
    best = min(traces, key=lambda t: (t.final_objective, t.restart))
    best.restart_objectives = [t.final_objective for t in traces]
    return best


@dataclass(frozen=True)
class TerminatedPair:
    """Circulator pair: lines of half phase ``psi``, port 3 ended in ``X3``."""

    psi: float
    X3: float
    Z0: float

    def realize(self) -> GroupScattering:
        return terminated_circulator_group(self.psi, self.X3, self.Z0)


@dataclass(frozen=True)
class CirculatorTriple:
    """Circulator triple of matched lines with phases ``betas``."""

    betas: tuple

    def realize(self) -> GroupScattering:
        return compose_circulator_group(*(transmission_line_element(b) for b in self.betas))


def phases_to_group_params(
    phi,
    structure: str,
    placement: str = "consecutive",
    Z0: float = 376.730313668,
) -> list:
    """Per-group hardware settings realising the block entries of ``phi``."""
    phi = np.asarray(phi, dtype=complex)
    local = STRUCTURES[structure]
    g = len(local)
    _check_N(phi.size, structure)
    out = []
    for pos in group_layout([g] * (phi.size // g), placement):
        ang = np.angle(phi[pos])
        if structure == "two-element":
            a_k, b_k = ang  # Phi12, Phi21
            out.append(TerminatedPair(0.5 * b_k, reactance_for_phase_difference(a_k - b_k, Z0), Z0))
        else:
            # rows hold entries (1,3), (2,1), (3,2): b1+b3, b1+b2, b2+b3
            e13, e21, e32 = ang
            half = 0.5 * (e13 + e21 + e32)
            out.append(CirculatorTriple((half - e32, half - e13, half - e21)))
    return out


def realize_groups(params: Sequence, d: float = 0.5, placement: str = "consecutive") -> SurfaceScattering:
    """Assemble the surface produced by hardware settings from :func:`phases_to_group_params`."""
    return assemble_surface([p.realize() for p in params], "reflect", d, placement)
