"""Monte-Carlo study of the channel reciprocity attack on TDD precoding.

The base station estimates the uplink cascade through the surface and, by
the usual TDD assumption, precodes the downlink with its transpose.  A
non-reciprocal surface (``Phi != Phi^T``) makes that transpose wrong.

Channels are i.i.d. unit-variance Rayleigh with no direct path: ``H`` is
N x M (BS to surface) and ``G`` is N x K (surface to users).  Each trial
draws from its own stream seeded by ``(seed, trial, attempt)``, so results
do not depend on scheduling or on which other trials ran.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import RankDeficientChannelError

__all__ = [
    "RIS_MODES",
    "PHASE_PROFILES",
    "PRECODERS",
    "CrackScenario",
    "ChannelDraw",
    "RateSamples",
    "draw_channels",
    "crack_blocks",
    "surface_matrix",
    "cascaded_channel",
    "mrt_precoder",
    "zf_precoder",
    "sum_rate",
    "ergodic_rates",
    "bootstrap_gap",
    "with_mode",
    "summarize",
]

RIS_MODES = ("reciprocal-baseline", "nr-crack")
PHASE_PROFILES = ("crack", "symmetric", "zero")
PRECODERS = ("mrt", "zf")
Z0_FREE_SPACE = 376.730313668
ZF_COND_LIMIT = 1e12
MAX_RESAMPLES = 100


@dataclass(frozen=True)
class CrackScenario:
    """System dimensions and attack configuration.

    ``phase_profile`` sets the per-group phases ``(phi1, phi2)`` of each
    terminated-circulator pair (``phi1 = arg Phi12``, ``phi2 = arg Phi21``): ``crack`` draws
    ``phi2`` uniformly and sets ``phi1 = -phi2``, ``symmetric`` uses
    ``phi1 = phi2`` and ``zero`` uses ``phi1 = phi2 = 0``.
    ``estimation_noise`` is the per-entry variance of additive complex
    Gaussian error on the uplink estimate.
    """

    M: int = 8
    K: int = 4
    N: int = 64
    snr_db: float = 10.0
    trials: int = 2000
    seed: int = 0
    ris_mode: str = "nr-crack"
    phase_profile: str = "crack"
    estimation_noise: float = 0.0
    Z0: float = Z0_FREE_SPACE

    def __post_init__(self):
        for name in ("M", "K", "N", "trials"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.K > self.M:
            raise ValueError(f"need K <= M, got K={self.K}, M={self.M}")
        if self.N % 2:
            raise ValueError(f"N must be even for two-element groups, got {self.N}")
        if self.ris_mode not in RIS_MODES:
            raise ValueError(f"ris_mode must be one of {RIS_MODES}")
        if self.phase_profile not in PHASE_PROFILES:
            raise ValueError(f"phase_profile must be one of {PHASE_PROFILES}")
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if not self.estimation_noise >= 0:
            raise ValueError("estimation_noise must be nonnegative")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)


@dataclass(frozen=True)
class ChannelDraw:
    H: np.ndarray
    G: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    E: np.ndarray | None = None


@dataclass
class RateSamples:
    """Per-trial sum rates (bits/s/Hz) with the count of re-drawn trials."""

    rates: np.ndarray
    precoder: str
    scenario: CrackScenario
    resampled: int = 0
    resampled_trials: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(self.rates.mean())

    @property
    def stderr(self) -> float:
        n = self.rates.size
        return float(self.rates.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def _cn(rng, shape, var=1.0):
    s = math.sqrt(var / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channels(sc: CrackScenario, trial: int, attempt: int = 0) -> ChannelDraw:
    """Channels and group phases of one trial (reproducible from the indices)."""
    rng = np.random.default_rng((sc.seed, trial, attempt))
    H = _cn(rng, (sc.N, sc.M))
    G = _cn(rng, (sc.N, sc.K))
    phi2 = 2 * np.pi * rng.random(sc.N // 2)
    E = _cn(rng, (sc.K, sc.M), sc.estimation_noise) if sc.estimation_noise > 0 else None
    if sc.phase_profile == "crack":
        phi1 = -phi2
    elif sc.phase_profile == "symmetric":
        phi1 = phi2.copy()
    else:
        phi1 = np.zeros_like(phi2)
        phi2 = np.zeros_like(phi2)
    return ChannelDraw(H, G, phi1, phi2, E)


def crack_blocks(phi1, phi2, Z0: float = Z0_FREE_SPACE) -> tuple[np.ndarray, np.ndarray]:
    """``(Phi12, Phi21)`` of terminated-circulator pairs realising ``(phi1, phi2)``.

    Lines of phase ``phi2 / 2`` set ``Phi21``; the reactance on port 3 adds
    the termination phase ``phi1 - phi2`` to ``Phi12``.
    """
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    t = np.mod(phi1 - phi2, 2 * np.pi)
    zero = np.isclose(t, 0.0, atol=1e-15) | np.isclose(t, 2 * np.pi, rtol=0, atol=1e-15)
    with np.errstate(over="ignore", invalid="ignore"):
        X3 = Z0 * np.tan(0.5 * (np.pi - t))
        D3 = (1j * X3 - Z0) / (1j * X3 + Z0)
    D3 = np.where(zero, 1.0 + 0.0j, D3)
    t21 = np.exp(1j * phi2)
    return D3 * t21, t21


def surface_matrix(phi12, phi21) -> np.ndarray:
    """N x N matrix of anti-diagonal 2x2 blocks ``[[0, Phi12], [Phi21, 0]]``."""
    n = len(phi12)
    S = np.zeros((2 * n, 2 * n), dtype=complex)
    k = np.arange(n)
    S[2 * k, 2 * k + 1] = phi12
    S[2 * k + 1, 2 * k] = phi21
    return S


def cascaded_channel(Phi, H, G, direction: str) -> np.ndarray:
    """K x M cascade ``G^T Phi H`` (DL) or ``G^T Phi^T H`` (UL, transposed)."""
    Phi = np.asarray(Phi)
    H = np.asarray(H)
    G = np.asarray(G)
    N = Phi.shape[0]
    if Phi.shape != (N, N) or H.ndim != 2 or G.ndim != 2 or H.shape[0] != N or G.shape[0] != N:
        raise ValueError(
            f"dimension mismatch: Phi {Phi.shape}, H {H.shape}, G {G.shape}"
        )
    if direction == "DL":
        return G.T @ Phi @ H
    if direction == "UL":
        return G.T @ Phi.T @ H
    raise ValueError(f"direction must be 'UL' or 'DL', got {direction!r}")


def mrt_precoder(h_est) -> np.ndarray:
    """Columns ``h_u^H / ||h_u||`` for each estimated row ``h_u``."""
    h = np.atleast_2d(np.asarray(h_est, dtype=complex))
    norms = np.linalg.norm(h, axis=1)
    if np.any(norms == 0):
        raise RankDeficientChannelError("MRT needs nonzero channel rows")
    return h.conj().T / norms


def zf_precoder(H_est) -> np.ndarray:
    """``H^H (H H^H)^-1`` with unit-norm columns."""
    H = np.atleast_2d(np.asarray(H_est, dtype=complex))
    K, M = H.shape
    if K > M:
        raise RankDeficientChannelError(f"ZF needs K <= M, got {K} x {M}")
    gram = H @ H.conj().T
    if not np.isfinite(gram).all() or np.linalg.cond(gram) > ZF_COND_LIMIT:
        raise RankDeficientChannelError("channel estimate is rank deficient")
    W = H.conj().T @ np.linalg.inv(gram)
    return W / np.linalg.norm(W, axis=0)


def sum_rate(H_true, W, snr_linear: float) -> float:
    """Sum of ``log2(1 + SINR_u)`` with power ``1/K`` per stream, noise ``1/SNR``."""
    K = W.shape[1]
    g = np.abs(np.asarray(H_true) @ W) ** 2 / K
    sig = np.diag(g)
    interf = g.sum(axis=1) - sig
    return float(np.sum(np.log2(1.0 + sig / (interf + 1.0 / snr_linear))))


_PRECODER_FN = {"mrt": mrt_precoder, "zf": zf_precoder}


def _trial(sc: CrackScenario, precoder: str, trial: int):
    build = _PRECODER_FN[precoder]
    for attempt in range(MAX_RESAMPLES):
        ch = draw_channels(sc, trial, attempt)
        Phi = surface_matrix(*crack_blocks(ch.phi1, ch.phi2, sc.Z0))
        dl = cascaded_channel(Phi, ch.H, ch.G, "DL")
        est = dl if sc.ris_mode == "reciprocal-baseline" else cascaded_channel(Phi, ch.H, ch.G, "UL")
        if ch.E is not None:
            est = est + ch.E
        try:
            W = build(est)
        except RankDeficientChannelError:
            continue
        return sum_rate(dl, W, sc.snr_linear), attempt
    raise RankDeficientChannelError(f"trial {trial}: no usable draw in {MAX_RESAMPLES} attempts")


def ergodic_rates(sc: CrackScenario, precoder: str, threads: int = 1) -> RateSamples:
    """Per-trial sum rates of ``precoder`` (``"mrt"`` or ``"zf"``).

    In ``reciprocal-baseline`` mode the precoder sees the true downlink
    cascade; in ``nr-crack`` mode it sees the transposed uplink estimate.
    Both modes consume identical random streams, so they are comparable
    draw for draw.
    """
    precoder = precoder.lower()
    if precoder not in PRECODERS:
        raise ValueError(f"precoder must be one of {PRECODERS}")
    idx = range(sc.trials)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(lambda t: _trial(sc, precoder, t), idx))
    else:
        out = [_trial(sc, precoder, t) for t in idx]
    rates = np.array([r for r, _ in out])
    redrawn = [t for t, (_, a) in enumerate(out) if a > 0]
    return RateSamples(rates, precoder, sc, sum(a for _, a in out), redrawn)


def bootstrap_gap(baseline, attacked, confidence: float = 0.99, resamples: int = 2000, seed: int = 0):
    """Paired bootstrap interval for ``mean(baseline) - mean(attacked)``."""
    from scipy.stats import bootstrap

    b = np.asarray(getattr(baseline, "rates", baseline), dtype=float)
    a = np.asarray(getattr(attacked, "rates", attacked), dtype=float)
    if b.shape != a.shape:
        raise ValueError("paired samples must have equal length")
    res = bootstrap(
        (b - a,),
        np.mean,
        confidence_level=confidence,
        n_resamples=resamples,
        method="percentile",
        rng=np.random.default_rng(seed),
    )
    ci = res.confidence_interval
    return float(ci.low), float(ci.high)


def summarize(baseline: RateSamples, attacked: RateSamples) -> dict:
    """Means, standard errors and the relative drop of the attacked mean."""
    diff = baseline.rates - attacked.rates
    n = diff.size
    gap_se = float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    mb = baseline.mean
    return {
        "precoder": baseline.precoder,
        "trials": int(n),
        "baseline_mean": mb,
        "baseline_stderr": baseline.stderr,
        "crack_mean": attacked.mean,
        "crack_stderr": attacked.stderr,
        "gap": mb - attacked.mean,
        "gap_stderr": gap_se,
        "degradation_percent": 100.0 * (mb - attacked.mean) / mb if mb else 0.0,
        "resampled": {"baseline": baseline.resampled, "crack": attacked.resampled},
    }


def with_mode(sc: CrackScenario, mode: str, profile: str | None = None) -> CrackScenario:
    return replace(sc, ris_mode=mode, phase_profile=profile or sc.phase_profile)
