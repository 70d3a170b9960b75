"""Sampled beampatterns, peak location and integrated sidelobe ratio."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegeneratePatternError
from .surface import SurfaceScattering, reflect_pattern, star_pattern

__all__ = [
    "DB_FLOOR",
    "Beampattern",
    "sample_pattern",
    "peak_angle",
    "mainlobe_bounds",
    "islr",
]

DB_FLOOR = -300.0


def _db(x):
    with np.errstate(divide="ignore"):
        return np.maximum(10.0 * np.log10(x), DB_FLOOR)


@dataclass(frozen=True)
class Beampattern:
    """Linear power sampled on a strictly increasing angle grid (radians)."""

    grid: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        grid = np.atleast_1d(np.asarray(self.grid, dtype=float)).copy()
        power = np.atleast_1d(np.asarray(self.power, dtype=float)).copy()
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("pattern grid must be a nonempty 1-D array")
        if power.shape != grid.shape:
            raise ValueError("grid and power lengths differ")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("pattern grid must be strictly increasing")
        if np.any(power < 0) or not np.all(np.isfinite(power)):
            raise ValueError("power must be finite and nonnegative")
        grid.setflags(write=False)
        power.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "power", power)

    @property
    def L(self) -> int:
        return self.grid.size

    @property
    def power_db(self) -> np.ndarray:
        """Power in dB relative to the peak, floored at ``DB_FLOOR``."""
        peak = self.power.max()
        if peak == 0.0:
            return np.full(self.L, DB_FLOOR)
        out = _db(self.power / peak)
        out[self.power == peak] = 0.0
        return out


def sample_pattern(
    surface: SurfaceScattering, theta: float, grid, side: str = "1->2"
) -> Beampattern:
    """Power radiated toward each ``grid`` angle for incidence from ``theta``.

    ``side`` selects the transmission direction of a STAR surface and is
    ignored in reflect mode.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if surface.mode == "star":
        x = star_pattern(surface, side, theta, grid)
    else:
        x = reflect_pattern(surface, theta, grid)
    return Beampattern(grid, np.abs(x) ** 2)


def peak_angle(p: Beampattern) -> float:
    """Grid angle of the largest power; ties go to the smallest angle."""
    return float(p.grid[int(np.argmax(p.power))])


def mainlobe_bounds(p: Beampattern) -> tuple[int, int]:
    """Inclusive index range from the peak out to the first local minimum each way."""
    x = p.power
    k = int(np.argmax(x))
    if np.count_nonzero(x == x[k]) > 1:
        raise DegeneratePatternError("automatic mainlobe needs a unique global peak")
    lo = k
    while lo > 0 and x[lo - 1] < x[lo]:
        lo -= 1
    hi = k
    while hi < x.size - 1 and x[hi + 1] < x[hi]:
        hi += 1
    return lo, hi


def islr(
    p: Beampattern,
    mainlobe="auto",
    exclude: Sequence[tuple[float, float]] = (),
) -> float:
    """Integrated sidelobe ratio in dB.

    Parameters
    ----------
    p : Beampattern
    mainlobe : "auto" or (lo, hi)
        ``"auto"`` bounds the mainlobe by the first local minima around the
        peak (both included); a pair of angles in radians selects the grid
        points inside ``[lo, hi]``.
    exclude : sequence of (lo, hi)
        Angle intervals left out of the sidelobe sum, e.g. other intended
        beams.

    Returns
    -------
    float
        ``10 log10(sum sidelobe power / sum mainlobe power)``, floored at
        ``DB_FLOOR`` when no sidelobe power remains.
    """
    g = p.grid
    main = np.zeros(p.L, dtype=bool)
    if isinstance(mainlobe, str):
        if mainlobe != "auto":
            raise ValueError(f"mainlobe must be 'auto' or an interval, got {mainlobe!r}")
        lo, hi = mainlobe_bounds(p)
        main[lo : hi + 1] = True
    else:
        a, b = (float(v) for v in mainlobe)
        if not a <= b:
            raise ValueError("mainlobe interval must satisfy lo <= hi")
        main = (g >= a) & (g <= b)
        if not main.any():
            raise DegeneratePatternError("mainlobe interval contains no grid point")
    side = ~main
    for a, b in exclude:
        side &= ~((g >= a) & (g <= b))
    if not side.any():
        raise DegeneratePatternError("sidelobe region is empty")
    m = float(p.power[main].sum())
    if m == 0.0:
        raise DegeneratePatternError("mainlobe holds no power")
    return float(_db(float(p.power[side].sum()) / m))
