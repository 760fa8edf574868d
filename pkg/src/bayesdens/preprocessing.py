"""Mapping of raw samples to the unit interval and linear-binned grid counts.

The estimation pipeline never sees the raw data: it sees equally spaced
grid points on [0, 1] together with (rounded) linear-binning weights.
This module owns that conversion and its exact inverse.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRange,
    GridTooSmall,
    NonFinite,
    NonPositiveForLog,
    OutOfRange,
    TooFewPoints,
)

MIN_POINTS = 10
DEFAULT_PADDING = 0.05
MIN_GRID = 11


@dataclass(frozen=True)
class TransformSpec:
    """Affine map x -> (x - lower) / scale, optionally preceded by log.

    ``lower`` and ``scale`` are in the (possibly logged) original units;
    ``scale`` must be positive.  When ``log_applied`` is set, forward maps
    take log(x) first and inverse maps exponentiate last.
    """

    lower: float
    scale: float
    log_applied: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.scale)):
            raise NonFinite("transform parameters must be finite")
        if self.scale <= 0:
            raise DegenerateRange(f"scale must be > 0, got {self.scale}")


@dataclass(frozen=True)
class GridCounts:
    """Equally spaced unit-interval grid with linear-binning weights.

    ``grid[l] = l / (M - 1)``; ``raw_weights`` are the fractional binning
    weights summing to the sample size ``n``; ``counts`` are the weights
    rounded half away from zero.
    """

    grid: np.ndarray
    raw_weights: np.ndarray
    counts: np.ndarray
    n: int

    @property
    def M(self) -> int:
        return self.grid.size


def fit_transform(data, padding=DEFAULT_PADDING, log_pre=False) -> TransformSpec:
    """Fit the unit-interval map for a sample.

    With rho the range of the (possibly logged) data, the map uses
    lower = min - padding * rho and scale = (1 + 2 * padding) * rho, so all
    points land inside (0, 1) with a symmetric margin.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 1:
        x = x.ravel()
    if not np.all(np.isfinite(x)):
        raise NonFinite("data contains non-finite values")
    if x.size < MIN_POINTS:
        raise TooFewPoints(f"need at least {MIN_POINTS} points, got {x.size}")
    if log_pre:
        if np.any(x <= 0):
            raise NonPositiveForLog("log pre-transform requires all values > 0")
        x = np.log(x)
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi <= lo:
        raise DegenerateRange("all data values are equal")
    rho = hi - lo
    return TransformSpec(
        lower=lo - padding * rho,
        scale=(1.0 + 2.0 * padding) * rho,
        log_applied=bool(log_pre),
    )


def apply_transform(spec: TransformSpec, x, direction="forward") -> np.ndarray:
    """Apply the fitted map (or its inverse) elementwise."""
    v = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NonFinite("input to transform contains non-finite values")
    if direction == "forward":
        if spec.log_applied:
            if np.any(v <= 0):
                raise NonPositiveForLog("forward transform with log requires values > 0")
            v = np.log(v)
        return (v - spec.lower) / spec.scale
    if direction == "inverse":
        out = spec.lower + spec.scale * v
        if spec.log_applied:
            out = np.exp(out)
        return out
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def linear_bin(y, M=401) -> GridCounts:
    """Linear-bin unit-interval points onto an M-point equally spaced grid.

    A point with g_l <= y <= g_{l+1} contributes weight proportional to
    proximity: (g_{l+1} - y)/delta to bin l and (y - g_l)/delta to bin l+1.
    Total weight is conserved exactly; counts are the weights rounded half
    away from zero.
    """
    y = np.asarray(y, dtype=float).ravel()
    if M < MIN_GRID:
        raise GridTooSmall(f"grid size must be >= {MIN_GRID}, got {M}")
    if not np.all(np.isfinite(y)):
        raise NonFinite("binning input contains non-finite values")
    if y.size and (y.min() < 0.0 or y.max() > 1.0):
        raise OutOfRange("binning input must lie in [0, 1]")
    pos = y * (M - 1)
    idx = np.floor(pos).astype(np.intp)
    np.clip(idx, 0, M - 2, out=idx)  # points at y == 1 go fully to the last bin
    frac = pos - idx
    w = np.bincount(idx, weights=1.0 - frac, minlength=M)
    w += np.bincount(idx + 1, weights=frac, minlength=M)
    counts = np.floor(w + 0.5).astype(np.int64)
    return GridCounts(
        grid=np.arange(M, dtype=float) / (M - 1),
        raw_weights=w,
        counts=counts,
        n=y.size,
    )


def read_values(path) -> np.ndarray:
    """Read one numeric value per line; '#' lines are comments.

    Whitespace-only lines are skipped.  Any other non-numeric line raises
    NonFinite with its line number.
    """
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                values.append(float(s))
            except ValueError:
                raise NonFinite(f"line {lineno} of {path} is not numeric: {s!r}")
    return np.asarray(values, dtype=float)
