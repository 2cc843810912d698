"""Yellow tracking-dot extraction from a single band image.

Pipeline: percentile threshold and connected components (:func:`detect_dots`),
lattice periods from row/column-conditioned coordinate-difference
histograms (:func:`estimate_separation`), modulo folding into one lattice
cell (:func:`extract_tile`), and shift-invariant tile comparison
(:func:`match_patterns`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import InsufficientData, InvalidArgument, NoLatticeFound

MIN_DOTS = 8
HARMONIC_RATIO = 0.75
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class DotSet:
    """Dot centroids as an ``(n, 2)`` array of ``(x, y)`` pixel coordinates."""

    centers: np.ndarray
    source_band: str = ""
    image_shape: tuple[int, int] | None = None
    areas: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        if self.image_shape is not None and len(centers):
            h, w = self.image_shape
            if (centers.min() < 0 or np.any(centers[:, 0] > w - 1)
                    or np.any(centers[:, 1] > h - 1)):
                raise InvalidArgument("dot centers must lie inside the image")
        if len(centers) > 1 and cKDTree(centers).query_pairs(1.0):
            raise InvalidArgument("dot centers closer than 1 px")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)

    def __len__(self):
        return len(self.centers)

    @property
    def x(self) -> np.ndarray:
        return self.centers[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.centers[:, 1]


@dataclass(frozen=True, eq=False)
class PatternMatrix:
    hps_px: float
    vps_px: float
    tile: np.ndarray
    anchor: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        tile = np.asarray(self.tile, dtype=bool)
        if tile.ndim != 2 or min(tile.shape) < 1:
            raise InvalidArgument("tile must be a non-empty 2-D matrix")
        if not tile.any():
            raise InvalidArgument("tile must contain at least one dot")
        if not (self.hps_px > 0 and self.vps_px > 0):
            raise InvalidArgument("HPS and VPS must be positive")
        tile.setflags(write=False)
        object.__setattr__(self, "tile", tile)

    @property
    def shape(self) -> tuple[int, int]:
        return self.tile.shape


def detect_dots(band_image, expected_polarity: str = "dark", min_area_px: int = 3,
                max_area_px: int = 50, percentile: float = 5.0, margin: float = 0.3,
                source_band: str = "") -> DotSet:
    """Centroids of small connected components beyond a percentile threshold.

    For dark dots the threshold is ``(1 - margin)`` times the ``percentile``
    level of the image; for bright dots it is ``(1 + margin)`` times the
    ``100 - percentile`` level.  Components are 8-connected, and only those
    with ``min_area_px <= area <= max_area_px`` are kept, which rejects
    noise specks as well as large ink regions.
    """
    image = np.asarray(band_image, dtype=np.float64)
    if image.ndim != 2 or image.size == 0:
        raise InvalidArgument("detect_dots needs a non-empty 2-D image")
    if expected_polarity == "dark":
        mask = image < np.percentile(image, percentile) * (1.0 - margin)
    elif expected_polarity == "bright":
        mask = image > np.percentile(image, 100.0 - percentile) * (1.0 + margin)
    else:
        raise InvalidArgument(f"polarity must be 'dark' or 'bright', not {expected_polarity!r}")
    labels, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    if n == 0:
        return DotSet(np.zeros((0, 2)), source_band, image.shape, np.zeros(0, int))
    flat = labels.ravel()
    ys, xs = np.indices(image.shape)
    area = np.bincount(flat, minlength=n + 1)
    sx = np.bincount(flat, weights=xs.ravel(), minlength=n + 1)
    sy = np.bincount(flat, weights=ys.ravel(), minlength=n + 1)
    keep = np.flatnonzero((area >= min_area_px) & (area <= max_area_px))
    keep = keep[keep > 0]
    centers = np.column_stack([sx[keep] / area[keep], sy[keep] / area[keep]])
    return DotSet(centers, source_band, image.shape, area[keep])


def _axis_differences(along: np.ndarray, across: np.ndarray, tolerance: float) -> np.ndarray:
    """|Δalong| for every dot pair whose ``across`` coordinates agree within tolerance."""
    order = np.argsort(across, kind="stable")
    a, c = along[order], across[order]
    hi = np.searchsorted(c, c + tolerance, side="right")
    diffs = [np.abs(a[i + 1:hi[i]] - a[i]) for i in range(len(a)) if hi[i] > i + 1]
    return np.concatenate(diffs) if diffs else np.zeros(0)


def lag_histogram(along, across, tolerance: float = 1.0) -> np.ndarray:
    """Pair counts per integer lag (1 px bins centered on integers).

    This is the autocorrelation of the coordinate histogram, accumulated
    only over dots sharing a row (or column).
    """
    d = _axis_differences(np.asarray(along, float), np.asarray(across, float), tolerance)
    d = d[d > 0.5]
    if d.size == 0:
        return np.zeros(1, dtype=np.int64)
    return np.bincount(np.floor(d + 0.5).astype(np.int64))


def axis_period(along, across, tolerance: float = 1.0, min_lag: int = 3,
                significance: float = 0.25, min_pairs: int = 3) -> float:
    along = np.asarray(along, dtype=np.float64)
    across = np.asarray(across, dtype=np.float64)
    extent = float(along.max() - along.min())
    max_lag = int(math.floor(extent / 2.0))
    if max_lag < min_lag:
        raise NoLatticeFound(f"dot extent {extent:.1f} px too small for a period search")
    counts = lag_histogram(along, across, tolerance)
    counts = np.pad(counts, (0, max(0, max_lag + 2 - len(counts))))
    smooth = counts[:-2] + counts[1:-1] + counts[2:]  # smooth[L - 1] covers L-1..L+1
    lags = np.arange(min_lag, max_lag + 1)
    scores = smooth[lags - 1]
    best = int(np.argmax(scores))
    peak_lag, peak = int(lags[best]), int(scores[best])
    needed = max(min_pairs, significance * len(along))
    if peak < needed:
        raise NoLatticeFound(
            f"strongest lag {peak_lag} px has {peak} pairs for {len(along)} dots")
    # multiples of the period score almost as high as the period itself
    # (n - k pairs at lag k*P); fall back to the finest strong divisor
    for k in range(int(peak_lag // min_lag), 1, -1):
        sub = int(round(peak_lag / k))
        score = int(smooth[sub - 1])
        if sub >= min_lag and score >= max(needed, HARMONIC_RATIO * peak):
            peak_lag = sub
            break
    d = _axis_differences(along, across, tolerance)
    near = d[np.abs(d - peak_lag) <= 1.5]
    return float(near.mean())


def estimate_separation(dots: DotSet, tolerance: float = 1.0, min_lag: int = 3,
                        significance: float = 0.25) -> tuple[float, float]:
    """(HPS, VPS) of an axis-aligned dot lattice.

    The coarse period along x is the dominant peak of the lag histogram of
    dots sharing a row (likewise for y with dots sharing a column).  When a
    divisor of the peak lag scores at least ``HARMONIC_RATIO`` of the peak,
    the peak was a multiple of the period and the divisor is used.  The
    lag is then refined by averaging the pair separations within 1.5 px of
    it.  A peak holding fewer than ``significance`` pairs per dot is
    rejected as non-periodic.
    """
    if len(dots) < MIN_DOTS:
        raise InsufficientData(f"need at least {MIN_DOTS} dots, got {len(dots)}")
    hps = axis_period(dots.x, dots.y, tolerance, min_lag, significance)
    vps = axis_period(dots.y, dots.x, tolerance, min_lag, significance)
    return hps, vps


def _phase_anchor(coords: np.ndarray, pitch: float) -> float:
    """Offset in [-pitch/2, pitch/2) that centers ``coords mod pitch`` in their bins."""
    theta = 2.0 * np.pi * coords / pitch
    phase = math.atan2(np.sin(theta).sum(), np.cos(theta).sum())
    center = phase / (2.0 * np.pi) * pitch
    return center % pitch - pitch / 2.0


def extract_tile(dots: DotSet, hps_px: float, vps_px: float, cell_grid: tuple[int, int]) -> PatternMatrix:
    """Fold dots into one HPS x VPS cell and vote a ``rows x cols`` binary tile.

    The anchor is the lattice phase that minimizes the circular scatter of
    the folded coordinates about the sub-cell centers.  A sub-cell is set
    when at least half of the occupied lattice cells have a dot there.
    """
    rows, cols = (int(v) for v in cell_grid)
    if rows < 1 or cols < 1:
        raise InvalidArgument("cell grid must be at least 1x1")
    if not (hps_px > 0 and vps_px > 0):
        raise InvalidArgument("HPS and VPS must be positive")
    if len(dots) < MIN_DOTS:
        raise InsufficientData(f"need at least {MIN_DOTS} dots, got {len(dots)}")
    px, py = hps_px / cols, vps_px / rows
    ax = _phase_anchor(dots.x, px)
    ay = _phase_anchor(dots.y, py)
    u, v = dots.x - ax, dots.y - ay
    kx, ky = np.floor(u / hps_px), np.floor(v / vps_px)
    col = np.clip(np.floor((u - kx * hps_px) / px), 0, cols - 1).astype(int)
    row = np.clip(np.floor((v - ky * vps_px) / py), 0, rows - 1).astype(int)
    cells = {}
    for cell in zip(kx.astype(int), ky.astype(int), row, col):
        cells.setdefault(cell[:2], set()).add(cell[2:])
    votes = np.zeros((rows, cols), dtype=int)
    for occupied in cells.values():
        for r, c in occupied:
            votes[r, c] += 1
    tile = 2 * votes >= len(cells)
    if not tile.any():
        raise InsufficientData("no sub-cell reaches the vote threshold")
    return PatternMatrix(float(hps_px), float(vps_px), tile, (float(ax), float(ay)))


def _as_tile(p) -> np.ndarray:
    tile = p.tile if isinstance(p, PatternMatrix) else np.asarray(p, dtype=bool)
    if tile.ndim != 2 or min(tile.shape) < 1:
        raise InvalidArgument("pattern must be a non-empty 2-D matrix")
    return tile.astype(bool)


def resample_tile(tile: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor upsampling to a shape that is a multiple of ``tile.shape``."""
    fr, fc = shape[0] // tile.shape[0], shape[1] // tile.shape[1]
    return np.repeat(np.repeat(tile, fr, axis=0), fc, axis=1)


def match_patterns(a, b) -> float:
    """Best fraction of agreeing cells over all cyclic shifts of ``b``.

    Tiles of different shapes are first upsampled to the least common
    multiple grid.  The score is symmetric in its arguments.
    """
    ta, tb = _as_tile(a), _as_tile(b)
    shape = (math.lcm(ta.shape[0], tb.shape[0]), math.lcm(ta.shape[1], tb.shape[1]))
    ta, tb = resample_tile(ta, shape), resample_tile(tb, shape)
    best = 0.0
    for dr in range(shape[0]):
        rolled = np.roll(tb, dr, axis=0)
        for dc in range(shape[1]):
            best = max(best, float(np.mean(ta == np.roll(rolled, dc, axis=1))))
    return best


def dot_report(pattern: PatternMatrix, dots: DotSet, band: str, parameters: dict) -> dict:
    return {
        "band": band,
        "dot_count": len(dots),
        "hps_px": pattern.hps_px,
        "vps_px": pattern.vps_px,
        "anchor": [pattern.anchor[0], pattern.anchor[1]],
        "tile": pattern.tile.astype(int).tolist(),
        "parameters": parameters,
    }


def pattern_from_report(report: dict) -> PatternMatrix:
    try:
        return PatternMatrix(float(report["hps_px"]), float(report["vps_px"]),
                             np.array(report["tile"], dtype=bool),
                             tuple(float(v) for v in report.get("anchor", (0.0, 0.0))))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"malformed dot report: {exc}") from exc


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"{path}: not a JSON dot report ({exc})") from exc
