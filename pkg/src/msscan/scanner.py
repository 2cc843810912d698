"""Sheet-feed spatio-spectral scanning of synthetic documents.

The sensor line covers x; the feed supplies y; the spectral axis comes from
re-feeding the sheet once per switch position.  Each pass is rigidly
translated by a random integer misfeed, then corrupted by additive Gaussian
noise, clamped and quantized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NoIllumination
from .light_source import LightSourceState, active_emission, rotate_to
from .spectral import (DEFAULT_GRID, Spectrum, WavelengthGrid, band_response_table,
                       constant_spectrum, flat_sensor)

PAPER, BLACK, RED, ORANGE, GREEN, BLUE, YELLOW = range(7)
PALETTE_NAMES = ("paper", "black", "red", "orange", "green", "blue", "yellow")
LOGO_INKS = (RED, ORANGE, GREEN, BLUE)
PAPER_WHITE = 0.9
SEED_MASK = (1 << 64) - 1


def _logistic(lam, edge_nm, width_nm):
    return 1.0 / (1.0 + np.exp(-(lam - edge_nm) / width_nm))


def _rising(grid, lo, hi, edge_nm, width_nm, name):
    lam = grid.wavelengths
    return Spectrum(grid, lo + (hi - lo) * _logistic(lam, edge_nm, width_nm), "reflectance", name)


def _falling(grid, hi, lo, edge_nm, width_nm, name):
    lam = grid.wavelengths
    return Spectrum(grid, lo + (hi - lo) * (1.0 - _logistic(lam, edge_nm, width_nm)), "reflectance", name)


def default_palette(grid: WavelengthGrid = DEFAULT_GRID) -> tuple[Spectrum, ...]:
    """Fixture ink reflectances; entry order matches ``PALETTE_NAMES``.

    Yellow saturates to the paper-white level above ~540 nm so that dots
    vanish outside the blue end of the spectrum.
    """
    lam = grid.wavelengths
    green = 0.08 + 0.52 * np.exp(-0.5 * ((lam - 530.0) / 35.0) ** 2)
    return (
        constant_spectrum(grid, PAPER_WHITE, name="paper"),
        constant_spectrum(grid, 0.05, name="black"),
        _rising(grid, 0.05, 0.85, 600.0, 8.0, "red"),
        _rising(grid, 0.06, 0.80, 570.0, 8.0, "orange"),
        Spectrum(grid, green, "reflectance", "green"),
        _falling(grid, 0.80, 0.06, 500.0, 10.0, "blue"),
        _rising(grid, 0.08, PAPER_WHITE, 500.0, 8.0, "yellow"),
    )


@dataclass(frozen=True, eq=False)
class DotLattice:
    """Ground truth of the stamped tracking-dot pattern."""

    hps_px: int
    vps_px: int
    tile: np.ndarray
    origin: tuple[int, int] = (0, 0)
    radius_px: int = 1

    def column_offsets(self) -> np.ndarray:
        cols = self.tile.shape[1]
        return ((2 * np.arange(cols) + 1) * self.hps_px) // (2 * cols)

    def row_offsets(self) -> np.ndarray:
        rows = self.tile.shape[0]
        return ((2 * np.arange(rows) + 1) * self.vps_px) // (2 * rows)


@dataclass(frozen=True, eq=False)
class DocumentModel:
    width_px: int
    height_px: int
    palette: tuple[Spectrum, ...]
    index_map: np.ndarray
    dot_layer: tuple[tuple[int, int, int], ...] | None = None
    lattice: DotLattice | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise InvalidArgument("document dimensions must be positive")
        index_map = np.asarray(self.index_map, dtype=np.uint8)
        if index_map.shape != (self.height_px, self.width_px):
            raise InvalidArgument("index_map must have shape (height_px, width_px)")
        if index_map.max(initial=0) >= len(self.palette):
            raise InvalidArgument("index_map refers past the end of the palette")
        if not self.palette or self.palette[0].name != "paper" or not np.allclose(
                self.palette[0].values, PAPER_WHITE):
            raise InvalidArgument("palette entry 0 must be paper white (0.9)")
        for x, y, r in self.dot_layer or ():
            if x - r < 0 or y - r < 0 or x + r >= self.width_px or y + r >= self.height_px:
                raise InvalidArgument(f"dot at ({x}, {y}) r={r} leaves the page")
        index_map.setflags(write=False)
        object.__setattr__(self, "index_map", index_map)

    @property
    def grid(self) -> WavelengthGrid:
        return self.palette[0].grid

    @property
    def dot_centers(self) -> np.ndarray:
        if not self.dot_layer:
            return np.zeros((0, 2))
        return np.array([(x, y) for x, y, _ in self.dot_layer], dtype=np.float64)

    def palette_index(self, name: str) -> int:
        for i, s in enumerate(self.palette):
            if s.name == name:
                return i
        raise InvalidArgument(f"no palette entry named {name!r}")


def disk_offsets(radius: int) -> np.ndarray:
    """Integer (dy, dx) offsets of a digital disk."""
    r = int(radius)
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    mask = dx * dx + dy * dy <= r * r
    return np.column_stack([dy[mask], dx[mask]])


def composite_index_map(doc: DocumentModel) -> np.ndarray:
    """Index map with yellow dots stamped over the logo."""
    out = np.array(doc.index_map)
    if doc.dot_layer:
        yellow = doc.palette_index("yellow")
        dots = np.array(doc.dot_layer)
        for r in np.unique(dots[:, 2]):
            sel = dots[dots[:, 2] == r]
            stencil = disk_offsets(r)
            ys = (sel[:, 1, None] + stencil[None, :, 0]).ravel()
            xs = (sel[:, 0, None] + stencil[None, :, 1]).ravel()
            out[ys, xs] = yellow
    return out


def logo_regions(width: int, height: int) -> dict[int, tuple[int, int, int, int]]:
    """``{palette index: (x0, y0, x1, y1)}`` for the four ink patches and text band."""
    rw, rh = max(2, width // 12), max(2, height // 24)
    gap = max(1, rw // 2)
    x0, y0 = width // 12, height // 16
    regions = {}
    for i, ink in enumerate(LOGO_INKS):
        left = x0 + i * (rw + gap)
        regions[ink] = (left, y0, left + rw, y0 + rh)
    text_top = y0 + rh + max(1, rh // 2)
    regions[BLACK] = (x0, text_top, x0 + 4 * rw + 3 * gap, text_top + max(1, height // 64))
    return regions


def lattice_dots(width: int, height: int, lattice: DotLattice) -> list[tuple[int, int, int]]:
    """All tile dots of ``lattice`` whose disks fit on the page, row-major."""
    tile = np.asarray(lattice.tile, dtype=bool)
    r = lattice.radius_px
    ox, oy = lattice.origin
    xoff, yoff = lattice.column_offsets(), lattice.row_offsets()
    kx = range((-ox) // lattice.hps_px - 1, (width - ox) // lattice.hps_px + 2)
    ky = range((-oy) // lattice.vps_px - 1, (height - oy) // lattice.vps_px + 2)
    dots = []
    for j in ky:
        for row, col in zip(*np.nonzero(tile)):
            y = oy + j * lattice.vps_px + int(yoff[row])
            if y - r < 0 or y + r >= height:
                continue
            for k in kx:
                x = ox + k * lattice.hps_px + int(xoff[col])
                if r <= x < width - r:
                    dots.append((x, y, r))
    dots.sort(key=lambda d: (d[1], d[0]))
    return dots


def build_test_document(width_px: int, height_px: int, dot_hps_px: int, dot_vps_px: int,
                        dot_pattern, dot_radius_px: int = 1, palette=None,
                        lattice_origin: tuple[int, int] = (0, 0), logo: bool = True,
                        grid: WavelengthGrid = DEFAULT_GRID) -> DocumentModel:
    """Synthetic test page: four ink patches, a black text band and tracking dots.

    Tile cell ``(row, col)`` is printed at the center of sub-cell
    ``(row, col)`` of every ``dot_hps_px`` x ``dot_vps_px`` lattice cell.
    An empty or all-zero pattern produces no dot layer.
    """
    if width_px <= 0 or height_px <= 0:
        raise InvalidArgument("document dimensions must be positive")
    palette = default_palette(grid) if palette is None else tuple(palette)
    index_map = np.full((height_px, width_px), PAPER, dtype=np.uint8)
    if logo:
        for ink, (x0, y0, x1, y1) in logo_regions(width_px, height_px).items():
            index_map[y0:y1, x0:x1] = ink

    tile = np.asarray(dot_pattern, dtype=bool)
    if tile.size == 0 or not tile.any():
        return DocumentModel(width_px, height_px, palette, index_map, None, None)
    if tile.ndim != 2:
        raise InvalidArgument("dot pattern must be a 2-D binary matrix")
    if dot_hps_px <= 0 or dot_vps_px <= 0 or dot_radius_px < 0:
        raise InvalidArgument("lattice periods must be positive")
    rows, cols = tile.shape
    min_pitch = 2 * dot_radius_px + 2
    if dot_hps_px // cols < min_pitch or dot_vps_px // rows < min_pitch:
        raise InvalidArgument(
            f"{rows}x{cols} tile of r={dot_radius_px} dots does not fit a "
            f"{dot_hps_px}x{dot_vps_px} cell")
    lattice = DotLattice(int(dot_hps_px), int(dot_vps_px), tile, tuple(lattice_origin),
                         int(dot_radius_px))
    dots = tuple(lattice_dots(width_px, height_px, lattice))
    return DocumentModel(width_px, height_px, palette, index_map, dots or None, lattice)


@dataclass(frozen=True)
class ScanConfig:
    dpi: int = 100
    noise_sigma: float = 0.0
    max_feed_offset_px: int = 0
    bit_depth: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if self.dpi <= 0:
            raise InvalidArgument("dpi must be positive")
        if self.bit_depth not in (8, 16):
            raise InvalidArgument("bit_depth must be 8 or 16")
        if not 0 <= self.noise_sigma < 0.5:
            raise InvalidArgument("noise_sigma must be in [0, 0.5)")
        if self.max_feed_offset_px < 0:
            raise InvalidArgument("max_feed_offset_px must be >= 0")

    @property
    def full_scale(self) -> int:
        return (1 << self.bit_depth) - 1


@dataclass(frozen=True, eq=False)
class BandScan:
    band_name: str
    center_nm: float
    image: np.ndarray
    true_offset_px: tuple[int, int] = (0, 0)
    bit_depth: int = 8

    def __eq__(self, other):
        if not isinstance(other, BandScan):
            return NotImplemented
        return (self.band_name == other.band_name and self.center_nm == other.center_nm
                and self.true_offset_px == other.true_offset_px
                and self.bit_depth == other.bit_depth
                and self.image.dtype == other.image.dtype
                and np.array_equal(self.image, other.image))

    __hash__ = None


def quantize(value, bit_depth: int):
    """Round half up onto ``2**bit_depth - 1`` levels, saturating."""
    if bit_depth not in (8, 16):
        raise InvalidArgument("bit_depth must be 8 or 16")
    full = (1 << bit_depth) - 1
    q = np.floor(np.clip(np.asarray(value, dtype=np.float64), 0.0, 1.0) * full + 0.5)
    q = np.minimum(q, full).astype(np.uint8 if bit_depth == 8 else np.uint16)
    return int(q) if q.ndim == 0 else q


def shift_image(image: np.ndarray, dx: int, dy: int, fill=0) -> np.ndarray:
    """``out[y, x] = image[y - dy, x - dx]``; uncovered pixels get ``fill``."""
    h, w = image.shape
    out = np.full_like(image, fill)
    if abs(dx) >= w or abs(dy) >= h:
        return out
    out[max(dy, 0):h + min(dy, 0), max(dx, 0):w + min(dx, 0)] = \
        image[max(-dy, 0):h + min(-dy, 0), max(-dx, 0):w + min(-dx, 0)]
    return out


def pass_rng(config: ScanConfig, pass_index: int) -> np.random.Generator:
    return np.random.default_rng((int(config.rng_seed) ^ int(pass_index)) & SEED_MASK)


def render_intensity(doc: DocumentModel, emission: Spectrum, sensor: Spectrum | None = None) -> np.ndarray:
    """Noise-free, unshifted intensity image in [0, 1]."""
    return palette_lut(doc, emission, sensor)[composite_index_map(doc)]


def palette_lut(doc: DocumentModel, emission: Spectrum, sensor: Spectrum | None = None) -> np.ndarray:
    """Intensity of every palette entry: band response times emission peak."""
    sensor = flat_sensor(emission.grid) if sensor is None else sensor
    stack = np.array([s.values for s in doc.palette])
    return band_response_table(stack, emission, sensor) * emission.peak


def _emission_center(emission: Spectrum) -> float:
    w = emission.values
    return float(np.sum(emission.grid.wavelengths * w) / np.sum(w))


def scan_band(doc: DocumentModel, emission: Spectrum | None, sensor: Spectrum | None,
              config: ScanConfig, pass_index: int, center_nm: float | None = None) -> BandScan:
    """One full-document pass under a single energized LED.

    The pass generator is seeded with ``rng_seed XOR pass_index``; the
    misfeed offset is drawn first, then the noise field.
    """
    if emission is None or emission.peak <= 0:
        raise NoIllumination("no LED is energized for this pass")
    sensor = flat_sensor(emission.grid) if sensor is None else sensor
    rng = pass_rng(config, pass_index)
    m = config.max_feed_offset_px
    dx, dy = (int(v) for v in rng.integers(-m, m + 1, size=2))

    sheet = composite_index_map(doc)
    shifted = shift_image(sheet, dx, dy, fill=PAPER)  # white scanner backing
    intensity = palette_lut(doc, emission, sensor)[shifted]
    if config.noise_sigma > 0:
        intensity = intensity + rng.normal(0.0, config.noise_sigma, size=intensity.shape)
    image = quantize(intensity, config.bit_depth)
    center = _emission_center(emission) if center_nm is None else float(center_nm)
    return BandScan(emission.name, center, image, (dx, dy), config.bit_depth)


def scan_sequence(doc: DocumentModel, source_state: LightSourceState, sensor: Spectrum | None,
                  config: ScanConfig) -> list[BandScan]:
    """Step the switch through every populated position, one pass each."""
    if not source_state.leds:
        raise InvalidArgument("light source has no LEDs")
    grid = doc.grid
    scans = []
    state = source_state
    for position in range(1, len(source_state.leds) + 1):
        transit, state = rotate_to(state, position)
        assert active_emission(transit, grid) is None
        emission = active_emission(state, grid)
        scans.append(scan_band(doc, emission, sensor, config, position - 1,
                               center_nm=state.energized.center_nm))
    return scans


def save_document(doc: DocumentModel, path) -> None:
    lat = doc.lattice
    np.savez_compressed(
        path,
        index_map=doc.index_map,
        palette_values=np.array([s.values for s in doc.palette]),
        palette_names=np.array([s.name for s in doc.palette]),
        grid=np.array([doc.grid.start_nm, doc.grid.step_nm, doc.grid.count]),
        dot_layer=np.array(doc.dot_layer or [], dtype=np.int64).reshape(-1, 3),
        lattice=np.array([] if lat is None else
                         [lat.hps_px, lat.vps_px, lat.origin[0], lat.origin[1], lat.radius_px],
                         dtype=np.int64),
        tile=np.zeros((0, 0), bool) if lat is None else np.asarray(lat.tile, bool),
    )


def load_document(path) -> DocumentModel:
    from .spectral import make_wavelength_grid

    with np.load(path, allow_pickle=False) as z:
        start, step, count = z["grid"]
        grid = make_wavelength_grid(start, step, int(count))
        palette = tuple(Spectrum(grid, v, "reflectance", str(n))
                        for v, n in zip(z["palette_values"], z["palette_names"]))
        index_map = z["index_map"]
        dots = tuple(tuple(int(v) for v in d) for d in z["dot_layer"])
        lat = z["lattice"]
        lattice = None
        if lat.size:
            lattice = DotLattice(int(lat[0]), int(lat[1]), z["tile"].astype(bool),
                                 (int(lat[2]), int(lat[3])), int(lat[4]))
    h, w = index_map.shape
    return DocumentModel(w, h, palette, index_map, dots or None, lattice)
