"""Band registration, cube assembly, MSQB persistence and display composites."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .errors import (BadMagic, CubeFormatError, InvalidArgument, SizeMismatch,
                     TruncatedPayload, UnsupportedVersion)
from .pnm import write_pgm, write_ppm
from .scanner import BandScan

MAGIC = b"MSQB"
VERSION = 1
_HEADER = struct.Struct("<4sHHIII")
DEFAULT_WINDOW = 8
FLAT_STRETCH_VALUE = 128


@dataclass(frozen=True, eq=False)
class Cube:
    """Band-sequential stack of registered band images.

    ``data`` has shape ``(band_count, height_px, width_px)``.  The applied
    offsets are provenance only: they are not part of the MSQB file and do
    not take part in equality.
    """

    wavelengths_nm: np.ndarray
    data: np.ndarray
    bit_depth: int = 8
    offsets_applied: tuple[tuple[int, int], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        wl = np.asarray(self.wavelengths_nm, dtype=np.float64)
        data = np.asarray(self.data)
        if self.bit_depth not in (8, 16):
            raise InvalidArgument("bit_depth must be 8 or 16")
        if data.ndim != 3 or min(data.shape) < 1:
            raise InvalidArgument("cube data must be a non-empty (bands, height, width) array")
        if wl.shape != (data.shape[0],):
            raise InvalidArgument("one wavelength per band is required")
        if len(wl) > 1:
            steps = np.diff(wl)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise InvalidArgument("band wavelengths must be strictly monotone")
        dtype = np.uint8 if self.bit_depth == 8 else np.uint16
        if data.dtype != dtype:
            if data.size and (data.min() < 0 or data.max() > (1 << self.bit_depth) - 1):
                raise InvalidArgument("samples exceed the bit depth")
            data = data.astype(dtype)
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "data", data)

    @property
    def band_count(self) -> int:
        return self.data.shape[0]

    @property
    def height_px(self) -> int:
        return self.data.shape[1]

    @property
    def width_px(self) -> int:
        return self.data.shape[2]

    def band(self, index: int) -> np.ndarray:
        return self.data[index]

    def __eq__(self, other):
        if not isinstance(other, Cube):
            return NotImplemented
        return (self.bit_depth == other.bit_depth
                and np.array_equal(self.wavelengths_nm, other.wavelengths_nm)
                and self.data.dtype == other.data.dtype
                and np.array_equal(self.data, other.data))

    __hash__ = None


def _window_sums(image: np.ndarray, h: int, w: int) -> np.ndarray:
    """Sum of every ``h`` x ``w`` window, indexed by its top-left corner."""
    s = np.zeros((image.shape[0] + 1, image.shape[1] + 1))
    s[1:, 1:] = image.cumsum(0).cumsum(1)
    return s[h:, w:] - s[:-h, w:] - s[h:, :-w] + s[:-h, :-w]


def ncc_surface(reference: np.ndarray, moving: np.ndarray, window: int) -> np.ndarray:
    """NCC of ``moving`` against ``reference`` for every shift in ``[-window, window]^2``.

    Entry ``[window + dy, window + dx]`` compares ``reference[y, x]`` with
    ``moving[y + dy, x + dx]`` over the reference interior that stays valid
    for every shift.  Undefined correlations (flat windows) are 0.
    """
    ref = np.asarray(reference, dtype=np.float64)
    mov = np.asarray(moving, dtype=np.float64)
    if ref.shape != mov.shape:
        raise InvalidArgument("images differ in shape")
    H, W = ref.shape
    m = int(window)
    h, w = H - 2 * m, W - 2 * m
    if h < 2 or w < 2:
        raise InvalidArgument(f"search window {m} too large for a {W}x{H} image")
    template = ref[m:m + h, m:m + w]
    template = template - template.mean()
    t_norm = np.sqrt(np.sum(template * template))
    mov = mov - mov.mean()
    numerator = fftconvolve(mov, template[::-1, ::-1], mode="valid")
    n = h * w
    s1 = _window_sums(mov, h, w)
    s2 = _window_sums(mov * mov, h, w)
    var = np.maximum(s2 - s1 * s1 / n, 0.0)
    # flat windows: correlation undefined, and FFT round-off must not become a peak
    peak = float(np.max(np.abs(mov))) if mov.size else 0.0
    ok = (var > 1e-9 * peak * peak * n) & (t_norm > 0)
    out = np.zeros_like(numerator)
    out[ok] = numerator[ok] / (t_norm * np.sqrt(var[ok]))
    return np.clip(out, -1.0, 1.0)


def best_shift(reference: np.ndarray, moving: np.ndarray, window: int) -> tuple[int, int]:
    surface = ncc_surface(reference, moving, window)
    if not np.any(surface):
        return 0, 0
    iy, ix = np.unravel_index(int(np.argmax(surface)), surface.shape)
    return int(ix) - window, int(iy) - window


def register_bands(bands, reference_index: int, window: int = DEFAULT_WINDOW) -> list[tuple[int, int]]:
    """Integer (dx, dy) of every band relative to the reference band.

    Exhaustive normalized cross-correlation over ``[-window, window]^2``;
    the reference maps to (0, 0).
    """
    bands = list(bands)
    if len(bands) < 2:
        raise InvalidArgument("registration needs at least two bands")
    if not 0 <= reference_index < len(bands):
        raise InvalidArgument(f"reference index {reference_index} out of range")
    images = [b.image if isinstance(b, BandScan) else np.asarray(b) for b in bands]
    shape = images[0].shape
    if any(im.shape != shape for im in images):
        raise InvalidArgument("bands differ in dimensions")
    ref = images[reference_index]
    return [(0, 0) if i == reference_index else best_shift(ref, im, window)
            for i, im in enumerate(images)]


def assemble_cube(bands, offsets) -> Cube:
    """Undo ``offsets`` and crop every band to the region observed by all."""
    bands = list(bands)
    if not bands:
        raise InvalidArgument("no bands to assemble")
    offsets = [tuple(int(v) for v in o) for o in offsets]
    if len(offsets) != len(bands):
        raise InvalidArgument("one offset per band is required")
    images = [b.image for b in bands]
    H, W = images[0].shape
    if any(im.shape != (H, W) for im in images):
        raise InvalidArgument("bands differ in dimensions")
    dxs = [o[0] for o in offsets]
    dys = [o[1] for o in offsets]
    x0, x1 = max(0, -min(dxs)), W - max(0, max(dxs))
    y0, y1 = max(0, -min(dys)), H - max(0, max(dys))
    if x1 <= x0 or y1 <= y0:
        raise InvalidArgument("offsets leave no common region")
    data = np.stack([im[y0 + dy:y1 + dy, x0 + dx:x1 + dx] for im, (dx, dy) in zip(images, offsets)])
    bit_depths = {b.bit_depth for b in bands}
    if len(bit_depths) != 1:
        raise InvalidArgument("bands differ in bit depth")
    return Cube(np.array([b.center_nm for b in bands]), data, bit_depths.pop(), tuple(offsets))


def cube_to_bytes(cube: Cube) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, cube.bit_depth, cube.width_px, cube.height_px,
                          cube.band_count)
    wl = cube.wavelengths_nm.astype("<f8").tobytes()
    samples = cube.data.astype("u1" if cube.bit_depth == 8 else "<u2").tobytes()
    return header + wl + samples


def cube_from_bytes(raw: bytes) -> Cube:
    if len(raw) < len(MAGIC) or raw[:4] != MAGIC:
        if len(raw) < len(MAGIC) and MAGIC.startswith(raw):
            raise TruncatedPayload("file ends inside the magic number")
        raise BadMagic(f"expected magic {MAGIC!r}, found {raw[:4]!r}")
    if len(raw) < _HEADER.size:
        raise TruncatedPayload("file ends inside the header")
    _, version, bit_depth, width, height, bands = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported MSQB version {version}")
    if bit_depth not in (8, 16):
        raise CubeFormatError(f"invalid bit depth {bit_depth}")
    if min(width, height, bands) < 1:
        raise CubeFormatError("cube dimensions must be positive")
    sample_size = 1 if bit_depth == 8 else 2
    wl_end = _HEADER.size + 8 * bands
    expected = wl_end + width * height * bands * sample_size
    if len(raw) < expected:
        raise TruncatedPayload(f"payload has {len(raw)} bytes, header promises {expected}")
    if len(raw) > expected:
        raise SizeMismatch(f"{len(raw) - expected} bytes beyond the promised payload")
    wl = np.frombuffer(raw, dtype="<f8", count=bands, offset=_HEADER.size).astype(np.float64)
    data = np.frombuffer(raw, dtype="u1" if bit_depth == 8 else "<u2", offset=wl_end)
    data = data.reshape(bands, height, width).astype(np.uint8 if bit_depth == 8 else np.uint16)
    try:
        return Cube(wl, data, bit_depth)
    except InvalidArgument as exc:
        raise CubeFormatError(str(exc)) from exc


def write_cube(cube: Cube, path) -> None:
    Path(path).write_bytes(cube_to_bytes(cube))


def read_cube(path) -> Cube:
    return cube_from_bytes(Path(path).read_bytes())


def stretch_to_u8(band: np.ndarray) -> np.ndarray:
    """Min-max stretch to 0..255; a flat band maps to mid-gray."""
    band = np.asarray(band, dtype=np.float64)
    lo, hi = band.min(), band.max()
    if hi == lo:
        return np.full(band.shape, FLAT_STRETCH_VALUE, dtype=np.uint8)
    return np.floor((band - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)


def composite_rgb(cube: Cube, r_band: int, g_band: int, b_band: int, path=None) -> np.ndarray:
    """Map three bands to R, G, B; optionally write a binary PPM."""
    for idx in (r_band, g_band, b_band):
        if not 0 <= idx < cube.band_count:
            raise InvalidArgument(f"band index {idx} out of range 0..{cube.band_count - 1}")
    rgb = np.stack([stretch_to_u8(cube.band(i)) for i in (r_band, g_band, b_band)], axis=-1)
    if path is not None:
        write_ppm(path, rgb)
    return rgb


def export_band(cube: Cube, index: int, path) -> None:
    if not 0 <= index < cube.band_count:
        raise InvalidArgument(f"band index {index} out of range 0..{cube.band_count - 1}")
    write_pgm(path, cube.band(index), maxval=(1 << cube.bit_depth) - 1,
              comments={"center_nm": f"{cube.wavelengths_nm[index]:g}"})
