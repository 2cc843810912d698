"""Wavelength grids, sampled spectra, LED emission models and band integration.

All spectra in a computation share one :class:`WavelengthGrid`; the sampled
values are the ground truth (there is no continuous-domain contract).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateIllumination, InvalidArgument

GRID_MIN_NM = 300.0
GRID_MAX_NM = 900.0
FWHM_TO_SIGMA = 2.3548  # 2 * sqrt(2 ln 2), rounded as in common LED datasheets

SPECTRUM_KINDS = ("power", "reflectance", "sensitivity")


@dataclass(frozen=True)
class WavelengthGrid:
    start_nm: float
    step_nm: float
    count: int

    def __post_init__(self):
        if not (self.step_nm > 0):
            raise InvalidArgument(f"step_nm must be positive, got {self.step_nm}")
        if int(self.count) != self.count or self.count < 2:
            raise InvalidArgument(f"count must be an integer >= 2, got {self.count}")
        object.__setattr__(self, "count", int(self.count))
        if self.start_nm < GRID_MIN_NM - 1e-9 or self.stop_nm > GRID_MAX_NM + 1e-9:
            raise InvalidArgument(
                f"grid {self.start_nm}-{self.stop_nm} nm leaves [{GRID_MIN_NM}, {GRID_MAX_NM}]"
            )

    @property
    def stop_nm(self) -> float:
        """Wavelength of the last sample."""
        return self.start_nm + (self.count - 1) * self.step_nm

    @property
    def wavelengths(self) -> np.ndarray:
        return self.start_nm + np.arange(self.count) * self.step_nm

    def nearest_index(self, wavelength_nm: float) -> int:
        i = int(math.floor((wavelength_nm - self.start_nm) / self.step_nm + 0.5))
        return min(max(i, 0), self.count - 1)


def make_wavelength_grid(start_nm: float, step_nm: float, count: int) -> WavelengthGrid:
    return WavelengthGrid(float(start_nm), float(step_nm), count)


DEFAULT_GRID = make_wavelength_grid(380.0, 1.0, 401)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Non-negative samples of a function of wavelength on ``grid``.

    ``kind`` is one of ``power``, ``reflectance`` or ``sensitivity``;
    reflectance spectra are additionally bounded by 1.
    """

    grid: WavelengthGrid
    values: np.ndarray
    kind: str = "power"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.count,):
            raise InvalidArgument(
                f"expected {self.grid.count} samples, got shape {values.shape}"
            )
        if self.kind not in SPECTRUM_KINDS:
            raise InvalidArgument(f"unknown spectrum kind {self.kind!r}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidArgument("spectrum values must be finite and non-negative")
        if self.kind == "reflectance" and np.any(values > 1.0):
            raise InvalidArgument("reflectance values must not exceed 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, Spectrum):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.kind == other.kind
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def peak(self) -> float:
        return float(self.values.max())

    def scaled(self, factor: float) -> Spectrum:
        if factor < 0:
            raise InvalidArgument("scale factor must be non-negative")
        return Spectrum(self.grid, self.values * factor, self.kind, self.name)


def constant_spectrum(grid: WavelengthGrid, value: float, kind: str = "reflectance",
                      name: str = "") -> Spectrum:
    return Spectrum(grid, np.full(grid.count, float(value)), kind, name)


def flat_sensor(grid: WavelengthGrid = DEFAULT_GRID) -> Spectrum:
    """Default sensor response: 1 everywhere."""
    return constant_spectrum(grid, 1.0, kind="sensitivity", name="flat")


@dataclass(frozen=True)
class LedSpec:
    name: str
    center_nm: float
    fwhm_nm: float
    flux: float
    part_number: str = ""

    def __post_init__(self):
        if not 400.0 <= self.center_nm <= 700.0:
            raise InvalidArgument(f"{self.name}: center {self.center_nm} nm outside [400, 700]")
        if not self.fwhm_nm > 0:
            raise InvalidArgument(f"{self.name}: fwhm must be positive")
        if not self.flux > 0:
            raise InvalidArgument(f"{self.name}: flux must be positive")

    @property
    def sigma_nm(self) -> float:
        return self.fwhm_nm / FWHM_TO_SIGMA

    @property
    def slug(self) -> str:
        return band_slug(self.name)


def band_slug(name: str) -> str:
    """``'Royal Blue'`` -> ``'royal-blue'``."""
    return "-".join(name.lower().replace("_", " ").replace("-", " ").split())


# Luxeon Rebel LEDs of the prototype light source, descending wavelength.
# Flux column is "lm,mW" in the datasheet; used as one relative scale.
_LED_TABLE = (
    LedSpec("Deep Red", 655.0, 20.0, 640.0, "LXM3-PD01"),
    LedSpec("Red-Orange", 617.0, 20.0, 90.0, "LXML-PH01-0050"),
    LedSpec("Amber", 590.0, 20.0, 77.0, "LXML-PL01-0040"),
    LedSpec("Green", 530.0, 30.0, 150.0, "LXML-PM01-0090"),
    LedSpec("Cyan", 505.0, 30.0, 122.0, "LXML-PE01-0070"),
    LedSpec("Royal Blue", 447.5, 20.0, 1030.0, "LXML-PR02-A900"),
)


def led_table() -> list[LedSpec]:
    return list(_LED_TABLE)


def led_by_name(name: str) -> LedSpec:
    slug = band_slug(name)
    for led in _LED_TABLE:
        if led.slug == slug:
            return led
    raise InvalidArgument(f"no LED named {name!r} in the Luxeon table")


def reference_flux(leds=None) -> float:
    leds = _LED_TABLE if leds is None else leds
    return max(led.flux for led in leds)


def gaussian_spd(led: LedSpec, grid: WavelengthGrid = DEFAULT_GRID) -> Spectrum:
    """Relative SPD of ``led`` with unit value at the sample nearest its center.

    The bandwidth is read as a FWHM.  Samples are normalized by their own
    maximum, so the peak is exactly 1.0 even when the center falls between
    grid samples.
    """
    lam = grid.wavelengths
    values = np.exp(-0.5 * ((lam - led.center_nm) / led.sigma_nm) ** 2)
    values /= values.max()
    return Spectrum(grid, values, "power", led.name)


def scale_to_flux(spd: Spectrum, flux: float, flux_reference: float | None = None) -> Spectrum:
    """Scale ``spd`` by ``flux / flux_reference``.

    ``flux_reference`` defaults to the brightest LED of the table (1030).
    """
    if flux < 0:
        raise InvalidArgument(f"flux must be non-negative, got {flux}")
    ref = reference_flux() if flux_reference is None else flux_reference
    if not ref > 0:
        raise InvalidArgument("flux reference must be positive")
    return spd.scaled(flux / ref)


def trapezoid(values: np.ndarray, step: float) -> float:
    values = np.asarray(values, dtype=np.float64)
    return float(step * (values.sum(axis=-1) - 0.5 * (values[..., 0] + values[..., -1])))


def _check_same_grid(*spectra: Spectrum) -> WavelengthGrid:
    grid = spectra[0].grid
    for s in spectra[1:]:
        if s.grid != grid:
            raise InvalidArgument("spectra are sampled on different grids")
    return grid


def band_response(reflectance: Spectrum, illumination: Spectrum, sensor: Spectrum | None = None,
                  normalize: bool = True) -> float:
    """Integrated response of a surface under one illumination band.

    With ``normalize`` (the default) the integral of
    reflectance * illumination * sensor is divided by that of
    illumination * sensor, which makes the result exposure-compensated and
    bounded by the reflectance range.
    """
    if sensor is None:
        sensor = flat_sensor(illumination.grid)
    grid = _check_same_grid(reflectance, illumination, sensor)
    weight = illumination.values * sensor.values
    numerator = trapezoid(reflectance.values * weight, grid.step_nm)
    if not normalize:
        return numerator
    denominator = trapezoid(weight, grid.step_nm)
    if denominator <= 0:
        raise DegenerateIllumination("illumination * sensor integrates to zero")
    return numerator / denominator


def band_response_table(reflectances: np.ndarray, illumination: Spectrum,
                        sensor: Spectrum | None = None) -> np.ndarray:
    """Vectorized normalized :func:`band_response` for a stack of reflectances.

    ``reflectances`` has shape ``(n, grid.count)``.
    """
    if sensor is None:
        sensor = flat_sensor(illumination.grid)
    grid = _check_same_grid(illumination, sensor)
    refl = np.atleast_2d(np.asarray(reflectances, dtype=np.float64))
    if refl.shape[-1] != grid.count:
        raise InvalidArgument("reflectance stack does not match the grid")
    weight = illumination.values * sensor.values
    denominator = trapezoid(weight, grid.step_nm)
    if denominator <= 0:
        raise DegenerateIllumination("illumination * sensor integrates to zero")
    return np.array([trapezoid(r * weight, grid.step_nm) for r in refl]) / denominator


def write_spectrum(spectrum: Spectrum, path) -> None:
    data = np.column_stack([spectrum.grid.wavelengths, spectrum.values])
    header = f"{spectrum.name or 'spectrum'} ({spectrum.kind})\nwavelength_nm value"
    np.savetxt(path, data, fmt="%.6f %.17g", header=header, comments="# ")


def read_spectrum(path, grid: WavelengthGrid | None = None, kind: str = "reflectance",
                  name: str | None = None) -> Spectrum:
    """Load a two-column ``wavelength_nm value`` text file.

    Without ``grid`` the file must be uniformly sampled and defines the grid.
    With ``grid`` the samples are linearly interpolated onto it, holding the
    end values outside the file's range.
    """
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidArgument(f"cannot read spectrum {path}: {exc}") from exc
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise InvalidArgument(f"{path}: expected two columns and at least two rows")
    lam, val = data[:, 0], data[:, 1]
    if np.any(np.diff(lam) <= 0):
        raise InvalidArgument(f"{path}: wavelengths must be strictly increasing")
    name = Path(path).stem if name is None else name
    if grid is None:
        steps = np.diff(lam)
        if not np.allclose(steps, steps[0], rtol=0, atol=1e-6):
            raise InvalidArgument(f"{path}: non-uniform sampling needs an explicit grid")
        grid = make_wavelength_grid(lam[0], steps[0], len(lam))
        return Spectrum(grid, val, kind, name)
    return Spectrum(grid, np.interp(grid.wavelengths, lam, val), kind, name)
