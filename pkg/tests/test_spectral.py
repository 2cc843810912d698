import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msscan.errors import DegenerateIllumination, InvalidArgument
from msscan.spectral import (DEFAULT_GRID, LedSpec, Spectrum, band_response, constant_spectrum,
                             flat_sensor, gaussian_spd, led_table, make_wavelength_grid,
                             read_spectrum, scale_to_flux, trapezoid, write_spectrum)

TABLE = [
    ("Deep Red", 655.0, 20.0, 640.0, "LXM3-PD01"),
    ("Red-Orange", 617.0, 20.0, 90.0, "LXML-PH01-0050"),
    ("Amber", 590.0, 20.0, 77.0, "LXML-PL01-0040"),
    ("Green", 530.0, 30.0, 150.0, "LXML-PM01-0090"),
    ("Cyan", 505.0, 30.0, 122.0, "LXML-PE01-0070"),
    ("Royal Blue", 447.5, 20.0, 1030.0, "LXML-PR02-A900"),
]


def trapezoid_oracle(values, step):
    """Per-interval summation, written independently of the vectorized rule."""
    total = 0.0
    for a, b in zip(values[:-1], values[1:]):
        total += 0.5 * (a + b) * step
    return total


def box(grid, lo, hi):
    lam = grid.wavelengths
    return Spectrum(grid, ((lam >= lo) & (lam <= hi)).astype(float), "reflectance")


# -- grid --------------------------------------------------------------------

@pytest.mark.parametrize("start, step, count, stop", [(380, 1, 401, 780), (400, 5, 61, 700)])
def test_grid_coverage(start, step, count, stop):
    g = make_wavelength_grid(start, step, count)
    assert g.stop_nm == stop
    assert g.wavelengths[0] == start and g.wavelengths[-1] == stop
    assert len(g.wavelengths) == count


@pytest.mark.parametrize("args", [(400, -1, 10), (400, 0, 10), (400, 1, 1), (250, 1, 10),
                                  (800, 1, 200)])
def test_grid_rejects_bad_sampling(args):
    with pytest.raises(InvalidArgument):
        make_wavelength_grid(*args)


@given(st.floats(300, 600), st.floats(0.1, 5), st.integers(2, 60))
def test_grid_samples_strictly_increase(start, step, count):
    g = make_wavelength_grid(start, step, count)
    lam = g.wavelengths
    assert np.all(np.diff(lam) > 0)
    np.testing.assert_allclose(lam, start + np.arange(count) * step)


def test_default_grid_is_380_780_at_1nm():
    assert (DEFAULT_GRID.start_nm, DEFAULT_GRID.step_nm, DEFAULT_GRID.count) == (380, 1, 401)


# -- LED table ---------------------------------------------------------------

def test_led_table_matches_luxeon_rows():
    rows = [(l.name, l.center_nm, l.fwhm_nm, l.flux, l.part_number) for l in led_table()]
    assert rows == TABLE


def test_led_table_ends():
    leds = led_table()
    assert len(leds) == 6
    assert (leds[0].name, leds[0].center_nm, leds[0].part_number) == ("Deep Red", 655, "LXM3-PD01")
    assert (leds[5].name, leds[5].flux, leds[5].part_number) == ("Royal Blue", 1030, "LXML-PR02-A900")
    centers = [l.center_nm for l in leds]
    assert centers == sorted(centers, reverse=True)


@pytest.mark.parametrize("center, fwhm, flux", [(399, 20, 1), (701, 20, 1), (500, 0, 1), (500, 20, 0)])
def test_led_spec_validation(center, fwhm, flux):
    with pytest.raises(InvalidArgument):
        LedSpec("x", center, fwhm, flux)


# -- gaussian_spd ------------------------------------------------------------

def test_deep_red_peaks_at_655():
    spd = gaussian_spd(led_table()[0])
    assert DEFAULT_GRID.wavelengths[np.argmax(spd.values)] == 655
    assert spd.peak == 1.0


def test_royal_blue_half_maximum():
    spd = gaussian_spd(led_table()[5])
    value = np.interp(457.5, DEFAULT_GRID.wavelengths, spd.values)
    assert value == pytest.approx(0.5, abs=0.01)
    assert spd.values[DEFAULT_GRID.nearest_index(447.5)] == 1.0


@pytest.mark.parametrize("led", led_table(), ids=lambda l: l.name)
def test_spd_integral_against_trapezoid_oracle(led):
    spd = gaussian_spd(led)
    fast = trapezoid(spd.values, DEFAULT_GRID.step_nm)
    assert fast == pytest.approx(trapezoid_oracle(list(spd.values), DEFAULT_GRID.step_nm), rel=1e-12)
    sigma = led.fwhm_nm / 2.3548
    analytic = sigma * math.sqrt(2 * math.pi)
    on_grid = float(led.center_nm).is_integer()
    assert fast == pytest.approx(analytic, rel=1e-6 if on_grid else 5e-3)


@pytest.mark.parametrize("led", led_table(), ids=lambda l: l.name)
def test_spd_half_maximum_points_within_one_step(led):
    spd = gaussian_spd(led)
    lam, v = DEFAULT_GRID.wavelengths, spd.values
    i = int(np.argmax(v))
    left = np.interp(0.5, v[:i + 1], lam[:i + 1])
    right = np.interp(0.5, v[i:][::-1], lam[i:][::-1])
    assert abs(left - (led.center_nm - led.fwhm_nm / 2)) <= DEFAULT_GRID.step_nm
    assert abs(right - (led.center_nm + led.fwhm_nm / 2)) <= DEFAULT_GRID.step_nm


@pytest.mark.parametrize("led", led_table(), ids=lambda l: l.name)
def test_spd_unimodal_and_symmetric(led):
    spd = gaussian_spd(led)
    v = spd.values
    i = int(np.argmax(v))
    # a half-step center ties two samples; either one is the nearest sample
    assert abs(DEFAULT_GRID.wavelengths[i] - led.center_nm) <= DEFAULT_GRID.step_nm / 2
    assert v[DEFAULT_GRID.nearest_index(led.center_nm)] == v[i]
    assert np.all(np.diff(v[:i + 1]) >= 0) and np.all(np.diff(v[i:]) <= 0)
    # mirror about the true center, allowing one grid step of sampling offset
    lam = DEFAULT_GRID.wavelengths
    mirrored = np.interp(2 * led.center_nm - lam, lam, v)
    inside = np.abs(lam - led.center_nm) < 3 * led.fwhm_nm
    assert np.all(np.abs(mirrored - v)[inside] <= np.max(np.abs(np.diff(v))))


# -- scale_to_flux -----------------------------------------------------------

def test_scale_to_flux_examples():
    blue = gaussian_spd(led_table()[5])
    assert scale_to_flux(blue, 1030) == blue
    assert np.all(scale_to_flux(blue, 0).values == 0)
    amber = scale_to_flux(gaussian_spd(led_table()[2]), 77)
    assert amber.peak == pytest.approx(77 / 1030)
    assert amber.peak == pytest.approx(0.0748, abs=5e-5)


def test_scale_to_flux_rejects_negative():
    with pytest.raises(InvalidArgument):
        scale_to_flux(gaussian_spd(led_table()[0]), -1)


# -- band_response -----------------------------------------------------------

def test_band_response_extremes(emissions, grid):
    for emission in emissions.values():
        assert band_response(constant_spectrum(grid, 1.0), emission, flat_sensor(grid)) == 1.0
        assert band_response(constant_spectrum(grid, 0.0), emission, flat_sensor(grid)) == 0.0


def test_box_reflectance_prefers_deep_red(emissions, grid):
    refl = box(grid, 640, 670)
    sensor = flat_sensor(grid)

    def oracle(illum):
        w = [r * i * s for r, i, s in zip(refl.values, illum.values, sensor.values)]
        d = [i * s for i, s in zip(illum.values, sensor.values)]
        return trapezoid_oracle(w, 1.0) / trapezoid_oracle(d, 1.0)

    red = band_response(refl, emissions["Deep Red"], sensor)
    blue = band_response(refl, emissions["Royal Blue"], sensor)
    assert red == pytest.approx(oracle(emissions["Deep Red"]), rel=1e-12)
    assert blue == pytest.approx(oracle(emissions["Royal Blue"]), rel=1e-12, abs=1e-300)
    assert red > 0.8 and blue < 1e-10
    assert red > blue


def test_band_response_errors(grid):
    other = make_wavelength_grid(400, 5, 61)
    with pytest.raises(InvalidArgument):
        band_response(constant_spectrum(grid, 0.5), constant_spectrum(other, 1.0, "power"))
    with pytest.raises(DegenerateIllumination):
        band_response(constant_spectrum(grid, 0.5), constant_spectrum(grid, 0.0, "power"))


def test_unnormalized_response_scales_with_flux(emissions, grid):
    refl = constant_spectrum(grid, 0.5)
    a = band_response(refl, emissions["Green"], normalize=False)
    b = band_response(refl, emissions["Green"].scaled(2.0), normalize=False)
    assert b == pytest.approx(2 * a, rel=1e-12)


reflectance_arrays = st.lists(st.floats(0, 1), min_size=DEFAULT_GRID.count,
                              max_size=DEFAULT_GRID.count).map(np.array)


@settings(max_examples=40, deadline=None)
@given(reflectance_arrays, st.floats(0, 1), st.integers(0, 5))
def test_band_response_monotone(r1, bump, led_index):
    r2 = np.minimum(r1 + bump, 1.0)
    illum = gaussian_spd(led_table()[led_index])
    a = band_response(Spectrum(DEFAULT_GRID, r1, "reflectance"), illum)
    b = band_response(Spectrum(DEFAULT_GRID, r2, "reflectance"), illum)
    assert a <= b + 1e-12
    assert 0.0 <= a <= 1.0 + 1e-12


@settings(max_examples=40, deadline=None)
@given(reflectance_arrays, st.floats(1e-3, 1e3), st.integers(0, 5))
def test_band_response_invariant_to_illumination_scale(r, c, led_index):
    refl = Spectrum(DEFAULT_GRID, r, "reflectance")
    illum = gaussian_spd(led_table()[led_index])
    assert band_response(refl, illum.scaled(c)) == pytest.approx(band_response(refl, illum), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=2, max_size=200), st.floats(0.1, 5))
def test_trapezoid_matches_oracle(values, step):
    expected = trapezoid_oracle(values, step)
    assert trapezoid(np.array(values), step) == pytest.approx(expected, rel=1e-12, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5), st.floats(0, 2000))
def test_spectra_stay_non_negative(led_index, flux):
    spd = scale_to_flux(gaussian_spd(led_table()[led_index]), flux)
    assert np.all(spd.values >= 0)


def test_spectrum_validation(grid):
    with pytest.raises(InvalidArgument):
        Spectrum(grid, np.full(grid.count, -0.1))
    with pytest.raises(InvalidArgument):
        Spectrum(grid, np.full(grid.count, 1.2), "reflectance")
    with pytest.raises(InvalidArgument):
        Spectrum(grid, np.ones(3))
    Spectrum(grid, np.full(grid.count, 1.2), "power")


def test_spectrum_text_round_trip(tmp_path, grid):
    spd = gaussian_spd(led_table()[3])
    path = tmp_path / "green.txt"
    write_spectrum(spd, path)
    assert path.read_text().startswith("#")
    back = read_spectrum(path, kind="power")
    assert back.grid == grid
    np.testing.assert_array_equal(back.values, spd.values)


def test_read_spectrum_interpolates_onto_grid(tmp_path, grid):
    path = tmp_path / "coarse.txt"
    path.write_text("# coarse ink\n400 0.2\n500 0.4\n600 0.6\n700 0.8\n")
    s = read_spectrum(path, grid)
    lam = grid.wavelengths
    assert s.values[lam == 450][0] == pytest.approx(0.3)
    assert s.values[0] == 0.2 and s.values[-1] == 0.8
    with pytest.raises(InvalidArgument):
        path.write_text("400 0.2\n410 0.4\n430 0.6\n")
        read_spectrum(path)
