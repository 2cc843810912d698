"""Software twin of an LED multispectral sheet-feed document scanner.

Simulates switched narrow-band illumination and line-by-line scanning of
synthetic documents, assembles registered multispectral cubes, and extracts
yellow tracking-dot patterns (HPS/VPS and tile) from the blue band.
"""

__version__ = "0.1.0"

from .cube import Cube, assemble_cube, composite_rgb, read_cube, register_bands, write_cube
from .forensics import (DotSet, PatternMatrix, detect_dots, estimate_separation, extract_tile,
                        match_patterns)
from .light_source import (DriverVariant, LightSourceState, active_emission, drive_current_ma,
                           new_source, rotate_to, set_dimming)
from .scanner import (BandScan, DocumentModel, ScanConfig, build_test_document, quantize,
                      scan_band, scan_sequence)
from .spectral import (DEFAULT_GRID, LedSpec, Spectrum, WavelengthGrid, band_response,
                       gaussian_spd, led_table, make_wavelength_grid, scale_to_flux)
