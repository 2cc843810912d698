"""Run configuration: defaults < key-value file < command-line overrides.

Config files are flat ``key = value`` text with ``#`` comments::

    width_px = 600
    dot_pattern = 101 010
    leds = table1
    noise_sigma = 0.01
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .light_source import DEFAULT_EFFICIENCY, DriverVariant, LightSourceState, new_source, set_dimming
from .scanner import PALETTE_NAMES, DocumentModel, ScanConfig, build_test_document, default_palette
from .spectral import DEFAULT_GRID, LedSpec, Spectrum, flat_sensor, led_by_name, led_table, read_spectrum


@dataclass(frozen=True)
class DocumentConfig:
    width_px: int = 600
    height_px: int = 800
    dot_hps_px: int = 64
    dot_vps_px: int = 48
    dot_pattern: str = "101 010"
    dot_radius_px: int = 1
    palette: dict = field(default_factory=dict)  # ink name -> spectrum file

    @property
    def tile(self) -> np.ndarray:
        return parse_pattern(self.dot_pattern)


@dataclass(frozen=True)
class SourceConfig:
    variant: str = "high"
    leds: str = "table1"
    efficiency: float = DEFAULT_EFFICIENCY
    dimming: float = 1.0


@dataclass(frozen=True)
class PipelineConfig:
    sensor: str = "flat"
    reference_band: str = "green"
    search_window: int = 0  # 0: twice the maximum feed offset
    cell_grid: str = ""  # empty: shape of dot_pattern


@dataclass(frozen=True)
class RunConfig:
    document: DocumentConfig = field(default_factory=DocumentConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        try:
            doc = DocumentConfig(**data.get("document", {}))
            src = SourceConfig(**data.get("source", {}))
            scan = ScanConfig(**data.get("scan", {}))
            pipe = PipelineConfig(**data.get("pipeline", {}))
        except TypeError as exc:
            raise InvalidArgument(f"bad configuration record: {exc}") from exc
        return cls(doc, src, scan, pipe)

    @property
    def window(self) -> int:
        if self.pipeline.search_window > 0:
            return self.pipeline.search_window
        return max(1, 2 * self.scan.max_feed_offset_px)

    @property
    def cell_grid(self) -> tuple[int, int]:
        if self.pipeline.cell_grid:
            return parse_cell_grid(self.pipeline.cell_grid)
        return tuple(self.document.tile.shape)


# flat key -> (section, field, converter)
_KEYS = {}
for _section, _cls in (("document", DocumentConfig), ("source", SourceConfig),
                       ("scan", ScanConfig), ("pipeline", PipelineConfig)):
    for _f in fields(_cls):
        if _f.name != "palette":
            _KEYS[_f.name] = (_section, _f.name, {"int": int, "float": float}.get(str(_f.type), str))
_KEYS["seed"] = _KEYS["rng_seed"]


def _convert(key: str, value: str):
    section, name, conv = _KEYS[key]
    try:
        if conv is int:
            return section, name, int(value, 0)
        return section, name, conv(value)
    except ValueError as exc:
        raise InvalidArgument(f"{key}: cannot parse {value!r}") from exc


def apply_overrides(config: RunConfig, items, base_dir: Path | None = None) -> RunConfig:
    """Apply ``(key, value)`` string pairs in order; later pairs win."""
    updates = {s: {} for s in ("document", "source", "scan", "pipeline")}
    palette = dict(config.document.palette)
    for key, value in items:
        key = key.strip().lower().replace("-", "_")
        value = value.strip()
        if key.startswith("palette."):
            ink = key.split(".", 1)[1]
            if ink not in PALETTE_NAMES:
                raise InvalidArgument(f"unknown palette entry {ink!r}")
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            palette[ink] = str(path)
            continue
        if key not in _KEYS:
            raise InvalidArgument(f"unknown configuration key {key!r}")
        if key == "sensor" and value not in ("", "flat") and base_dir is not None:
            value = str(base_dir / value) if not Path(value).is_absolute() else value
        section, name, converted = _convert(key, value)
        updates[section][name] = converted
    try:
        return RunConfig(
            replace(config.document, palette=palette, **updates["document"]),
            replace(config.source, **updates["source"]),
            replace(config.scan, **updates["scan"]),
            replace(config.pipeline, **updates["pipeline"]),
        )
    except TypeError as exc:
        raise InvalidArgument(str(exc)) from exc


def read_config_file(path) -> list[tuple[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        text = Path(path).read_text()
        parser.read_string("[run]\n" + text, source=str(path))
    except (OSError, configparser.Error) as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from exc
    return list(parser.items("run"))


def load_config(path=None, overrides=()) -> RunConfig:
    config = RunConfig()
    if path is not None:
        config = apply_overrides(config, read_config_file(path), Path(path).resolve().parent)
    return apply_overrides(config, overrides)


def parse_pattern(text: str) -> np.ndarray:
    """``'101 010'`` (rows separated by whitespace, commas or ``/``) -> bool matrix."""
    rows = [r for r in text.replace(",", " ").replace("/", " ").split() if r]
    if not rows:
        return np.zeros((0, 0), dtype=bool)
    if len({len(r) for r in rows}) != 1 or any(set(r) - {"0", "1"} for r in rows):
        raise InvalidArgument(f"dot pattern rows must be equal-length 0/1 strings: {text!r}")
    return np.array([[c == "1" for c in r] for r in rows], dtype=bool)


def parse_cell_grid(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(v) for v in text.lower().replace(",", "x").split("x"))
    except ValueError as exc:
        raise InvalidArgument(f"cell grid must look like ROWSxCOLS, got {text!r}") from exc
    if rows < 1 or cols < 1:
        raise InvalidArgument("cell grid must be at least 1x1")
    return rows, cols


def parse_leds(text: str) -> list[LedSpec]:
    """``table1``, or comma-separated table names / ``name/center/fwhm/flux[/part]`` items."""
    text = text.strip()
    if text.lower() in ("table1", "table"):
        return led_table()
    leds = []
    for item in (i.strip() for i in text.split(",")):
        if not item:
            continue
        parts = item.split("/")
        if len(parts) == 1:
            leds.append(led_by_name(item))
            continue
        if len(parts) not in (4, 5):
            raise InvalidArgument(f"LED {item!r}: expected name/center/fwhm/flux[/part]")
        try:
            leds.append(LedSpec(parts[0].strip(), float(parts[1]), float(parts[2]),
                                float(parts[3]), parts[4].strip() if len(parts) == 5 else ""))
        except ValueError as exc:
            raise InvalidArgument(f"LED {item!r}: {exc}") from exc
    return leds


def build_source(config: RunConfig) -> LightSourceState:
    src = config.source
    state = new_source(DriverVariant.parse(src.variant), parse_leds(src.leds), src.efficiency)
    if src.dimming != 1.0:
        state = set_dimming(state, src.dimming)
    return state


def build_palette(config: RunConfig) -> tuple[Spectrum, ...]:
    palette = list(default_palette(DEFAULT_GRID))
    for ink, path in config.document.palette.items():
        palette[PALETTE_NAMES.index(ink)] = read_spectrum(path, DEFAULT_GRID, "reflectance", ink)
    return tuple(palette)


def build_document(config: RunConfig) -> DocumentModel:
    d = config.document
    return build_test_document(d.width_px, d.height_px, d.dot_hps_px, d.dot_vps_px, d.tile,
                               d.dot_radius_px, palette=build_palette(config))


def build_sensor(config: RunConfig) -> Spectrum:
    if config.pipeline.sensor in ("", "flat"):
        return flat_sensor(DEFAULT_GRID)
    return read_spectrum(config.pipeline.sensor, DEFAULT_GRID, "sensitivity", "sensor")
