"""Command-line front end: ``msscan synth|scan|assemble|export|extract|match``.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 pipeline
error (no lattice found, too few dots, no illumination).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path


from . import __version__
from .config import RunConfig, build_document, build_sensor, build_source, load_config, parse_cell_grid
from .cube import (assemble_cube, composite_rgb, export_band, read_cube, register_bands,
                   write_cube)
from .errors import (CubeFormatError, DegenerateIllumination, ImageFormatError, InsufficientData,
                     InvalidArgument, NoIllumination, NoLatticeFound, UnsupportedCapability)
from .forensics import (detect_dots, dot_report, estimate_separation, extract_tile,
                        match_patterns, pattern_from_report, read_report, write_report)
from .pnm import read_pgm, write_pgm
from .scanner import BandScan, load_document, save_document, scan_sequence
from .spectral import band_slug, led_table

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PIPELINE = 0, 1, 2, 3
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Manifest:
    """Provenance record written next to every output set."""

    def __init__(self, command: str, config: RunConfig | None):
        self.data = {
            "tool": "msscan",
            "version": __version__,
            "command": command,
            "config": None if config is None else config.to_dict(),
            "rng_seed": None if config is None else config.scan.rng_seed,
            "inputs": {},
            "outputs": {},
            "timings_s": {},
        }
        self._t0 = time.perf_counter()

    def stage(self, name: str):
        now = time.perf_counter()
        self.data["timings_s"][name] = round(now - self._t0, 6)
        self._t0 = now

    def output(self, name: str, path: Path, root: Path):
        self.data["outputs"][name] = {"path": str(path.relative_to(root)), "sha256": _sha256(path)}

    def write(self, directory: Path) -> Path:
        path = directory / MANIFEST
        path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")
        return path


def read_manifest(directory: Path) -> dict:
    path = Path(directory) / MANIFEST
    if not path.exists():
        return {}
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"{path}: corrupt manifest ({exc})") from exc


def _config_from_args(args) -> RunConfig:
    overrides = []
    for item in args.set or ():
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        overrides.append(tuple(item.split("=", 1)))
    for flag, key in (("seed", "rng_seed"), ("noise_sigma", "noise_sigma"),
                      ("max_offset", "max_feed_offset_px"), ("bit_depth", "bit_depth")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append((key, str(value)))
    return load_config(args.config, overrides)


def band_index(name_or_index: str, names: list[str]) -> int:
    """Resolve a band given by 0-based index or case-insensitive hyphenated name."""
    text = str(name_or_index).strip()
    if text.lstrip("-").isdigit():
        idx = int(text)
        if not 0 <= idx < len(names):
            raise InvalidArgument(f"band index {idx} out of range 0..{len(names) - 1}")
        return idx
    slugs = [band_slug(n) for n in names]
    slug = band_slug(text)
    if slug not in slugs:
        raise InvalidArgument(f"no band {text!r}; available: {', '.join(slugs)}")
    return slugs.index(slug)


def cube_band_names(wavelengths) -> list[str]:
    by_center = {led.center_nm: led.name for led in led_table()}
    return [by_center.get(float(w), f"band{i}") for i, w in enumerate(wavelengths)]


# -- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("synth", config)
    doc = build_document(config)
    path = out / "document.npz"
    save_document(doc, path)
    manifest.stage("synth")
    manifest.output("document", path, out)
    manifest.data["dot_count"] = len(doc.dot_layer or ())
    manifest.write(out)
    print(f"document {doc.width_px}x{doc.height_px}, {len(doc.dot_layer or ())} dots -> {path}")
    return EXIT_OK


def cmd_scan(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out)
    (out / "bands").mkdir(parents=True, exist_ok=True)
    manifest = Manifest("scan", config)
    if args.document:
        doc = load_document(args.document)
        manifest.data["inputs"]["document"] = {"path": str(args.document),
                                               "sha256": _sha256(Path(args.document))}
    else:
        doc = build_document(config)
    manifest.stage("document")
    scans = scan_sequence(doc, build_source(config), build_sensor(config), config.scan)
    manifest.stage("scan")
    bands = []
    maxval = config.scan.full_scale
    for i, scan in enumerate(scans, start=1):
        path = out / "bands" / f"band{i}_{band_slug(scan.band_name)}.pgm"
        write_pgm(path, scan.image, maxval, comments={
            "band": scan.band_name, "center_nm": repr(float(scan.center_nm)),
            "offset_dx": scan.true_offset_px[0], "offset_dy": scan.true_offset_px[1],
            "bit_depth": scan.bit_depth})
        manifest.output(f"band{i}", path, out)
        bands.append({"name": scan.band_name, "center_nm": scan.center_nm,
                      "file": str(path.relative_to(out)),
                      "true_offset_px": list(scan.true_offset_px)})
    manifest.data["bands"] = bands
    manifest.stage("write")
    manifest.write(out)
    print(f"{len(scans)} bands -> {out / 'bands'}")
    return EXIT_OK


def load_scan_dir(directory) -> tuple[list[BandScan], dict]:
    directory = Path(directory)
    manifest = read_manifest(directory)
    if manifest.get("bands"):
        files = [directory / b["file"] for b in manifest["bands"]]
    else:
        files = sorted((directory / "bands").glob("*.pgm"))
    if not files:
        raise InvalidArgument(f"{directory}: no band images found")
    scans = []
    for path in files:
        image, maxval, meta = read_pgm(path)
        try:
            scans.append(BandScan(meta.get("band", path.stem), float(meta.get("center_nm", "nan")),
                                  image, (int(meta.get("offset_dx", 0)), int(meta.get("offset_dy", 0))),
                                  int(meta.get("bit_depth", 8 if maxval < 256 else 16))))
        except ValueError as exc:
            raise ImageFormatError(f"{path}: bad band metadata ({exc})") from exc
    return scans, manifest


def cmd_assemble(args) -> int:
    scans, upstream = load_scan_dir(args.scan)
    config = RunConfig.from_dict(upstream["config"]) if upstream.get("config") else RunConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest("assemble", config)
    manifest.data["inputs"]["scan_manifest"] = upstream.get("outputs", {})
    names = [s.band_name for s in scans]
    ref = band_index(args.reference or config.pipeline.reference_band, names)
    window = args.window if args.window is not None else config.window
    if len(scans) > 1:
        offsets = register_bands(scans, ref, window)
    else:
        offsets = [(0, 0)]
    manifest.stage("register")
    cube = assemble_cube(scans, offsets)
    path = out / "cube.msqb"
    write_cube(cube, path)
    manifest.stage("assemble")
    manifest.output("cube", path, out)
    manifest.data.update({
        "reference_band": names[ref], "search_window": window,
        "band_names": names, "offsets_px": [list(o) for o in offsets],
        "cube_shape": [cube.band_count, cube.height_px, cube.width_px]})
    manifest.write(out)
    print(f"cube {cube.width_px}x{cube.height_px}x{cube.band_count} -> {path}")
    return EXIT_OK


def _load_cube_with_context(path):
    cube = read_cube(path)
    context = read_manifest(Path(path).parent)
    names = context.get("band_names") or cube_band_names(cube.wavelengths_nm)
    return cube, names, context


def cmd_export(args) -> int:
    cube, names, _ = _load_cube_with_context(args.cube)
    out = Path(args.out)
    if args.rgb:
        parts = args.rgb.split(",")
        if len(parts) != 3:
            raise UsageError("--rgb expects three comma-separated bands")
        r, g, b = (band_index(p, names) for p in parts)
        composite_rgb(cube, r, g, b, out)
    else:
        export_band(cube, band_index(args.band, names), out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    source = Path(args.input)
    if source.is_dir():
        scans, context = load_scan_dir(source)
        names = [s.band_name for s in scans]
        images = [s.image for s in scans]
    else:
        cube, names, context = _load_cube_with_context(source)
        images = list(cube.data)
    idx = band_index(args.band, names)
    if args.cell_grid:
        grid = parse_cell_grid(args.cell_grid)
    elif context.get("config"):
        grid = RunConfig.from_dict(context["config"]).cell_grid
    else:
        raise UsageError("--cell-grid is required when the input carries no manifest")
    params = {"polarity": args.polarity, "min_area_px": args.min_area,
              "max_area_px": args.max_area, "percentile": args.percentile,
              "margin": args.margin, "cell_grid": list(grid)}
    dots = detect_dots(images[idx], args.polarity, args.min_area, args.max_area,
                       args.percentile, args.margin, source_band=names[idx])
    hps, vps = estimate_separation(dots)
    pattern = extract_tile(dots, hps, vps, grid)
    report = dot_report(pattern, dots, names[idx], params)
    if args.out:
        write_report(report, args.out)
        print(f"{len(dots)} dots, HPS {hps:.2f} px, VPS {vps:.2f} px -> {args.out}")
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_match(args) -> int:
    a = pattern_from_report(read_report(args.a))
    b = pattern_from_report(read_report(args.b))
    print(f"similarity {match_patterns(a, b):.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="msscan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"msscan {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def with_config(p):
        p.add_argument("--config", help="key-value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one configuration key (repeatable, last wins)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides rng_seed)")

    p = sub.add_parser("synth", help="build the synthetic test document")
    with_config(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("scan", help="simulate one pass per LED band")
    with_config(p)
    p.add_argument("--document", help="document.npz from synth (default: build from config)")
    p.add_argument("--noise-sigma", type=float, help="noise std as a fraction of full scale")
    p.add_argument("--max-offset", type=int, help="maximum misfeed offset in px")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), help="sample depth of the band images")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("assemble", help="register bands and write an MSQB cube")
    p.add_argument("--scan", required=True, help="scan output directory")
    p.add_argument("--reference", help="reference band name or index (default: config, green)")
    p.add_argument("--window", type=int, help="search window in px (default: 2x max offset)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("export", help="write one band as PGM or three as a PPM composite")
    p.add_argument("--cube", required=True, help="MSQB cube file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--band", help="band name or index for a PGM export")
    group.add_argument("--rgb", metavar="R,G,B", help="three band names or indices for a PPM")
    p.add_argument("--out", required=True, help="output image path")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("extract", help="extract the yellow-dot pattern as a JSON report")
    p.add_argument("input", help="MSQB cube file or scan output directory")
    p.add_argument("--band", default="royal-blue", help="band name or index (default: royal-blue)")
    p.add_argument("--cell-grid", help="ROWSxCOLS sub-cell grid (default: from the manifest)")
    p.add_argument("--polarity", choices=("dark", "bright"), default="dark",
                   help="dot polarity in the chosen band (default: dark)")
    p.add_argument("--min-area", type=int, default=3, help="minimum component area in px")
    p.add_argument("--max-area", type=int, default=50, help="maximum component area in px")
    p.add_argument("--percentile", type=float, default=5.0, help="threshold reference percentile")
    p.add_argument("--margin", type=float, default=0.3, help="relative threshold margin")
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("match", help="similarity of two dot reports")
    p.add_argument("a", help="first JSON dot report")
    p.add_argument("b", help="second JSON dot report")
    p.set_defaults(func=cmd_match)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"msscan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoLatticeFound, InsufficientData, NoIllumination, DegenerateIllumination,
            UnsupportedCapability) as exc:
        print(f"msscan: pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (InvalidArgument, CubeFormatError, ImageFormatError, OSError) as exc:
        print(f"msscan: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        sys.exit(130)


if __name__ == "__main__":
    main()
