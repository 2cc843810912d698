"""Acceptance gate: seven criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` or directly with
``python3 tests/test_acceptance.py``.  Each criterion enforces its own
wall-clock budget.
"""

import itertools
import json
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from msscan.cli import run  # noqa: E402
from msscan.cube import Cube, cube_from_bytes, cube_to_bytes, read_cube, register_bands, write_cube  # noqa: E402
from msscan.errors import BadMagic, NoLatticeFound, TruncatedPayload  # noqa: E402
from msscan.forensics import DotSet, detect_dots, estimate_separation, extract_tile  # noqa: E402
from msscan.light_source import (DriverVariant, SWITCH_POSITIONS, active_emission,  # noqa: E402
                                 drive_current_ma, new_source, rotate_to, set_dimming)
from msscan.scanner import (BLUE, PAPER, RED, DotLattice, ScanConfig, build_test_document,  # noqa: E402
                            composite_index_map, lattice_dots, logo_regions, scan_band,
                            scan_sequence)
from msscan.spectral import DEFAULT_GRID, gaussian_spd, led_table  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
TILE = np.array([[1, 0, 1], [0, 1, 0]], bool)


def c1_spectral_coverage():
    leds = led_table()
    rows = [(l.center_nm, l.fwhm_nm, l.flux) for l in leds]
    want = list(zip([655, 617, 590, 530, 505, 447.5], [20, 20, 20, 30, 30, 20],
                    [640, 90, 77, 150, 122, 1030]))
    ok = len(leds) == 6 and rows == want
    worst = 0.0
    lam = DEFAULT_GRID.wavelengths
    for led in leds:
        v = gaussian_spd(led).values
        i = int(np.argmax(v))
        left = np.interp(0.5, v[:i + 1], lam[:i + 1])
        right = np.interp(0.5, v[i:][::-1], lam[i:][::-1])
        worst = max(worst, abs(left - (led.center_nm - led.fwhm_nm / 2)),
                    abs(right - (led.center_nm + led.fwhm_nm / 2)))
    ok &= worst <= DEFAULT_GRID.step_nm
    return ok, f"table rows match={rows == want}, worst half-max error {worst:.3f} nm", 1.0


def c2_one_led_invariant():
    checked = 0
    ok = True
    for variant in DriverVariant:
        base = new_source(variant, led_table())
        if variant.dimmable:
            base = set_dimming(base, 0.7)
        for start, target in itertools.product(range(1, SWITCH_POSITIONS + 1), repeat=2):
            _, state = rotate_to(base, start)
            mid, end = rotate_to(state, target)
            for s in (state, mid, end):
                ok &= s.energized_count in (0, 1)
                ok &= drive_current_ma(s) <= 500.0
            ok &= mid.energized_count == 0 and active_emission(mid, DEFAULT_GRID) is None
            ok &= (active_emission(end, DEFAULT_GRID) is None) == (target > 6)
            checked += 1
    return ok, f"{checked} transitions over both driver variants", 1.0


def c3_band_discrimination():
    doc = build_test_document(600, 800, 64, 48, TILE)
    source = new_source(DriverVariant.HIGH_VOLTAGE, led_table())
    scans = scan_sequence(doc, source, None, ScanConfig(dpi=100))
    idx = composite_index_map(doc)
    regions = logo_regions(600, 800)

    def argmax(ink):
        x0, y0, x1, y1 = regions[ink]
        mask = idx[y0:y1, x0:x1] == ink
        return scans[int(np.argmax([s.image[y0:y1, x0:x1][mask].mean() for s in scans]))].band_name

    dots = idx == doc.palette_index("yellow")
    paper = idx == PAPER
    blue, red = scans[5].image.astype(float), scans[0].image.astype(float)
    blue_gap = blue[paper].mean() - blue[dots].mean()
    red_gap = abs(red[paper].mean() - red[dots].mean())
    ok = argmax(RED) == "Deep Red" and argmax(BLUE) == "Royal Blue" and blue_gap > 0 and red_gap < 1.0
    return ok, (f"red->{argmax(RED)}, blue->{argmax(BLUE)}, dot contrast blue {blue_gap:.1f} "
                f"levels, deep red {red_gap:.3f} levels"), 10.0


def c4_registration():
    doc = build_test_document(600, 800, 64, 48, TILE)
    emissions = []
    state = new_source(DriverVariant.HIGH_VOLTAGE, led_table())
    for pos in range(1, 7):
        _, state = rotate_to(state, pos)
        emissions.append(active_emission(state, DEFAULT_GRID))
    ref_index = 3  # Green

    def trial(seed, sigma):
        ref = scan_band(doc, emissions[ref_index], None,
                        ScanConfig(noise_sigma=sigma, rng_seed=seed), ref_index)
        band = [0, 1, 2, 4, 5][seed % 5]
        mov = scan_band(doc, emissions[band], None,
                        ScanConfig(noise_sigma=sigma, max_feed_offset_px=8, rng_seed=seed), band)
        got = register_bands([ref, mov], 0, window=8)[1]
        return got, mov.true_offset_px

    exact = sum(got == truth for got, truth in (trial(s, 0.0) for s in range(50)))
    near = sum(max(abs(g - t) for g, t in zip(*trial(1000 + s, 0.02))) <= 1 for s in range(20))
    ok = exact == 50 and near >= 19
    return ok, f"zero noise exact {exact}/50, sigma 0.02 within 1 px {near}/20", 30.0


def _lattice_dots(hps, vps):
    lat = DotLattice(hps, vps, TILE, (0, 0), 1)
    return DotSet([(x, y) for x, y, _ in lattice_dots(600, 800, lat)])


def c5_lattice_recovery():
    rng = np.random.default_rng(2024)
    worst_clean = worst_drop = 0.0
    tiles_ok = True
    for hps, vps in itertools.product((32, 64, 96), (24, 48, 72)):
        # ground-truth dot sets and the dots detected in a zero-noise Royal Blue scan
        doc = build_test_document(600, 800, hps, vps, TILE)
        image = scan_band(doc, active_emission(rotate_to(new_source("high", led_table()), 6)[1],
                                               DEFAULT_GRID), None, ScanConfig(), 5).image
        for dots in (_lattice_dots(hps, vps), detect_dots(image)):
            h, v = estimate_separation(dots)
            worst_clean = max(worst_clean, abs(h - hps), abs(v - vps))
            tiles_ok &= np.array_equal(extract_tile(dots, h, v, TILE.shape).tile, TILE)
        truth = _lattice_dots(hps, vps)
        for _ in range(20):
            keep = rng.random(len(truth)) >= 0.2
            h, v = estimate_separation(DotSet(truth.centers[keep]))
            worst_drop = max(worst_drop, abs(h - hps), abs(v - vps))
    rejected = 0
    for _ in range(100):
        pts = rng.uniform([0, 0], [599, 799], size=(int(rng.integers(20, 400)), 2))
        pts = _spread(pts)
        try:
            estimate_separation(DotSet(pts))
        except NoLatticeFound:
            rejected += 1
    ok = worst_clean <= 0.5 and worst_drop <= 1.0 and tiles_ok and rejected >= 95
    return ok, (f"worst error clean {worst_clean:.3f} px, 20% dropout {worst_drop:.3f} px, "
                f"tiles exact={tiles_ok}, random sets rejected {rejected}/100"), 60.0


def _spread(pts):
    from scipy.spatial import cKDTree
    drop = {j for _, j in cKDTree(pts).query_pairs(1.0)}
    return np.delete(pts, sorted(drop), axis=0)


def c6_cube_format():
    rng = np.random.default_rng(6)
    ok = True
    wl = np.array([l.center_nm for l in led_table()])
    with tempfile.TemporaryDirectory() as tmp:
        for depth, dtype in ((8, np.uint8), (16, np.uint16)):
            cube = Cube(wl, rng.integers(0, 2 ** depth, size=(6, 800, 600)).astype(dtype), depth)
            path = Path(tmp) / f"c{depth}.msqb"
            write_cube(cube, path)
            back = read_cube(path)
            ok &= back == cube and back.wavelengths_nm.tobytes() == wl.tobytes()
            ok &= cube_to_bytes(back) == path.read_bytes()
    raw = cube_to_bytes(Cube(wl, np.zeros((6, 4, 4), np.uint8)))
    codes = []
    for corrupt, err in ((b"XSQB" + raw[4:], BadMagic), (raw[:-3], TruncatedPayload)):
        try:
            cube_from_bytes(corrupt)
            ok = False
        except err as exc:
            codes.append(exc.code)
    ok &= len(set(codes)) == 2
    return ok, f"round trips bit-exact={ok}, error codes {codes}", 5.0


def _pipeline(root: Path) -> float:
    t0 = time.perf_counter()
    cfg = str(ROOT / "configs" / "demo.cfg")
    steps = [
        ["synth", "--config", cfg, "--seed", "42", "--out", str(root / "doc")],
        ["scan", "--config", cfg, "--seed", "42", "--document", str(root / "doc" / "document.npz"),
         "--out", str(root / "scan")],
        ["assemble", "--scan", str(root / "scan"), "--out", str(root / "cube")],
        ["extract", str(root / "cube" / "cube.msqb"), "--band", "royal-blue",
         "--out", str(root / "report.json")],
    ]
    for argv in steps:
        if run(argv) != 0:
            raise RuntimeError(f"step failed: {argv[0]}")
    return time.perf_counter() - t0


def c7_reproducibility():
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp) / "a", Path(tmp) / "b"
        ta, tb = _pipeline(a), _pipeline(b)
        same_cube = (a / "cube" / "cube.msqb").read_bytes() == (b / "cube" / "cube.msqb").read_bytes()
        ra, rb = (json.loads((p / "report.json").read_text()) for p in (a, b))
        report = ra
    ok = same_cube and ra == rb and max(ta, tb) < 30.0
    return ok, (f"cubes identical={same_cube}, reports identical={ra == rb}, "
                f"HPS {report['hps_px']:.2f} VPS {report['vps_px']:.2f}, "
                f"pipeline {ta:.1f} s / {tb:.1f} s"), 60.0  # two runs, each < 30 s


CRITERIA = [
    ("1 spectral coverage", c1_spectral_coverage),
    ("2 one-LED invariant", c2_one_led_invariant),
    ("3 band discrimination", c3_band_discrimination),
    ("4 registration oracle", c4_registration),
    ("5 HPS/VPS recovery", c5_lattice_recovery),
    ("6 cube format", c6_cube_format),
    ("7 end-to-end reproducibility", c7_reproducibility),
]


def evaluate(name, fn):
    t0 = time.perf_counter()
    ok, detail, budget = fn()
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < budget
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail} ({elapsed:.2f} s, budget {budget:g} s)"
    return ok, line


@pytest.mark.parametrize("name, fn", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(name, fn, capsys):
    ok, line = evaluate(name, fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(name, fn) for name, fn in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
