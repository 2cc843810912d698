"""Binary PGM (P5) and PPM (P6) encoding.

16-bit samples are big-endian, as the netpbm format requires.  Header
comment lines of the form ``# key=value`` are preserved on read so band
metadata can travel with the image.
"""

from __future__ import annotations

import numpy as np

from .errors import ImageFormatError


def _header(magic: str, width: int, height: int, maxval: int, comments) -> bytes:
    lines = [magic]
    for key, value in (comments or {}).items():
        lines.append(f"# {key}={value}")
    lines.append(f"{width} {height}")
    lines.append(str(maxval))
    return ("\n".join(lines) + "\n").encode("ascii")


def _encode(image: np.ndarray, maxval: int) -> bytes:
    if maxval < 256:
        return image.astype(np.uint8).tobytes()
    return image.astype(">u2").tobytes()


def write_pgm(path, image: np.ndarray, maxval: int | None = None, comments: dict | None = None) -> None:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ImageFormatError("PGM needs a 2-D array")
    if maxval is None:
        maxval = 255 if image.dtype == np.uint8 else 65535
    if image.size and (image.min() < 0 or image.max() > maxval):
        raise ImageFormatError(f"samples outside [0, {maxval}]")
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(_header("P5", width, height, maxval, comments))
        fh.write(_encode(image, maxval))


def write_ppm(path, image: np.ndarray, comments: dict | None = None) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ImageFormatError("PPM needs an (H, W, 3) array")
    height, width, _ = image.shape
    with open(path, "wb") as fh:
        fh.write(_header("P6", width, height, 255, comments))
        fh.write(image.astype(np.uint8).tobytes())


def _read_netpbm(path, magic: bytes):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != magic:
        raise ImageFormatError(f"{path}: expected {magic.decode()} magic")
    pos = 2
    fields = []
    comments = {}
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise ImageFormatError(f"{path}: truncated header")
        if raw[pos:pos + 1] == b"#":
            end = raw.find(b"\n", pos)
            end = len(raw) if end < 0 else end
            text = raw[pos + 1:end].decode("ascii", "replace").strip()
            if "=" in text:
                key, value = text.split("=", 1)
                comments[key.strip()] = value.strip()
            pos = end
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        try:
            fields.append(int(raw[start:pos]))
        except ValueError as exc:
            raise ImageFormatError(f"{path}: bad header field") from exc
    pos += 1  # exactly one whitespace byte before the raster
    width, height, maxval = fields
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: maxval {maxval} out of range")
    return raw[pos:], width, height, maxval, comments


def read_pgm(path) -> tuple[np.ndarray, int, dict]:
    """Return ``(image, maxval, comments)``."""
    payload, width, height, maxval, comments = _read_netpbm(path, b"P5")
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    expected = width * height * np.dtype(dtype).itemsize
    if len(payload) < expected:
        raise ImageFormatError(f"{path}: raster truncated")
    image = np.frombuffer(payload[:expected], dtype=dtype).reshape(height, width)
    return image.astype(np.uint8 if maxval < 256 else np.uint16), maxval, comments


def read_ppm(path) -> np.ndarray:
    payload, width, height, maxval, _ = _read_netpbm(path, b"P6")
    if maxval >= 256:
        raise ImageFormatError("only 8-bit PPM is supported")
    expected = width * height * 3
    if len(payload) < expected:
        raise ImageFormatError(f"{path}: raster truncated")
    return np.frombuffer(payload[:expected], dtype=np.uint8).reshape(height, width, 3).copy()
