"""Image file ingestion and debug dumps.

Supported formats: binary 8-bit PGM (P5) and 8-bit PNG. RGB PNGs are
converted to grayscale on load; debug dumps are written as PGM P5.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .raster import GrayImage, as_gray, to_grayscale

IMAGE_SUFFIXES = (".pgm", ".png")


def read_pgm(path: str | Path) -> GrayImage:
    """Read a binary (P5) 8-bit PGM file."""
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (missing P5 magic)")
    # Header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments running to end of line.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(data):
            raise FormatError(f"{path}: truncated PGM header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    pos += 1  # single whitespace byte after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header tokens {tokens}") from None
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: non-positive PGM dimensions {w}x{h}")
    if not 0 < maxval <= 255:
        raise FormatError(f"{path}: unsupported PGM maxval {maxval}, need 8-bit")
    raster = data[pos : pos + w * h]
    if len(raster) != w * h:
        raise FormatError(f"{path}: expected {w * h} raster bytes, found {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w)


def write_pgm(path: str | Path, img: GrayImage) -> None:
    """Write a grayscale image as binary (P5) 8-bit PGM."""
    img = as_gray(img)
    h, w = img.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def read_png(path: str | Path) -> GrayImage:
    """Read an 8-bit PNG; RGB content is converted to grayscale."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode == "L":
                return np.asarray(im, dtype=np.uint8)
            if im.mode != "RGB":
                im = im.convert("RGB")
            return to_grayscale(np.asarray(im, dtype=np.uint8))
    except FormatError:
        raise
    except Exception as exc:
        raise FormatError(f"{path}: cannot read PNG ({exc})") from exc


def read_image(path: str | Path) -> GrayImage:
    """Read a frame by file suffix (.pgm or .png)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".png":
        return read_png(path)
    raise FormatError(f"{path}: unsupported image suffix {suffix!r}")


def list_frames(directory: str | Path) -> list[Path]:
    """Image files in a directory, sorted by filename."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"{directory}: not a directory")
    return sorted(
        p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()
    )
