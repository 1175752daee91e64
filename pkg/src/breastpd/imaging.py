"""Raw image representation, lossless raster I/O and deterministic preprocessing.

Supported rasters are 16-bit binary PGM (``P5``, maxval 65535) and 16-bit
grayscale PNG. 8-bit variants of both are read and written for masks only.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import ImageFormatError

MIN_SIDE = 64

DEFAULT_META = {"laterality": "L", "view": "CC", "source_id": ""}


@dataclass(frozen=True)
class RawImage:
    """16-bit single-channel mammogram with acquisition metadata."""

    pixels: np.ndarray
    meta: dict = field(default_factory=lambda: dict(DEFAULT_META))

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ImageFormatError(f"expected a 2-D grid, got shape {px.shape}")
        if px.dtype != np.uint16:
            if px.size and (px.min() < 0 or px.max() > 65535):
                raise ImageFormatError("intensities must lie in [0, 65535]")
            px = px.astype(np.uint16)
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        meta = dict(DEFAULT_META)
        meta.update(self.meta or {})
        object.__setattr__(self, "meta", meta)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    def validate(self):
        """Check the size floor required by the density pipeline."""
        if self.width < MIN_SIDE or self.height < MIN_SIDE:
            raise ImageFormatError(
                f"image {self.meta.get('source_id')!r} is {self.width}x{self.height}; "
                f"at least {MIN_SIDE}x{MIN_SIDE} required"
            )
        return self


@dataclass(frozen=True)
class PreprocessedImage:
    """Real-valued image rescaled to [0, 1]; tissue is bright."""

    pixels: np.ndarray
    normalization: tuple = (0.0, 0.0)
    meta: dict = field(default_factory=lambda: dict(DEFAULT_META))

    @property
    def shape(self):
        return self.pixels.shape


# ---------------------------------------------------------------- PGM codec


def _pgm_header_tokens(data: bytes, path):
    """Return (tokens, payload_offset) for a binary PGM header."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageFormatError(f"{path}: truncated PGM header at byte offset {pos}")
        tokens.append((data[start:pos], start))
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n:
        raise ImageFormatError(f"{path}: truncated PGM header at byte offset {pos}")
    return tokens, pos + 1


def read_pgm(path, bit_depth: int = 16) -> np.ndarray:
    path = str(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ImageFormatError(f"{path}: unreadable file at byte offset 0 ({exc})") from exc
    if data[:2] != b"P5":
        raise ImageFormatError(f"{path}: not a binary PGM (bad magic) at byte offset 0")
    tokens, offset = _pgm_header_tokens(data, path)
    try:
        width, height, maxval = (int(t) for t, _ in tokens[1:4])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PGM header at byte offset {tokens[1][1]}") from exc
    expected_max = 65535 if bit_depth == 16 else 255
    if maxval != expected_max:
        raise ImageFormatError(
            f"{path}: unsupported bit depth (maxval {maxval}, expected {expected_max}) "
            f"at byte offset {tokens[3][1]}"
        )
    nbytes = width * height * (2 if bit_depth == 16 else 1)
    available = len(data) - offset
    if available < nbytes:
        raise ImageFormatError(
            f"{path}: truncated payload, expected {nbytes} bytes from byte offset {offset}, "
            f"file ends at byte offset {len(data)}"
        )
    dtype = ">u2" if bit_depth == 16 else "u1"
    arr = np.frombuffer(data, dtype=dtype, count=width * height, offset=offset)
    return arr.reshape(height, width).astype(np.uint16 if bit_depth == 16 else np.uint8)


def write_pgm(path, pixels: np.ndarray, bit_depth: int = 16):
    pixels = np.asarray(pixels)
    h, w = pixels.shape
    maxval = 65535 if bit_depth == 16 else 255
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if bit_depth == 16 else "u1"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(pixels, dtype=dtype).tobytes())


# ---------------------------------------------------------------- PNG codec


def read_png(path, bit_depth: int = 16) -> np.ndarray:
    path = str(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.array(im)
    except OSError as exc:
        raise ImageFormatError(f"{path}: unreadable or truncated PNG at byte offset 0 ({exc})") from exc
    if bit_depth == 16:
        if mode not in ("I;16", "I;16B", "I;16L"):
            raise ImageFormatError(f"{path}: unsupported bit depth (PNG mode {mode}) at byte offset 0")
        return arr.astype(np.uint16)
    if mode != "L":
        raise ImageFormatError(f"{path}: unsupported bit depth (PNG mode {mode}) at byte offset 0")
    return arr.astype(np.uint8)


def write_png(path, pixels: np.ndarray, bit_depth: int = 16):
    dtype = np.uint16 if bit_depth == 16 else np.uint8
    Image.fromarray(np.ascontiguousarray(pixels, dtype=dtype)).save(path, format="PNG")


def read_raster(path, bit_depth: int = 16) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path, bit_depth)
    if suffix == ".png":
        return read_png(path, bit_depth)
    raise ImageFormatError(f"{path}: unsupported raster type {suffix!r} at byte offset 0")


def write_raster(path, pixels: np.ndarray, bit_depth: int = 16):
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        write_pgm(path, pixels, bit_depth)
    elif suffix == ".png":
        write_png(path, pixels, bit_depth)
    else:
        raise ImageFormatError(f"{path}: unsupported raster type {suffix!r}")


# ---------------------------------------------------------------- sidecars


def meta_path(path) -> Path:
    p = Path(path)
    return p.with_suffix(".meta")


def read_meta(path) -> dict:
    meta = dict(DEFAULT_META)
    meta["source_id"] = Path(path).stem
    mp = meta_path(path)
    if mp.exists():
        for line in mp.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def write_meta(path, meta: dict):
    lines = [f"{k}={meta[k]}" for k in sorted(meta)]
    meta_path(path).write_text("\n".join(lines) + "\n")


def load_image(path) -> RawImage:
    """Read a 16-bit raster and its optional ``<stem>.meta`` sidecar."""
    if not os.path.exists(path):
        raise ImageFormatError(f"{path}: unreadable file at byte offset 0 (no such file)")
    pixels = read_raster(path, 16)
    return RawImage(pixels, read_meta(path))


def save_image(path, img: RawImage, with_meta: bool = False):
    write_raster(path, img.pixels, 16)
    if with_meta:
        write_meta(path, img.meta)


# ---------------------------------------------------------------- transforms


def preprocess(img: RawImage) -> PreprocessedImage:
    """Log-transform, invert and square, then min-max rescale to [0, 1].

    ``ln(1 + p)`` keeps zero-valued pixels finite; the inversion uses the
    maximum over the whole image.
    """
    logged = np.log1p(img.pixels.astype(np.float64))
    inverted = logged.max() - logged
    squared = inverted * inverted
    lo, hi = float(squared.min()), float(squared.max())
    if hi > lo:
        out = (squared - lo) / (hi - lo)
    else:
        out = np.zeros_like(squared)
    return PreprocessedImage(out, (lo, hi), dict(img.meta))


def standardize_orientation(img):
    """Mirror ``img`` so its brighter half sits on the left.

    Works on any image carrying ``pixels`` and returns ``(image, flipped)``.
    The comparison is on summed intensity of the two halves (the middle
    column of odd-width images is ignored). For raw detector images the
    pipeline calls this on the preprocessed image, where tissue is bright.
    """
    px = np.asarray(img.pixels)
    w = px.shape[1]
    half = w // 2
    left = float(px[:, :half].sum(dtype=np.float64))
    right = float(px[:, w - half :].sum(dtype=np.float64))
    if right <= left:
        return img, False
    return mirror(img), True


def mirror(img):
    flipped = np.ascontiguousarray(img.pixels[:, ::-1])
    if isinstance(img, RawImage):
        return RawImage(flipped, dict(img.meta))
    if isinstance(img, PreprocessedImage):
        return PreprocessedImage(flipped, img.normalization, dict(img.meta))
    return type(img)(flipped)


def to_uint16(pixels01: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] image to the full 16-bit range for export."""
    return np.clip(np.rint(np.asarray(pixels01) * 65535.0), 0, 65535).astype(np.uint16)
