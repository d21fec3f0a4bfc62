"""Image-like file formats: float planes, 16-bit PGM label masks, 8-bit PNG."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError

PLANE_MAGIC = b"VSPL"
_PLANE_HEADER = struct.Struct("<4sIII")


def write_plane(path: str | Path, data: np.ndarray) -> None:
    """Float32 little-endian planes, row-major, after a 16-byte header (magic, width, height, channels)."""
    data = np.asarray(data)
    if data.ndim == 2:
        data = data[:, :, None]
    if data.ndim != 3:
        raise ValueError("plane data must be (H, W) or (H, W, C)")
    h, w, c = data.shape
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    Path(path).write_bytes(_PLANE_HEADER.pack(PLANE_MAGIC, w, h, c) + payload)


def read_plane(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _PLANE_HEADER.size:
        raise FormatError("plane file shorter than its header", offset=len(raw), file=str(path))
    magic, w, h, c = _PLANE_HEADER.unpack_from(raw)
    if magic != PLANE_MAGIC:
        raise FormatError(f"bad plane magic {magic!r}", offset=0, file=str(path))
    need = w * h * c * 4
    have = len(raw) - _PLANE_HEADER.size
    if have != need:
        raise FormatError(f"plane payload is {have} bytes, expected {need}", offset=len(raw), file=str(path))
    arr = np.frombuffer(raw, dtype="<f4", offset=_PLANE_HEADER.size).reshape(h, w, c)
    return arr.astype(np.float64)


def write_pgm16(path: str | Path, labels: np.ndarray) -> None:
    """Binary P5 PGM with maxval 65535 (samples big-endian, as the PGM format requires)."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("label image must be 2-D")
    if labels.size and (labels.min() < 0 or labels.max() > 65535):
        raise ValueError("labels must lie in [0, 65535]")
    h, w = labels.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + labels.astype(">u2").tobytes())


def read_pgm16(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header", offset=pos, file=str(path))
        tokens.append((raw[start:pos], start))
    pos += 1  # single whitespace byte before the raster
    if tokens[0][0] != b"P5":
        raise FormatError(f"not a binary PGM (magic {tokens[0][0]!r})", offset=0, file=str(path))
    try:
        w, h, maxval = (int(t) for t, _ in tokens[1:])
    except ValueError:
        raise FormatError("non-integer PGM header field", offset=tokens[1][1], file=str(path)) from None
    if maxval != 65535:
        raise FormatError(f"expected maxval 65535, got {maxval}", offset=tokens[3][1], file=str(path))
    need = w * h * 2
    have = len(raw) - pos
    if have < need:
        raise FormatError(f"truncated PGM raster: {have} of {need} bytes", offset=len(raw), file=str(path))
    return np.frombuffer(raw, dtype=">u2", count=w * h, offset=pos).reshape(h, w).astype(np.int64)


def write_png(path: str | Path, image: np.ndarray) -> None:
    """Save an (H, W, 3) [0, 1] float image or an (H, W) boolean mask as 8-bit PNG."""
    image = np.asarray(image)
    if image.dtype == bool:
        arr = image.astype(np.uint8) * 255
    else:
        arr = np.clip(np.round(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr
