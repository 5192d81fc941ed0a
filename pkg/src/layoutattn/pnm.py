"""Binary PGM (P5) and PPM (P6) codecs.

Only the binary variants with maxval <= 255 are supported; that is all the
toolkit reads or writes. Boolean masks use PGM with the convention that a
pixel value > 127 means True.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "PnmError",
    "decode_pgm",
    "decode_ppm",
    "decode_mask",
    "encode_pgm",
    "encode_ppm",
    "encode_mask",
    "peek_dims",
]


class PnmError(ValueError):
    """Malformed or unsupported PNM data."""


def _parse_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    """Return (width, height, maxval, payload_offset)."""
    if data[:2] != magic:
        raise PnmError(f"bad magic, expected {magic!r}")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(data):
            raise PnmError("truncated header")
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isdigit():
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise PnmError(f"unexpected byte {c!r} in header")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PnmError("missing whitespace before payload")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PnmError("non-positive dimensions")
    if not 0 < maxval <= 255:
        raise PnmError(f"unsupported maxval {maxval}")
    return width, height, maxval, pos


def peek_dims(data: bytes) -> tuple[int, int]:
    """Read (width, height) from a P5 or P6 header without decoding pixels."""
    if data[:2] not in (b"P5", b"P6"):
        raise PnmError("not a binary PGM/PPM file")
    w, h, _, _ = _parse_header(data, data[:2])
    return w, h


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode P5 bytes to a uint8 array of shape (height, width)."""
    w, h, _, pos = _parse_header(data, b"P5")
    payload = data[pos : pos + w * h]
    if len(payload) != w * h:
        raise PnmError("truncated payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()


def decode_ppm(data: bytes) -> np.ndarray:
    """Decode P6 bytes to a uint8 array of shape (height, width, 3)."""
    w, h, _, pos = _parse_header(data, b"P6")
    payload = data[pos : pos + 3 * w * h]
    if len(payload) != 3 * w * h:
        raise PnmError("truncated payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()


def decode_mask(data: bytes) -> np.ndarray:
    """Decode a P5 mask; pixel > 127 maps to True."""
    return decode_pgm(data) > 127


def encode_pgm(image: np.ndarray) -> bytes:
    img = np.ascontiguousarray(image, dtype=np.uint8)
    if img.ndim != 2:
        raise PnmError("PGM image must be 2-D")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + img.tobytes()


def encode_ppm(image: np.ndarray) -> bytes:
    img = np.ascontiguousarray(image, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise PnmError("PPM image must have shape (h, w, 3)")
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + img.tobytes()


def encode_mask(mask: np.ndarray) -> bytes:
    bits = np.asarray(mask, dtype=bool)
    return encode_pgm(np.where(bits, 255, 0).astype(np.uint8))
