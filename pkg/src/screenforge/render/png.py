"""Tiny deterministic PNG writer/reader for synthetic screenshots.

Fixed zlib level and filter make the bytes a pure function of the pixels,
which the byte-identical golden runs depend on. Only RGB8 is needed.
"""

from __future__ import annotations

import struct
import zlib


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def encode_rgb(width: int, height: int, pixels: bytearray | bytes) -> bytes:
    """PNG bytes for a row-major RGB8 buffer of width*height*3 bytes."""
    if len(pixels) != width * height * 3:
        raise ValueError("pixel buffer size does not match dimensions")
    stride = width * 3
    raw = bytearray()
    for y in range(height):
        raw.append(0)  # filter type 0 per row
        raw += pixels[y * stride:(y + 1) * stride]
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return b"".join([
        b"\x89PNG\r\n\x1a\n",
        _chunk(b"IHDR", ihdr),
        _chunk(b"IDAT", zlib.compress(bytes(raw), 6)),
        _chunk(b"IEND", b""),
    ])


def read_dims(png: bytes) -> tuple[int, int]:
    """(width, height) from the IHDR chunk."""
    if png[:8] != b"\x89PNG\r\n\x1a\n" or png[12:16] != b"IHDR":
        raise ValueError("not a PNG")
    width, height = struct.unpack(">II", png[16:24])
    return width, height
