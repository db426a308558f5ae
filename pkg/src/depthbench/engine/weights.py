"""DBW1 weight container.

Layout (all integers little-endian)::

    b"DBW1"                     magic
    u32 version                 currently 1
    u32 count                   number of tensor records
    count x record:
        u16 name_len, name      UTF-8, "<node_id>/<param>"
        u8 dtype                1 = float32, 2 = int32, 3 = float64
        u8 ndim, ndim x u32     shape
        data                    row-major, little-endian
    u32 crc32                   zlib CRC-32 of every preceding byte

Records are written in sorted name order so identical stores serialize to
identical bytes.
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"DBW1"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<i4"), 3: np.dtype("<f8")}
_CODES = {v: k for k, v in _DTYPES.items()}


class WeightStore(dict):
    """Mapping ``node_id -> {param_name: ndarray}``."""

    def get_param(self, node_id, name):
        return self[node_id][name]

    def flat(self) -> dict[str, np.ndarray]:
        return {f"{nid}/{p}": a for nid, params in self.items() for p, a in params.items()}

    @classmethod
    def from_flat(cls, flat: dict[str, np.ndarray]) -> "WeightStore":
        ws = cls()
        for key, arr in flat.items():
            nid, sep, param = key.rpartition("/")
            if not sep:
                raise FormatError(f"tensor name {key!r} lacks a '<node>/<param>' form")
            ws.setdefault(nid, {})[param] = arr
        return ws

    def to_bytes(self) -> bytes:
        flat = self.flat()
        parts = [MAGIC, struct.pack("<II", VERSION, len(flat))]
        for name in sorted(flat):
            arr = np.asarray(flat[name])
            dt = arr.dtype.newbyteorder("<")
            if dt not in _CODES:
                arr = arr.astype("<f4")
                dt = arr.dtype
            raw = name.encode("utf-8")
            parts.append(struct.pack("<H", len(raw)) + raw)
            parts.append(struct.pack("<BB", _CODES[dt], arr.ndim))
            parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            parts.append(np.ascontiguousarray(arr, dtype=dt).tobytes())
        body = b"".join(parts)
        return body + struct.pack("<I", zlib.crc32(body))

    @classmethod
    def from_bytes(cls, data: bytes) -> "WeightStore":
        if len(data) < 16 or data[:4] != MAGIC:
            raise FormatError("not a DBW1 weight file")
        body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
        if zlib.crc32(body) != crc:
            raise FormatError("DBW1 checksum mismatch")
        version, count = struct.unpack_from("<II", body, 4)
        if version != VERSION:
            raise FormatError(f"unsupported DBW1 version {version}")
        off = 12
        flat = {}
        try:
            for _ in range(count):
                (nlen,) = struct.unpack_from("<H", body, off)
                off += 2
                name = body[off:off + nlen].decode("utf-8")
                off += nlen
                code, ndim = struct.unpack_from("<BB", body, off)
                off += 2
                shape = struct.unpack_from(f"<{ndim}I", body, off)
                off += 4 * ndim
                dt = _DTYPES[code]
                nbytes = dt.itemsize * int(np.prod(shape, dtype=np.int64))
                if off + nbytes > len(body):
                    raise FormatError(f"record {name!r} truncated")
                flat[name] = np.frombuffer(body, dtype=dt, count=nbytes // dt.itemsize,
                                           offset=off).reshape(shape).astype(dt.newbyteorder("="))
                off += nbytes
        except (struct.error, KeyError, UnicodeDecodeError) as exc:
            raise FormatError(f"malformed DBW1 record: {exc}") from exc
        if off != len(body):
            raise FormatError("trailing bytes after the last DBW1 record")
        return cls.from_flat(flat)

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "WeightStore":
        return cls.from_bytes(Path(path).read_bytes())
