"""Binary checkpoint format and training-curve CSV.

Layout (all integers little-endian)::

    b"BPSE"  u32 version
    u32 header_len, header_len bytes of UTF-8 JSON (model config, sorted keys)
    u32 record_count
    per record: u32 name_len, name (UTF-8), u8 dtype tag, u32 rank,
                rank x u64 dims, raw little-endian values
"""
from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, IoError

MAGIC = b"BPSE"
VERSION = 1
_TAGS = {np.dtype("float32"): 1, np.dtype("float64"): 2, np.dtype("int64"): 3}
_DTYPES = {v: k for k, v in _TAGS.items()}


def checkpoint_bytes(params: dict[str, np.ndarray], header: dict | None = None) -> bytes:
    head = json.dumps(header or {}, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(head)), head,
             struct.pack("<I", len(params))]
    for name, arr in params.items():
        arr = np.asarray(arr)
        if arr.dtype not in _TAGS:
            arr = arr.astype(np.float64)
        key = name.encode()
        parts += [struct.pack("<I", len(key)), key, struct.pack("<BI", _TAGS[arr.dtype], arr.ndim),
                  struct.pack(f"<{arr.ndim}Q", *arr.shape),
                  np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()]
    return b"".join(parts)


def parse_checkpoint(raw: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        if raw[:4] != MAGIC:
            raise FormatError("not a BPSE checkpoint (bad magic)")
        version, hlen = struct.unpack_from("<II", raw, 4)
        if version != VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        pos = 12
        header = json.loads(raw[pos:pos + hlen].decode())
        pos += hlen
        (count,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        params = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            name = raw[pos:pos + nlen].decode()
            pos += nlen
            tag, rank = struct.unpack_from("<BI", raw, pos)
            pos += 5
            dims = struct.unpack_from(f"<{rank}Q", raw, pos)
            pos += 8 * rank
            dt = _DTYPES[tag].newbyteorder("<")
            nbytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
            if pos + nbytes > len(raw):
                raise FormatError(f"record {name!r} truncated")
            params[name] = np.frombuffer(raw[pos:pos + nbytes], dtype=dt).reshape(dims).astype(_DTYPES[tag])
            pos += nbytes
    except (struct.error, KeyError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint: {exc}") from exc
    return header, params


def save_checkpoint(path, params: dict[str, np.ndarray], header: dict | None = None) -> None:
    Path(path).write_bytes(checkpoint_bytes(params, header))


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc
    return parse_checkpoint(raw)


def history_csv(history) -> str:
    """``history``: iterable of (epoch, train_loss, valid_loss) tuples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "valid_loss"])
    for epoch, tr, va in history:
        w.writerow([epoch, repr(float(tr)), "" if va is None else repr(float(va))])
    return buf.getvalue()
