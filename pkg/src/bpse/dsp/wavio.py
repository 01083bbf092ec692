"""RIFF/WAVE reading and writing (PCM16 and IEEE float32), plus NIST SPHERE input.

Only the chunks needed for audio are interpreted: ``fmt `` and ``data``.
Every other chunk is skipped.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, IoError, UnsupportedError
from .types import Waveform

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def _parse_fmt(body: bytes) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise FormatError("fmt chunk shorter than 16 bytes")
    tag, channels, rate, _byte_rate, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 26:
            raise FormatError("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk")
        # first two bytes of the subformat GUID carry the real format tag
        tag = struct.unpack("<H", body[24:26])[0]
    if channels == 0 or rate == 0:
        raise FormatError("fmt chunk declares zero channels or zero sample rate")
    if block_align != channels * bits // 8:
        raise FormatError(f"inconsistent block_align {block_align} for {channels}ch/{bits}bit")
    return tag, channels, rate, bits


def read_wav(path) -> Waveform:
    """Read a WAV file into a mono float64 :class:`Waveform`.

    Stereo (or wider) input is averaged across channels. PCM16 samples are
    scaled by 1/32768. A NIST SPHERE header (TIMIT's native ``.WAV``) is
    also accepted.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if raw[:7] == b"NIST_1A":
        return _read_sphere(raw, path)
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid, size = struct.unpack("<4sI", raw[pos:pos + 8])
        body_start = pos + 8
        body_end = body_start + size
        if cid == b"fmt ":
            if body_end > len(raw):
                raise FormatError(f"{path}: truncated fmt chunk")
            fmt = _parse_fmt(raw[body_start:body_end])
        elif cid == b"data":
            if body_end > len(raw):
                raise FormatError(
                    f"{path}: data chunk promises {size} bytes, file holds {len(raw) - body_start}")
            data = raw[body_start:body_end]
            break
        pos = body_end + (size & 1)
    if fmt is None:
        raise FormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise FormatError(f"{path}: missing data chunk")

    tag, channels, rate, bits = fmt
    if tag == WAVE_FORMAT_PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedError(f"{path}: format tag {tag:#06x} with {bits} bits is not supported")
    if samples.size % channels:
        raise FormatError(f"{path}: sample count not a multiple of channel count")
    samples = samples.reshape(-1, channels).mean(axis=1)
    return Waveform(samples, rate)


def _read_sphere(raw: bytes, path: Path) -> Waveform:
    try:
        header_len = int(raw[8:16].strip())
    except ValueError as exc:
        raise FormatError(f"{path}: bad SPHERE header size") from exc
    fields = {}
    for line in raw[16:header_len].decode("ascii", "replace").splitlines():
        parts = line.split()
        if len(parts) >= 3 and parts[0] != "end_head":
            fields[parts[0]] = parts[2]
    if fields.get("sample_coding", "pcm") != "pcm" or fields.get("sample_n_bytes", "2") != "2":
        raise UnsupportedError(f"{path}: only uncompressed 16-bit SPHERE audio is supported")
    channels = int(fields.get("channel_count", 1))
    rate = int(fields.get("sample_rate", 16000))
    count = int(fields.get("sample_count", (len(raw) - header_len) // (2 * channels)))
    order = "<i2" if fields.get("sample_byte_format", "01") == "01" else ">i2"
    payload = raw[header_len:header_len + 2 * channels * count]
    if len(payload) < 2 * channels * count:
        raise FormatError(f"{path}: SPHERE header promises {count} samples, file is shorter")
    samples = np.frombuffer(payload, dtype=order).astype(np.float64) / 32768.0
    return Waveform(samples.reshape(-1, channels).mean(axis=1), rate)


def write_wav(path, wave: Waveform, *, codec: str = "pcm16") -> None:
    """Write ``wave`` as mono WAV. ``codec`` is ``"pcm16"`` or ``"float32"``."""
    x = np.asarray(wave.samples, dtype=np.float64)
    if codec == "pcm16":
        payload = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
        tag, bits = WAVE_FORMAT_PCM, 16
    elif codec == "float32":
        payload = x.astype("<f4").tobytes()
        tag, bits = WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise UnsupportedError(f"unknown codec {codec!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", tag, 1, wave.sample_rate_hz, wave.sample_rate_hz * block, block, bits)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)
