"""WAV (RIFF) file I/O for PCM16 and IEEE float, mono or stereo.

Conventions:
  * reading PCM16 divides by 32768, so -32768 -> -1.0 and
    +32767 -> +32767/32768 (lossless, asymmetric);
  * float32 data round-trips bit-for-bit;
  * writing PCM16 rounds half away from zero and saturates; the clip
    count is returned (and logged), never silently wrapped.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from .audio import AudioBuffer
from .errors import AudioFormatError

log = logging.getLogger(__name__)

_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise AudioFormatError(f"truncated WAV file while reading {what}")
    return data


def read_wav(path) -> AudioBuffer:
    """Read a PCM16 or IEEE-float WAV file into a float64 buffer."""
    path = Path(path)
    if not path.exists():
        raise AudioFormatError(f"no such file: {path}")
    with open(path, "rb") as f:
        riff, _size, wave = struct.unpack("<4sI4s", _read_exact(f, 12, "RIFF header"))
        if riff != b"RIFF" or wave != b"WAVE":
            raise AudioFormatError(f"not a RIFF/WAVE file: {path}")

        fmt = None
        data = None
        while True:
            header = f.read(8)
            if len(header) == 0:
                break
            if len(header) != 8:
                raise AudioFormatError("truncated chunk header")
            cid, csize = struct.unpack("<4sI", header)
            if cid == b"fmt ":
                fmt = _read_exact(f, csize, "fmt chunk")
            elif cid == b"data":
                data = _read_exact(f, csize, "data chunk")
            else:
                f.seek(csize, 1)
            if csize % 2:  # chunks are word aligned
                f.seek(1, 1)

    if fmt is None or data is None:
        raise AudioFormatError(f"missing fmt/data chunk in {path}")
    if len(fmt) < 16:
        raise AudioFormatError("fmt chunk shorter than 16 bytes")
    code, channels, rate, _bps, _align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if code == _FMT_EXTENSIBLE:
        if len(fmt) < 40:
            raise AudioFormatError("extensible fmt chunk shorter than 40 bytes")
        code = struct.unpack("<H", fmt[24:26])[0]

    if code == _FMT_PCM:
        if bits != 16:
            raise AudioFormatError(f"only 16-bit PCM supported, got {bits}-bit")
        raw = np.frombuffer(data, dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif code == _FMT_IEEE_FLOAT:
        if bits == 32:
            raw = np.frombuffer(data, dtype="<f4")
        elif bits == 64:
            raw = np.frombuffer(data, dtype="<f8")
        else:
            raise AudioFormatError(f"unsupported float width: {bits}")
        samples = raw.astype(np.float64)
    else:
        raise AudioFormatError(f"unsupported WAV format code {code}")

    if channels < 1:
        raise AudioFormatError("channel count must be >= 1")
    if len(samples) % channels:
        raise AudioFormatError("data size is not a whole number of frames")
    frames = samples.reshape(-1, channels).T  # interleaved -> (ch, n)
    return AudioBuffer(frames, rate)


def write_wav(buffer: AudioBuffer, path, encoding: str = "float32") -> int:
    """Write the buffer; returns the number of clipped samples (pcm16 only).

    encoding is 'pcm16' or 'float32'. float32 written from float64 is the
    usual nearest rounding; reading it back and re-writing is exact.
    """
    path = Path(path)
    interleaved = buffer.samples.T  # (n, ch)
    clipped = 0
    if encoding == "pcm16":
        scaled = interleaved * 32768.0
        q = np.where(scaled >= 0, np.floor(scaled + 0.5), np.ceil(scaled - 0.5))
        clipped = int(np.count_nonzero((q > 32767.0) | (q < -32768.0)))
        data = np.clip(q, -32768.0, 32767.0).astype("<i2").tobytes()
        bits, code = 16, _FMT_PCM
    elif encoding == "float32":
        data = interleaved.astype("<f4").tobytes()
        bits, code = 32, _FMT_IEEE_FLOAT
    else:
        raise ValueError(f"encoding must be pcm16 or float32, got {encoding!r}")

    channels = buffer.channels
    rate = buffer.sample_rate_hz
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", code, channels, rate, rate * block_align, block_align, bits)
    chunks = [(b"fmt ", fmt)]
    if code == _FMT_IEEE_FLOAT:
        chunks.append((b"fact", struct.pack("<I", buffer.num_samples)))
    chunks.append((b"data", data))

    body = bytearray()
    for cid, payload in chunks:
        body += struct.pack("<4sI", cid, len(payload))
        body += payload
        if len(payload) % 2:
            body += b"\x00"
    with open(path, "wb") as f:
        f.write(struct.pack("<4sI4s", b"RIFF", 4 + len(body), b"WAVE"))
        f.write(body)

    if clipped:
        log.warning("%s: %d samples clipped on pcm16 write", path, clipped)
    return clipped
