"""Binary checkpoint container shared by every trainable architecture.

Layout, all integers little-endian:

    8 bytes   magic, one per architecture (see MAGIC_BY_ARCH)
    u32       length of the UTF-8 JSON config block
    bytes     config JSON (architecture config, channel tag, norm stats)
    u32       number of parameter records
    records   u16 name length | name bytes | u8 rank | u32 per extent
              | float64 raw values, row-major

Parameter records appear in registration order, so equal seeds give
byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC_BY_ARCH = {
    "stressnet": b"SNCKPT01",
    "lstm": b"SNCKLS01",
    "bilstm": b"SNCKBI01",
    "historical_average": b"SNCKHA01",
}
ARCH_BY_MAGIC = {v: k for k, v in MAGIC_BY_ARCH.items()}


def write_container(path, arch: str, config: dict, params) -> None:
    """params: iterable of (name, ndarray) in a stable order."""
    if arch not in MAGIC_BY_ARCH:
        raise ValueError(f"unknown architecture: {arch}")
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    chunks = [MAGIC_BY_ARCH[arch], struct.pack("<I", len(blob)), blob]
    records = list(params)
    chunks.append(struct.pack("<I", len(records)))
    for name, arr in records:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_container(path):
    """Returns (arch, config dict, ordered dict name -> ndarray)."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from exc
    r = _Reader(buf)
    magic = r.take(8)
    if magic not in ARCH_BY_MAGIC:
        raise CheckpointError(f"bad checkpoint magic: {magic!r}")
    arch = ARCH_BY_MAGIC[magic]
    (cfg_len,) = r.unpack("<I")
    try:
        config = json.loads(r.take(cfg_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt config block: {exc}") from exc
    (n_params,) = r.unpack("<I")
    params: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (rank,) = r.unpack("<B")
        shape = r.unpack(f"<{rank}I")
        count = int(np.prod(shape)) if rank else 1
        raw = r.take(8 * count)
        params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if r.pos != len(buf):
        raise CheckpointError("trailing bytes after last parameter record")
    return arch, config, params
