"""Per-node, per-sensor chunk stores: the on-disk recording container.

Chunk file layout (big-endian):

    magic   4s   "SWCH"
    u16     format version (1)
    u8      node_id
    u8      reserved (zero)
    u16     sensor_id length, followed by the sensor_id bytes (UTF-8)
    u32     chunk_index
    u32     record count
    records, each: u32 length + serialized record
    u32     CRC32C over everything before this trailer

Record serialization: u16 sensor_id length + bytes, u32 sequence_index,
f64 device_timestamp, u64 payload_digest, u32 payload_size_bytes.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .sensors import SensorRecord

MAGIC = b"SWCH"
VERSION = 1
DEFAULT_MAX_BYTES = 64 * 1024 * 1024
DEFAULT_MAX_SPAN_S = 10.0

_HEADER_FIXED = struct.Struct(">4sHBB")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_RECORD_FIXED = struct.Struct(">IdQI")

# CRC32C (Castagnoli), reflected polynomial 0x82F63B78.
_CRC_TABLE = []
for _i in range(256):
    _c = _i
    for _ in range(8):
        _c = (_c >> 1) ^ 0x82F63B78 if _c & 1 else _c >> 1
    _CRC_TABLE.append(_c)


def crc32c(data: bytes, crc: int = 0) -> int:
    crc ^= 0xFFFFFFFF
    for b in data:
        crc = _CRC_TABLE[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF


class ChunkFormatError(ValueError):
    """Chunk file fails structural validation."""


class ChunkCorruptError(ChunkFormatError):
    """Chunk checksum does not match its contents."""


def serialize_record(record: SensorRecord) -> bytes:
    sid = record.sensor_id.encode("utf-8")
    return (
        _U16.pack(len(sid))
        + sid
        + _RECORD_FIXED.pack(
            record.sequence_index,
            record.device_timestamp,
            record.payload_digest,
            record.payload_size_bytes,
        )
    )


def deserialize_record(data: bytes) -> SensorRecord:
    (sid_len,) = _U16.unpack_from(data)
    sid = data[2 : 2 + sid_len].decode("utf-8")
    seq, stamp, digest, size = _RECORD_FIXED.unpack_from(data, 2 + sid_len)
    return SensorRecord(
        sensor_id=sid,
        sequence_index=seq,
        device_timestamp=stamp,
        payload_digest=digest,
        payload_size_bytes=size,
    )


@dataclass
class RecordChunk:
    node_id: int
    sensor_id: str
    chunk_index: int
    records: list[SensorRecord]
    byte_length: int = 0
    checksum: int = 0
    corrupt: bool = False


def encode_chunk(
    node_id: int, sensor_id: str, chunk_index: int, records: list[SensorRecord]
) -> bytes:
    sid = sensor_id.encode("utf-8")
    out = bytearray()
    out += _HEADER_FIXED.pack(MAGIC, VERSION, node_id, 0)
    out += _U16.pack(len(sid)) + sid
    out += _U32.pack(chunk_index)
    out += _U32.pack(len(records))
    for record in records:
        blob = serialize_record(record)
        out += _U32.pack(len(blob)) + blob
    out += _U32.pack(crc32c(bytes(out)))
    return bytes(out)


def decode_chunk(data: bytes, verify: bool = True) -> RecordChunk:
    if len(data) < _HEADER_FIXED.size + 4:
        raise ChunkFormatError("chunk shorter than its header")
    magic, version, node_id, _ = _HEADER_FIXED.unpack_from(data)
    if magic != MAGIC:
        raise ChunkFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ChunkFormatError(f"unsupported version {version}")
    (claimed,) = _U32.unpack_from(data, len(data) - 4)
    corrupt = crc32c(data[:-4]) != claimed
    if verify and corrupt:
        raise ChunkCorruptError("chunk checksum mismatch")
    pos = _HEADER_FIXED.size
    (sid_len,) = _U16.unpack_from(data, pos)
    pos += 2
    sensor_id = data[pos : pos + sid_len].decode("utf-8")
    pos += sid_len
    (chunk_index,) = _U32.unpack_from(data, pos)
    (count,) = _U32.unpack_from(data, pos + 4)
    pos += 8
    records = []
    for _ in range(count):
        (length,) = _U32.unpack_from(data, pos)
        pos += 4
        records.append(deserialize_record(data[pos : pos + length]))
        pos += length
    return RecordChunk(
        node_id=node_id,
        sensor_id=sensor_id,
        chunk_index=chunk_index,
        records=records,
        byte_length=len(data),
        checksum=claimed,
        corrupt=corrupt,
    )


@dataclass
class ChunkStore:
    """Append-only writer sealing chunks by size or time span."""

    node_id: int
    sensor_id: str
    directory: Path
    max_bytes: int = DEFAULT_MAX_BYTES
    max_span_s: float = DEFAULT_MAX_SPAN_S
    _pending: list[SensorRecord] = field(default_factory=list)
    _pending_bytes: int = 0
    _next_index: int = 0
    sealed_paths: list[Path] = field(default_factory=list)
    total_records: int = 0
    total_bytes: int = 0

    def append(self, record: SensorRecord) -> None:
        self._pending.append(record)
        self._pending_bytes += len(serialize_record(record)) + 4
        span = record.device_timestamp - self._pending[0].device_timestamp
        if self._pending_bytes >= self.max_bytes or span >= self.max_span_s:
            self.seal()

    def seal(self) -> Path | None:
        """Write pending records out as one chunk file."""
        if not self._pending:
            return None
        self._pending.sort(key=lambda r: (r.device_timestamp, r.sequence_index))
        data = encode_chunk(self.node_id, self.sensor_id, self._next_index, self._pending)
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / f"chunk_{self._next_index:05d}.swch"
        path.write_bytes(data)
        self.sealed_paths.append(path)
        self.total_records += len(self._pending)
        self.total_bytes += len(data)
        self._next_index += 1
        self._pending = []
        self._pending_bytes = 0
        return path


def iter_chunk_files(root: Path) -> Iterator[Path]:
    for path in sorted(root.rglob("*.swch")):
        if path.is_file():
            yield path


def read_chunk_file(path: Path) -> RecordChunk:
    """Read one chunk file; a checksum mismatch flags it rather than raising."""
    return decode_chunk(path.read_bytes(), verify=False)


def storage_used(root: Path) -> int:
    return sum(os.path.getsize(p) for p in iter_chunk_files(root))
