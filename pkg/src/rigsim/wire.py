"""Length-prefixed binary wire protocol between master and workers.

Frame layout (big-endian):

    u32  length of body in bytes
    u8   message type
    u8   node_id
    u16  reserved (zero)
    body: canonical JSON (sorted keys, compact separators), UTF-8

Canonical JSON makes config distribution byte-reproducible: the same
payload always serializes to the same bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Any

HEADER = struct.Struct(">IBBH")

HELLO = 1
CONFIG = 2
LAUNCH = 3
START_REC = 4
STOP_REC = 5
STATUS_REQ = 6
STATUS = 7
SUMMARY = 8

TYPE_NAMES = {
    HELLO: "HELLO",
    CONFIG: "CONFIG",
    LAUNCH: "LAUNCH",
    START_REC: "START_REC",
    STOP_REC: "STOP_REC",
    STATUS_REQ: "STATUS_REQ",
    STATUS: "STATUS",
    SUMMARY: "SUMMARY",
}


class FramingError(ValueError):
    """Malformed frame: bad header, length mismatch or unknown type."""


@dataclass(frozen=True)
class WireMessage:
    type: int
    node_id: int
    payload: Any

    @property
    def type_name(self) -> str:
        return TYPE_NAMES[self.type]


def canonical_json(payload: Any) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def encode_frame(msg: WireMessage) -> bytes:
    if msg.type not in TYPE_NAMES:
        raise FramingError(f"unknown message type {msg.type}")
    if not 0 <= msg.node_id <= 0xFF:
        raise FramingError(f"node_id {msg.node_id} does not fit in one byte")
    body = canonical_json(msg.payload)
    return HEADER.pack(len(body), msg.type, msg.node_id, 0) + body


def decode_frame(data: bytes) -> WireMessage:
    if len(data) < HEADER.size:
        raise FramingError(f"frame shorter than header ({len(data)} bytes)")
    length, mtype, node_id, reserved = HEADER.unpack_from(data)
    if reserved != 0:
        raise FramingError("reserved header field must be zero")
    if mtype not in TYPE_NAMES:
        raise FramingError(f"unknown message type {mtype}")
    if len(data) != HEADER.size + length:
        raise FramingError(
            f"framing length {length} != body length {len(data) - HEADER.size}"
        )
    try:
        payload = json.loads(data[HEADER.size :].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FramingError(f"bad body: {exc}") from None
    return WireMessage(type=mtype, node_id=node_id, payload=payload)


def split_stream(data: bytes) -> list[WireMessage]:
    """Decode a byte stream of back-to-back frames."""
    messages = []
    pos = 0
    while pos < len(data):
        if len(data) - pos < HEADER.size:
            raise FramingError("trailing bytes shorter than a header")
        length = HEADER.unpack_from(data, pos)[0]
        end = pos + HEADER.size + length
        if end > len(data):
            raise FramingError("frame truncated")
        messages.append(decode_frame(data[pos:end]))
        pos = end
    return messages
