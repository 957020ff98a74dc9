"""Newline-delimited JSON framing for the monitoring channel."""

from __future__ import annotations

import asyncio
import json
from typing import Any

# image blobs travel base64-encoded inside frame messages
MAX_LINE_BYTES = 8 * 1024 * 1024


class ProtocolError(Exception):
    """Peer sent something that is not a JSON object per line."""


def encode(msg: dict[str, Any]) -> bytes:
    return json.dumps(msg, separators=(",", ":")).encode() + b"\n"


async def read_message(reader: asyncio.StreamReader) -> dict[str, Any] | None:
    """Next message, or None on clean EOF."""
    try:
        line = await reader.readline()
    except (asyncio.LimitOverrunError, ValueError) as exc:
        raise ProtocolError(f"line exceeds {MAX_LINE_BYTES} bytes") from exc
    if not line:
        return None
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON frame: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("message must be a JSON object")
    return msg
