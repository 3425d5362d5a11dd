"""Parameter checkpoints.

Layout: one line of UTF-8 JSON (the header) terminated by ``\\n``, followed
by every parameter as little-endian float64 in header order.  Header::

    {"format": "vessam-params", "version": 1,
     "params": [{"name": ..., "shape": [...], "offset": <float index>}, ...]}
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import SchemaViolation
from .tensor import Tensor

FORMAT = "vessam-params"


def save_params(params: dict[str, Tensor]) -> bytes:
    entries, chunks, offset = [], [], 0
    for name in sorted(params):
        data = np.ascontiguousarray(params[name].data, dtype="<f8")
        entries.append({"name": name, "shape": list(data.shape), "offset": offset})
        chunks.append(data.tobytes())
        offset += data.size
    header = json.dumps({"format": FORMAT, "version": 1, "params": entries})
    return header.encode("utf-8") + b"\n" + b"".join(chunks)


def load_params(blob: bytes) -> dict[str, np.ndarray]:
    newline = blob.find(b"\n")
    if newline < 0:
        raise SchemaViolation("checkpoint has no header line")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolation(f"bad checkpoint header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise SchemaViolation("not a vessam parameter checkpoint")
    if header.get("version") != 1:
        raise SchemaViolation(f"unsupported checkpoint version {header.get('version')!r}")
    if (len(blob) - newline - 1) % 8:
        raise SchemaViolation("checkpoint payload is not a whole number of float64 values")
    payload = np.frombuffer(blob, dtype="<f8", offset=newline + 1)
    out = {}
    try:
        for e in header["params"]:
            size = int(np.prod(e["shape"], dtype=np.int64))
            start = int(e["offset"])
            if start < 0 or start + size > payload.size:
                raise SchemaViolation(f"parameter {e['name']!r} runs past the end of the file")
            out[e["name"]] = payload[start : start + size].reshape(e["shape"]).astype(np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"malformed checkpoint header: {exc}") from exc
    return out
