"""Versioned binary checkpoint container for predictor parameters.

Layout (all integers little-endian)::

    6 bytes   magic b"RFCKPT"
    4 bytes   uint32 header length H
    H bytes   UTF-8 JSON header, keys sorted, no whitespace
    N bytes   parameter payload: float64 little-endian, row-major, concatenated
    4 bytes   uint32 CRC-32 of every preceding byte

The header holds ``format_version``, ``architecture``, ``parameters`` (a list
of ``{"name", "shape", "offset"}`` with byte offsets into the payload) and
``train_config``.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .predictor import Architecture, PredictorParams

MAGIC = b"RFCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(params):
    named = params.numpy().named()
    entries, chunks, offset = [], [], 0
    for name in sorted(named):
        arr = np.ascontiguousarray(named[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "format_version": FORMAT_VERSION,
        "architecture": params.arch.as_dict(),
        "parameters": entries,
        "train_config": _jsonable(params.train_config),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = MAGIC + struct.pack("<I", len(head)) + head + b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body))


def loads(blob):
    if len(blob) < len(MAGIC) + 8 or not blob.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic or truncated)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("corrupt payload: checksum mismatch")
    (hlen,) = struct.unpack("<I", body[6:10])
    try:
        header = json.loads(body[10:10 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {header.get('format_version')} != supported {FORMAT_VERSION}")
    payload = body[10 + hlen:]
    named = {}
    for entry in header["parameters"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start, stop = entry["offset"], entry["offset"] + 8 * count
        if stop > len(payload):
            raise CheckpointError(f"corrupt payload: parameter {entry['name']} runs past the end")
        named[entry["name"]] = np.frombuffer(payload[start:stop], dtype="<f8").reshape(entry["shape"]).copy()
    arch = Architecture(**header["architecture"])
    try:
        return PredictorParams.from_named(arch, named, header.get("train_config"))
    except KeyError as exc:
        raise CheckpointError(f"checkpoint lacks parameter {exc}") from exc


def save_checkpoint(params, path):
    with open(path, "wb") as fh:
        fh.write(dumps(params))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
