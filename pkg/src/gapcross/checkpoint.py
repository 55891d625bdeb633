"""Checkpoint container: versioned header, JSON shape table, raw array bytes.

Layout: magic "GXCK" + uint32 version + uint64 manifest length + UTF-8 JSON
manifest + concatenated C-order array payloads. The manifest lists every
array (name, dtype, shape, byte length, in payload order) plus a free-form
`meta` dict (scalars, config text, RNG states).
"""

import json
import struct

import numpy as np

MAGIC = b"GXCK"
VERSION = 1


def save_checkpoint(path, arrays: dict, meta: dict) -> None:
    """Write arrays (name -> ndarray, insertion order preserved) and meta."""
    entries = []
    payloads = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        buf = arr.tobytes()
        entries.append({"name": name, "dtype": str(arr.dtype),
                        "shape": list(arr.shape), "nbytes": len(buf)})
        payloads.append(buf)
    manifest = json.dumps({"arrays": entries, "meta": meta},
                          sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(manifest)))
        fh.write(manifest)
        for buf in payloads:
            fh.write(buf)


def load_checkpoint(path):
    """Read a checkpoint; returns (arrays, meta)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a gapcross checkpoint: {path}")
        version, mlen = struct.unpack("<IQ", fh.read(12))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        manifest = json.loads(fh.read(mlen).decode("utf-8"))
        arrays = {}
        for entry in manifest["arrays"]:
            buf = fh.read(entry["nbytes"])
            arr = np.frombuffer(buf, dtype=np.dtype(entry["dtype"])).copy()
            arrays[entry["name"]] = arr.reshape(entry["shape"])
    return arrays, manifest["meta"]
