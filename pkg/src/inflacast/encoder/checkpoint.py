"""Checkpoint container: magic line, one JSON header line, raw little-endian tensors.

No timestamps or archive metadata, so identical models give identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import EncoderConfig, EncoderModel

MAGIC = b"INFLACAST-ENCODER v1\n"


def save_checkpoint(m: EncoderModel, path: str | Path, extra: dict | None = None) -> None:
    names = sorted(m.params)
    tensors, offset = [], 0
    for name in names:
        arr = np.ascontiguousarray(m.params[name])
        dt = arr.dtype.newbyteorder("<")
        nbytes = arr.size * dt.itemsize
        tensors.append({"name": name, "shape": list(arr.shape), "dtype": dt.str, "offset": offset, "nbytes": nbytes})
        offset += nbytes
    header = {"config": m.cfg.to_dict(), "tensors": tensors, "extra": extra or {}}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for name in names:
            fh.write(np.ascontiguousarray(m.params[name]).astype(m.params[name].dtype.newbyteorder("<")).tobytes())


def is_checkpoint(path: str | Path) -> bool:
    try:
        with open(path, "rb") as fh:
            return fh.read(len(MAGIC)) == MAGIC
    except OSError:
        return False


def load_checkpoint(path: str | Path, with_extra: bool = False):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not an encoder checkpoint")
        header = json.loads(fh.readline().decode("utf-8"))
        blob = fh.read()
    cfg_d = header["config"]
    cfg_d["allow_any_max_len"] = cfg_d.get("allow_any_max_len", False)
    cfg = EncoderConfig(**cfg_d)
    params = {}
    for t in header["tensors"]:
        raw = blob[t["offset"]:t["offset"] + t["nbytes"]]
        params[t["name"]] = np.frombuffer(raw, dtype=np.dtype(t["dtype"])).reshape(t["shape"]).astype(cfg.dtype)
    m = EncoderModel(cfg, params)
    return (m, header["extra"]) if with_extra else m
