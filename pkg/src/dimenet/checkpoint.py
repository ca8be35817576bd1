"""Checkpoint container.

Layout::

    b"DIMENET1"                      8-byte magic
    uint64 little-endian             header length H
    H bytes UTF-8 JSON               {"version", "config", "train", "seed", "step",
                                      "meta", "arrays": [{name, shape, offset}, ...]}
    raw little-endian float64 data   arrays in manifest order; offsets are
                                     relative to the start of this section
"""

from dataclasses import dataclass, field
import json
import struct
from typing import Dict, Optional

import numpy as np
import torch

from .exceptions import CheckpointError, TruncatedCheckpointError
from .model import ModelConfig, check_params

MAGIC = b"DIMENET1"
FORMAT_VERSION = 1

_GROUPS = ("params", "ema", "opt.m", "opt.v", "opt.vhat")


@dataclass
class Checkpoint:
    config: ModelConfig
    params: Dict[str, torch.Tensor]
    ema: Optional[Dict[str, torch.Tensor]] = None
    optimizer: Optional[Dict[str, Dict[str, torch.Tensor]]] = None  # keys m, v, vhat
    seed: int = 0
    step: int = 0
    train_config: Optional[dict] = None
    meta: dict = field(default_factory=dict)


def _arrays(ckpt):
    yield from (("params/" + k, v) for k, v in ckpt.params.items())
    if ckpt.ema is not None:
        yield from (("ema/" + k, v) for k, v in ckpt.ema.items())
    if ckpt.optimizer is not None:
        for slot in ("m", "v", "vhat"):
            yield from ((f"opt.{slot}/" + k, v) for k, v in ckpt.optimizer[slot].items())


def save_checkpoint(path, ckpt):
    manifest = []
    blobs = []
    offset = 0
    for name, t in _arrays(ckpt):
        a = np.ascontiguousarray(t.detach().cpu().numpy(), dtype="<f8")
        manifest.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = {
        "version": FORMAT_VERSION,
        "config": ckpt.config.to_dict(),
        "train": ckpt.train_config,
        "seed": int(ckpt.seed),
        "step": int(ckpt.step),
        "meta": ckpt.meta,
        "data_bytes": offset,
        "arrays": manifest,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16:
        raise TruncatedCheckpointError(f"{path}: file too short for a checkpoint header")
    if buf[:8] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {buf[:8]!r}")
    (hlen,) = struct.unpack("<Q", buf[8:16])
    if 16 + hlen > len(buf):
        raise TruncatedCheckpointError(f"{path}: header extends past end of file")
    try:
        header = json.loads(buf[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from None
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('version')}")
    data = memoryview(buf)[16 + hlen:]
    if len(data) < header["data_bytes"]:
        raise TruncatedCheckpointError(
            f"{path}: expected {header['data_bytes']} data bytes, found {len(data)}")
    if len(data) > header["data_bytes"]:
        raise CheckpointError(f"{path}: trailing bytes after array data")

    groups = {g: {} for g in _GROUPS}
    expected = 0
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        if entry["offset"] != expected:
            raise CheckpointError(f"{path}: manifest offset mismatch at {entry['name']}")
        end = expected + 8 * count
        if end > len(data):
            raise TruncatedCheckpointError(f"{path}: array {entry['name']} truncated")
        a = np.frombuffer(data[expected:end], dtype="<f8").reshape(shape).astype(np.float64)
        expected = end
        group, _, name = entry["name"].partition("/")
        if group not in groups:
            raise CheckpointError(f"{path}: unknown array group {group!r}")
        groups[group][name] = torch.from_numpy(a)

    config = ModelConfig.from_dict(header["config"])
    try:
        check_params(groups["params"], config)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    opt = None
    if groups["opt.m"]:
        opt = {"m": groups["opt.m"], "v": groups["opt.v"], "vhat": groups["opt.vhat"]}
    return Checkpoint(
        config=config,
        params=groups["params"],
        ema=groups["ema"] or None,
        optimizer=opt,
        seed=header["seed"],
        step=header["step"],
        train_config=header.get("train"),
        meta=header.get("meta", {}),
    )
