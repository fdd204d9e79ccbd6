"""LLGW v1 weight export.

Independent implementation of the interchange format consumed by the
inference engine: magic ``LLGW``, u32 version, u32 header length, JSON
header (arch hyperparameters + tensor manifest with 4-byte-aligned
offsets into the data blob), concatenated float32 little-endian data.
Files are written atomically (temp + rename).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict
from typing import Dict

import numpy as np
import torch

from .models import Generator

MAGIC = b"LLGW"
VERSION = 1


def generator_tensors(gen: Generator) -> Dict[str, np.ndarray]:
    """Named float32 tensors in the inference engine's manifest scheme."""
    out: Dict[str, np.ndarray] = {}

    def put(name, tensor):
        out[name] = tensor.detach().cpu().numpy().astype(np.float32)

    for i, blk in enumerate(gen.enc):
        put(f"enc.{i}.conv.weight", blk["conv"].weight)
        put(f"enc.{i}.conv.bias", blk["conv"].bias)
        put(f"enc.{i}.norm.gamma", blk["norm"].weight)
        put(f"enc.{i}.norm.beta", blk["norm"].bias)
        put(f"enc.{i}.shrink.lambda",
            blk["shrink"].threshold.clamp_min(0.0))
    for i, blk in enumerate(gen.res):
        for j, (conv, norm) in enumerate(((blk.conv1, blk.norm1),
                                          (blk.conv2, blk.norm2)), start=1):
            put(f"res.{i}.conv{j}.weight", conv.weight)
            put(f"res.{i}.conv{j}.bias", conv.bias)
            put(f"res.{i}.norm{j}.gamma", norm.weight)
            put(f"res.{i}.norm{j}.beta", norm.bias)
    for i, blk in enumerate(gen.dec):
        put(f"dec.{i}.conv.weight", blk["conv"].weight)
        put(f"dec.{i}.conv.bias", blk["conv"].bias)
        put(f"dec.{i}.norm.gamma", blk["norm"].weight)
        put(f"dec.{i}.norm.beta", blk["norm"].bias)
    put("head.conv.weight", gen.head.weight)
    put("head.conv.bias", gen.head.bias)
    return out


def export_weights(gen: Generator, path: str) -> None:
    tensors = generator_tensors(gen)
    for name, t in tensors.items():
        if not np.isfinite(t).all():
            raise ValueError(f"tensor {name} contains NaN/Inf")
    names = sorted(tensors)
    manifest, blobs = [], []
    offset = 0
    for name in names:
        t = np.ascontiguousarray(tensors[name], dtype="<f4")
        manifest.append({"name": name, "shape": list(t.shape),
                         "offset": offset, "dtype": "f32le"})
        blobs.append(t.tobytes())
        offset += t.nbytes
    header = json.dumps({"arch": asdict(gen.arch),
                         "tensors": manifest}).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header)))
        f.write(header)
        for b in blobs:
            f.write(b)
    os.replace(tmp, path)


def import_weights(gen: Generator, path: str) -> Generator:
    """Load an LLGW file back into a torch generator (shape-checked)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"bad magic in {path}")
    version, header_len = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    header = json.loads(blob[12:12 + header_len])
    data = {e["name"]:
            np.frombuffer(blob, dtype="<f4", offset=12 + header_len
                          + e["offset"],
                          count=int(np.prod(e["shape"])))
            .reshape(e["shape"]).copy()
            for e in header["tensors"]}
    current = generator_tensors(gen)
    if set(data) != set(current):
        raise ValueError("tensor manifest mismatch")
    with torch.no_grad():
        for name, arr in data.items():
            target = _param_by_name(gen, name)
            if tuple(target.shape) != arr.shape:
                raise ValueError(f"tensor {name}: shape mismatch")
            target.copy_(torch.from_numpy(arr))
    return gen


def _param_by_name(gen: Generator, name: str) -> torch.Tensor:
    part = name.split(".")
    if part[0] == "enc":
        blk = gen.enc[int(part[1])]
        if part[2] == "conv":
            return blk["conv"].weight if part[3] == "weight" \
                else blk["conv"].bias
        if part[2] == "norm":
            return blk["norm"].weight if part[3] == "gamma" \
                else blk["norm"].bias
        return blk["shrink"].threshold
    if part[0] == "res":
        blk = gen.res[int(part[1])]
        mod = getattr(blk, part[2][:-1] + part[2][-1])
        if part[2].startswith("conv"):
            return mod.weight if part[3] == "weight" else mod.bias
        return mod.weight if part[3] == "gamma" else mod.bias
    if part[0] == "dec":
        blk = gen.dec[int(part[1])]
        if part[2] == "conv":
            return blk["conv"].weight if part[3] == "weight" \
                else blk["conv"].bias
        return blk["norm"].weight if part[3] == "gamma" else blk["norm"].bias
    if part[0] == "head":
        return gen.head.weight if part[2] == "weight" else gen.head.bias
    raise KeyError(name)
