"""Portable generator weight container ("LLGW" version 1).

File layout, bit-exact:

- bytes 0-3   magic ``LLGW``
- bytes 4-7   u32 little-endian version (1)
- bytes 8-11  u32 little-endian header length H
- bytes 12..12+H  UTF-8 JSON header::

    {"arch": {"in_channels", "out_channels", "base_filters",
              "n_encoder_blocks", "n_resnet_blocks", "n_decoder_blocks"},
     "tensors": [{"name", "shape", "offset", "dtype": "f32le"}, ...]}

- remainder: concatenated raw float32 little-endian tensor data; offsets
  are relative to the start of that blob and 4-byte aligned.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, asdict
from typing import Dict

import numpy as np

MAGIC = b"LLGW"
VERSION = 1


class WeightFormatError(Exception):
    """Base class for weight-file violations."""


class BadMagicError(WeightFormatError):
    pass


class UnsupportedVersionError(WeightFormatError):
    pass


class WeightShapeError(WeightFormatError):
    pass


class NonFiniteWeightError(WeightFormatError):
    pass


@dataclass(frozen=True)
class GeneratorArch:
    in_channels: int = 6
    out_channels: int = 6
    base_filters: int = 64
    n_encoder_blocks: int = 3
    n_resnet_blocks: int = 9
    n_decoder_blocks: int = 3

    @property
    def downsample_factor(self) -> int:
        return 2 ** self.n_encoder_blocks

    def encoder_channels(self, i: int) -> tuple:
        """(in, out) channels of encoder block i (doubling per block)."""
        cin = self.in_channels if i == 0 else self.base_filters * 2 ** (i - 1)
        return cin, self.base_filters * 2 ** i

    @property
    def bottleneck_channels(self) -> int:
        return self.base_filters * 2 ** (self.n_encoder_blocks - 1)

    def decoder_channels(self, i: int) -> tuple:
        """(in, out) channels of decoder block i (halving, floored at base)."""
        e = self.n_encoder_blocks
        cin = max(self.base_filters, self.base_filters * 2 ** (e - 1 - i))
        cout = max(self.base_filters, self.base_filters * 2 ** (e - 2 - i))
        return cin, cout

    def tensor_shapes(self) -> Dict[str, tuple]:
        """The full named-tensor manifest implied by the hyperparameters."""
        shapes: Dict[str, tuple] = {}
        for i in range(self.n_encoder_blocks):
            cin, cout = self.encoder_channels(i)
            shapes[f"enc.{i}.conv.weight"] = (cout, cin, 3, 3)
            shapes[f"enc.{i}.conv.bias"] = (cout,)
            shapes[f"enc.{i}.norm.gamma"] = (cout,)
            shapes[f"enc.{i}.norm.beta"] = (cout,)
            shapes[f"enc.{i}.shrink.lambda"] = (cout,)
        c = self.bottleneck_channels
        for i in range(self.n_resnet_blocks):
            for j in (1, 2):
                shapes[f"res.{i}.conv{j}.weight"] = (c, c, 3, 3)
                shapes[f"res.{i}.conv{j}.bias"] = (c,)
                shapes[f"res.{i}.norm{j}.gamma"] = (c,)
                shapes[f"res.{i}.norm{j}.beta"] = (c,)
        for i in range(self.n_decoder_blocks):
            cin, cout = self.decoder_channels(i)
            shapes[f"dec.{i}.conv.weight"] = (cout, cin, 3, 3)
            shapes[f"dec.{i}.conv.bias"] = (cout,)
            shapes[f"dec.{i}.norm.gamma"] = (cout,)
            shapes[f"dec.{i}.norm.beta"] = (cout,)
        shapes["head.conv.weight"] = (self.out_channels, self.base_filters, 3, 3)
        shapes["head.conv.bias"] = (self.out_channels,)
        return shapes


@dataclass(frozen=True)
class GeneratorWeights:
    arch: GeneratorArch
    tensors: Dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


def validate_weights(weights: GeneratorWeights) -> GeneratorWeights:
    expected = weights.arch.tensor_shapes()
    for name, shape in expected.items():
        if name not in weights.tensors:
            raise WeightShapeError(f"missing tensor {name}")
        got = weights.tensors[name].shape
        if tuple(got) != shape:
            raise WeightShapeError(
                f"tensor {name} has shape {tuple(got)}, expected {shape}")
    extra = set(weights.tensors) - set(expected)
    if extra:
        raise WeightShapeError(f"unexpected tensors: {sorted(extra)}")
    for name, t in weights.tensors.items():
        if not np.isfinite(t).all():
            raise NonFiniteWeightError(f"tensor {name} contains NaN/Inf")
    return weights


def save_weights(weights: GeneratorWeights, path: str) -> None:
    """Serialize to LLGW v1. Written atomically (temp file + rename)."""
    validate_weights(weights)
    names = sorted(weights.tensors)
    manifest = []
    offset = 0
    blobs = []
    for name in names:
        t = np.ascontiguousarray(weights.tensors[name], dtype="<f4")
        manifest.append({"name": name, "shape": list(t.shape),
                         "offset": offset, "dtype": "f32le"})
        blobs.append(t.tobytes())
        offset += t.nbytes  # float32 keeps 4-byte alignment
    header = json.dumps({"arch": asdict(weights.arch),
                         "tensors": manifest}).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header)))
        f.write(header)
        for b in blobs:
            f.write(b)
    os.replace(tmp, path)


def load_weights(path: str) -> GeneratorWeights:
    if not os.path.isfile(path):
        raise WeightFormatError(f"missing weight file: {path}")
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12:
        raise WeightFormatError(f"weight file too short: {path}")
    if blob[:4] != MAGIC:
        raise BadMagicError(f"bad magic {blob[:4]!r} in {path}")
    version, header_len = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version} in {path}")
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
        arch = GeneratorArch(**header["arch"])
        entries = header["tensors"]
    except (ValueError, KeyError, TypeError) as e:
        raise WeightFormatError(f"malformed header in {path}: {e}") from e
    data_start = 12 + header_len
    tensors: Dict[str, np.ndarray] = {}
    for entry in entries:
        name = entry["name"]
        shape = tuple(entry["shape"])
        if entry.get("dtype") != "f32le":
            raise WeightFormatError(f"tensor {name}: unsupported dtype "
                                    f"{entry.get('dtype')!r}")
        if entry["offset"] % 4 != 0:
            raise WeightFormatError(f"tensor {name}: misaligned offset")
        count = int(np.prod(shape)) if shape else 1
        start = data_start + entry["offset"]
        end = start + 4 * count
        if end > len(blob):
            raise WeightFormatError(f"tensor {name}: data out of bounds")
        tensors[name] = np.frombuffer(blob[start:end], dtype="<f4") \
            .reshape(shape).astype(np.float32)
    return validate_weights(GeneratorWeights(arch=arch, tensors=tensors))


def describe_weights(weights: GeneratorWeights) -> dict:
    """Arch hyperparameters plus the tensor manifest, for reporting."""
    return {
        "arch": asdict(weights.arch),
        "tensors": [{"name": n, "shape": list(weights.tensors[n].shape)}
                    for n in sorted(weights.tensors)],
        "parameter_count": int(sum(t.size for t in weights.tensors.values())),
    }
