"""Training configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field


@dataclass
class ArchConfig:
    """Generator hyperparameters; must agree with the inference engine's
    tensor manifest for the export to validate."""
    in_channels: int = 6
    out_channels: int = 6
    base_filters: int = 64
    n_encoder_blocks: int = 3
    n_resnet_blocks: int = 9
    n_decoder_blocks: int = 3

    @property
    def downsample_factor(self) -> int:
        return 2 ** self.n_encoder_blocks


@dataclass
class TrainConfig:
    lambda_gan: float = 1.0
    lambda_cyc: float = 10.0
    lambda_idt: float = 0.5
    local_weight: float = 0.9          # w: local/region loss split, > 0.5
    n_local: int = 360
    n_region: int = 1000
    patches_per_group: int = 1000
    adversarial_mode: str = "ralsgan"  # or "lsgan"
    learning_rate: float = 2e-4
    betas: tuple = (0.5, 0.999)
    batch_size: int = 4
    iterations: int = 200
    pool_size: int = 50
    seed: int = 0
    arch: ArchConfig = field(default_factory=ArchConfig)

    def __post_init__(self):
        if min(self.lambda_gan, self.lambda_cyc, self.lambda_idt) < 0:
            raise ValueError("loss weights must be >= 0")
        if not 0.5 < self.local_weight <= 1.0:
            raise ValueError(
                f"local weight must be in (0.5, 1], got {self.local_weight}")
        if self.adversarial_mode not in ("ralsgan", "lsgan"):
            raise ValueError(
                f"unknown adversarial mode {self.adversarial_mode!r}")
        if self.n_local % self.arch.downsample_factor != 0:
            raise ValueError(
                f"local patch side {self.n_local} not divisible by the "
                f"generator downsampling factor {self.arch.downsample_factor}")
        if self.n_region <= self.n_local:
            raise ValueError("region side must exceed local side")

    @classmethod
    def from_json(cls, path: str) -> "TrainConfig":
        with open(path) as f:
            raw = json.load(f)
        arch = ArchConfig(**raw.pop("arch", {}))
        if "betas" in raw:
            raw["betas"] = tuple(raw["betas"])
        return cls(arch=arch, **raw)

    def to_json(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump({**asdict(self), "betas": list(self.betas)}, f, indent=2)
