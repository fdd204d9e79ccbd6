"""Torch models: the generator (mirroring the inference engine's forward
pass exactly), the patch discriminator, and the frozen perceptual
feature extractor."""

from __future__ import annotations

import logging

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ArchConfig

log = logging.getLogger(__name__)


class ChannelSoftshrink(nn.Module):
    """sign(x) * max(|x| - lambda_c, 0) with one learnable threshold per
    channel. Thresholds are clamped to >= 0 by ``project_()`` after each
    optimizer step."""

    def __init__(self, channels: int, init: float = 0.05):
        super().__init__()
        self.threshold = nn.Parameter(torch.full((channels,), float(init)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        lam = self.threshold.clamp_min(0.0)[None, :, None, None]
        return torch.sign(x) * torch.clamp(torch.abs(x) - lam, min=0.0)

    @torch.no_grad()
    def project_(self) -> None:
        self.threshold.clamp_(min=0.0)


class InstanceNorm(nn.Module):
    """Affine instance norm over spatial positions (population variance,
    eps inside the sqrt) — the same arithmetic the inference engine uses.
    Unlike nn.InstanceNorm2d it accepts 1x1 feature maps, which the tiny
    test models produce at the bottleneck."""

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps
        self.affine = True

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mean = x.mean(dim=(2, 3), keepdim=True)
        var = x.var(dim=(2, 3), unbiased=False, keepdim=True)
        out = (x - mean) / torch.sqrt(var + self.eps)
        return out * self.weight[None, :, None, None] \
            + self.bias[None, :, None, None]


def _conv3(c_in: int, c_out: int, stride: int) -> nn.Conv2d:
    return nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1,
                     padding_mode="reflect")


class ResnetBlock(nn.Module):
    """x + IN(conv(ReLU(IN(conv(x)))))."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = _conv3(channels, channels, 1)
        self.norm1 = InstanceNorm(channels)
        self.conv2 = _conv3(channels, channels, 1)
        self.norm2 = InstanceNorm(channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.norm1(self.conv1(x)))
        return x + self.norm2(self.conv2(h))


class Generator(nn.Module):
    """Encoder (stride-2 conv + IN + channel softshrink) x3, resnet
    bottleneck, decoder (nearest-2x + conv + IN + ReLU) x3, tanh head.

    Layer-for-layer identical to the numpy inference engine so exported
    weights evaluate the same function there.
    """

    def __init__(self, arch: ArchConfig = ArchConfig()):
        super().__init__()
        self.arch = arch
        enc = []
        cin = arch.in_channels
        for i in range(arch.n_encoder_blocks):
            cout = arch.base_filters * 2 ** i
            enc.append(nn.ModuleDict({
                "conv": _conv3(cin, cout, 2),
                "norm": InstanceNorm(cout),
                "shrink": ChannelSoftshrink(cout),
            }))
            cin = cout
        self.enc = nn.ModuleList(enc)
        self.res = nn.ModuleList(
            ResnetBlock(cin) for _ in range(arch.n_resnet_blocks))
        dec = []
        e = arch.n_encoder_blocks
        for i in range(arch.n_decoder_blocks):
            cout = max(arch.base_filters, arch.base_filters * 2 ** (e - 2 - i))
            dec.append(nn.ModuleDict({
                "conv": _conv3(cin, cout, 1),
                "norm": InstanceNorm(cout),
            }))
            cin = cout
        self.dec = nn.ModuleList(dec)
        self.head = _conv3(cin, arch.out_channels, 1)
        self._init_weights()

    def _init_weights(self) -> None:
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.normal_(m.weight, 0.0, 0.02)
                nn.init.zeros_(m.bias)
            elif isinstance(m, InstanceNorm):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        f = self.arch.downsample_factor
        if x.shape[-1] % f or x.shape[-2] % f:
            raise ValueError(f"input spatial size {x.shape[-2]}x{x.shape[-1]} "
                             f"not divisible by {f}")
        for blk in self.enc:
            x = blk["shrink"](blk["norm"](blk["conv"](x)))
        for blk in self.res:
            x = blk(x)
        for blk in self.dec:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = F.relu(blk["norm"](blk["conv"](x)))
        return torch.tanh(self.head(x))

    def project_(self) -> None:
        """Re-impose parameter constraints (softshrink thresholds >= 0)."""
        for blk in self.enc:
            blk["shrink"].project_()


class Discriminator(nn.Module):
    """Five blocks of 4x4 conv + instance norm + LeakyReLU(0.2), then a
    1-channel patch score head."""

    def __init__(self, in_channels: int = 6, base_filters: int = 64):
        super().__init__()
        channels = [base_filters, base_filters * 2, base_filters * 4,
                    base_filters * 8, base_filters * 8]
        strides = [2, 2, 2, 1, 1]
        layers = []
        cin = in_channels
        for cout, s in zip(channels, strides):
            layers += [nn.Conv2d(cin, cout, 4, stride=s, padding=1),
                       InstanceNorm(cout),
                       nn.LeakyReLU(0.2, inplace=True)]
            cin = cout
        layers.append(nn.Conv2d(cin, 1, 4, stride=1, padding=1))
        self.net = nn.Sequential(*layers)
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.normal_(m.weight, 0.0, 0.02)
                nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


def _vgg19_features() -> nn.Sequential:
    """VGG19 convolutional trunk up to conv4_4's ReLU (3-channel input)."""
    cfg = [64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M",
           512, 512, 512, 512]
    layers = []
    cin = 3
    for v in cfg:
        if v == "M":
            layers.append(nn.MaxPool2d(2))
        else:
            layers += [nn.Conv2d(cin, v, 3, padding=1), nn.ReLU(inplace=True)]
            cin = v
    return nn.Sequential(*layers)


class PerceptualExtractor(nn.Module):
    """Frozen feature map phi used by the region cycle/identity losses.

    Tries the pretrained torchvision VGG19; when the weights cannot be
    fetched (offline environments) it falls back to a fixed-seed random
    initialization of the same topology, which still defines a stable
    feature metric.
    """

    def __init__(self, pretrained: bool = True, seed: int = 1234):
        super().__init__()
        self.pretrained = False
        net = None
        if pretrained:
            try:
                from torchvision.models import vgg19, VGG19_Weights
                full = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).features
                net = full[:26]  # through conv4_4 + ReLU
                self.pretrained = True
            except Exception as e:  # download/offline failure
                log.warning("pretrained VGG19 unavailable (%s); "
                            "using fixed-seed random features", e)
        if net is None:
            net = _vgg19_features()
            gen = torch.Generator().manual_seed(seed)
            for m in net.modules():
                if isinstance(m, nn.Conv2d):
                    fan_in = m.in_channels * 9
                    std = (2.0 / fan_in) ** 0.5
                    with torch.no_grad():
                        m.weight.copy_(torch.randn(m.weight.shape,
                                                   generator=gen) * std)
                        m.bias.zero_()
        self.net = net
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True):
        # phi stays in eval mode regardless of the surrounding train() calls
        return super().train(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != 3:
            raise ValueError(f"phi expects 3 channels, got {x.shape[1]}")
        return self.net(x)
