"""Loss terms: relativistic/plain least-squares adversarial losses and
the local/region-weighted cycle and identity losses.

All patch tensors are (B, 6, N, N) in the model domain [-1, 1]:
channels 0-2 the local crop, 3-5 the downsampled region crop.
"""

from __future__ import annotations

import torch


def adversarial_loss(c_real: torch.Tensor, c_fake: torch.Tensor,
                     mode: str, side: str) -> torch.Tensor:
    """Least-squares GAN objectives over raw critic scores.

    ``side`` selects whose update the loss drives: the discriminator
    pushes real/fake apart, the generator pulls them together (LSGAN) or
    swaps the relativistic targets (RaLSGAN).
    """
    if c_real.numel() == 0 or c_fake.numel() == 0:
        raise ValueError("empty score set")
    if side not in ("generator", "discriminator"):
        raise ValueError(f"unknown side {side!r}")
    if mode == "ralsgan":
        rel_r = c_real - c_fake.mean()
        rel_f = c_fake - c_real.mean()
        if side == "discriminator":
            return ((rel_r - 1) ** 2).mean() + ((rel_f + 1) ** 2).mean()
        return ((rel_r + 1) ** 2).mean() + ((rel_f - 1) ** 2).mean()
    if mode == "lsgan":
        if side == "discriminator":
            return ((c_real - 1) ** 2).mean() + (c_fake ** 2).mean()
        return ((c_fake - 1) ** 2).mean()
    raise ValueError(f"unknown adversarial mode {mode!r}")


def _split_weighted(pred: torch.Tensor, target: torch.Tensor,
                    phi, w: float) -> torch.Tensor:
    """w * l1(local channels) + (1-w) * l1(phi(region channels))."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs "
                         f"{tuple(target.shape)}")
    local = torch.abs(pred[:, :3] - target[:, :3]).mean()
    region = torch.abs(phi(pred[:, 3:]) - phi(target[:, 3:])).mean()
    return w * local + (1.0 - w) * region


def cycle_loss(a_batch: torch.Tensor, b_batch: torch.Tensor,
               g_a, g_b, phi, w: float) -> torch.Tensor:
    """Both reconstruction directions: G_B(G_A(a)) vs a and
    G_A(G_B(b)) vs b, each split local/region."""
    rec_a = g_b(g_a(a_batch))
    rec_b = g_a(g_b(b_batch))
    return 0.5 * (_split_weighted(rec_a, a_batch, phi, w)
                  + _split_weighted(rec_b, b_batch, phi, w))


def identity_loss(a_batch: torch.Tensor, b_batch: torch.Tensor,
                  g_a, g_b, phi, w: float) -> torch.Tensor:
    """G_A applied to its own target domain (and G_B to its) should be
    the identity."""
    idt_b = g_a(b_batch)
    idt_a = g_b(a_batch)
    return 0.5 * (_split_weighted(idt_b, b_batch, phi, w)
                  + _split_weighted(idt_a, a_batch, phi, w))


def total_loss(l_gan: torch.Tensor, l_cyc: torch.Tensor,
               l_idt: torch.Tensor, lambda_gan: float, lambda_cyc: float,
               lambda_idt: float) -> torch.Tensor:
    for name, value in (("gan", l_gan), ("cyc", l_cyc), ("idt", l_idt)):
        if not torch.isfinite(torch.as_tensor(value)).all():
            raise FloatingPointError(f"non-finite loss component: {name}")
    return lambda_gan * l_gan + lambda_cyc * l_cyc + lambda_idt * l_idt


def duplicate_local(batch: torch.Tensor) -> torch.Tensor:
    """Local channels duplicated to the discriminator's 6-channel input."""
    return torch.cat([batch[:, :3], batch[:, :3]], dim=1)


def duplicate_region(batch: torch.Tensor) -> torch.Tensor:
    return torch.cat([batch[:, 3:], batch[:, 3:]], dim=1)


def gan_loss_split(disc, real: torch.Tensor, fake: torch.Tensor,
                   mode: str, side: str, w: float) -> torch.Tensor:
    """Adversarial loss with the same local/region weighting as the
    reconstruction losses: the discriminator scores the channel groups
    separately (each duplicated to 6 channels)."""
    local = adversarial_loss(disc(duplicate_local(real)).flatten(),
                             disc(duplicate_local(fake)).flatten(),
                             mode, side)
    region = adversarial_loss(disc(duplicate_region(real)).flatten(),
                              disc(duplicate_region(fake)).flatten(),
                              mode, side)
    return w * local + (1.0 - w) * region
