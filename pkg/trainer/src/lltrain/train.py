"""The CycleGAN training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import torch

from . import losses
from .config import TrainConfig
from .data import UnpairedDataset
from .models import Discriminator, Generator, PerceptualExtractor

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, component: str):
        super().__init__(f"non-finite {component} loss at iteration "
                         f"{iteration}")
        self.iteration = iteration


@dataclass
class ModelSet:
    g_a: Generator       # A (low-light) -> B (target)
    g_b: Generator
    d_a: Discriminator   # scores domain-B patches
    d_b: Discriminator
    phi: PerceptualExtractor


@dataclass
class HistoryRow:
    iteration: int
    l_gan: float
    l_cyc: float
    l_idt: float
    total: float


@dataclass
class TrainResult:
    models: ModelSet
    history: List[HistoryRow] = field(default_factory=list)

    def write_history_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iteration", "L_GAN", "L_cyc", "L_idt", "total"])
            for r in self.history:
                writer.writerow([r.iteration, f"{r.l_gan:.6f}",
                                 f"{r.l_cyc:.6f}", f"{r.l_idt:.6f}",
                                 f"{r.total:.6f}"])


class ImagePool:
    """Buffer of previously generated patches; with probability 0.5 a
    query swaps the fresh patch for a stored one (discriminator updates
    see a mix of current and historical fakes)."""

    def __init__(self, size: int, generator: torch.Generator):
        self.size = size
        self.gen = generator
        self.items: List[torch.Tensor] = []

    def query(self, batch: torch.Tensor) -> torch.Tensor:
        if self.size == 0:
            return batch
        out = []
        for img in batch.detach():
            if len(self.items) < self.size:
                self.items.append(img.clone())
                out.append(img)
            elif torch.rand((), generator=self.gen) < 0.5:
                i = int(torch.randint(self.size, (), generator=self.gen))
                out.append(self.items[i].clone())
                self.items[i] = img.clone()
            else:
                out.append(img)
        return torch.stack(out)


def build_models(cfg: TrainConfig,
                 pretrained_phi: bool = True) -> ModelSet:
    torch.manual_seed(cfg.seed)
    return ModelSet(g_a=Generator(cfg.arch), g_b=Generator(cfg.arch),
                    d_a=Discriminator(), d_b=Discriminator(),
                    phi=PerceptualExtractor(pretrained=pretrained_phi))


def _check_finite(value: torch.Tensor, iteration: int,
                  component: str) -> torch.Tensor:
    if not torch.isfinite(value).all():
        raise TrainingDiverged(iteration, component)
    return value


def train(dataset: UnpairedDataset, cfg: TrainConfig,
          models: Optional[ModelSet] = None,
          pretrained_phi: bool = True) -> TrainResult:
    """Alternating generator/discriminator updates; deterministic under
    the config seed up to backend nondeterminism."""
    if models is None:
        models = build_models(cfg, pretrained_phi=pretrained_phi)
    g_a, g_b, d_a, d_b, phi = (models.g_a, models.g_b, models.d_a,
                               models.d_b, models.phi)
    result = TrainResult(models=models)
    if cfg.iterations == 0:
        return result

    opt_g = torch.optim.Adam(list(g_a.parameters()) + list(g_b.parameters()),
                             lr=cfg.learning_rate, betas=cfg.betas)
    opt_d = torch.optim.Adam(list(d_a.parameters()) + list(d_b.parameters()),
                             lr=cfg.learning_rate, betas=cfg.betas)
    pool_gen = torch.Generator().manual_seed(cfg.seed + 7)
    pool_b = ImagePool(cfg.pool_size, pool_gen)
    pool_a = ImagePool(cfg.pool_size, pool_gen)
    w, mode = cfg.local_weight, cfg.adversarial_mode

    for it, (a, b) in enumerate(dataset.batches(cfg.batch_size,
                                                cfg.iterations,
                                                cfg.seed + 13)):
        # --- generator update ---
        fake_b = g_a(a)
        fake_a = g_b(b)
        l_gan = 0.5 * (losses.gan_loss_split(d_a, b, fake_b, mode,
                                             "generator", w)
                       + losses.gan_loss_split(d_b, a, fake_a, mode,
                                               "generator", w))
        l_cyc = losses.cycle_loss(a, b, g_a, g_b, phi, w)
        l_idt = losses.identity_loss(a, b, g_a, g_b, phi, w)
        for name, v in (("gan", l_gan), ("cyc", l_cyc), ("idt", l_idt)):
            _check_finite(v, it, name)
        total = (cfg.lambda_gan * l_gan + cfg.lambda_cyc * l_cyc
                 + cfg.lambda_idt * l_idt)
        opt_g.zero_grad(set_to_none=True)
        total.backward()
        opt_g.step()
        g_a.project_()
        g_b.project_()

        # --- discriminator update ---
        hist_b = pool_b.query(fake_b)
        hist_a = pool_a.query(fake_a)
        l_d = 0.5 * (losses.gan_loss_split(d_a, b, hist_b, mode,
                                           "discriminator", w)
                     + losses.gan_loss_split(d_b, a, hist_a, mode,
                                             "discriminator", w))
        _check_finite(l_d, it, "discriminator")
        opt_d.zero_grad(set_to_none=True)
        l_d.backward()
        opt_d.step()

        row = HistoryRow(
            iteration=it, l_gan=float(l_gan.detach()),
            l_cyc=float(l_cyc.detach()), l_idt=float(l_idt.detach()),
            total=float(total.detach()))
        result.history.append(row)
        if it % 20 == 0:
            log.info("iter %d: gan %.4f cyc %.4f idt %.4f total %.4f",
                     it, row.l_gan, row.l_cyc, row.l_idt, row.total)
    return result
