"""Command-line entry points for training and weight export."""

from __future__ import annotations

import logging

import click
import numpy as np

from .config import TrainConfig
from .data import UnpairedDataset
from .export import export_weights
from .train import train


def _load_frame(path: str) -> np.ndarray:
    import cv2
    img = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise click.ClickException(f"cannot read frame: {path}")
    img = cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
    scale = 255.0 if img.dtype == np.uint8 else 65535.0
    return img.transpose(2, 0, 1).astype(np.float32) / scale


@click.group()
def main():
    """Unpaired CycleGAN trainer for the low-light enhancement engine."""


@main.command("train")
@click.option("--config", "config_path", required=True,
              help="training config as JSON")
@click.option("--dark-frame", required=True,
              help="first frame of the low-light sequence (PNG)")
@click.option("--target-frame", required=True,
              help="first frame of the target sequence (PNG)")
@click.option("--output", required=True, help="LLGW weight file to write")
@click.option("--history", "history_path", default=None,
              help="loss history CSV (default: <output>.csv)")
@click.option("--no-pretrained-phi", is_flag=True,
              help="skip the pretrained perceptual network download")
def train_cmd(config_path, dark_frame, target_frame, output, history_path,
              no_pretrained_phi):
    """Train G_A on two unpaired first frames and export its weights."""
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    cfg = TrainConfig.from_json(config_path)
    dataset = UnpairedDataset.from_frames(
        _load_frame(dark_frame), _load_frame(target_frame),
        cfg.patches_per_group, cfg.n_local, cfg.n_region, cfg.seed)
    result = train(dataset, cfg, pretrained_phi=not no_pretrained_phi)
    export_weights(result.models.g_a, output)
    result.write_history_csv(history_path or output + ".csv")
    click.echo(f"wrote {output}")


@main.command("export-init")
@click.option("--config", "config_path", default=None,
              help="training config JSON (for the architecture)")
@click.option("--seed", default=0, type=int)
@click.option("--output", required=True)
def export_init(config_path, seed, output):
    """Export an untrained generator (for plumbing checks)."""
    import torch
    from .models import Generator
    cfg = TrainConfig.from_json(config_path) if config_path else TrainConfig()
    torch.manual_seed(seed)
    export_weights(Generator(cfg.arch), output)
    click.echo(f"wrote {output}")


if __name__ == "__main__":
    main()
