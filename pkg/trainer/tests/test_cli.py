import json
import subprocess

import numpy as np
import pytest
from click.testing import CliRunner

from lltrain.cli import main


@pytest.fixture
def workspace(tmp_path):
    import cv2
    rng = np.random.default_rng(1)
    dark = (rng.random((80, 80, 3)) * 60).astype(np.uint8)
    bright = (rng.random((80, 80, 3)) * 100 + 150).astype(np.uint8)
    dark_path = str(tmp_path / "dark.png")
    bright_path = str(tmp_path / "bright.png")
    cv2.imwrite(dark_path, dark)
    cv2.imwrite(bright_path, bright)
    cfg = {"n_local": 32, "n_region": 64, "patches_per_group": 8,
           "batch_size": 2, "iterations": 2, "seed": 0,
           "arch": {"base_filters": 8, "n_resnet_blocks": 1}}
    cfg_path = str(tmp_path / "cfg.json")
    with open(cfg_path, "w") as f:
        json.dump(cfg, f)
    return tmp_path, cfg_path, dark_path, bright_path


def test_train_command_writes_weights_and_history(workspace):
    tmp_path, cfg_path, dark, bright = workspace
    out = str(tmp_path / "gen.llgw")
    result = CliRunner().invoke(main, [
        "train", "--config", cfg_path, "--dark-frame", dark,
        "--target-frame", bright, "--output", out, "--no-pretrained-phi"])
    assert result.exit_code == 0, result.output
    with open(out, "rb") as f:
        assert f.read(4) == b"LLGW"
    history = open(out + ".csv").read().splitlines()
    assert history[0] == "iteration,L_GAN,L_cyc,L_idt,total"
    assert len(history) == 3

    # the primary engine accepts the file
    proc = subprocess.run(["lowlight", "validate-weights", out],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_export_init_command(workspace):
    tmp_path, cfg_path, _, _ = workspace
    out = str(tmp_path / "init.llgw")
    result = CliRunner().invoke(main, [
        "export-init", "--config", cfg_path, "--seed", "3",
        "--output", out])
    assert result.exit_code == 0, result.output
    proc = subprocess.run(["lowlight", "validate-weights", out],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["arch"]["base_filters"] == 8
