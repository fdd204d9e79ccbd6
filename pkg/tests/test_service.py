import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from lowlight import imagecore as ic
from lowlight import nnforward as nf
from lowlight.llgw import GeneratorArch, save_weights
from lowlight.service import app

ARCH = GeneratorArch(base_filters=8, n_resnet_blocks=2)


@pytest.fixture
def client():
    return TestClient(app)


@pytest.fixture
def weights_path(tmp_path):
    path = str(tmp_path / "gen.llgw")
    save_weights(nf.random_weights(ARCH, seed=5), path)
    return path


@pytest.fixture
def tiny_sequence(tmp_path):
    rng = np.random.default_rng(13)
    pattern = str(tmp_path / "in" / "f_%04d.png")
    import os
    os.makedirs(tmp_path / "in")
    for i in range(3):
        ic.save_frame(rng.random((3, 24, 24)).astype(np.float32), pattern % i)
    return pattern


def ndjson_lines(resp):
    return [json.loads(l) for l in resp.text.strip().splitlines()]


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_enhance_stream(client, weights_path, tiny_sequence, tmp_path):
    req = {"input_pattern": tiny_sequence,
           "output_pattern": str(tmp_path / "out" / "e_%04d.png"),
           "start": 0, "count": 3, "weights_path": weights_path,
           "n_local": 8, "n_region": 16}
    resp = client.post("/enhance", json=req)
    assert resp.status_code == 200
    lines = ndjson_lines(resp)
    assert lines[-1] == {"status": "done"}
    frames = [l for l in lines if "frame" in l]
    assert [l["frame"] for l in frames] == [0, 1, 2]
    # 24x24 with N_l=8, stride 4: 5 origins per axis
    assert all(l["tiles"] == 25 for l in frames)
    for l in frames:
        assert ic.load_frame(l["output"], 8).shape == (3, 24, 24)


def test_enhance_missing_weights_errors(client, tiny_sequence, tmp_path):
    req = {"input_pattern": tiny_sequence,
           "output_pattern": str(tmp_path / "o_%04d.png"),
           "start": 0, "count": 3,
           "weights_path": str(tmp_path / "no.llgw"),
           "n_local": 8, "n_region": 16}
    resp = client.post("/enhance", json=req)
    lines = ndjson_lines(resp)
    assert "error" in lines[-1]
    assert "no.llgw" in lines[-1]["error"]


def test_smooth_single_frame_is_identity(client, tmp_path):
    rng = np.random.default_rng(17)
    src = str(tmp_path / "s_%02d.png")
    frame = rng.random((3, 20, 20)).astype(np.float32)
    ic.save_frame(frame, src % 0)
    out_pattern = str(tmp_path / "sm_%02d.png")
    resp = client.post("/smooth", json={
        "input_pattern": src, "output_pattern": out_pattern,
        "start": 0, "count": 1})
    assert ndjson_lines(resp)[-1] == {"status": "done"}
    assert np.array_equal(ic.load_frame(out_pattern % 0, 8),
                          ic.load_frame(src % 0, 8))


def test_smooth_mixed_sizes_aborts_naming_frame(client, tmp_path):
    src = str(tmp_path / "m_%02d.png")
    ic.save_frame(np.zeros((3, 16, 16), dtype=np.float32), src % 0)
    ic.save_frame(np.zeros((3, 16, 18), dtype=np.float32), src % 1)
    resp = client.post("/smooth", json={
        "input_pattern": src, "output_pattern": str(tmp_path / "o_%02d.png"),
        "start": 0, "count": 2})
    lines = ndjson_lines(resp)
    assert "error" in lines[-1]
    assert "frame 1" in lines[-1]["error"]


def test_pipeline_equals_enhance_then_smooth(client, weights_path,
                                             tiny_sequence, tmp_path):
    common = {"input_pattern": tiny_sequence, "start": 0, "count": 3,
              "weights_path": weights_path, "n_local": 8, "n_region": 16,
              "n_max": 2}
    # one-shot pipeline
    pipe_out = str(tmp_path / "pipe" / "p_%04d.png")
    resp = client.post("/pipeline", json={**common,
                                          "output_pattern": pipe_out})
    assert ndjson_lines(resp)[-1] == {"status": "done"}
    # two-step
    enh_out = str(tmp_path / "two" / "e_%04d.png")
    sm_out = str(tmp_path / "two" / "s_%04d.png")
    client.post("/enhance", json={**common, "output_pattern": enh_out})
    client.post("/smooth", json={**common, "input_pattern": enh_out,
                                 "output_pattern": sm_out})
    for i in range(3):
        a = open(pipe_out % i, "rb").read()
        b = open(sm_out % i, "rb").read()
        assert a == b, f"frame {i} differs"


def test_empty_range_rejected(client, tmp_path):
    resp = client.post("/pipeline", json={
        "input_pattern": str(tmp_path / "x_%d.png"),
        "output_pattern": str(tmp_path / "y_%d.png"),
        "start": 0, "count": 0})
    assert resp.status_code == 422  # pydantic bound: count >= 1


def test_validate_weights_endpoint(client, weights_path, tmp_path):
    resp = client.post("/weights/validate", json={"path": weights_path})
    assert resp.status_code == 200
    info = resp.json()
    assert info["arch"]["n_resnet_blocks"] == 2
    names = {t["name"] for t in info["tensors"]}
    assert "head.conv.weight" in names

    bad = str(tmp_path / "bad.llgw")
    blob = bytearray(open(weights_path, "rb").read())
    blob[:4] = b"WRNG"
    open(bad, "wb").write(bytes(blob))
    resp = client.post("/weights/validate", json={"path": bad})
    assert resp.status_code == 422
    assert "magic" in resp.json()["detail"]


def test_forward_endpoint_matches_direct_call(client, weights_path):
    rng = np.random.default_rng(23)
    x = rng.uniform(-1, 1, (6, 16, 16)).astype(np.float32)
    resp = client.post("/generator/forward", json={
        "weights_path": weights_path,
        "tensor": {"shape": [6, 16, 16], "data": [float(v) for v in x.ravel()]}})
    assert resp.status_code == 200
    body = resp.json()
    remote = np.array(body["data"], dtype=np.float32) \
        .reshape(body["shape"])
    local = nf.generator_forward(x, nf.random_weights(ARCH, seed=5))
    assert np.abs(remote - local).max() < 1e-5


def test_forward_endpoint_bad_shape(client, weights_path):
    resp = client.post("/generator/forward", json={
        "weights_path": weights_path,
        "tensor": {"shape": [6, 16, 16], "data": [0.0, 1.0]}})
    assert resp.status_code == 400
