"""Thin command-line client for the enhancement service.

All work happens behind the HTTP API in :mod:`lowlight.service`; by
default the app is mounted in-process, and ``--server`` points the same
commands at a remote instance. Progress records are printed as one JSON
line per frame on stdout, diagnostics go to stderr.
"""

from __future__ import annotations

import json
import sys

import click
import httpx

from .service import app


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # sync httpx cannot drive an ASGI app directly; starlette's TestClient
    # is a sync httpx.Client that runs the app on a background portal
    from starlette.testclient import TestClient
    return TestClient(app)


def _parse_frames(spec: str) -> tuple:
    try:
        a, b = spec.split("..")
        start, end = int(a), int(b)
    except ValueError:
        raise click.BadParameter(f"expected 'a..b', got {spec!r}")
    if end < start:
        raise click.BadParameter(f"empty frame range {spec!r}")
    return start, end - start + 1


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as f:
        return json.load(f)


def _build_request(cfg_file: dict, **flags) -> dict:
    merged = dict(cfg_file)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    frames = merged.pop("frames", None)
    if frames:
        merged["start"], merged["count"] = _parse_frames(frames)
    return merged


def _run_streaming(server: str | None, endpoint: str, payload: dict) -> None:
    with _client(server) as client:
        with client.stream("POST", endpoint, json=payload) as resp:
            if resp.status_code != 200:
                resp.read()
                detail = resp.json().get("detail", resp.text)
                click.echo(f"error: {detail}", err=True)
                sys.exit(1)
            for line in resp.iter_lines():
                if not line:
                    continue
                record = json.loads(line)
                if "error" in record:
                    click.echo(f"error: {record['error']}", err=True)
                    sys.exit(1)
                if record.get("status") == "done":
                    return
                click.echo(json.dumps(record))


common_options = [
    click.option("--input", "input_pattern", help="input frame pattern, "
                 "printf-style (e.g. frames/in_%06d.png)"),
    click.option("--output", "output_pattern", help="output frame pattern"),
    click.option("--frames", help="inclusive frame range a..b"),
    click.option("--weights", "weights_path", help="LLGW weight file"),
    click.option("--local-size", "n_local", type=int),
    click.option("--region-size", "n_region", type=int),
    click.option("--nmax", "n_max", type=int),
    click.option("--motion-cutoff", "motion_cutoff", type=float),
    click.option("--jobs", type=int),
    click.option("--bit-depth", "bit_depth", type=click.Choice(["8", "16"])),
    click.option("--config", "config_path", help="JSON config file; "
                 "flags override its entries"),
    click.option("--server", help="URL of a running service instance "
                 "(default: run in-process)"),
]


def with_common_options(fn):
    for opt in reversed(common_options):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Low-light sequence enhancement toolkit."""


def _job(endpoint: str, config_path, server, bit_depth, **flags):
    if bit_depth is not None:
        flags["bit_depth"] = int(bit_depth)
    payload = _build_request(_load_config_file(config_path), **flags)
    _run_streaming(server, endpoint, payload)


@main.command()
@with_common_options
def enhance(config_path, server, bit_depth, **flags):
    """Enhance each frame tile-by-tile with the trained generator."""
    _job("/enhance", config_path, server, bit_depth, **flags)


@main.command()
@with_common_options
def smooth(config_path, server, bit_depth, **flags):
    """Remove temporal flicker with motion-adaptive averaging."""
    _job("/smooth", config_path, server, bit_depth, **flags)


@main.command()
@with_common_options
def pipeline(config_path, server, bit_depth, **flags):
    """Enhance the whole sequence, then smooth it."""
    _job("/pipeline", config_path, server, bit_depth, **flags)


@main.command("validate-weights")
@click.argument("path")
@click.option("--server", help="URL of a running service instance")
def validate_weights(path, server):
    """Check an LLGW weight file and print its manifest."""
    with _client(server) as client:
        resp = client.post("/weights/validate", json={"path": path})
        if resp.status_code != 200:
            detail = resp.json().get("detail", resp.text)
            click.echo(f"error: {detail}", err=True)
            sys.exit(1)
        click.echo(json.dumps(resp.json(), indent=2))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8023, type=int)
def serve(host, port):
    """Run the enhancement service."""
    import uvicorn
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
