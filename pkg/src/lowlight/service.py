"""FastAPI service wrapping the enhancement pipeline.

Jobs run synchronously; enhance/smooth/pipeline stream one JSON line per
written frame (``application/x-ndjson``) so clients can follow progress
on long sequences. A failure mid-run is reported as a terminal
``{"error": ...}`` line.
"""

from __future__ import annotations

import json
from typing import Iterator, List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from . import pipeline
from .imagecore import ImageIOError
from .llgw import WeightFormatError, describe_weights, load_weights
from .nnforward import generator_forward

app = FastAPI(title="lowlight", version="0.1.0")


class JobRequest(BaseModel):
    input_pattern: str
    output_pattern: str
    start: int = 0
    count: int = Field(default=1, ge=1)
    weights_path: Optional[str] = None
    n_local: int = 360
    n_region: int = 1000
    n_max: int = 6
    motion_cutoff: float = 256.0
    jobs: int = Field(default=1, ge=1)
    bit_depth: int = 8

    def to_config(self) -> pipeline.PipelineConfig:
        try:
            return pipeline.PipelineConfig(
                input_pattern=self.input_pattern,
                output_pattern=self.output_pattern,
                start=self.start, count=self.count,
                weights_path=self.weights_path,
                n_local=self.n_local, n_region=self.n_region,
                n_max=self.n_max, motion_cutoff=self.motion_cutoff,
                jobs=self.jobs, bit_depth=self.bit_depth)
        except pipeline.PipelineError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e


class WeightsRequest(BaseModel):
    path: str


class TensorPayload(BaseModel):
    shape: List[int]
    data: List[float]


class ForwardRequest(BaseModel):
    weights_path: str
    tensor: TensorPayload


def _stream(records: Iterator[dict]) -> StreamingResponse:
    def gen():
        try:
            for rec in records:
                yield json.dumps(rec) + "\n"
            yield json.dumps({"status": "done"}) + "\n"
        except (pipeline.PipelineError, ImageIOError, WeightFormatError,
                ValueError) as e:
            yield json.dumps({"error": str(e)}) + "\n"
    return StreamingResponse(gen(), media_type="application/x-ndjson")


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/enhance")
def enhance(req: JobRequest) -> StreamingResponse:
    return _stream(pipeline.run_enhance(req.to_config()))


@app.post("/smooth")
def smooth(req: JobRequest) -> StreamingResponse:
    return _stream(pipeline.run_smooth(req.to_config()))


@app.post("/pipeline")
def full_pipeline(req: JobRequest) -> StreamingResponse:
    return _stream(pipeline.run_pipeline(req.to_config()))


@app.post("/weights/validate")
def validate_weights_file(req: WeightsRequest) -> dict:
    try:
        return describe_weights(load_weights(req.path))
    except WeightFormatError as e:
        raise HTTPException(status_code=422, detail=str(e)) from e


@app.post("/generator/forward")
def forward(req: ForwardRequest) -> dict:
    """Run one generator forward pass on a raw tensor. Intended for
    debugging and cross-implementation parity checks."""
    try:
        weights = load_weights(req.weights_path)
    except WeightFormatError as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
    shape = tuple(req.tensor.shape)
    data = np.asarray(req.tensor.data, dtype=np.float32)
    if data.size != int(np.prod(shape)):
        raise HTTPException(status_code=400,
                            detail="tensor data does not match shape")
    try:
        out = generator_forward(data.reshape(shape), weights)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e)) from e
    return {"shape": list(out.shape),
            "data": [float(v) for v in out.ravel()]}
