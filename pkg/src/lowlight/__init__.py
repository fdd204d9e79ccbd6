"""Low-light UHR sequence enhancement: tiled generator inference with
Gaussian patch blending plus motion-adaptive temporal smoothing."""

__version__ = "0.1.0"
