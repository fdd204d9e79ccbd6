"""Unpaired CycleGAN trainer producing LLGW weight files for the
low-light enhancement engine."""

__version__ = "0.1.0"
