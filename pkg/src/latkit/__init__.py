"""Nested lattice codes built from binary codes, with shaping and AWGN simulation."""

__version__ = "0.1.0"
