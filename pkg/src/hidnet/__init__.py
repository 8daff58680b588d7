"""High-order graph diffusion networks: propagation, verification and experiments."""

__version__ = "0.1.0"
